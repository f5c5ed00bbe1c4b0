#pragma once

#include <Eigen/SparseLU>

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "skt/common.hpp"
#include "skt/diagnostics.hpp"
#include "skt/grid.hpp"
#include "skt/params.hpp"
#include "skt/snapshot.hpp"

namespace skt {

/// Semi-discrete state: one density vector per species plus simulation time.
struct StateVector {
    Vec u1;
    Vec u2;
    double t = 0.0;
};

/// Assembled operators of the semi-discrete system
///   du1/dt = lin1*u1 + quad11*(u1.*u1) + quad12*(u1.*u2)
///   du2/dt = lin2*u2 + quad22*(u2.*u2) + quad21*(u1.*u2)
struct FomOperators {
    SpMat lin1, lin2;
    SpMat quad11, quad12, quad21, quad22;
    SpatialGrid grid;
    SktParams params;

    Eigen::Index size() const { return lin1.rows(); }
};

struct TimeGrid {
    double dt = 1e-3;
    double t_end = 1.0;

    long num_steps() const {
        if (!(dt > 0.0)) throw std::invalid_argument("TimeGrid: dt must be positive");
        return static_cast<long>(std::ceil(t_end / dt - 1e-9));
    }
};

/// Stop once the relative step-to-step change of both species drops below
/// tol in the discrete L2 norm.
struct SteadyStateRule {
    double tol = 1e-6;
    bool enabled = true;
};

inline FomOperators assemble_fom(const SpatialGrid& grid, const SktParams& params) {
    params.validate();
    const SpMat a = build_laplacian(grid).matrix;
    const int n = grid.num_nodes();
    SpMat id(n, n);
    id.setIdentity();

    FomOperators ops;
    ops.lin1 = params.c1 * a + params.Gamma * params.r1 * id;
    ops.lin2 = params.c2 * a + params.Gamma * params.r2 * id;
    ops.quad11 = params.a1 * a - params.Gamma * params.gamma11 * id;
    ops.quad12 = params.b1 * a - params.Gamma * params.gamma12 * id;
    ops.quad21 = params.b2 * a - params.Gamma * params.gamma21 * id;
    ops.quad22 = params.a2 * a - params.Gamma * params.gamma22 * id;
    ops.grid = grid;
    ops.params = params;
    return ops;
}

namespace detail {

inline void check_state_size(const FomOperators& ops, const StateVector& u) {
    if (u.u1.size() != ops.size() || u.u2.size() != ops.size()) {
        throw std::invalid_argument("state size does not match operators");
    }
}

/// Assemble [[a11, a12], [a21, a22]] as one sparse matrix.
inline SpMat compose_blocks(const SpMat& a11, const SpMat& a12,
                            const SpMat& a21, const SpMat& a22) {
    const Eigen::Index n = a11.rows();
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(a11.nonZeros() + a12.nonZeros() +
                                           a21.nonZeros() + a22.nonZeros()));
    auto add = [&](const SpMat& m, Eigen::Index row_off, Eigen::Index col_off) {
        for (int k = 0; k < m.outerSize(); ++k) {
            for (SpMat::InnerIterator it(m, k); it; ++it) {
                trips.emplace_back(it.row() + row_off, it.col() + col_off, it.value());
            }
        }
    };
    add(a11, 0, 0);
    add(a12, 0, n);
    add(a21, n, 0);
    add(a22, n, n);
    SpMat out(2 * n, 2 * n);
    out.setFromTriplets(trips.begin(), trips.end());
    out.makeCompressed();
    return out;
}

} // namespace detail

/// Right-hand side F(u), stacked (species 1 first). Quadratic terms use
/// Hadamard products; nothing of size N^2 is formed.
inline Vec eval_rhs(const FomOperators& ops, const StateVector& u) {
    detail::check_state_size(ops, u);
    const Vec u1sq = u.u1.cwiseProduct(u.u1);
    const Vec u2sq = u.u2.cwiseProduct(u.u2);
    const Vec u12 = u.u1.cwiseProduct(u.u2);
    Vec f(2 * ops.size());
    f.head(ops.size()) = ops.lin1 * u.u1 + ops.quad11 * u1sq + ops.quad12 * u12;
    f.tail(ops.size()) = ops.lin2 * u.u2 + ops.quad22 * u2sq + ops.quad21 * u12;
    return f;
}

/// Jacobian of F at u, as a sparse 2N x 2N matrix. diag(w) scales columns,
/// so every block keeps the sparsity pattern of the Laplacian.
inline SpMat eval_jacobian(const FomOperators& ops, const StateVector& u) {
    detail::check_state_size(ops, u);
    const SpMat j11 = ops.lin1 + SpMat(2.0 * (ops.quad11 * u.u1.asDiagonal())) +
                      SpMat(ops.quad12 * u.u2.asDiagonal());
    const SpMat j12 = ops.quad12 * u.u1.asDiagonal();
    const SpMat j21 = ops.quad21 * u.u2.asDiagonal();
    const SpMat j22 = ops.lin2 + SpMat(2.0 * (ops.quad22 * u.u2.asDiagonal())) +
                      SpMat(ops.quad21 * u.u1.asDiagonal());
    return detail::compose_blocks(j11, j12, j21, j22);
}

/// One step of the linearly implicit scheme for quadratic vector fields:
/// solve (I - dt/2 * J(u^n)) du = dt * F(u^n), then u^{n+1} = u^n + du.
/// The sparsity pattern of the system matrix is fixed, so the symbolic
/// factorization is reused across steps.
class KahanStepper {
public:
    explicit KahanStepper(const FomOperators& ops) : ops_(&ops) {
        const Eigen::Index n2 = 2 * ops.size();
        identity_.resize(n2, n2);
        identity_.setIdentity();
    }

    StateVector step(const StateVector& u, double dt) {
        if (!(dt > 0.0)) throw std::invalid_argument("KahanStepper: dt must be positive");
        detail::check_state_size(*ops_, u);
        const Eigen::Index n = ops_->size();

        const Vec f = eval_rhs(*ops_, u);
        const SpMat jac = eval_jacobian(*ops_, u);
        SpMat system = identity_ - (0.5 * dt) * jac;
        system.makeCompressed();

        if (!analyzed_) {
            solver_.analyzePattern(system);
            analyzed_ = true;
        }
        solver_.factorize(system);
        if (solver_.info() != Eigen::Success) {
            throw std::runtime_error("KahanStepper: singular linear system at t = " + std::to_string(u.t));
        }
        const Vec du = solver_.solve(dt * f);
        if (solver_.info() != Eigen::Success) {
            throw std::runtime_error("KahanStepper: linear solve failed at t = " + std::to_string(u.t));
        }

        StateVector next;
        next.u1 = u.u1 + du.head(n);
        next.u2 = u.u2 + du.tail(n);
        next.t = u.t + dt;
        if (!next.u1.allFinite() || !next.u2.allFinite()) {
            throw std::runtime_error("KahanStepper: state diverged (non-finite) at t = " + std::to_string(next.t));
        }
        return next;
    }

private:
    const FomOperators* ops_;
    SpMat identity_;
    Eigen::SparseLU<SpMat> solver_;
    bool analyzed_ = false;
};

inline StateVector kahan_step(const FomOperators& ops, const StateVector& u, double dt) {
    KahanStepper stepper(ops);
    return stepper.step(u, dt);
}

/// Random multiplicative perturbation of the equilibrium:
/// u_i = u_i* (1 + amplitude * eta), eta iid uniform on [-1, 1].
/// Species 1 is drawn first, then species 2.
inline StateVector random_perturbed_initial(const SpatialGrid& grid, const SktParams& params,
                                            double amplitude, std::uint64_t seed) {
    if (!(amplitude >= 0.0)) throw std::invalid_argument("random_perturbed_initial: amplitude must be >= 0");
    const auto [eq1, eq2] = equilibrium(params);
    const int n = grid.num_nodes();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    StateVector u;
    u.u1.resize(n);
    u.u2.resize(n);
    for (int i = 0; i < n; ++i) u.u1(i) = eq1 * (1.0 + amplitude * unif(rng));
    for (int i = 0; i < n; ++i) u.u2(i) = eq2 * (1.0 + amplitude * unif(rng));
    u.t = 0.0;
    return u;
}

struct FomResult {
    SnapshotMatrix snap1;
    SnapshotMatrix snap2;
    DiagnosticsSeries diag;
    bool steady_reached = false;
    bool valid = true;          // false when the integration diverged
    std::string failure;
    double t_final = 0.0;
};

/// Integrate with the Kahan stepper until the steady-state rule fires for
/// both species or time.t_end is reached. Snapshots are stored every
/// store_every steps (the initial state and the final state always are);
/// diagnostics are recorded at every step.
inline FomResult integrate_fom(const FomOperators& ops, const StateVector& u0,
                               const TimeGrid& time, const SteadyStateRule& stop,
                               int store_every = 1) {
    if (store_every < 1) throw std::invalid_argument("integrate_fom: store_every must be >= 1");
    if (stop.enabled && !(stop.tol > 0.0)) {
        throw std::invalid_argument("integrate_fom: stopping tolerance must be positive");
    }
    detail::check_state_size(ops, u0);

    const Vec weights = trapezoid_weights(ops.grid);
    const double measure = domain_measure(ops.grid);
    bool have_weights = true;
    EntropyWeights ent_w;
    try {
        ent_w = EntropyWeights::for_params(ops.params);
    } catch (const std::domain_error&) {
        have_weights = false;
    }

    std::vector<Vec> cols1, cols2;
    std::vector<double> snap_times;
    FomResult res;

    auto record_diag = [&](const StateVector& u, double rc1, double rc2) {
        res.diag.times.push_back(u.t);
        if (have_weights) {
            auto [e, clamped] = entropy_clamped(u.u1, u.u2, ent_w, ops.grid);
            res.diag.entropy.push_back(e);
            res.diag.clamped_nodes += clamped;
        } else {
            res.diag.entropy.push_back(std::numeric_limits<double>::quiet_NaN());
        }
        res.diag.dens_u1.push_back(weights.dot(u.u1) / measure);
        res.diag.dens_u2.push_back(weights.dot(u.u2) / measure);
        res.diag.relchg_u1.push_back(rc1);
        res.diag.relchg_u2.push_back(rc2);
    };

    auto store_snapshot = [&](const StateVector& u) {
        cols1.push_back(u.u1);
        cols2.push_back(u.u2);
        snap_times.push_back(u.t);
    };

    KahanStepper stepper(ops);
    StateVector u = u0;
    record_diag(u, std::numeric_limits<double>::quiet_NaN(),
                std::numeric_limits<double>::quiet_NaN());
    store_snapshot(u);

    const long max_steps = time.num_steps();
    for (long n = 1; n <= max_steps; ++n) {
        StateVector next;
        try {
            next = stepper.step(u, time.dt);
        } catch (const std::runtime_error& e) {
            res.valid = false;
            res.failure = e.what();
            break;
        }
        next.t = u0.t + static_cast<double>(n) * time.dt;

        const double rc1 = l2_norm(Vec(next.u1 - u.u1), weights) / l2_norm(next.u1, weights);
        const double rc2 = l2_norm(Vec(next.u2 - u.u2), weights) / l2_norm(next.u2, weights);
        u = next;
        record_diag(u, rc1, rc2);
        if (n % store_every == 0) store_snapshot(u);

        if (stop.enabled && rc1 <= stop.tol && rc2 <= stop.tol) {
            res.steady_reached = true;
            break;
        }
    }
    if (!snap_times.empty() && snap_times.back() != u.t && res.valid) {
        store_snapshot(u);   // final state, off the stride
    }
    res.t_final = u.t;

    const Eigen::Index n_nodes = ops.size();
    auto pack = [&](std::vector<Vec>& cols, int component) {
        SnapshotMatrix s;
        s.component = component;
        s.times = snap_times;
        s.data.resize(n_nodes, static_cast<Eigen::Index>(cols.size()));
        for (std::size_t j = 0; j < cols.size(); ++j) s.data.col(static_cast<Eigen::Index>(j)) = cols[j];
        return s;
    };
    res.snap1 = pack(cols1, 1);
    res.snap2 = pack(cols2, 2);
    return res;
}

} // namespace skt
