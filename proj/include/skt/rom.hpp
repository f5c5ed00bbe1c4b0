#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

#include "skt/common.hpp"
#include "skt/fom.hpp"

namespace skt {

/// All columnwise Hadamard products of two mode sets: column m*kj + n is
/// vi(:,m) .* vj(:,n). The first factor indexes the outer blocks.
inline Mat pairwise_products(const Mat& vi, const Mat& vj) {
    if (vi.rows() != vj.rows()) throw std::invalid_argument("pairwise_products: row mismatch");
    const Eigen::Index ki = vi.cols(), kj = vj.cols();
    Mat h(vi.rows(), ki * kj);
    for (Eigen::Index m = 0; m < ki; ++m) {
        h.middleCols(m * kj, kj) = vj.array().colwise() * vi.col(m).array();
    }
    return h;
}

/// Kronecker product of two coefficient vectors, (a kron b)(m*kb + n) = a(m) b(n).
inline Vec kron_vec(const Vec& a, const Vec& b) {
    Vec out(a.size() * b.size());
    for (Eigen::Index m = 0; m < a.size(); ++m) out.segment(m * b.size(), b.size()) = a(m) * b;
    return out;
}

namespace detail {

inline void check_reduction_shapes(const SpMat& q, const Mat& va, const Mat& vi, const Mat& vj) {
    if (q.rows() != q.cols()) throw std::invalid_argument("reduce_quadratic: operator not square");
    if (va.rows() != q.rows() || vi.rows() != q.rows() || vj.rows() != q.rows()) {
        throw std::invalid_argument("reduce_quadratic: basis rows do not match the operator");
    }
}

} // namespace detail

/// Projected quadratic operator va' * Q * H(vi, vj), assembled one outer
/// block at a time so only an N x kj slab of H ever exists.
inline Mat reduce_quadratic(const SpMat& q, const Mat& va, const Mat& vi, const Mat& vj) {
    detail::check_reduction_shapes(q, va, vi, vj);
    const Eigen::Index ki = vi.cols(), kj = vj.cols();
    Mat w(va.cols(), ki * kj);
    for (Eigen::Index m = 0; m < ki; ++m) {
        const Mat slab = vj.array().colwise() * vi.col(m).array();
        w.middleCols(m * kj, kj) = va.transpose() * (q * slab);
    }
    return w;
}

/// Same result as reduce_quadratic, computed entry by entry with scalar
/// loops. Kept as the unbatched baseline for construction-cost comparisons.
inline Mat reduce_quadratic_rowwise(const SpMat& q, const Mat& va, const Mat& vi, const Mat& vj) {
    detail::check_reduction_shapes(q, va, vi, vj);
    const Eigen::Index n = q.rows();
    const Eigen::Index ka = va.cols(), ki = vi.cols(), kj = vj.cols();
    Mat w(ka, ki * kj);
    Vec h(n), qh(n);
    for (Eigen::Index m = 0; m < ki; ++m) {
        for (Eigen::Index nn = 0; nn < kj; ++nn) {
            for (Eigen::Index i = 0; i < n; ++i) h(i) = vi(i, m) * vj(i, nn);
            qh.setZero();
            for (int outer = 0; outer < q.outerSize(); ++outer) {
                for (SpMat::InnerIterator it(q, outer); it; ++it) {
                    qh(it.row()) += it.value() * h(it.col());
                }
            }
            for (Eigen::Index p = 0; p < ka; ++p) {
                double acc = 0.0;
                for (Eigen::Index i = 0; i < n; ++i) acc += va(i, p) * qh(i);
                w(p, m * kj + nn) = acc;
            }
        }
    }
    return w;
}

/// Reduced operators; holds nothing of full-order size, so evaluation cost
/// depends only on the mode counts.
struct ReducedOperators {
    Mat lin1, lin2;             // k1 x k1, k2 x k2
    Mat w11;                    // k1 x k1*k1, acts on z1 kron z1
    Mat w12;                    // k1 x k1*k2, acts on z1 kron z2
    Mat w21;                    // k2 x k2*k1, acts on z2 kron z1
    Mat w22;                    // k2 x k2*k2, acts on z2 kron z2
    int k1 = 0, k2 = 0;
};

struct ReducedModel {
    ReducedOperators ops;
    Mat v1, v2;                 // N x k1, N x k2
};

inline ReducedModel assemble_rom(const FomOperators& fom, const Mat& v1, const Mat& v2) {
    if (v1.rows() != fom.size() || v2.rows() != fom.size()) {
        throw std::invalid_argument("assemble_rom: basis rows do not match the operators");
    }
    if (v1.cols() < 1 || v2.cols() < 1) {
        throw std::invalid_argument("assemble_rom: bases need at least one mode");
    }
    ReducedModel m;
    m.v1 = v1;
    m.v2 = v2;
    m.ops.k1 = static_cast<int>(v1.cols());
    m.ops.k2 = static_cast<int>(v2.cols());
    m.ops.lin1 = v1.transpose() * (fom.lin1 * v1);
    m.ops.lin2 = v2.transpose() * (fom.lin2 * v2);
    m.ops.w11 = reduce_quadratic(fom.quad11, v1, v1, v1);
    m.ops.w12 = reduce_quadratic(fom.quad12, v1, v1, v2);
    m.ops.w21 = reduce_quadratic(fom.quad21, v2, v2, v1);
    m.ops.w22 = reduce_quadratic(fom.quad22, v2, v2, v2);
    return m;
}

namespace detail {

inline void check_reduced_state(const ReducedOperators& ops, const Vec& z) {
    if (z.size() != ops.k1 + ops.k2) {
        throw std::invalid_argument("reduced state size does not match the operators");
    }
}

/// d/dx of W (x kron y): column m is the m-th kj-block of W applied to y.
inline Mat kron_derivative_left(const Mat& w, const Vec& y) {
    const Eigen::Index kj = y.size();
    const Eigen::Index ki = w.cols() / kj;
    Mat d(w.rows(), ki);
    for (Eigen::Index m = 0; m < ki; ++m) d.col(m) = w.middleCols(m * kj, kj) * y;
    return d;
}

/// d/dy of W (x kron y): the x-weighted sum of the kj-blocks of W.
inline Mat kron_derivative_right(const Mat& w, const Vec& x) {
    const Eigen::Index ki = x.size();
    const Eigen::Index kj = w.cols() / ki;
    Mat d = Mat::Zero(w.rows(), kj);
    for (Eigen::Index m = 0; m < ki; ++m) d += x(m) * w.middleCols(m * kj, kj);
    return d;
}

} // namespace detail

inline Vec eval_reduced_rhs(const ReducedOperators& ops, const Vec& z) {
    detail::check_reduced_state(ops, z);
    const Vec z1 = z.head(ops.k1);
    const Vec z2 = z.tail(ops.k2);
    Vec f(ops.k1 + ops.k2);
    f.head(ops.k1) = ops.lin1 * z1 + ops.w11 * kron_vec(z1, z1) + ops.w12 * kron_vec(z1, z2);
    f.tail(ops.k2) = ops.lin2 * z2 + ops.w22 * kron_vec(z2, z2) + ops.w21 * kron_vec(z2, z1);
    return f;
}

inline Mat eval_reduced_jacobian(const ReducedOperators& ops, const Vec& z) {
    detail::check_reduced_state(ops, z);
    const Vec z1 = z.head(ops.k1);
    const Vec z2 = z.tail(ops.k2);
    Mat j(ops.k1 + ops.k2, ops.k1 + ops.k2);
    j.topLeftCorner(ops.k1, ops.k1) = ops.lin1 +
        detail::kron_derivative_left(ops.w11, z1) + detail::kron_derivative_right(ops.w11, z1) +
        detail::kron_derivative_left(ops.w12, z2);
    j.topRightCorner(ops.k1, ops.k2) = detail::kron_derivative_right(ops.w12, z1);
    j.bottomLeftCorner(ops.k2, ops.k1) = detail::kron_derivative_right(ops.w21, z2);
    j.bottomRightCorner(ops.k2, ops.k2) = ops.lin2 +
        detail::kron_derivative_left(ops.w22, z2) + detail::kron_derivative_right(ops.w22, z2) +
        detail::kron_derivative_left(ops.w21, z1);
    return j;
}

/// One linearly implicit step in reduced coordinates; dense solve of size k1+k2.
inline Vec kahan_reduced_step(const ReducedOperators& ops, const Vec& z, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("kahan_reduced_step: dt must be positive");
    const Vec f = eval_reduced_rhs(ops, z);
    const Mat j = eval_reduced_jacobian(ops, z);
    const Eigen::Index k = z.size();
    const Mat system = Mat::Identity(k, k) - (0.5 * dt) * j;
    Eigen::FullPivLU<Mat> lu(system);
    if (!lu.isInvertible()) {
        throw std::runtime_error("kahan_reduced_step: singular reduced system");
    }
    const Vec next = z + lu.solve(dt * f);
    if (!next.allFinite()) {
        throw std::runtime_error("kahan_reduced_step: reduced state diverged (non-finite)");
    }
    return next;
}

struct ReducedTrajectory {
    Mat states;                 // (k1 + k2) x (steps + 1), one column per time
    std::vector<double> times;
    bool valid = true;
    std::string failure;
};

/// Integrate the reduced system over a fixed horizon, storing every step.
/// No full-order quantity is touched on the way.
inline ReducedTrajectory integrate_rom(const ReducedOperators& ops, const Vec& z0,
                                       const TimeGrid& time, double t0 = 0.0) {
    detail::check_reduced_state(ops, z0);
    const long steps = time.num_steps();
    ReducedTrajectory traj;
    traj.states.resize(z0.size(), steps + 1);
    traj.times.resize(static_cast<std::size_t>(steps) + 1);
    traj.states.col(0) = z0;
    traj.times[0] = t0;
    Vec z = z0;
    for (long n = 1; n <= steps; ++n) {
        try {
            z = kahan_reduced_step(ops, z, time.dt);
        } catch (const std::runtime_error& e) {
            traj.valid = false;
            traj.failure = e.what();
            traj.states.conservativeResize(Eigen::NoChange, n);
            traj.times.resize(static_cast<std::size_t>(n));
            return traj;
        }
        traj.states.col(n) = z;
        traj.times[static_cast<std::size_t>(n)] = t0 + static_cast<double>(n) * time.dt;
    }
    return traj;
}

inline Vec project_state(const ReducedModel& model, const StateVector& u) {
    Vec z(model.ops.k1 + model.ops.k2);
    z.head(model.ops.k1) = model.v1.transpose() * u.u1;
    z.tail(model.ops.k2) = model.v2.transpose() * u.u2;
    return z;
}

inline StateVector lift_state(const ReducedModel& model, const Vec& z, double t) {
    detail::check_reduced_state(model.ops, z);
    StateVector u;
    u.u1 = model.v1 * z.head(model.ops.k1);
    u.u2 = model.v2 * z.tail(model.ops.k2);
    u.t = t;
    return u;
}

/// Lift a reduced trajectory back to full order, one matrix per species.
inline std::pair<Mat, Mat> lift_trajectory(const ReducedModel& model, const Mat& states) {
    if (states.rows() != model.ops.k1 + model.ops.k2) {
        throw std::invalid_argument("lift_trajectory: state rows do not match the model");
    }
    return {model.v1 * states.topRows(model.ops.k1),
            model.v2 * states.bottomRows(model.ops.k2)};
}

} // namespace skt
