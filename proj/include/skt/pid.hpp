#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "skt/common.hpp"
#include "skt/diagnostics.hpp"
#include "skt/fom.hpp"
#include "skt/pod.hpp"
#include "skt/rom.hpp"

namespace skt {

/// Domain-averaged density of every stored snapshot column.
inline std::vector<double> average_densities(const Mat& snaps, const SpatialGrid& grid) {
    const Vec w = trapezoid_weights(grid);
    const double measure = domain_measure(grid);
    std::vector<double> out(static_cast<std::size_t>(snaps.cols()));
    for (Eigen::Index j = 0; j < snaps.cols(); ++j) {
        out[static_cast<std::size_t>(j)] = w.dot(snaps.col(j)) / measure;
    }
    return out;
}

/// First interior snapshot index where both averaged densities settle:
/// smallest p with 0 < p < last such that |d_i(p) - d_i(p-1)| < tol for both
/// species. Returns -1 when no such index exists.
inline int find_transition(const std::vector<double>& dens1, const std::vector<double>& dens2,
                           double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("find_transition: tol must be positive");
    if (dens1.size() != dens2.size()) {
        throw std::invalid_argument("find_transition: density series differ in length");
    }
    const int m = static_cast<int>(dens1.size());
    for (int p = 1; p + 1 < m; ++p) {
        const auto i = static_cast<std::size_t>(p);
        if (std::abs(dens1[i] - dens1[i - 1]) < tol && std::abs(dens2[i] - dens2[i - 1]) < tol) {
            return p;
        }
    }
    return -1;
}

/// Express a reduced state of the old basis in the new one; for orthonormal
/// columns this is the least-squares fit of the lifted state.
inline Vec interface_transfer(const Mat& v_new, const Mat& v_old, const Vec& z_old) {
    if (v_new.rows() != v_old.rows()) {
        throw std::invalid_argument("interface_transfer: basis rows differ");
    }
    if (z_old.size() != v_old.cols()) {
        throw std::invalid_argument("interface_transfer: state does not match the old basis");
    }
    return v_new.transpose() * (v_old * z_old);
}

struct GpodResult {
    ReducedModel model;
    ReducedTrajectory traj;     // reduced states at every time step
    Mat reduced_states;         // reduced states at the stored snapshot times
    Mat lifted1, lifted2;       // lifted states at the stored snapshot times
    double err1 = std::numeric_limits<double>::quiet_NaN();
    double err2 = std::numeric_limits<double>::quiet_NaN();
    int k1 = 0, k2 = 0;
    bool valid = false;
    std::string failure;
};

/// Wall-clock split between building a reduced model and running it.
struct StageTimings {
    double offline_seconds = 0.0;
    double online_seconds = 0.0;
};

namespace detail {

class StageClock {
public:
    void start() { t0_ = std::chrono::steady_clock::now(); }
    double stop() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }

private:
    std::chrono::steady_clock::time_point t0_;
};

} // namespace detail

namespace detail {

inline long snapshot_step_index(double t, double t0, double dt) {
    return std::lround((t - t0) / dt);
}

} // namespace detail

/// Reduce a stored trajectory with one global basis per species trained on
/// `train`, re-integrate in reduced coordinates over the `eval` horizon, and
/// measure the averaged relative reconstruction error at the stored `eval`
/// snapshot times. Training on a prefix of the horizon turns this into a
/// prediction run: the reduced dynamics continue past the training data.
inline GpodResult run_gpod(const FomOperators& fom, const FomResult& train,
                           const FomResult& eval, double tol_ric,
                           double dt, const RsvdParams& rsvd_params = {},
                           StageTimings* timings = nullptr) {
    if (train.snap1.data.cols() < 2) {
        throw std::invalid_argument("run_gpod: need at least two stored snapshots");
    }
    if (train.snap1.times.front() != eval.snap1.times.front()) {
        throw std::invalid_argument("run_gpod: training and evaluation must share the start time");
    }
    GpodResult out;
    detail::StageClock clock;
    clock.start();
    const auto basis1 = build_basis(train.snap1.data, tol_ric, rsvd_params);
    const auto basis2 = build_basis(train.snap2.data, tol_ric, rsvd_params);
    out.k1 = basis1.k;
    out.k2 = basis2.k;
    out.model = assemble_rom(fom, basis1.basis, basis2.basis);
    if (timings) timings->offline_seconds = clock.stop();

    StateVector u0;
    u0.u1 = train.snap1.data.col(0);
    u0.u2 = train.snap2.data.col(0);
    u0.t = train.snap1.times.front();
    const double t_end = eval.snap1.times.back();

    const Vec z0 = project_state(out.model, u0);
    clock.start();
    out.traj = integrate_rom(out.model.ops, z0, {dt, t_end - u0.t}, u0.t);
    if (timings) timings->online_seconds = clock.stop();
    if (!out.traj.valid) {
        out.failure = out.traj.failure;
        return out;
    }

    const Eigen::Index m = eval.snap1.data.cols();
    Mat picked(z0.size(), m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const long idx = detail::snapshot_step_index(eval.snap1.times[static_cast<std::size_t>(j)],
                                                     u0.t, dt);
        if (idx < 0 || idx >= out.traj.states.cols()) {
            out.failure = "run_gpod: snapshot time outside the reduced trajectory";
            return out;
        }
        picked.col(j) = out.traj.states.col(idx);
    }
    out.reduced_states = picked;
    std::tie(out.lifted1, out.lifted2) = lift_trajectory(out.model, picked);

    const Vec w = trapezoid_weights(fom.grid);
    out.err1 = relative_l2_error(eval.snap1.data, out.lifted1, w);
    out.err2 = relative_l2_error(eval.snap2.data, out.lifted2, w);
    out.valid = true;
    return out;
}

inline GpodResult run_gpod(const FomOperators& fom, const FomResult& ref, double tol_ric,
                           double dt, const RsvdParams& rsvd_params = {},
                           StageTimings* timings = nullptr) {
    return run_gpod(fom, ref, ref, tol_ric, dt, rsvd_params, timings);
}

struct PpodResult {
    bool fallback = false;      // no transition: the global reduction was used
    GpodResult global;          // filled only in the fallback case
    int transition = -1;        // stored-snapshot index shared by both windows
    double t_transition = std::numeric_limits<double>::quiet_NaN();
    int k1_w1 = 0, k2_w1 = 0;   // modes per species, first window
    int k1_w2 = 0, k2_w2 = 0;   // modes per species, second window
    double interface_residual1 = 0.0;  // relative energy lost handing over
    double interface_residual2 = 0.0;
    ReducedModel model_w1, model_w2;
    Mat lifted1, lifted2;
    double err1 = std::numeric_limits<double>::quiet_NaN();
    double err2 = std::numeric_limits<double>::quiet_NaN();
    bool valid = false;
    std::string failure;
};

/// Split the trajectory at the density transition, reduce each window with
/// its own bases, integrate windows in sequence with a least-squares handover
/// at the interface, and measure errors over all stored snapshot times.
/// Training data drives the split and the bases; the second window continues
/// to the end of the evaluation horizon. Without a transition the global
/// reduction is used unchanged.
inline PpodResult run_ppod(const FomOperators& fom, const FomResult& train,
                           const FomResult& eval, double tol_ric,
                           double tol_pid, double dt, const RsvdParams& rsvd_params = {},
                           StageTimings* timings = nullptr) {
    if (train.snap1.data.cols() < 2) {
        throw std::invalid_argument("run_ppod: need at least two stored snapshots");
    }
    if (train.snap1.times.front() != eval.snap1.times.front()) {
        throw std::invalid_argument("run_ppod: training and evaluation must share the start time");
    }
    PpodResult out;
    detail::StageClock clock;
    clock.start();
    const auto dens1 = average_densities(train.snap1.data, fom.grid);
    const auto dens2 = average_densities(train.snap2.data, fom.grid);
    const int p = find_transition(dens1, dens2, tol_pid);
    if (p < 0) {
        out.fallback = true;
        out.global = run_gpod(fom, train, eval, tol_ric, dt, rsvd_params, timings);
        out.lifted1 = out.global.lifted1;
        out.lifted2 = out.global.lifted2;
        out.err1 = out.global.err1;
        out.err2 = out.global.err2;
        out.valid = out.global.valid;
        out.failure = out.global.failure;
        return out;
    }

    out.transition = p;
    out.t_transition = train.snap1.times[static_cast<std::size_t>(p)];
    const Eigen::Index m_train = train.snap1.data.cols();

    // Both windows include the interface column.
    const auto basis1_w1 = build_basis(train.snap1.data.leftCols(p + 1), tol_ric, rsvd_params);
    const auto basis2_w1 = build_basis(train.snap2.data.leftCols(p + 1), tol_ric, rsvd_params);
    const auto basis1_w2 = build_basis(train.snap1.data.rightCols(m_train - p), tol_ric, rsvd_params);
    const auto basis2_w2 = build_basis(train.snap2.data.rightCols(m_train - p), tol_ric, rsvd_params);
    out.k1_w1 = basis1_w1.k;
    out.k2_w1 = basis2_w1.k;
    out.k1_w2 = basis1_w2.k;
    out.k2_w2 = basis2_w2.k;
    out.model_w1 = assemble_rom(fom, basis1_w1.basis, basis2_w1.basis);
    out.model_w2 = assemble_rom(fom, basis1_w2.basis, basis2_w2.basis);
    if (timings) timings->offline_seconds = clock.stop();

    StateVector u0;
    u0.u1 = train.snap1.data.col(0);
    u0.u2 = train.snap2.data.col(0);
    u0.t = train.snap1.times.front();
    const double t_end = eval.snap1.times.back();

    const Vec z0 = project_state(out.model_w1, u0);
    clock.start();
    const auto traj1 = integrate_rom(out.model_w1.ops, z0, {dt, out.t_transition - u0.t}, u0.t);
    if (!traj1.valid) {
        if (timings) timings->online_seconds = clock.stop();
        out.failure = traj1.failure;
        return out;
    }

    // Hand the final window-1 state over to the window-2 bases.
    const Vec z1_end = traj1.states.col(traj1.states.cols() - 1);
    const Vec lift1_end = out.model_w1.v1 * z1_end.head(out.model_w1.ops.k1);
    const Vec lift2_end = out.model_w1.v2 * z1_end.tail(out.model_w1.ops.k2);
    Vec z2_0(out.model_w2.ops.k1 + out.model_w2.ops.k2);
    z2_0.head(out.model_w2.ops.k1) = out.model_w2.v1.transpose() * lift1_end;
    z2_0.tail(out.model_w2.ops.k2) = out.model_w2.v2.transpose() * lift2_end;
    auto rel_residual = [](const Vec& lifted, const Mat& v, const Vec& z) {
        const double denom = lifted.norm();
        return denom > 0.0 ? (lifted - v * z).norm() / denom : 0.0;
    };
    out.interface_residual1 = rel_residual(lift1_end, out.model_w2.v1, z2_0.head(out.model_w2.ops.k1));
    out.interface_residual2 = rel_residual(lift2_end, out.model_w2.v2, z2_0.tail(out.model_w2.ops.k2));

    const auto traj2 = integrate_rom(out.model_w2.ops, z2_0,
                                     {dt, t_end - out.t_transition}, out.t_transition);
    if (timings) timings->online_seconds = clock.stop();
    if (!traj2.valid) {
        out.failure = traj2.failure;
        return out;
    }

    // Snapshot times up to the interface come from window 1, later ones from
    // window 2; the interface itself belongs to window 1.
    const Eigen::Index m = eval.snap1.data.cols();
    Eigen::Index m1 = 0;
    while (m1 < m &&
           eval.snap1.times[static_cast<std::size_t>(m1)] <= out.t_transition + 0.5 * dt) {
        ++m1;
    }
    Mat picked1(out.model_w1.ops.k1 + out.model_w1.ops.k2, m1);
    for (Eigen::Index j = 0; j < m1; ++j) {
        const long idx = detail::snapshot_step_index(eval.snap1.times[static_cast<std::size_t>(j)],
                                                     u0.t, dt);
        if (idx < 0 || idx >= traj1.states.cols()) {
            out.failure = "run_ppod: snapshot time outside the first reduced window";
            return out;
        }
        picked1.col(j) = traj1.states.col(idx);
    }
    Mat picked2(out.model_w2.ops.k1 + out.model_w2.ops.k2, m - m1);
    for (Eigen::Index j = m1; j < m; ++j) {
        const long idx = detail::snapshot_step_index(eval.snap1.times[static_cast<std::size_t>(j)],
                                                     out.t_transition, dt);
        if (idx < 0 || idx >= traj2.states.cols()) {
            out.failure = "run_ppod: snapshot time outside the second reduced window";
            return out;
        }
        picked2.col(j - m1) = traj2.states.col(idx);
    }

    const auto [w1_lift1, w1_lift2] = lift_trajectory(out.model_w1, picked1);
    const auto [w2_lift1, w2_lift2] = lift_trajectory(out.model_w2, picked2);
    out.lifted1.resize(fom.size(), m);
    out.lifted2.resize(fom.size(), m);
    out.lifted1 << w1_lift1, w2_lift1;
    out.lifted2 << w1_lift2, w2_lift2;

    const Vec w = trapezoid_weights(fom.grid);
    out.err1 = relative_l2_error(eval.snap1.data, out.lifted1, w);
    out.err2 = relative_l2_error(eval.snap2.data, out.lifted2, w);
    out.valid = true;
    return out;
}

inline PpodResult run_ppod(const FomOperators& fom, const FomResult& ref, double tol_ric,
                           double tol_pid, double dt, const RsvdParams& rsvd_params = {},
                           StageTimings* timings = nullptr) {
    return run_ppod(fom, ref, ref, tol_ric, tol_pid, dt, rsvd_params, timings);
}

} // namespace skt
