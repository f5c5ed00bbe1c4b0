#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "skt/common.hpp"
#include "skt/grid.hpp"
#include "skt/params.hpp"

namespace skt {

/// Per-time-step scalar diagnostics of a simulation. All columns share the
/// times axis. relchg_* holds the relative step-to-step change used by the
/// steady-state stopping rule; its first entry is NaN (no previous step).
struct DiagnosticsSeries {
    std::vector<double> times;
    std::vector<double> entropy;
    std::vector<double> dens_u1;
    std::vector<double> dens_u2;
    std::vector<double> relchg_u1;
    std::vector<double> relchg_u2;
    long clamped_nodes = 0;   // nodes floored during entropy evaluation

    std::size_t size() const { return times.size(); }
};

namespace detail {

inline double entropy_integrand(double u, double pi) {
    return pi * u * (std::log(u) - 1.0);
}

} // namespace detail

/// Entropy functional: trapezoid quadrature of
/// h(u) = pi1*u1*(log u1 - 1) + pi2*u2*(log u2 - 1) over the grid.
/// Both fields must be strictly positive at every node.
inline double entropy(const Vec& u1, const Vec& u2, const EntropyWeights& w,
                      const SpatialGrid& grid) {
    const Vec q = trapezoid_weights(grid);
    if (u1.size() != q.size() || u2.size() != q.size()) {
        throw std::invalid_argument("entropy: field size does not match grid");
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        if (!(u1(i) > 0.0) || !(u2(i) > 0.0)) {
            throw std::domain_error("entropy: non-positive density at node " + std::to_string(i));
        }
        total += q(i) * (detail::entropy_integrand(u1(i), w.pi1) +
                         detail::entropy_integrand(u2(i), w.pi2));
    }
    return total;
}

/// Entropy with a positivity floor of 1e-12, for reconstructed states that
/// may dip below zero. Returns the value and the number of floored nodes.
inline std::pair<double, long> entropy_clamped(const Vec& u1, const Vec& u2,
                                               const EntropyWeights& w,
                                               const SpatialGrid& grid) {
    constexpr double floor = 1e-12;
    const Vec q = trapezoid_weights(grid);
    if (u1.size() != q.size() || u2.size() != q.size()) {
        throw std::invalid_argument("entropy_clamped: field size does not match grid");
    }
    double total = 0.0;
    long clamped = 0;
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        double v1 = u1(i), v2 = u2(i);
        if (!(v1 >= floor)) { v1 = floor; ++clamped; }
        if (!(v2 >= floor)) { v2 = floor; ++clamped; }
        total += q(i) * (detail::entropy_integrand(v1, w.pi1) +
                         detail::entropy_integrand(v2, w.pi2));
    }
    return {total, clamped};
}

/// Time-averaged relative L2 error between two trajectories stored
/// column-per-time: (1/Nt) * sum_n ||ref^n - approx^n|| / ||ref^n||.
inline double relative_l2_error(const Mat& ref, const Mat& approx, const Vec& weights) {
    if (ref.rows() != approx.rows() || ref.cols() != approx.cols()) {
        throw std::invalid_argument("relative_l2_error: trajectory shapes differ");
    }
    if (ref.rows() != weights.size()) {
        throw std::invalid_argument("relative_l2_error: weights do not match field size");
    }
    double acc = 0.0;
    for (Eigen::Index n = 0; n < ref.cols(); ++n) {
        const double denom = l2_norm(ref.col(n), weights);
        if (denom == 0.0) {
            throw std::domain_error("relative_l2_error: zero reference norm at column " + std::to_string(n));
        }
        acc += l2_norm(Vec(ref.col(n) - approx.col(n)), weights) / denom;
    }
    return acc / static_cast<double>(ref.cols());
}

struct EntropyDecayCheck {
    bool monotone = true;
    double max_violation = 0.0;  // largest positive increment found
    std::size_t worst_index = 0; // step n where entropy[n+1] - entropy[n] peaks
};

/// Verifies entropy[n+1] <= entropy[n] + slack for all n.
/// Default slack is 1e-10 * |entropy[0]|.
inline EntropyDecayCheck check_entropy_decay(const std::vector<double>& entropy_series,
                                             double slack = -1.0) {
    EntropyDecayCheck out;
    if (entropy_series.empty()) {
        throw std::invalid_argument("check_entropy_decay: empty series");
    }
    if (slack < 0.0) slack = 1e-10 * std::abs(entropy_series.front());
    for (std::size_t n = 0; n + 1 < entropy_series.size(); ++n) {
        const double inc = entropy_series[n + 1] - entropy_series[n];
        if (inc > out.max_violation) {
            out.max_violation = inc;
            out.worst_index = n;
        }
        if (inc > slack) out.monotone = false;
    }
    return out;
}

} // namespace skt
