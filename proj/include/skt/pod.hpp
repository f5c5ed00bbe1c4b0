#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <random>
#include <stdexcept>

#include "skt/common.hpp"

namespace skt {

/// Knobs for the randomized SVD and the basis builder.
struct RsvdParams {
    int oversample = 10;        // sketch columns beyond the requested rank
    int power_iters = 2;        // subspace iterations, re-orthonormalized
    std::uint64_t seed = 0;     // seed of the Gaussian sketch
    int initial_rank = 16;      // first rank guess of the adaptive builder
    int dense_cutoff = 64;      // below this min-dimension, use a dense SVD
};

struct RsvdFactors {
    Mat u;      // left singular vectors, one column per mode
    Vec sigma;  // singular values, nonincreasing
    Mat v;      // right singular vectors
};

namespace detail {

inline Mat thin_q(const Mat& y) {
    const Eigen::Index cols = std::min(y.rows(), y.cols());
    Eigen::HouseholderQR<Mat> qr(y);
    return qr.householderQ() * Mat::Identity(y.rows(), cols);
}

/// Smallest k whose captured energy leaves a deficit below tol, measured
/// against an externally supplied total; 0 when the spectrum is too short.
inline int select_modes_with_total(const Vec& sigma, double tol, double total) {
    double cum = 0.0;
    for (Eigen::Index k = 0; k < sigma.size(); ++k) {
        cum += sigma(k) * sigma(k);
        if (1.0 - cum / total < tol) return static_cast<int>(k) + 1;
    }
    return 0;
}

} // namespace detail

/// Randomized SVD: Gaussian sketch, QR re-orthonormalized power iterations,
/// then an exact SVD of the small projected matrix.
inline RsvdFactors rsvd(const Mat& x, int rank, const RsvdParams& params = {}) {
    if (x.rows() == 0 || x.cols() == 0) throw std::invalid_argument("rsvd: empty matrix");
    if (rank < 1) throw std::invalid_argument("rsvd: rank must be >= 1");
    if (params.oversample < 0 || params.power_iters < 0) {
        throw std::invalid_argument("rsvd: oversample and power_iters must be >= 0");
    }
    const Eigen::Index mindim = std::min(x.rows(), x.cols());
    const Eigen::Index r = std::min<Eigen::Index>(rank, mindim);
    const Eigen::Index l = std::min<Eigen::Index>(r + params.oversample, mindim);

    std::mt19937_64 rng(params.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Mat omega(x.cols(), l);
    for (Eigen::Index j = 0; j < l; ++j)
        for (Eigen::Index i = 0; i < x.cols(); ++i) omega(i, j) = gauss(rng);

    Mat q = detail::thin_q(x * omega);
    for (int it = 0; it < params.power_iters; ++it) {
        q = detail::thin_q(x.transpose() * q);
        q = detail::thin_q(x * q);
    }

    const Mat b = q.transpose() * x;
    Eigen::BDCSVD<Mat> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
    RsvdFactors f;
    f.u = q * svd.matrixU().leftCols(r);
    f.sigma = svd.singularValues().head(r);
    f.v = svd.matrixV().leftCols(r);
    return f;
}

/// Smallest k such that 1 - sum_{n<=k} sigma_n^2 / sum_n sigma_n^2 < tol.
/// A spectrum of zeros keeps a single mode.
inline int select_modes(const Vec& sigma, double tol) {
    if (sigma.size() == 0) throw std::invalid_argument("select_modes: empty spectrum");
    if (!(tol > 0.0)) throw std::invalid_argument("select_modes: tol must be positive");
    const double total = sigma.squaredNorm();
    if (total == 0.0) return 1;
    const int k = detail::select_modes_with_total(sigma, tol, total);
    return k > 0 ? k : static_cast<int>(sigma.size());
}

struct PodBasis {
    Mat basis;               // orthonormal columns, N x k
    Vec sigma;               // computed singular values (at least k of them)
    int k = 0;
    bool degenerate = false; // all-zero snapshots; a single arbitrary mode is kept
};

/// Orthonormal basis capturing all but a tol-fraction of the snapshot energy.
/// Small problems use a dense SVD; otherwise the rank of the randomized SVD
/// is doubled until the energy criterion is met inside the computed spectrum.
/// The energy total is the exact squared Frobenius norm of the snapshots.
inline PodBasis build_basis(const Mat& snapshots, double tol, const RsvdParams& params = {}) {
    if (snapshots.rows() == 0 || snapshots.cols() == 0) {
        throw std::invalid_argument("build_basis: empty snapshot matrix");
    }
    if (!(tol > 0.0)) throw std::invalid_argument("build_basis: tol must be positive");

    const Eigen::Index mindim = std::min(snapshots.rows(), snapshots.cols());
    const double fro2 = snapshots.squaredNorm();

    PodBasis out;
    if (fro2 == 0.0) {
        out.basis = Mat::Zero(snapshots.rows(), 1);
        out.basis(0, 0) = 1.0;
        out.sigma = Vec::Zero(1);
        out.k = 1;
        out.degenerate = true;
        return out;
    }

    if (mindim <= params.dense_cutoff) {
        Eigen::BDCSVD<Mat> svd(snapshots, Eigen::ComputeThinU);
        out.sigma = svd.singularValues();
        out.k = select_modes(out.sigma, tol);
        out.basis = svd.matrixU().leftCols(out.k);
        return out;
    }

    Eigen::Index r = std::clamp<Eigen::Index>(params.initial_rank, 1, mindim);
    for (;;) {
        RsvdFactors f = rsvd(snapshots, static_cast<int>(r), params);
        const int k = detail::select_modes_with_total(f.sigma, tol, fro2);
        if ((k > 0 && (k < static_cast<int>(r) || r == mindim)) || r == mindim) {
            out.k = k > 0 ? k : static_cast<int>(mindim);
            out.sigma = f.sigma;
            out.basis = f.u.leftCols(out.k);
            return out;
        }
        r = std::min<Eigen::Index>(2 * r, mindim);
    }
}

} // namespace skt
