#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "skt/common.hpp"

namespace skt {

/// Uniform vertex-centered grid on an interval or a rectangle with
/// zero-flux boundaries. Nodes are placed at x_j = x_min + j*dx for
/// j = 0..nx-1, so the last node sits one mesh size short of x_max;
/// the mirror rows of the difference operator account for the boundary.
///
/// In 2D the flattened node index is ix*ny + iy (y fastest), matching
/// the Kronecker-sum form of the Laplacian below.
struct SpatialGrid {
    int dim = 1;
    double x_min = 0.0, x_max = 1.0;
    double y_min = 0.0, y_max = 0.0;
    int nx = 0, ny = 0;
    double dx = 0.0, dy = 0.0;
    std::vector<double> xs;   // nx axis coordinates
    std::vector<double> ys;   // ny axis coordinates (empty in 1D)

    static SpatialGrid line(double a, double b, int nx) {
        if (nx < 2) throw std::invalid_argument("SpatialGrid: nx must be >= 2");
        if (!(b > a)) throw std::invalid_argument("SpatialGrid: empty interval");
        SpatialGrid g;
        g.dim = 1;
        g.x_min = a;
        g.x_max = b;
        g.nx = nx;
        g.dx = (b - a) / nx;
        g.xs.resize(nx);
        for (int j = 0; j < nx; ++j) g.xs[j] = a + j * g.dx;
        return g;
    }

    static SpatialGrid rectangle(double ax, double bx, int nx,
                                 double ay, double by, int ny) {
        if (nx < 2 || ny < 2) throw std::invalid_argument("SpatialGrid: nx, ny must be >= 2");
        if (!(bx > ax) || !(by > ay)) throw std::invalid_argument("SpatialGrid: empty rectangle");
        SpatialGrid g;
        g.dim = 2;
        g.x_min = ax;
        g.x_max = bx;
        g.y_min = ay;
        g.y_max = by;
        g.nx = nx;
        g.ny = ny;
        g.dx = (bx - ax) / nx;
        g.dy = (by - ay) / ny;
        g.xs.resize(nx);
        g.ys.resize(ny);
        for (int j = 0; j < nx; ++j) g.xs[j] = ax + j * g.dx;
        for (int j = 0; j < ny; ++j) g.ys[j] = ay + j * g.dy;
        return g;
    }

    int num_nodes() const { return dim == 1 ? nx : nx * ny; }

    int node_index(int ix, int iy) const { return ix * ny + iy; }

    double node_x(int idx) const { return dim == 1 ? xs[idx] : xs[idx / ny]; }
    double node_y(int idx) const { return dim == 1 ? 0.0 : ys[idx % ny]; }
};

/// Second-difference matrix with mirror boundary rows: diagonal -2,
/// off-diagonals 1, except the first row (-2, 2) and the last row (2, -2).
/// Every row sums to zero, so constants lie in the kernel.
inline SpMat build_bn(int n) {
    if (n < 2) throw std::invalid_argument("build_bn: n must be >= 2");
    SpMat b(n, n);
    std::vector<Triplet> trips;
    trips.reserve(3 * static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        trips.emplace_back(i, i, -2.0);
        if (i == 0) {
            trips.emplace_back(0, 1, 2.0);
        } else if (i == n - 1) {
            trips.emplace_back(n - 1, n - 2, 2.0);
        } else {
            trips.emplace_back(i, i - 1, 1.0);
            trips.emplace_back(i, i + 1, 1.0);
        }
    }
    b.setFromTriplets(trips.begin(), trips.end());
    b.makeCompressed();
    return b;
}

/// Discrete Laplacian with zero-flux boundaries on a uniform grid.
struct LaplacianOperator {
    SpMat matrix;
    SpatialGrid grid;
};

namespace detail {

inline SpMat sparse_identity(int n) {
    SpMat id(n, n);
    id.setIdentity();
    return id;
}

inline SpMat kron(const SpMat& a, const SpMat& b) {
    SpMat out(a.rows() * b.rows(), a.cols() * b.cols());
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(a.nonZeros()) * b.nonZeros());
    for (int ka = 0; ka < a.outerSize(); ++ka) {
        for (SpMat::InnerIterator ia(a, ka); ia; ++ia) {
            for (int kb = 0; kb < b.outerSize(); ++kb) {
                for (SpMat::InnerIterator ib(b, kb); ib; ++ib) {
                    trips.emplace_back(ia.row() * b.rows() + ib.row(),
                                       ia.col() * b.cols() + ib.col(),
                                       ia.value() * ib.value());
                }
            }
        }
    }
    out.setFromTriplets(trips.begin(), trips.end());
    out.makeCompressed();
    return out;
}

} // namespace detail

/// 1D: A = B_nx / dx^2.  2D: A = (B_nx (x) I_ny)/dx^2 + (I_nx (x) B_ny)/dy^2,
/// acting on vectors flattened with y fastest.
inline LaplacianOperator build_laplacian(const SpatialGrid& grid) {
    LaplacianOperator op;
    op.grid = grid;
    if (grid.dim == 1) {
        op.matrix = build_bn(grid.nx) / (grid.dx * grid.dx);
    } else {
        const SpMat bx = build_bn(grid.nx);
        const SpMat by = build_bn(grid.ny);
        const SpMat ix = detail::sparse_identity(grid.nx);
        const SpMat iy = detail::sparse_identity(grid.ny);
        SpMat a = detail::kron(bx, iy) / (grid.dx * grid.dx);
        a += detail::kron(ix, by) / (grid.dy * grid.dy);
        a.makeCompressed();
        op.matrix = std::move(a);
    }
    return op;
}

/// Trapezoid quadrature weights over the grid nodes, one per flattened node.
/// In 2D the weights are the tensor product of the per-axis weights.
inline Vec trapezoid_weights(const SpatialGrid& grid) {
    auto axis = [](int n, double h) {
        Vec w = Vec::Constant(n, h);
        w(0) = 0.5 * h;
        w(n - 1) = 0.5 * h;
        return w;
    };
    if (grid.dim == 1) return axis(grid.nx, grid.dx);
    const Vec wx = axis(grid.nx, grid.dx);
    const Vec wy = axis(grid.ny, grid.dy);
    Vec w(grid.nx * grid.ny);
    for (int ix = 0; ix < grid.nx; ++ix) {
        for (int iy = 0; iy < grid.ny; ++iy) {
            w(ix * grid.ny + iy) = wx(ix) * wy(iy);
        }
    }
    return w;
}

/// Measure of the quadrature domain (the span of the nodes), i.e. the sum of
/// the trapezoid weights.
inline double domain_measure(const SpatialGrid& grid) {
    if (grid.dim == 1) return (grid.nx - 1) * grid.dx;
    return (grid.nx - 1) * grid.dx * (grid.ny - 1) * grid.dy;
}

/// Discrete L2 norm ||u|| = sqrt(sum_j w_j u_j^2) with trapezoid weights.
inline double l2_norm(const Vec& u, const Vec& weights) {
    return std::sqrt(u.array().square().matrix().dot(weights));
}

} // namespace skt
