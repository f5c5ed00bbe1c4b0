#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "skt/grid.hpp"

using namespace skt;

namespace {

// Independent 9-point reference: apply the second-difference stencil in each
// direction with mirrored ghost nodes (ghost value = value one node in from
// the boundary).
Vec stencil_apply_2d(const SpatialGrid& g, const Vec& v) {
    auto at = [&](int ix, int iy) {
        if (ix < 0) ix = 1;
        if (ix > g.nx - 1) ix = g.nx - 2;
        if (iy < 0) iy = 1;
        if (iy > g.ny - 1) iy = g.ny - 2;
        return v(ix * g.ny + iy);
    };
    Vec out(g.nx * g.ny);
    for (int ix = 0; ix < g.nx; ++ix) {
        for (int iy = 0; iy < g.ny; ++iy) {
            const double xpart =
                (at(ix - 1, iy) - 2.0 * at(ix, iy) + at(ix + 1, iy)) / (g.dx * g.dx);
            const double ypart =
                (at(ix, iy - 1) - 2.0 * at(ix, iy) + at(ix, iy + 1)) / (g.dy * g.dy);
            out(ix * g.ny + iy) = xpart + ypart;
        }
    }
    return out;
}

} // namespace

TEST_CASE("build_bn matches the difference stencil with mirror rows", "[grid]") {
    SECTION("n=3") {
        Mat b = Mat(build_bn(3));
        Mat expected(3, 3);
        expected << -2, 2, 0,
                     1, -2, 1,
                     0, 2, -2;
        REQUIRE(b.isApprox(expected, 0.0));
    }
    SECTION("n=2 has boundary rows only") {
        Mat b = Mat(build_bn(2));
        Mat expected(2, 2);
        expected << -2, 2,
                     2, -2;
        REQUIRE(b.isApprox(expected, 0.0));
    }
    SECTION("row sums are zero") {
        for (int n : {2, 3, 5, 17, 64}) {
            Mat b = Mat(build_bn(n));
            REQUIRE((b.rowwise().sum()).cwiseAbs().maxCoeff() == 0.0);
        }
    }
    SECTION("n < 2 rejected") {
        REQUIRE_THROWS_AS(build_bn(1), std::invalid_argument);
        REQUIRE_THROWS_AS(build_bn(0), std::invalid_argument);
    }
}

TEST_CASE("grid construction invariants", "[grid]") {
    auto g = SpatialGrid::line(-M_PI, M_PI, 200);
    REQUIRE(g.dx == Catch::Approx(2.0 * M_PI / 200).epsilon(1e-15));
    REQUIRE(g.num_nodes() == 200);
    for (int j = 1; j < g.nx; ++j) {
        REQUIRE(g.xs[j] - g.xs[j - 1] == Catch::Approx(g.dx).epsilon(1e-12));
    }
    REQUIRE(g.xs.front() == -M_PI);
    REQUIRE(g.xs.back() == Catch::Approx(M_PI - g.dx).epsilon(1e-12));

    auto g2 = SpatialGrid::rectangle(0.0, std::sqrt(2.0) * M_PI, 5, 0.0, 2.0 * M_PI, 7);
    REQUIRE(g2.num_nodes() == 35);
    REQUIRE(g2.dy == Catch::Approx(2.0 * M_PI / 7).epsilon(1e-15));
    REQUIRE(g2.node_index(2, 3) == 2 * 7 + 3);
    REQUIRE(g2.node_x(2 * 7 + 3) == Catch::Approx(g2.xs[2]));
    REQUIRE(g2.node_y(2 * 7 + 3) == Catch::Approx(g2.ys[3]));

    REQUIRE_THROWS_AS(SpatialGrid::line(0.0, 1.0, 1), std::invalid_argument);
    REQUIRE_THROWS_AS(SpatialGrid::line(1.0, 0.0, 8), std::invalid_argument);
}

TEST_CASE("1D Laplacian scaling and kernel", "[grid]") {
    auto g = SpatialGrid::line(-M_PI, M_PI, 200);
    auto lap = build_laplacian(g);
    REQUIRE(lap.matrix.rows() == 200);
    REQUIRE(lap.matrix.cols() == 200);

    const double scale = 2.0 / (g.dx * g.dx);
    double max_diag = 0.0;
    for (int i = 0; i < 200; ++i) max_diag = std::max(max_diag, std::abs(lap.matrix.coeff(i, i)));
    REQUIRE(max_diag == Catch::Approx(scale).epsilon(1e-14));

    Vec ones = Vec::Ones(200);
    REQUIRE((lap.matrix * ones).cwiseAbs().maxCoeff() <= 1e-14 * scale);
}

TEST_CASE("2D Laplacian annihilates constants", "[grid]") {
    auto g = SpatialGrid::rectangle(0.0, 2.0, 6, -1.0, 1.0, 9);
    auto lap = build_laplacian(g);
    Vec c = Vec::Constant(g.num_nodes(), 3.25);
    const double scale = 2.0 / (g.dx * g.dx) + 2.0 / (g.dy * g.dy);
    REQUIRE((lap.matrix * c).cwiseAbs().maxCoeff() <= 1e-14 * scale * 3.25);
}

TEST_CASE("2D Laplacian equals the mirrored-ghost stencil", "[grid]") {
    SECTION("x-coordinate field on a 3x3 grid") {
        auto g = SpatialGrid::rectangle(-M_PI, M_PI, 3, -M_PI, M_PI, 3);
        auto lap = build_laplacian(g);
        Vec v(g.num_nodes());
        for (int i = 0; i < g.num_nodes(); ++i) v(i) = g.node_x(i);
        Vec got = lap.matrix * v;
        Vec expected = stencil_apply_2d(g, v);
        REQUIRE((got - expected).cwiseAbs().maxCoeff() <= 1e-13 * expected.cwiseAbs().maxCoeff() + 1e-13);
        // interior column has zero second difference in both directions
        REQUIRE(std::abs(got(g.node_index(1, 1))) <= 1e-12);
    }
    SECTION("random fields on small grids") {
        std::mt19937_64 rng(1234);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        for (int nx : {2, 4, 7, 10}) {
            for (int ny : {2, 5, 10}) {
                auto g = SpatialGrid::rectangle(0.0, 1.3, nx, 0.0, 0.7, ny);
                auto lap = build_laplacian(g);
                Vec v(g.num_nodes());
                for (int i = 0; i < g.num_nodes(); ++i) v(i) = unif(rng);
                Vec got = lap.matrix * v;
                Vec expected = stencil_apply_2d(g, v);
                const double scale = expected.cwiseAbs().maxCoeff();
                REQUIRE((got - expected).cwiseAbs().maxCoeff() <= 1e-13 * (scale + 1.0));
            }
        }
    }
}

TEST_CASE("2D Laplacian respects the Kronecker-sum identity", "[grid]") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    auto g = SpatialGrid::rectangle(0.0, 2.0, 6, 0.0, 3.0, 8);
    auto lap = build_laplacian(g);
    Mat bx = Mat(build_bn(g.nx)) / (g.dx * g.dx);
    Mat by = Mat(build_bn(g.ny)) / (g.dy * g.dy);

    Vec p(g.nx), q(g.ny);
    for (int i = 0; i < g.nx; ++i) p(i) = unif(rng);
    for (int i = 0; i < g.ny; ++i) q(i) = unif(rng);

    Vec v(g.num_nodes());
    for (int ix = 0; ix < g.nx; ++ix)
        for (int iy = 0; iy < g.ny; ++iy) v(g.node_index(ix, iy)) = p(ix) * q(iy);

    Vec bp = bx * p, bq = by * q;
    Vec expected(g.num_nodes());
    for (int ix = 0; ix < g.nx; ++ix)
        for (int iy = 0; iy < g.ny; ++iy)
            expected(g.node_index(ix, iy)) = bp(ix) * q(iy) + p(ix) * bq(iy);

    REQUIRE((lap.matrix * v - expected).cwiseAbs().maxCoeff() <=
            1e-13 * (expected.cwiseAbs().maxCoeff() + 1.0));
}

TEST_CASE("trapezoid weights integrate constants to the node span", "[grid]") {
    auto g1 = SpatialGrid::line(-M_PI, M_PI, 50);
    Vec w1 = trapezoid_weights(g1);
    REQUIRE(w1.sum() == Catch::Approx(domain_measure(g1)).epsilon(1e-14));
    REQUIRE(domain_measure(g1) == Catch::Approx(49 * g1.dx).epsilon(1e-14));

    auto g2 = SpatialGrid::rectangle(0.0, 1.0, 4, 0.0, 2.0, 6);
    Vec w2 = trapezoid_weights(g2);
    REQUIRE(w2.sum() == Catch::Approx(domain_measure(g2)).epsilon(1e-14));

    Vec u = Vec::Constant(g2.num_nodes(), 2.0);
    REQUIRE(l2_norm(u, w2) == Catch::Approx(2.0 * std::sqrt(domain_measure(g2))).epsilon(1e-14));
}
