#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "skt/pod.hpp"
#include "skt/rom.hpp"

namespace {

skt::SktParams cross_diffusion_params() {
    skt::SktParams p;
    p.a1 = 0.0001; p.a2 = 0.1;
    p.b1 = 6.5;    p.b2 = 0.3;
    p.c1 = 0.2;    p.c2 = 0.2;
    p.Gamma = 49.75;
    p.r1 = 1.2;    p.r2 = 1.0;
    p.gamma11 = 0.5;  p.gamma12 = 0.4;
    p.gamma21 = 0.38; p.gamma22 = 0.41;
    return p;
}

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) m(i, j) = gauss(rng);
    return m;
}

Eigen::MatrixXd random_orthonormal(int rows, int cols, std::uint64_t seed) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(rows, cols, seed));
    return qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
}

} // namespace

TEST_CASE("pairwise mode products on hand-checkable inputs", "[rom]") {
    Eigen::MatrixXd v1(2, 1), v2(2, 1);
    v1 << 1.0, 2.0;
    v2 << 3.0, 4.0;
    const Eigen::MatrixXd h = skt::pairwise_products(v1, v2);
    REQUIRE(h.rows() == 2);
    REQUIRE(h.cols() == 1);
    CHECK(h(0, 0) == 3.0);
    CHECK(h(1, 0) == 8.0);

    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2, 2);
    const Eigen::MatrixXd hid = skt::pairwise_products(id, id);
    Eigen::MatrixXd expect(2, 4);
    expect << 1, 0, 0, 0,
              0, 0, 0, 1;
    CHECK((hid - expect).cwiseAbs().maxCoeff() == 0.0);

    Eigen::MatrixXd tall(3, 1);
    tall << 1, 1, 1;
    CHECK_THROWS_AS(skt::pairwise_products(v1, tall), std::invalid_argument);
}

TEST_CASE("kronecker coefficient vector ordering", "[rom]") {
    Eigen::VectorXd a(2), b(3);
    a << 2.0, 5.0;
    b << 1.0, 10.0, 100.0;
    const Eigen::VectorXd k = skt::kron_vec(a, b);
    REQUIRE(k.size() == 6);
    Eigen::VectorXd expect(6);
    expect << 2, 20, 200, 5, 50, 500;
    CHECK((k - expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mode products turn kronecker coefficients into hadamard states", "[rom]") {
    const int n = 37;
    const Eigen::MatrixXd v1 = random_matrix(n, 3, 2);
    const Eigen::MatrixXd v2 = random_matrix(n, 4, 3);
    const Eigen::VectorXd z1 = random_matrix(3, 1, 4).col(0);
    const Eigen::VectorXd z2 = random_matrix(4, 1, 5).col(0);

    const Eigen::VectorXd via_tensor = skt::pairwise_products(v1, v2) * skt::kron_vec(z1, z2);
    const Eigen::VectorXd direct = (v1 * z1).cwiseProduct(v2 * z2);
    CHECK((via_tensor - direct).cwiseAbs().maxCoeff() < 1e-13 * direct.cwiseAbs().maxCoeff());
}

TEST_CASE("batched and entrywise operator reduction agree", "[rom]") {
    const auto grid = skt::SpatialGrid::line(-1.0, 1.0, 40);
    const auto ops = skt::assemble_fom(grid, cross_diffusion_params());
    const Eigen::MatrixXd va = random_orthonormal(40, 4, 11);
    const Eigen::MatrixXd vi = random_orthonormal(40, 3, 12);
    const Eigen::MatrixXd vj = random_orthonormal(40, 5, 13);

    const Eigen::MatrixXd batched = skt::reduce_quadratic(ops.quad12, va, vi, vj);
    const Eigen::MatrixXd entrywise = skt::reduce_quadratic_rowwise(ops.quad12, va, vi, vj);
    REQUIRE(batched.rows() == 4);
    REQUIRE(batched.cols() == 15);
    const double scale = entrywise.cwiseAbs().maxCoeff();
    CHECK((batched - entrywise).cwiseAbs().maxCoeff() < 1e-12 * scale);
}

TEST_CASE("reduced right-hand side equals project-evaluate-lift", "[rom]") {
    const auto grid = skt::SpatialGrid::line(-M_PI, M_PI, 48);
    const auto fom = skt::assemble_fom(grid, cross_diffusion_params());
    const Eigen::MatrixXd v1 = random_orthonormal(48, 5, 20);
    const Eigen::MatrixXd v2 = random_orthonormal(48, 3, 21);
    const auto model = skt::assemble_rom(fom, v1, v2);

    CHECK(model.ops.w11.cols() == 25);
    CHECK(model.ops.w12.cols() == 15);
    CHECK(model.ops.w21.cols() == 15);
    CHECK(model.ops.w22.cols() == 9);

    const Eigen::VectorXd z = random_matrix(8, 1, 22).col(0);
    const auto lifted = skt::lift_state(model, z, 0.0);
    const Eigen::VectorXd f_full = skt::eval_rhs(fom, lifted);

    Eigen::VectorXd f_projected(8);
    f_projected.head(5) = v1.transpose() * f_full.head(48);
    f_projected.tail(3) = v2.transpose() * f_full.tail(48);

    const Eigen::VectorXd f_reduced = skt::eval_reduced_rhs(model.ops, z);
    CHECK((f_reduced - f_projected).cwiseAbs().maxCoeff() <
          1e-12 * (1.0 + f_projected.cwiseAbs().maxCoeff()));
}

TEST_CASE("reduced jacobian agrees with central differences", "[rom]") {
    const auto grid = skt::SpatialGrid::line(-M_PI, M_PI, 30);
    const auto fom = skt::assemble_fom(grid, cross_diffusion_params());
    const Eigen::MatrixXd v1 = random_orthonormal(30, 4, 31);
    const Eigen::MatrixXd v2 = random_orthonormal(30, 4, 32);
    const auto model = skt::assemble_rom(fom, v1, v2);

    const Eigen::VectorXd z = random_matrix(8, 1, 33).col(0);
    const Eigen::MatrixXd jac = skt::eval_reduced_jacobian(model.ops, z);

    const double eps = 1e-6;
    Eigen::MatrixXd fd(8, 8);
    for (int j = 0; j < 8; ++j) {
        Eigen::VectorXd up = z, dn = z;
        up(j) += eps;
        dn(j) -= eps;
        fd.col(j) = (skt::eval_reduced_rhs(model.ops, up) -
                     skt::eval_reduced_rhs(model.ops, dn)) / (2.0 * eps);
    }
    CHECK((jac - fd).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("a projected equilibrium is a fixed point of the reduced step", "[rom]") {
    const auto grid = skt::SpatialGrid::line(0.0, 2.0, 25);
    const auto p = cross_diffusion_params();
    const auto fom = skt::assemble_fom(grid, p);
    const auto [eq1, eq2] = skt::equilibrium(p);

    // First mode spans the constants, so the equilibrium lies in the subspace.
    Eigen::MatrixXd raw1 = random_matrix(25, 3, 40);
    Eigen::MatrixXd raw2 = random_matrix(25, 2, 41);
    raw1.col(0).setOnes();
    raw2.col(0).setOnes();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr1(raw1), qr2(raw2);
    const Eigen::MatrixXd v1 = qr1.householderQ() * Eigen::MatrixXd::Identity(25, 3);
    const Eigen::MatrixXd v2 = qr2.householderQ() * Eigen::MatrixXd::Identity(25, 2);

    const auto model = skt::assemble_rom(fom, v1, v2);
    skt::StateVector star;
    star.u1 = Eigen::VectorXd::Constant(25, eq1);
    star.u2 = Eigen::VectorXd::Constant(25, eq2);
    const Eigen::VectorXd z = skt::project_state(model, star);

    const auto back = skt::lift_state(model, z, 0.0);
    REQUIRE((back.u1 - star.u1).cwiseAbs().maxCoeff() < 1e-12);

    CHECK(skt::eval_reduced_rhs(model.ops, z).cwiseAbs().maxCoeff() < 1e-11);
    const Eigen::VectorXd next = skt::kahan_reduced_step(model.ops, z, 1e-2);
    CHECK((next - z).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("a full-rank basis reproduces the full-order trajectory", "[rom]") {
    const auto grid = skt::SpatialGrid::line(-M_PI, M_PI, 16);
    const auto p = cross_diffusion_params();
    const auto fom = skt::assemble_fom(grid, p);
    const Eigen::MatrixXd v1 = random_orthonormal(16, 16, 50);
    const Eigen::MatrixXd v2 = random_orthonormal(16, 16, 51);
    const auto model = skt::assemble_rom(fom, v1, v2);

    auto u0 = skt::random_perturbed_initial(grid, p, 0.01, 52);
    Eigen::VectorXd z = skt::project_state(model, u0);

    skt::KahanStepper stepper(fom);
    skt::StateVector u = u0;
    const double dt = 1e-3;
    for (int n = 0; n < 20; ++n) {
        u = stepper.step(u, dt);
        z = skt::kahan_reduced_step(model.ops, z, dt);
    }
    const auto lifted = skt::lift_state(model, z, u.t);
    CHECK((lifted.u1 - u.u1).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((lifted.u2 - u.u2).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("reduced stepper converges at second order", "[rom]") {
    const auto grid = skt::SpatialGrid::line(-M_PI, M_PI, 60);
    const auto p = cross_diffusion_params();
    const auto fom = skt::assemble_fom(grid, p);

    // Basis from a short training run.
    const auto u0 = skt::random_perturbed_initial(grid, p, 0.01, 60);
    const auto train = skt::integrate_fom(fom, u0, {1e-3, 0.2}, {1e-6, false});
    REQUIRE(train.valid);
    const auto b1 = skt::build_basis(train.snap1.data, 1e-8);
    const auto b2 = skt::build_basis(train.snap2.data, 1e-8);
    const auto model = skt::assemble_rom(fom, b1.basis, b2.basis);
    const Eigen::VectorXd z0 = skt::project_state(model, u0);

    auto advance = [&](double dt) {
        Eigen::VectorXd z = z0;
        const long steps = std::lround(0.5 / dt);
        for (long i = 0; i < steps; ++i) z = skt::kahan_reduced_step(model.ops, z, dt);
        return z;
    };
    const Eigen::VectorXd ref = advance(1e-5);
    const std::vector<double> dts = {1e-2, 5e-3, 2.5e-3};
    std::vector<double> errs;
    for (double dt : dts) errs.push_back((advance(dt) - ref).norm());

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < dts.size(); ++i) {
        const double x = std::log(dts[i]), y = std::log(errs[i]);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    const double m = static_cast<double>(dts.size());
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    INFO("errors: " << errs[0] << ", " << errs[1] << ", " << errs[2]);
    CHECK(slope == Catch::Approx(2.0).margin(0.1));
}

TEST_CASE("reduced trajectories record every step of the fixed horizon", "[rom]") {
    const auto grid = skt::SpatialGrid::line(-M_PI, M_PI, 40);
    const auto p = cross_diffusion_params();
    const auto fom = skt::assemble_fom(grid, p);
    const Eigen::MatrixXd v1 = random_orthonormal(40, 3, 70);
    const Eigen::MatrixXd v2 = random_orthonormal(40, 3, 71);
    const auto model = skt::assemble_rom(fom, v1, v2);

    const auto u0 = skt::random_perturbed_initial(grid, p, 0.01, 72);
    const Eigen::VectorXd z0 = skt::project_state(model, u0);
    const auto traj = skt::integrate_rom(model.ops, z0, {1e-3, 5e-3});
    REQUIRE(traj.valid);
    REQUIRE(traj.states.cols() == 6);
    CHECK(traj.times.front() == 0.0);
    CHECK(traj.times.back() == Catch::Approx(5e-3));
    CHECK(traj.states.col(0) == z0);

    const auto [lift1, lift2] = skt::lift_trajectory(model, traj.states);
    CHECK(lift1.rows() == 40);
    CHECK(lift1.cols() == 6);
    CHECK((lift1.col(0) - v1 * z0.head(3)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("a singular reduced system marks the trajectory invalid", "[rom]") {
    // Scalar logistic dynamics: z' = z - z^2, singular implicit matrix when
    // 1 - dt/2 (1 - 2z) = 0, i.e. z = -9.5 at dt = 0.1.
    skt::ReducedOperators ops;
    ops.k1 = 1;
    ops.k2 = 1;
    ops.lin1 = Eigen::MatrixXd::Constant(1, 1, 1.0);
    ops.w11 = Eigen::MatrixXd::Constant(1, 1, -1.0);
    ops.w12 = Eigen::MatrixXd::Zero(1, 1);
    ops.lin2 = Eigen::MatrixXd::Zero(1, 1);
    ops.w21 = Eigen::MatrixXd::Zero(1, 1);
    ops.w22 = Eigen::MatrixXd::Zero(1, 1);

    Eigen::VectorXd z0(2);
    z0 << -9.5, 0.0;
    const auto traj = skt::integrate_rom(ops, z0, {0.1, 1.0});
    CHECK_FALSE(traj.valid);
    CHECK_FALSE(traj.failure.empty());
    CHECK(traj.states.cols() == 1);

    Eigen::VectorXd ok(2);
    ok << 0.5, 0.0;
    const Eigen::VectorXd next = skt::kahan_reduced_step(ops, ok, 0.1);
    CHECK(next(0) == Catch::Approx(0.525).margin(1e-15));
}

TEST_CASE("basis shape mismatches are rejected at assembly", "[rom]") {
    const auto grid = skt::SpatialGrid::line(0.0, 1.0, 10);
    const auto fom = skt::assemble_fom(grid, cross_diffusion_params());
    const Eigen::MatrixXd good = random_orthonormal(10, 2, 80);
    const Eigen::MatrixXd bad = random_orthonormal(9, 2, 81);
    CHECK_THROWS_AS(skt::assemble_rom(fom, bad, good), std::invalid_argument);
    CHECK_THROWS_AS(skt::assemble_rom(fom, good, Eigen::MatrixXd(10, 0)), std::invalid_argument);

    const auto model = skt::assemble_rom(fom, good, good);
    Eigen::VectorXd wrong(5);
    wrong.setZero();
    CHECK_THROWS_AS(skt::eval_reduced_rhs(model.ops, wrong), std::invalid_argument);
    CHECK_THROWS_AS(skt::lift_state(model, wrong, 0.0), std::invalid_argument);
}
