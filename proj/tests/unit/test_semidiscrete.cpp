#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "sktlab/errors.hpp"
#include "sktlab/reconstruct.hpp"
#include "sktlab/semidiscrete.hpp"

using namespace sktlab;
using std::numbers::pi;

namespace {

ModelParams params(double d, double a) {
    ModelParams p;
    p.d1 = p.d2 = d;
    p.a12 = p.a21 = a;
    return p;
}

double max_error_decoupled(int M, int k, double T, double fixed_step) {
    const double d = 0.8;
    IntegratorConfig cfg;
    cfg.snapshot_count = 2;
    cfg.fixed_step = fixed_step;
    const OdeState s0{exact_decoupled_mode(1.0, 1.0, k, d, M, 0.0), GridVector(static_cast<std::size_t>(M), 1.0), 0.0};
    const OdeTrajectory traj = integrate(s0, params(d, 0.0), T, cfg);
    return lp_norm(traj.u.back() - exact_decoupled_mode(1.0, 1.0, k, d, M, T), kInfNorm);
}

}  // namespace

TEST(Rhs, ConstantsAreEquilibria) {
    const OdeRhs r = rhs(GridVector(6, 1.3), GridVector(6, 0.4), params(1.0, 0.7));
    for (double x : r.du) EXPECT_EQ(x, 0.0);
    for (double x : r.dv) EXPECT_EQ(x, 0.0);
}

TEST(Rhs, DecoupledIsHeat) {
    std::mt19937_64 gen(20);
    const GridVector u = oracle::random_vector(gen, 9);
    const GridVector v = oracle::random_vector(gen, 9);
    const OdeRhs r = rhs(u, v, params(1.7, 0.0));
    const GridVector heat = 1.7 * PeriodicLaplacian(9).apply(u);
    for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(r.du[i], heat[i], 1e-12);
}

TEST(Rhs, MatchesDenseAssembly) {
    std::mt19937_64 gen(21);
    ModelParams p;
    p.d1 = 0.9;
    p.d2 = 1.3;
    p.a12 = 0.4;
    p.a21 = 0.25;
    for (int M : {3, 8, 31}) {
        const GridVector u = oracle::random_vector(gen, M, 0.0, 2.0);
        const GridVector v = oracle::random_vector(gen, M, 0.0, 2.0);
        const OdeRhs r = rhs(u, v, p);
        const Eigen::MatrixXd A = oracle::dense_laplacian(M);
        const Eigen::VectorXd eu = oracle::to_eigen(u), ev = oracle::to_eigen(v);
        const Eigen::VectorXd du = A * (p.d1 * eu + p.a12 * eu.cwiseProduct(ev));
        const Eigen::VectorXd dv = A * (p.d2 * ev + p.a21 * eu.cwiseProduct(ev));
        for (int i = 0; i < M; ++i) {
            EXPECT_NEAR(r.du[static_cast<std::size_t>(i)], du(i), 1e-12 * M * M);
            EXPECT_NEAR(r.dv[static_cast<std::size_t>(i)], dv(i), 1e-12 * M * M);
        }
    }
}

TEST(Integrate, ConstantStaysConstant) {
    const OdeTrajectory t = integrate({GridVector(8, 1.5), GridVector(8, 0.5), 0.0}, params(1.0, 0.3), 0.1);
    for (std::size_t s = 0; s < t.size(); ++s) {
        for (double x : t.u[s]) EXPECT_DOUBLE_EQ(x, 1.5);
        for (double x : t.v[s]) EXPECT_DOUBLE_EQ(x, 0.5);
    }
}

TEST(Integrate, DecoupledEigenmode) {
    EXPECT_LE(max_error_decoupled(16, 1, 0.1, 0.0), 1e-8);
}

TEST(Integrate, FourthOrderInTime) {
    const int M = 16;
    const double h = 1.0 / (4.0 * M * M);
    const double T = 16 * h;
    const double e1 = max_error_decoupled(M, 2, T, h);
    const double e2 = max_error_decoupled(M, 2, T, h / 2);
    EXPECT_GT(e1, 1e-13);
    EXPECT_NEAR(std::log2(e1 / e2), 4.0, 0.3);
}

TEST(Integrate, MassConservation) {
    const auto u0 = interpolate_nodal([](double x) { return 1.0 + 0.3 * std::cos(2 * pi * x); }, 24);
    const auto v0 = interpolate_nodal([](double x) { return 1.0 + 0.3 * std::sin(4 * pi * x); }, 24);
    const OdeTrajectory t = integrate({u0, v0, 0.0}, params(1.0, 0.5), 0.1);
    for (std::size_t s = 0; s < t.size(); ++s) {
        EXPECT_NEAR(mean_of(t.u[s]), mean_of(u0), 1e-12);
        EXPECT_NEAR(mean_of(t.v[s]), mean_of(v0), 1e-12);
    }
    EXPECT_EQ(t.negative_steps, 0);
}

TEST(Integrate, NodalOrderAgainstContinuousHeat) {
    const double d = 1.0, T = 0.02;
    std::vector<double> lx, ly;
    for (int M : {8, 16, 32, 64}) {
        const auto f = [](double x) { return 1.0 + 0.2 * std::cos(2 * pi * x); };
        const OdeTrajectory t = integrate({interpolate_nodal(f, M), interpolate_nodal(f, M), 0.0}, params(d, 0.0), T);
        const double decay = std::exp(-d * 4.0 * pi * pi * T);
        const GridVector exact =
            interpolate_nodal([decay](double x) { return 1.0 + 0.2 * decay * std::cos(2 * pi * x); }, M);
        lx.push_back(std::log(M));
        ly.push_back(std::log(lp_norm(t.u.back() - exact, kInfNorm)));
    }
    const double slope = (ly.back() - ly.front()) / (lx.back() - lx.front());
    EXPECT_NEAR(slope, -2.0, 0.2);
}

TEST(Integrate, RejectPolicyThrows) {
    IntegratorConfig cfg;
    cfg.negativity = NegativityPolicy::reject;
    const OdeState s0{GridVector{1.0, -0.5, 1.0, 1.0}, GridVector(4, 1.0), 0.0};
    EXPECT_THROW((void)integrate(s0, params(1.0, 0.0), 0.01, cfg), NegativeDensity);
    cfg.negativity = NegativityPolicy::warn;
    const OdeTrajectory t = integrate(s0, params(1.0, 0.0), 0.001, cfg);
    EXPECT_GT(t.negative_steps, 0);
}

TEST(ExactMode, Limits) {
    const GridVector t0 = exact_decoupled_mode(2.0, 0.5, 1, 1.0, 8, 0.0);
    for (int j = 1; j <= 8; ++j)
        EXPECT_NEAR(t0[static_cast<std::size_t>(j - 1)], 2.0 + 0.5 * std::cos(2 * pi * j / 8.0), 1e-15);
    for (double x : exact_decoupled_mode(2.0, 0.5, 0, 1.0, 8, 3.0)) EXPECT_DOUBLE_EQ(x, 2.5);
    for (double x : exact_decoupled_mode(2.0, 0.5, 3, 1.0, 8, 10.0)) EXPECT_NEAR(x, 2.0, 1e-15);
}

TEST(Schedule, Uniform) {
    const auto s = uniform_schedule(0.1, 5);
    ASSERT_EQ(s.size(), 5u);
    EXPECT_EQ(s.front(), 0.0);
    EXPECT_EQ(s.back(), 0.1);
    EXPECT_THROW((void)uniform_schedule(0.1, 1), InvalidArgument);
}
