#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "sktlab/errors.hpp"
#include "sktlab/grid_ops.hpp"

using namespace sktlab;

TEST(Laplacian, KillsConstants) {
    const PeriodicLaplacian lap(4);
    const GridVector out = lap.apply(GridVector(4, 3.5));
    for (double x : out) EXPECT_EQ(x, 0.0);
}

TEST(Laplacian, UnitVectorRow) {
    const PeriodicLaplacian lap(4);
    const GridVector out = lap.apply(GridVector::unit(4, 0));
    const GridVector expected{-32.0, 16.0, 0.0, 16.0};
    EXPECT_EQ(out, expected);
}

TEST(Laplacian, AlternatingMode) {
    const PeriodicLaplacian lap(4);
    const GridVector u{1, -1, 1, -1};
    const GridVector out = lap.apply(u);
    const Eigen::VectorXd brute = oracle::dense_laplacian(4) * oracle::to_eigen(u);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_DOUBLE_EQ(out[i], (i % 2 == 0 ? -64.0 : 64.0));
        EXPECT_DOUBLE_EQ(out[i], brute(static_cast<Eigen::Index>(i)));
    }
}

TEST(Laplacian, MatchesDenseMatrix) {
    std::mt19937_64 gen(1);
    for (int M : {3, 5, 8, 17, 64}) {
        const PeriodicLaplacian lap(M);
        const GridVector u = oracle::random_vector(gen, M);
        const GridVector out = lap.apply(u);
        const Eigen::VectorXd brute = oracle::dense_laplacian(M) * oracle::to_eigen(u);
        for (int i = 0; i < M; ++i) EXPECT_NEAR(out[static_cast<std::size_t>(i)], brute(i), 1e-10 * M * M);
    }
}

TEST(Laplacian, SmallSpectra) {
    const PeriodicLaplacian l3(3);
    EXPECT_NEAR(l3.eigenvalues()[0], 0.0, 1e-12);
    EXPECT_NEAR(l3.eigenvalues()[1], 27.0, 1e-12);
    EXPECT_NEAR(l3.eigenvalues()[2], 27.0, 1e-12);
    const PeriodicLaplacian l4(4);
    const double expected[] = {0, 32, 64, 32};
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(l4.eigenvalues()[static_cast<std::size_t>(k)], expected[k], 1e-12);
}

TEST(Laplacian, SpectrumMatchesDenseEigensolve) {
    for (int M = 3; M <= 64; ++M) {
        const PeriodicLaplacian lap(M);
        std::vector<double> ours(lap.eigenvalues().begin(), lap.eigenvalues().end());
        std::sort(ours.begin(), ours.end());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-oracle::dense_laplacian(M));
        const Eigen::VectorXd ev = es.eigenvalues();
        for (int k = 0; k < M; ++k) EXPECT_NEAR(ours[static_cast<std::size_t>(k)], ev(k), 1e-10 * 4.0 * M * M) << M;
        EXPECT_EQ(lap.eigenvalues()[0], 0.0);
        for (const auto& mode : lap.eigen_system())
            EXPECT_DOUBLE_EQ(mode.lambda, laplacian_eigenvalue(M, mode.k));
    }
}

TEST(Poisson, ZeroAndEigenmode) {
    const PeriodicLaplacian lap(4);
    for (double x : lap.solve_poisson(GridVector(4, 0.0))) EXPECT_EQ(x, 0.0);
    const GridVector w{1, -1, 1, -1};
    const GridVector phi = lap.solve_poisson(w);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(phi[i], -w[i] / 64.0, 1e-15);
}

TEST(Poisson, RoundTripAgainstDenseSolve) {
    std::mt19937_64 gen(2);
    for (int M : {3, 7, 16, 33}) {
        const PeriodicLaplacian lap(M);
        const GridVector w = tilde(oracle::random_vector(gen, M));
        const GridVector phi = lap.solve_poisson(w);
        EXPECT_NEAR(mean_of(phi), 0.0, 1e-14);
        const GridVector back = lap.apply(phi);
        const Eigen::MatrixXd A = oracle::dense_laplacian(M);
        const Eigen::VectorXd ref =
            A.completeOrthogonalDecomposition().pseudoInverse() * oracle::to_eigen(w);
        for (int i = 0; i < M; ++i) {
            EXPECT_NEAR(back[static_cast<std::size_t>(i)], w[static_cast<std::size_t>(i)], 1e-12);
            EXPECT_NEAR(phi[static_cast<std::size_t>(i)], ref(i), 1e-12);
        }
    }
}

TEST(Poisson, RejectsNonZeroMean) {
    const PeriodicLaplacian lap(5);
    EXPECT_THROW((void)lap.solve_poisson(GridVector(5, 1.0)), NonZeroMean);
}

TEST(Mean, TildeExamples) {
    const GridVector u{1, 2, 3};
    EXPECT_DOUBLE_EQ(mean_of(u), 2.0);
    const GridVector t = tilde(u);
    EXPECT_DOUBLE_EQ(t[0], -1.0);
    EXPECT_DOUBLE_EQ(t[1], 0.0);
    EXPECT_DOUBLE_EQ(t[2], 1.0);
    for (double x : tilde(GridVector(6, 4.25))) EXPECT_EQ(x, 0.0);
}

TEST(Mean, TildeReconstructs) {
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 100; ++trial) {
        const GridVector u = oracle::random_vector(gen, 3 + trial % 40, -5.0, 5.0);
        const GridVector t = tilde(u);
        const double m = mean_of(u);
        for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(t[i] + m, u[i], 1e-15 * 8);
    }
}

TEST(Norms, LpExamples) {
    for (double p : {1.0, 2.0, 3.5, kInfNorm}) EXPECT_DOUBLE_EQ(lp_norm(GridVector(7, 1.0), p), 1.0);
    EXPECT_DOUBLE_EQ(lp_norm(GridVector{1, 0, 0, 0}, 2.0), 0.5);
}

TEST(Norms, CauchySchwarz) {
    std::mt19937_64 gen(4);
    for (int trial = 0; trial < 1000; ++trial) {
        const int M = 3 + trial % 50;
        const GridVector u = oracle::random_vector(gen, M);
        const GridVector v = oracle::random_vector(gen, M);
        EXPECT_LE(std::abs(inner(u, v)), lp_norm(u, 2.0) * lp_norm(v, 2.0) * (1 + 1e-14));
    }
}

TEST(NegNorm, Examples) {
    const PeriodicLaplacian l4(4);
    EXPECT_NEAR(l4.neg_sobolev_norm(GridVector(4, -2.5)), 2.5, 1e-15);
    EXPECT_NEAR(l4.neg_sobolev_norm(GridVector{1, -1, 1, -1}), 1.0 / 8.0, 1e-15);
}

TEST(NegNorm, MatchesDenseAndBoundedByL2) {
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 200; ++trial) {
        const int M = 3 + trial % 60;
        const PeriodicLaplacian lap(M);
        const GridVector u = oracle::random_vector(gen, M);
        EXPECT_NEAR(lap.neg_sobolev_norm_sq(u), oracle::dense_neg_norm_sq(u), 1e-11);
        EXPECT_LE(lap.neg_sobolev_norm(u), lp_norm(u, 2.0) * (1 + 1e-14));
    }
}

TEST(MassMatrix, Examples) {
    const GridVector c = apply_mass_matrix(GridVector(5, 2.0));
    for (double x : c) EXPECT_NEAR(x, 2.0, 1e-15);
    const GridVector u{1, -1, 1, -1};
    const GridVector out = apply_mass_matrix(u);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(out[i], u[i] / 3.0, 1e-15);
}

TEST(MassMatrix, LaplacianIdentity) {
    std::mt19937_64 gen(6);
    for (int M : {3, 4, 9, 32, 100}) {
        const PeriodicLaplacian lap(M);
        const GridVector u = oracle::random_vector(gen, M);
        const GridVector lhs = 6.0 * apply_mass_matrix(u) - 6.0 * u;
        const GridVector rhs = (1.0 / (static_cast<double>(M) * M)) * lap.apply(u);
        for (int i = 0; i < M; ++i) EXPECT_NEAR(lhs[static_cast<std::size_t>(i)], rhs[static_cast<std::size_t>(i)], 1e-12);
    }
}

TEST(Quadrature, TrapezoidAndSchedule) {
    const std::vector<double> t{0.0, 0.5, 1.0};
    const std::vector<double> g{1.0, 2.0, 3.0};
    EXPECT_DOUBLE_EQ(trapezoid(t, g), 2.0);
    const auto c = cumulative_trapezoid(t, g);
    EXPECT_DOUBLE_EQ(c[1], 0.75);
    EXPECT_DOUBLE_EQ(c[2], 2.0);
    EXPECT_THROW(check_schedule(std::vector<double>{0.0, 0.2, 0.1}), InvalidArgument);
    EXPECT_THROW(check_schedule(std::vector<double>{0.0, 0.1, 0.1}), InvalidArgument);
    EXPECT_NO_THROW(check_schedule(std::vector<double>{0.0, 0.1, 0.1}, true));
}

TEST(Sum, CompensatedSumIsAccurate) {
    std::vector<double> v{1e16, 1.0, -1e16, 1.0};
    EXPECT_EQ(compensated_sum(v), 2.0);
}

TEST(Dimensions, MismatchThrows) {
    EXPECT_THROW((void)inner(GridVector(3), GridVector(4)), DimensionMismatch);
    const PeriodicLaplacian lap(4);
    EXPECT_THROW((void)lap.apply(GridVector(5)), DimensionMismatch);
}
