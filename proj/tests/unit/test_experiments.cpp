#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sktlab/errors.hpp"
#include "sktlab/experiments.hpp"

using namespace sktlab;

namespace {

StudyConfig small_gap_config() {
    StudyConfig c = default_config(StudyKind::gap_vs_n);
    c.M_grid = {4};
    c.N_grid = {20, 80};
    c.replicas = 6;
    c.T = 0.02;
    c.snapshot_count = 9;
    c.threads = 1;
    return c;
}

double extra(const StudyRow& row, const std::string& key) {
    for (const auto& [k, v] : row.extra)
        if (k == key) return v;
    ADD_FAILURE() << "missing diagnostic " << key;
    return NAN;
}

}  // namespace

TEST(Fit, ExactPowerLaw) {
    const std::vector<double> x{1, 2, 4, 8};
    std::vector<double> y;
    for (double v : x) y.push_back(3.0 * std::pow(v, -2.0));
    const LogLogFit fit = fit_loglog(x, y);
    EXPECT_NEAR(fit.slope, -2.0, 1e-12);
    EXPECT_NEAR(fit.intercept, std::log(3.0), 1e-12);
    EXPECT_NEAR(fit.slope_err, 0.0, 1e-12);
    EXPECT_TRUE(std::isnan(fit_loglog({1, 2}, {1, 0}).slope));
}

TEST(Fit, StandardErrorPropagation) {
    const std::vector<double> x{1, std::exp(1.0)};
    const std::vector<double> y{1, 1};
    const LogLogFit fit = fit_loglog(x, y, {0.1, 0.1});
    // two points one log-unit apart: slope error is sqrt(σ1² + σ2²)
    EXPECT_NEAR(fit.slope_err, std::sqrt(0.02), 1e-12);
}

TEST(Stats, MeanStat) {
    const MeanStat s = mean_stat({1, 2, 3, 4});
    EXPECT_DOUBLE_EQ(s.mean, 2.5);
    EXPECT_NEAR(s.stddev, std::sqrt(5.0 / 3.0), 1e-15);
    EXPECT_NEAR(s.stderr_, std::sqrt(5.0 / 3.0) / 2.0, 1e-15);
}

TEST(Threads, ParallelForFillsEverySlot) {
    std::vector<int> out(1000, 0);
    parallel_for(out.size(), 4, [&](std::size_t i) { out[i] = static_cast<int>(i) * 2; });
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], static_cast<int>(i) * 2);
    EXPECT_THROW(parallel_for(10, 3,
                              [](std::size_t i) {
                                  if (i == 7) throw InvalidArgument("boom");
                              }),
                 InvalidArgument);
}

TEST(Threads, EnvironmentOverride) {
    ::setenv("SKTLAB_THREADS", "3", 1);
    EXPECT_EQ(resolve_threads(8), 3);
    ::unsetenv("SKTLAB_THREADS");
    EXPECT_EQ(resolve_threads(5), 5);
    EXPECT_GE(resolve_threads(0), 1);
}

TEST(Config, ParseAndValidate) {
    const StudyConfig c = parse_config(R"({"study": "rough", "N_grid": [10, 20], "seed": 7, "a12": 0.25})");
    EXPECT_EQ(c.kind, StudyKind::rough);
    EXPECT_EQ(c.N_grid, (std::vector<std::int64_t>{10, 20}));
    EXPECT_EQ(c.seed, 7u);
    EXPECT_DOUBLE_EQ(c.params.a12, 0.25);
    EXPECT_EQ(c.replicas, default_config(StudyKind::rough).replicas);
    EXPECT_THROW((void)parse_config("{"), ConfigError);
    EXPECT_THROW((void)parse_config(R"({"study": "nope"})"), ConfigError);
    EXPECT_THROW((void)parse_config(R"({"study": "qv", "bogus": 1})"), ConfigError);
    EXPECT_THROW((void)parse_config(R"({"study": "qv", "M_grid": [2]})"), ConfigError);
    EXPECT_THROW((void)parse_config(R"({"study": "qv", "T": "soon"})"), ConfigError);
    EXPECT_THROW((void)parse_config(R"({"M_grid": [4]})"), ConfigError);
    EXPECT_THROW((void)load_config("/nonexistent/config.json"), IoError);
}

TEST(Output, EmptyResultIsHeaderOnly) {
    StudyResult r;
    r.study = "gap-vs-n";
    EXPECT_EQ(to_csv(r), "study,M,N,R,T,seed,mean_sq_gap,stderr,slope,slope_err,runtime_s,extra\n");
}

TEST(Output, JsonRoundTripIsByteIdentical) {
    StudyResult r = run_gap_vs_N(small_gap_config());
    r.slope_err = NAN;
    r.rows.front().extra.emplace_back("odd", 0.1 + 0.2);
    const std::string text = to_json(r);
    EXPECT_EQ(to_json(result_from_json(text)), text);
    EXPECT_NE(text.find("null"), std::string::npos);
}

TEST(Output, EmitWritesFilesAndReportsIoErrors) {
    const auto dir = std::filesystem::temp_directory_path() / "sktlab_emit_test";
    std::filesystem::remove_all(dir);
    StudyResult r;
    r.study = "qv";
    const std::string path = emit_results(r, dir.string(), OutputFormat::json, 1.5, 2);
    EXPECT_TRUE(std::filesystem::exists(path));
    EXPECT_TRUE(std::filesystem::exists(dir / "qv.meta.json"));
    std::ifstream meta(dir / "qv.meta.json");
    std::stringstream ss;
    ss << meta.rdbuf();
    EXPECT_NE(ss.str().find("\"threads\": 2"), std::string::npos);
    EXPECT_THROW((void)emit_results(r, "/proc/sktlab_cannot_write", OutputFormat::csv), IoError);
    std::filesystem::remove_all(dir);
}

TEST(Determinism, ThreadBudgetDoesNotChangeBytes) {
    StudyConfig c = small_gap_config();
    const std::string one = to_csv(run_gap_vs_N(c));
    c.threads = 4;
    const std::string four = to_csv(run_gap_vs_N(c));
    EXPECT_EQ(one, four);
    EXPECT_EQ(one, to_csv(run_gap_vs_N(c)));
    c.seed += 1;
    EXPECT_NE(one, to_csv(run_gap_vs_N(c)));
}

TEST(GapStudy, ZeroRatesGiveZeroGaps) {
    StudyConfig c = small_gap_config();
    c.params.d1 = c.params.d2 = c.params.a12 = c.params.a21 = 0.0;
    const StudyResult r = run_gap_vs_N(c);
    for (const auto& row : r.rows) {
        EXPECT_EQ(row.mean_sq_gap, 0.0);
        EXPECT_EQ(extra(row, "mean_channel_exact"), 1.0);
    }
    EXPECT_TRUE(r.passed);
}

TEST(GapStudy, RowsCarryScaleAndSmallness) {
    StudyConfig c = small_gap_config();
    c.N_grid = {60};
    const StudyResult r = run_gap_vs_N(c);
    const StudyRow& row = r.rows.front();
    EXPECT_DOUBLE_EQ(extra(row, "N_over_M2"), 60.0 / 16.0);
    EXPECT_EQ(extra(row, "below_scale_floor"), 1.0);
    EXPECT_NEAR(extra(row, "smallness_margin"), 99.0, 1e-12);
    c.params.a12 = c.params.a21 = 2.0;
    EXPECT_THROW((void)run_gap_vs_N(c), SmallnessViolation);
}

TEST(GapStudy, ExtrapolationSanityAtLargeN) {
    StudyConfig c = small_gap_config();
    c.N_grid = {1000, 100000};
    c.replicas = 8;
    c.T = 0.05;
    c.snapshot_count = 65;
    const StudyResult r = run_gap_vs_N(c);
    const double extrapolated = r.rows[0].mean_sq_gap * 1000.0 / 100000.0;
    EXPECT_LT(r.rows[1].mean_sq_gap, 10.0 * extrapolated);
}

TEST(GapSystem, ResidualAndMeanChannel) {
    ModelParams p;
    p.a12 = p.a21 = 0.3;
    p.M = 6;
    p.N = 300;
    const auto sched = std::vector<double>{0.0, 0.01, 0.02, 0.04};
    const CountsState s0 = init_from_density(GridVector(6, 1.0), GridVector(6, 0.5), 300);
    SimulationOptions opt;
    opt.seed = 8;
    const PathRecord path = simulate_path(s0, p, sched, opt);
    const TargetPath target = constant_target(1.0, 0.5, 6, sched);
    EXPECT_LE(gap_system_residual(path, target), 1e-10);
    const GapDecomposition g = decompose_gap(path, target);
    for (std::size_t k = 0; k < g.Z.size(); ++k) {
        EXPECT_EQ(path.states[k].total_u(), s0.total_u());
        EXPECT_EQ(path.states[k].total_v(), s0.total_v());
        EXPECT_NEAR(mean_of(g.Z[k]), mean_of(g.Z.front()), 1e-15);
    }
    EXPECT_NEAR(g.lambda_T, 0.04 + 0.04 * 0.04 * (1.0 + 0.3 * 0.5) + 1.0, 1e-14);
}

TEST(Reference, ConstantReferenceHasNoRemainder) {
    ModelParams p;
    p.a12 = p.a21 = 0.1;
    const OdeTrajectory ref = integrate({GridVector(32, 1.0), GridVector(32, 2.0), 0.0}, p, 0.01);
    const TargetPath t = restrict_reference(ref, p, 8);
    for (std::size_t s = 0; s < t.times.size(); ++s) {
        for (double x : t.r[s]) EXPECT_EQ(x, 0.0);
        for (double x : t.u[s]) EXPECT_EQ(x, 1.0);
    }
    EXPECT_THROW((void)restrict_reference(ref, p, 5), InvalidArgument);
}

TEST(DetOrder, ConstantReferenceGivesZeroGap) {
    StudyConfig c = default_config(StudyKind::det_order);
    c.amplitude = 0.0;
    c.M_ref = 64;
    c.M_grid = {4, 8};
    c.T = 0.01;
    const StudyResult r = run_deterministic_order(c);
    for (const auto& row : r.rows) EXPECT_EQ(row.mean_sq_gap, 0.0);
    EXPECT_TRUE(r.passed);
}

TEST(DetOrder, UnresolvedReferenceIsDetected) {
    StudyConfig c = default_config(StudyKind::det_order);
    c.M_ref = 16;
    c.M_grid = {4, 8};
    c.amplitude = 0.3;
    EXPECT_THROW((void)run_deterministic_order(c), CertificationError);
}

TEST(Rough, ZeroRatesAndReplicaDoubling) {
    StudyConfig c = default_config(StudyKind::rough);
    c.N_grid = {100, 1000};
    c.params.d1 = c.params.d2 = c.params.a12 = c.params.a21 = 0.0;
    for (const auto& row : run_rough_estimate(c).rows) EXPECT_EQ(row.mean_sq_gap, 0.0);

    c = default_config(StudyKind::rough);
    c.N_grid = {100, 1000};
    const StudyResult r64 = run_rough_estimate(c);
    c.replicas = 128;
    const StudyResult r128 = run_rough_estimate(c);
    for (std::size_t i = 0; i < r64.rows.size(); ++i) {
        const double se = std::hypot(r64.rows[i].stderr_, r128.rows[i].stderr_);
        EXPECT_LE(std::abs(r64.rows[i].mean_sq_gap - r128.rows[i].mean_sq_gap), 2.0 * se);
    }
}

TEST(Qv, FrozenSystemHasNoVariation) {
    StudyConfig c = default_config(StudyKind::qv);
    c.replicas = 10;
    c.params.d1 = c.params.d2 = c.params.a12 = c.params.a21 = 0.0;
    const StudyResult r = run_qv_study(c);
    for (const auto& [k, v] : r.rows.front().extra)
        if (k.rfind("qv_", 0) == 0) EXPECT_EQ(v, 0.0) << k;
    EXPECT_EQ(r.rows.front().mean_sq_gap, 0.0);
}

TEST(Stability, SmallnessViolationIsFlagged) {
    StudyConfig c = default_config(StudyKind::stability);
    c.M_grid = {8};
    c.eps_grid = {0.01};
    c.params.a12 = c.params.a21 = 1.5;
    const StudyResult r = run_stability_study(c);
    EXPECT_FALSE(r.passed);
    EXPECT_EQ(extra(r.rows.front(), "certified"), 0.0);
}
