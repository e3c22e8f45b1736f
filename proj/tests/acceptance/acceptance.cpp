// One PASS/FAIL line per acceptance criterion; exits non-zero if any fails.
// Usage: acceptance [output_dir]

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "sktlab/duality.hpp"
#include "sktlab/experiments.hpp"
#include "sktlab/grid_ops.hpp"
#include "sktlab/reconstruct.hpp"
#include "sktlab/semidiscrete.hpp"
#include "sktlab/walkers.hpp"

using namespace sktlab;
using std::numbers::pi;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

Eigen::MatrixXd dense_laplacian(int M) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(M, M);
    const double m2 = static_cast<double>(M) * M;
    for (int i = 0; i < M; ++i) {
        A(i, i) -= 2.0 * m2;
        A(i, (i + 1) % M) += m2;
        A(i, (i + M - 1) % M) += m2;
    }
    return A;
}

GridVector random_vector(std::mt19937_64& gen, int M) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    GridVector u(static_cast<std::size_t>(M));
    for (auto& x : u) x = dist(gen);
    return u;
}

double slope_of(const std::vector<double>& x, const std::vector<double>& y) { return fit_loglog(x, y).slope; }

std::string fmt(const char* f, double a) {
    char buf[96];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

Outcome spectrum() {
    double worst = 0.0;
    for (int M = 3; M <= 64; ++M) {
        const PeriodicLaplacian lap(M);
        std::vector<double> ours(lap.eigenvalues().begin(), lap.eigenvalues().end());
        const double ulp = 4.0 * M * M * std::numeric_limits<double>::epsilon();
        for (int k = 0; k < M; ++k) {
            const double formula = 4.0 * M * M * std::pow(std::sin(pi * k / M), 2);
            if (ours[static_cast<std::size_t>(k)] != laplacian_eigenvalue(M, k) ||
                std::abs(ours[static_cast<std::size_t>(k)] - formula) > 4.0 * ulp)
                return {false, "closed form differs at M = " + std::to_string(M)};
        }
        std::sort(ours.begin(), ours.end());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-dense_laplacian(M));
        const double scale = 4.0 * M * M;
        for (int k = 0; k < M; ++k)
            worst = std::max(worst, std::abs(ours[static_cast<std::size_t>(k)] - es.eigenvalues()(k)) / scale);
    }
    return {worst <= 1e-10, fmt("max rel deviation %.2e", worst)};
}

Outcome norm_identities() {
    std::mt19937_64 gen(101);
    double worst_id = 0.0;
    int violations = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        const int M = 3 + static_cast<int>(gen() % 254);
        const GridVector u = random_vector(gen, M);
        if (trial % 10 == 0) {
            // σ_M(u) is constant on cells: midpoint sampling integrates |σ_M u|^p exactly
            const StepFunction s{u};
            for (double p : {1.0, 2.0, 3.0}) {
                double acc = 0.0;
                for (int k = 0; k < M; ++k) acc += std::pow(std::abs(s((k + 0.5) / M)), p) / M;
                worst_id = std::max(worst_id, std::abs(std::pow(acc, 1.0 / p) - lp_norm(u, p)));
                worst_id = std::max(worst_id, std::abs(step_lp_norm(s, p) - lp_norm(u, p)));
            }
        }
        const PeriodicLaplacian lap(M);
        if (lap.neg_sobolev_norm(u) > lp_norm(u, 2.0) * (1.0 + 1e-14)) ++violations;
        const GridVector phi = random_vector(gen, M);
        if (lp_norm(tilde(phi), 2.0) > lp_norm(lap.apply(phi), 2.0) * (1.0 + 1e-14)) ++violations;
    }
    return {worst_id <= 1e-12 && violations == 0,
            fmt("identity dev %.1e, ", worst_id) + std::to_string(violations) + " violations"};
}

Outcome energy_identity() {
    std::mt19937_64 gen(102);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int M = 3 + static_cast<int>(gen() % 126);
        const GridVector w = random_vector(gen, M);
        const double discrete = -inner(w, PeriodicLaplacian(M).apply(w));
        const PiecewiseLinear f{w};
        double exact = 0.0;
        for (int k = 0; k < M; ++k) {
            const double a = (k + 0.25) / M, b = (k + 0.75) / M;
            const double slope = (f(b) - f(a)) / (b - a);
            exact += slope * slope / M;
        }
        worst = std::max(worst, std::abs(discrete - exact) / exact);
    }
    return {worst <= 1e-10, fmt("max rel deviation %.2e", worst)};
}

Outcome interpolation_orders() {
    const auto f = [](double x) { return std::sin(2 * pi * x); };
    const auto fp = [](double x) { return 2 * pi * std::cos(2 * pi * x); };
    std::vector<double> Ms, l2, hm1, h1;
    for (int M = 8; M <= 256; M *= 2) {
        const InterpolationErrors e = interpolation_errors(f, fp, M);
        Ms.push_back(M);
        l2.push_back(e.l2);
        hm1.push_back(e.hdot_minus1);
        h1.push_back(e.hdot1);
    }
    const double s0 = slope_of(Ms, l2), sm = slope_of(Ms, hm1), s1 = slope_of(Ms, h1);
    const bool ok = std::abs(s0 + 2) <= 0.1 && std::abs(sm + 2) <= 0.1 && std::abs(s1 + 1) <= 0.1;
    char buf[128];
    std::snprintf(buf, sizeof buf, "slopes L2 %.3f, H-1 %.3f, H1 %.3f", s0, sm, s1);
    return {ok, buf};
}

Outcome semidiscrete() {
    ModelParams heat;
    heat.d1 = heat.d2 = 0.8;
    auto mode_error = [&](int M, int k, double T, double h) {
        IntegratorConfig cfg;
        cfg.snapshot_count = 2;
        cfg.fixed_step = h;
        const OdeTrajectory tr = integrate(
            {exact_decoupled_mode(1.0, 1.0, k, 0.8, M, 0.0), GridVector(static_cast<std::size_t>(M), 1.0), 0.0}, heat, T,
            cfg);
        return lp_norm(tr.u.back() - exact_decoupled_mode(1.0, 1.0, k, 0.8, M, T), kInfNorm);
    };
    const double eig_err = mode_error(16, 1, 0.1, 0.0);
    const double h = 1.0 / (4.0 * 16 * 16);
    const double order = std::log2(mode_error(16, 2, 16 * h, h) / mode_error(16, 2, 16 * h, h / 2));

    ModelParams p;
    p.a12 = p.a21 = 0.5;
    const auto u0 = interpolate_nodal([](double x) { return 1.0 + 0.3 * std::cos(2 * pi * x); }, 24);
    const auto v0 = interpolate_nodal([](double x) { return 1.0 + 0.3 * std::sin(4 * pi * x); }, 24);
    const OdeTrajectory tr = integrate({u0, v0, 0.0}, p, 0.1);
    double mass = 0.0;
    for (std::size_t s = 0; s < tr.size(); ++s)
        mass = std::max({mass, std::abs(mean_of(tr.u[s]) - mean_of(u0)), std::abs(mean_of(tr.v[s]) - mean_of(v0))});

    ModelParams unit;
    std::vector<double> Ms, errs;
    for (int M : {8, 16, 32, 64}) {
        const auto f = [](double x) { return 1.0 + 0.2 * std::cos(2 * pi * x); };
        const OdeTrajectory t = integrate({interpolate_nodal(f, M), interpolate_nodal(f, M), 0.0}, unit, 0.02);
        const double decay = std::exp(-4.0 * pi * pi * 0.02);
        const GridVector exact =
            interpolate_nodal([decay](double x) { return 1.0 + 0.2 * decay * std::cos(2 * pi * x); }, M);
        Ms.push_back(M);
        errs.push_back(lp_norm(t.u.back() - exact, kInfNorm));
    }
    const double nodal = slope_of(Ms, errs);
    const bool ok = eig_err <= 1e-8 && std::abs(order - 4.0) <= 0.3 && mass <= 1e-12 && std::abs(nodal + 2.0) <= 0.2;
    char buf[160];
    std::snprintf(buf, sizeof buf, "eigenmode err %.1e, time order %.2f, mass drift %.1e, nodal order %.3f", eig_err,
                  order, mass, -nodal);
    return {ok, buf};
}

Outcome stochastic_bookkeeping() {
    ModelParams p;
    p.a12 = p.a21 = 0.5;
    const auto f = [](double x) { return 1.0 + 0.5 * std::cos(2 * pi * x); };
    const CountsState s0 = init_from_density(f, f, 8, 2000);
    SimulationOptions opt;
    opt.seed = 6;
    opt.audit_interval = 100000;
    opt.check_every_event = true;
    const PathRecord path = simulate_path(s0, p, uniform_schedule(0.25, 33), opt);
    bool conserved = path.events >= 1000000;
    for (const auto& st : path.states)
        conserved = conserved && st.total_u() == s0.total_u() && st.total_v() == s0.total_v();

    const StudyResult qv = run_qv_study(default_config(StudyKind::qv));
    double frac = 0.0, bracket = 0.0, means = 0.0;
    for (const auto& [k, v] : qv.rows.front().extra) {
        if (k == "fraction_within_3") frac = v;
        if (k == "max_abs_mean_bracket") bracket = v;
        if (k == "martingale_means_ok") means = v;
    }
    char buf[200];
    std::snprintf(buf, sizeof buf, "%llu events conserved=%d audit %.1e; z within 3: %.2f, bracket %.1e, means ok %d",
                  static_cast<unsigned long long>(path.events), conserved ? 1 : 0, path.audit_max_rel, frac, bracket,
                  means == 1.0 ? 1 : 0);
    return {conserved && path.audit_max_rel <= 1e-9 && qv.passed, buf};
}

Diagnostics row_extra(const StudyResult& r, const std::string& key) {
    for (const auto& row : r.rows)
        for (const auto& [k, v] : row.extra)
            if (k == key) return row.extra;
    return {};
}

double lookup(const Diagnostics& d, const std::string& key) {
    for (const auto& [k, v] : d)
        if (k == key) return v;
    return NAN;
}

Outcome duality_suite() {
    const StudyResult r = run_duality_suite(default_config(StudyKind::duality));
    const Diagnostics reg = row_extra(r, "kind_regular");
    const Diagnostics sing = row_extra(r, "kind_singular");
    const Diagnostics comb = row_extra(r, "kind_combined");
    char buf[240];
    std::snprintf(buf, sizeof buf,
                  "regular %g/100 per-time, %g/100 sup x2; singular max ratio %.3f, refinement change %.2e; "
                  "combined min rel slack %.3f",
                  lookup(reg, "per_time_passes"), lookup(reg, "sup_prefactor2_passes"), lookup(sing, "max_ratio"),
                  lookup(sing, "max_refinement_change"), lookup(comb, "min_relative_slack"));
    return {r.passed, buf};
}

Outcome gap_vs_n(const std::string& out_dir) {
    const StudyResult r = run_gap_vs_N(default_config(StudyKind::gap_vs_n));
    emit_results(r, out_dir, OutputFormat::csv, 0.0, resolve_threads(0));
    return {r.passed, fmt("slope %.4f", r.slope) + fmt(" +- %.4f", r.slope_err)};
}

Outcome det_order() {
    const StudyResult r = run_deterministic_order(default_config(StudyKind::det_order));
    return {r.passed, fmt("slope %.4f", r.slope) + fmt(", reference change %.1e", lookup(r.summary, "reference_change_estimate"))};
}

Outcome rough() {
    const StudyResult r = run_rough_estimate(default_config(StudyKind::rough));
    return {r.passed, fmt("slope %.4f", r.slope) + fmt(", decreasing %g", lookup(r.summary, "strictly_decreasing"))};
}

Outcome stability() {
    const StudyConfig c = default_config(StudyKind::stability);
    const StudyResult r = run_stability_study(c);
    const double factor = c.params.smallness_bound() / (c.c1 * c.c2);
    return {r.passed && factor >= 10.0,
            fmt("ratio spread %.4f", lookup(r.summary, "ratio_spread")) + fmt(", smallness factor %.0f", factor)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::string out_dir = argc > 1 ? argv[1] : ".";
    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "spectrum", 5, spectrum},
        {2, "norm identities", 10, norm_identities},
        {3, "energy identity", 5, energy_identity},
        {4, "interpolation orders", 5, interpolation_orders},
        {5, "semi-discrete correctness", 30, semidiscrete},
        {6, "stochastic bookkeeping", 120, stochastic_bookkeeping},
        {7, "duality certificates", 120, duality_suite},
        {8, "stochastic gap rate", 600, [&] { return gap_vs_n(out_dir); }},
        {9, "deterministic gap rate", 120, det_order},
        {10, "rough estimate", 300, rough},
        {11, "stability", 120, stability},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool pass = o.pass && secs < c.budget_s;
        if (!pass) ++failures;
        std::printf("%s criterion %2d (%s): %s [%.1fs / %.0fs]\n", pass ? "PASS" : "FAIL", c.id, c.name,
                    o.detail.c_str(), secs, c.budget_s);
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
