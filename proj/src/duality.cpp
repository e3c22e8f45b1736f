#include "sktlab/duality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "json.hpp"
#include "rk4.hpp"
#include "sktlab/errors.hpp"
#include "sktlab/reconstruct.hpp"

namespace sktlab {

namespace {

double max_entry(const GridVector& x) { return *std::max_element(x.begin(), x.end()); }
double min_entry(const GridVector& x) { return *std::min_element(x.begin(), x.end()); }

void check_env(const EnvCoefficient& env) {
    if (!(env.alpha > 0.0)) throw InvalidArgument("environment lower bound alpha must be positive");
    if (!env.mu) throw InvalidArgument("environment coefficient is empty");
}

GridVector checked_mu(const EnvCoefficient& env, double t, std::size_t m) {
    GridVector mu = env.mu(t);
    if (mu.size() != m) throw DimensionMismatch("environment coefficient has the wrong length");
    if (min_entry(mu) < env.alpha * (1.0 - 1e-12))
        throw InvalidArgument("environment coefficient drops below alpha at t = " + std::to_string(t));
    return mu;
}

std::vector<double> schedule_for(const KolmogorovConfig& config, double T) {
    std::vector<double> s =
        config.snapshot_times.empty() ? uniform_schedule(T, config.snapshot_count) : config.snapshot_times;
    check_schedule(s);
    if (std::abs(s.back() - T) > 1e-12 * std::max(1.0, T))
        throw InvalidArgument("snapshot schedule must end at T");
    return s;
}

double step_bound(const KolmogorovConfig& config, const EnvCoefficient& env, double t0, double t1, std::size_t m) {
    if (config.fixed_step > 0.0) return config.fixed_step;
    const double mu_max = std::max(max_entry(env.mu(t0)), max_entry(env.mu(t1)));
    const double m2 = static_cast<double>(m) * static_cast<double>(m);
    return config.step_safety / (4.0 * m2 * mu_max);
}

// Integrates z' = Δ_M[z⊙μ + f] + r over [t0, t1] with equal RK4 steps, calling
// on_step after each one.
template <typename OnStep>
long advance(std::vector<double>& y, const PeriodicLaplacian& lap, const EnvCoefficient& env, const TimeField* f,
             const TimeField* r, double t0, double t1, double h_max, OnStep&& on_step) {
    const std::size_t m = static_cast<std::size_t>(lap.size());
    auto field = [&](double t, const std::vector<double>& state, std::vector<double>& dy) {
        const GridVector mu = env.mu(t);
        GridVector flux(m);
        for (std::size_t i = 0; i < m; ++i) flux[i] = state[i] * mu[i];
        if (f != nullptr) flux += (*f)(t);
        GridVector dz = lap.apply(flux);
        double mean_r = 0.0;
        if (r != nullptr) {
            const GridVector rt = (*r)(t);
            dz += rt;
            mean_r = mean_of(rt);
        }
        std::copy(dz.begin(), dz.end(), dy.begin());
        dy[m] = mean_r;
    };
    const long n = detail::substeps(t1 - t0, h_max);
    if (n == 0) return 0;
    const double h = (t1 - t0) / static_cast<double>(n);
    for (long k = 0; k < n; ++k) {
        const double t = t0 + static_cast<double>(k) * h;
        detail::rk4_step(field, t, h, y);
        on_step(k + 1 == n ? t1 : t + h, k + 1 == n);
    }
    return n;
}

GridVector head(const std::vector<double>& y, std::size_t m) {
    return GridVector(std::vector<double>(y.begin(), y.begin() + static_cast<long>(m)));
}

double quad_mu(const GridVector& z, const GridVector& mu) {
    return inner(hadamard(z, z), mu);
}

}  // namespace

TimeField constant_field(GridVector value) {
    return [v = std::move(value)](double) { return v; };
}

TimeField zero_field(int M) { return constant_field(GridVector(static_cast<std::size_t>(M), 0.0)); }

TimeField interpolate_snapshots(std::vector<double> times, std::vector<GridVector> values) {
    if (times.empty() || times.size() != values.size())
        throw DimensionMismatch("interpolate_snapshots: times and values differ in length");
    return [t_ = std::move(times), v_ = std::move(values)](double t) -> GridVector {
        if (t <= t_.front()) return v_.front();
        if (t >= t_.back()) return v_.back();
        const auto it = std::upper_bound(t_.begin(), t_.end(), t);
        const auto hi = static_cast<std::size_t>(it - t_.begin());
        const std::size_t lo = hi - 1;
        const double w = (t - t_[lo]) / (t_[hi] - t_[lo]);
        return (1.0 - w) * v_[lo] + w * v_[hi];
    };
}

GridVector JumpForcing::at(double t) const {
    GridVector x = initial;
    for (std::size_t k = 0; k < jump_times.size(); ++k)
        if (jump_times[k] <= t) x += increments[k];
    return x;
}

JumpForcing jump_forcing_from_snapshots(const std::vector<double>& times, const std::vector<GridVector>& values) {
    if (times.empty() || times.size() != values.size())
        throw DimensionMismatch("jump_forcing_from_snapshots: times and values differ in length");
    JumpForcing x;
    x.initial = values.front();
    for (std::size_t s = 1; s < times.size(); ++s) {
        x.jump_times.push_back(times[s]);
        x.increments.push_back(values[s] - values[s - 1]);
    }
    return x;
}

KolmogorovSolution solve_kolmogorov(const GridVector& z0, const EnvCoefficient& env, const TimeField& f,
                                    const TimeField& r, double T, const KolmogorovConfig& config) {
    check_env(env);
    const std::size_t m = z0.size();
    const PeriodicLaplacian lap(static_cast<int>(m));
    const std::vector<double> schedule = schedule_for(config, T);

    std::vector<double> y(m + 1, 0.0);
    std::copy(z0.begin(), z0.end(), y.begin());

    KolmogorovSolution sol;
    sol.T = T;
    auto record = [&](double t) {
        checked_mu(env, t, m);
        sol.times.push_back(t);
        sol.z.push_back(head(y, m));
        sol.mean_source.push_back(y[m]);
    };
    record(schedule.front());
    for (std::size_t s = 1; s < schedule.size(); ++s) {
        const double h_max = step_bound(config, env, schedule[s - 1], schedule[s], m);
        sol.steps += advance(y, lap, env, f ? &f : nullptr, r ? &r : nullptr, schedule[s - 1], schedule[s], h_max,
                             [&](double t, bool last) {
                                 if (config.dense && !last) record(t);
                             });
        if (!std::isfinite(y[0])) throw InvalidArgument("solve_kolmogorov: solution blew up");
        record(schedule[s]);
    }
    return sol;
}

KolmogorovSolution solve_kolmogorov_singular(const EnvCoefficient& env, const JumpForcing& x_d, double T,
                                             const KolmogorovConfig& config) {
    check_env(env);
    const std::size_t m = x_d.initial.size();
    if (x_d.jump_times.size() != x_d.increments.size())
        throw DimensionMismatch("singular forcing: jump times and increments differ in length");
    for (std::size_t k = 0; k < x_d.jump_times.size(); ++k) {
        const double tau = x_d.jump_times[k];
        if (!(tau >= 0.0 && tau <= T)) throw InvalidArgument("singular forcing: jump outside [0, T]");
        if (x_d.increments[k].size() != m) throw DimensionMismatch("singular forcing: increment length");
        if (k > 0 && tau < x_d.jump_times[k - 1]) throw InvalidArgument("singular forcing: jump times not sorted");
    }
    const PeriodicLaplacian lap(static_cast<int>(m));

    std::vector<double> breaks = schedule_for(config, T);
    for (double tau : x_d.jump_times)
        if (tau > 0.0) breaks.push_back(tau);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    // jumps at t = 0 belong to the initial value
    GridVector x = x_d.initial;
    std::size_t next_jump = 0;
    while (next_jump < x_d.jump_times.size() && x_d.jump_times[next_jump] <= 0.0) x += x_d.increments[next_jump++];

    std::vector<double> y(m + 1, 0.0);
    std::copy(x.begin(), x.end(), y.begin());

    KolmogorovSolution sol;
    sol.T = T;
    auto record = [&](double t) {
        sol.times.push_back(t);
        sol.z.push_back(head(y, m));
        sol.forcing.push_back(x);
        sol.mean_source.push_back(0.0);
    };
    checked_mu(env, 0.0, m);
    record(0.0);
    for (std::size_t b = 1; b < breaks.size(); ++b) {
        const double t0 = breaks[b - 1];
        const double t1 = breaks[b];
        const double h_max = step_bound(config, env, t0, t1, m);
        sol.steps += advance(y, lap, env, nullptr, nullptr, t0, t1, h_max, [&](double t, bool last) {
            if (config.dense || last) record(t);
        });
        if (!std::isfinite(y[0])) throw InvalidArgument("solve_kolmogorov_singular: solution blew up");
        checked_mu(env, t1, m);
        bool jumped = false;
        while (next_jump < x_d.jump_times.size() && x_d.jump_times[next_jump] <= t1) {
            const GridVector& inc = x_d.increments[next_jump++];
            x += inc;
            for (std::size_t i = 0; i < m; ++i) y[i] += inc[i];
            jumped = true;
        }
        if (jumped) record(t1);
    }
    return sol;
}

DualityReport verify_duality(const KolmogorovSolution& solution, const EnvCoefficient& env, const TimeField& f,
                             const TimeField& r, double a) {
    check_env(env);
    if (!(a > 0.0)) throw InvalidArgument("verify_duality: a must be positive");
    if (solution.size() < 2) throw InvalidArgument("verify_duality: need at least two snapshots");
    const std::size_t n = solution.size();
    const std::size_t m = solution.z.front().size();
    const PeriodicLaplacian lap(static_cast<int>(m));

    std::vector<double> weighted(n), mean_mu(n), mean_term(n), f_sq(n), r_sq(n);
    std::vector<double> neg_tilde(n), neg_full(n);
    double mean_residual = 0.0;
    const double mean0 = mean_of(solution.z.front());
    for (std::size_t s = 0; s < n; ++s) {
        const double t = solution.times[s];
        const GridVector& z = solution.z[s];
        if (z.size() != m) throw DimensionMismatch("verify_duality: snapshot length");
        const GridVector mu = env.mu(t);
        const double zbar = mean_of(z);
        weighted[s] = quad_mu(z, mu);
        mean_mu[s] = mean_of(mu);
        mean_term[s] = zbar * zbar * mean_mu[s];
        const double fn = f ? lp_norm(f(t), 2.0) : 0.0;
        const double rn = r ? lp_norm(r(t), 2.0) : 0.0;
        f_sq[s] = fn * fn;
        r_sq[s] = rn * rn;
        neg_tilde[s] = lap.neg_sobolev_norm_sq(tilde(z));
        neg_full[s] = neg_tilde[s] + zbar * zbar;
        if (s < solution.mean_source.size())
            mean_residual = std::max(mean_residual, std::abs(zbar - mean0 - solution.mean_source[s]));
    }
    const auto c_weighted = cumulative_trapezoid(solution.times, weighted);
    const auto c_mean_term = cumulative_trapezoid(solution.times, mean_term);
    const auto c_mu = cumulative_trapezoid(solution.times, mean_mu);
    const auto c_f = cumulative_trapezoid(solution.times, f_sq);
    const auto c_r = cumulative_trapezoid(solution.times, r_sq);

    DualityReport rep;
    rep.kind = "regular";
    rep.a = a;
    rep.alpha = env.alpha;
    rep.T = solution.times.back();
    rep.mean_residual = mean_residual;

    rep.per_time_min_slack = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < n; ++s) {
        const double lhs = neg_tilde[s] + c_weighted[s];
        const double rhs = neg_tilde[0] + c_mean_term[s] + (1.0 + a) / env.alpha * c_f[s] +
                           (1.0 + 1.0 / a) / env.alpha * c_r[s];
        const double slack = rhs - lhs;
        const double budget = kDualityRelTol * std::max({std::abs(rhs), std::abs(lhs), 1e-300});
        if (slack < rep.per_time_min_slack) {
            rep.per_time_min_slack = slack;
            rep.per_time_scale = rhs;
            rep.tolerance_budget = budget;
        }
        if (slack < -budget) rep.pass_per_time = false;
    }

    const double int_mu = c_mu.back();
    rep.lhs_sup = *std::max_element(neg_full.begin(), neg_full.end());
    rep.lhs_integral = c_weighted.back();
    rep.initial_term = neg_full.front();
    rep.mean_mu_term = mean0 * mean0 * int_mu;
    rep.f_term = c_f.back() / env.alpha;
    rep.r_term = (rep.T + rep.T * int_mu + 1.0 / env.alpha) * c_r.back();
    rep.rhs_stated = (1.0 + a) * (rep.initial_term + rep.mean_mu_term + rep.f_term) + (1.0 + 1.0 / a) * rep.r_term;
    rep.slack = rep.rhs_stated - rep.lhs();
    rep.ratio = rep.rhs_stated > 0.0 ? rep.lhs() / rep.rhs_stated : (rep.lhs() > 0.0 ? INFINITY : 0.0);
    const double tol = kDualityRelTol * std::max(rep.rhs_stated, rep.lhs());
    rep.pass_sup_stated = rep.lhs() <= rep.rhs_stated + tol;
    rep.pass_sup_prefactor2 = rep.lhs() <= 2.0 * rep.rhs_stated + tol;
    return rep;
}

DualityReport verify_singular(const KolmogorovSolution& solution, const EnvCoefficient& env) {
    check_env(env);
    if (solution.size() < 2) throw InvalidArgument("verify_singular: need at least two snapshots");
    if (solution.forcing.size() != solution.size())
        throw InvalidArgument("verify_singular: solution does not carry its singular forcing");
    const std::size_t n = solution.size();
    const PeriodicLaplacian lap(static_cast<int>(solution.z.front().size()));

    std::vector<double> weighted(n), forcing_mean(n);
    double sup_z = 0.0;
    double sup_x = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        const GridVector mu = env.mu(solution.times[s]);
        weighted[s] = quad_mu(solution.z[s], mu);
        const double xbar = mean_of(solution.forcing[s]);
        forcing_mean[s] = mean_of(mu) * xbar * xbar;
        sup_z = std::max(sup_z, lap.neg_sobolev_norm_sq(solution.z[s]));
        sup_x = std::max(sup_x, lap.neg_sobolev_norm_sq(solution.forcing[s]));
    }
    DualityReport rep;
    rep.kind = "singular";
    rep.alpha = env.alpha;
    rep.T = solution.times.back();
    rep.lhs_sup = sup_z;
    rep.lhs_integral = trapezoid(solution.times, weighted);
    rep.singular_term = sup_x + trapezoid(solution.times, forcing_mean);
    rep.rhs_stated = rep.singular_term;
    rep.slack = rep.rhs_stated - rep.lhs();
    if (rep.singular_term > 0.0)
        rep.ratio = rep.lhs() / rep.singular_term;
    else
        rep.ratio = rep.lhs() == 0.0 ? 0.0 : INFINITY;
    rep.per_time_min_slack = 0.0;
    rep.pass_per_time = std::isfinite(rep.ratio);
    rep.pass_sup_stated = rep.lhs() <= rep.rhs_stated * (1.0 + kDualityRelTol);
    rep.pass_sup_prefactor2 = rep.lhs() <= 2.0 * rep.rhs_stated * (1.0 + kDualityRelTol);
    return rep;
}

CombinedResult verify_combined(const GridVector& z0, const EnvCoefficient& env, const TimeField& f,
                               const RegularForcing& x_r, const JumpForcing& x_d, double a, double T,
                               int grid_points) {
    check_env(env);
    if (!(a > 0.0)) throw InvalidArgument("verify_combined: a must be positive");
    if (!x_r.value || !x_r.derivative) throw InvalidArgument("verify_combined: regular forcing needs a derivative");
    if (x_d.M() != static_cast<int>(z0.size())) throw DimensionMismatch("verify_combined: forcing length");
    const GridVector xr0 = x_r.value(0.0);
    if (lp_norm(xr0, kInfNorm) > 1e-14 * std::max(1.0, lp_norm(z0, kInfNorm)))
        throw InvalidArgument("verify_combined: the regular forcing must vanish at t = 0");

    CombinedResult out;
    KolmogorovConfig sing_cfg;
    sing_cfg.snapshot_count = grid_points;
    sing_cfg.dense = false;
    out.singular = solve_kolmogorov_singular(env, x_d, T, sing_cfg);

    KolmogorovConfig reg_cfg;
    reg_cfg.snapshot_times = out.singular.times;
    reg_cfg.snapshot_times.erase(std::unique(reg_cfg.snapshot_times.begin(), reg_cfg.snapshot_times.end()),
                                 reg_cfg.snapshot_times.end());
    reg_cfg.dense = false;
    out.regular = solve_kolmogorov(z0, env, f, x_r.derivative, T, reg_cfg);

    const std::size_t n = out.singular.size();
    const PeriodicLaplacian lap(static_cast<int>(z0.size()));
    std::vector<double> weighted(n), f_sq(n), r_sq(n), mean_mu(n), forcing_mean(n);
    double sup_z = 0.0;
    double sup_x = 0.0;
    std::size_t k = 0;
    for (std::size_t s = 0; s < n; ++s) {
        const double t = out.singular.times[s];
        while (out.regular.times[k] < t) ++k;
        out.z.push_back(out.regular.z[k] + out.singular.z[s]);
        const GridVector mu = env.mu(t);
        weighted[s] = quad_mu(out.z.back(), mu);
        mean_mu[s] = mean_of(mu);
        const double fn = f ? lp_norm(f(t), 2.0) : 0.0;
        const double rn = lp_norm(x_r.derivative(t), 2.0);
        f_sq[s] = fn * fn;
        r_sq[s] = rn * rn;
        const double xbar = mean_of(out.singular.forcing[s]);
        forcing_mean[s] = mean_mu[s] * xbar * xbar;
        sup_z = std::max(sup_z, lap.neg_sobolev_norm_sq(out.z.back()));
        sup_x = std::max(sup_x, lap.neg_sobolev_norm_sq(out.singular.forcing[s]));
    }
    const std::vector<double>& times = out.singular.times;
    const double int_mu = trapezoid(times, mean_mu);
    const double zbar0 = mean_of(z0);

    DualityReport& rep = out.report;
    rep.kind = "combined";
    rep.a = a;
    rep.alpha = env.alpha;
    rep.T = T;
    rep.lhs_sup = sup_z;
    rep.lhs_integral = trapezoid(times, weighted);
    rep.initial_term = lap.neg_sobolev_norm_sq(z0);
    rep.mean_mu_term = zbar0 * zbar0 * int_mu;
    rep.f_term = trapezoid(times, f_sq) / env.alpha;
    rep.r_term = (T + T * int_mu + 1.0 / env.alpha) * trapezoid(times, r_sq);
    rep.singular_term = sup_x + trapezoid(times, forcing_mean);
    rep.rhs_stated = (1.0 + a) * (1.0 + a) * (rep.initial_term + rep.mean_mu_term + rep.f_term) +
                     (1.0 + a) * (1.0 + 1.0 / a) * rep.r_term + (1.0 + 1.0 / a) * rep.singular_term;
    rep.slack = rep.rhs_stated - rep.lhs();
    rep.ratio = rep.rhs_stated > 0.0 ? rep.lhs() / rep.rhs_stated : (rep.lhs() > 0.0 ? INFINITY : 0.0);
    rep.tolerance_budget = kDualityRelTol * std::max(rep.rhs_stated, rep.lhs());
    rep.per_time_min_slack = rep.slack;
    rep.per_time_scale = rep.rhs_stated;
    rep.pass_sup_stated = rep.slack >= -rep.tolerance_budget;
    rep.pass_sup_prefactor2 = rep.lhs() <= 2.0 * rep.rhs_stated + rep.tolerance_budget;
    rep.pass_per_time = rep.pass_sup_stated;
    return out;
}

StabilityReport stability_gap(const OdeTrajectory& target, const OdeTrajectory& other, const ModelParams& params) {
    if (target.size() < 2 || target.times != other.times)
        throw InvalidArgument("stability_gap: trajectories must share a snapshot schedule");
    const std::size_t n = target.size();
    std::vector<GridVector> z(n), w(n);
    double sup_u = 0.0;
    double sup_v = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        z[s] = target.u[s] - other.u[s];
        w[s] = target.v[s] - other.v[s];
        sup_u = std::max(sup_u, lp_norm(target.u[s], kInfNorm));
        sup_v = std::max(sup_v, lp_norm(target.v[s], kInfNorm));
    }
    StabilityReport rep;
    rep.z_sq = trip_norm_discrete_parts(target.times, z).squared();
    rep.w_sq = trip_norm_discrete_parts(target.times, w).squared();
    rep.gap_sq = rep.z_sq + rep.w_sq;

    const PeriodicLaplacian lap(static_cast<int>(z.front().size()));
    const double T = target.times.back();
    const double zbar = mean_of(z.front());
    const double wbar = mean_of(w.front());
    GridVector mu1 = other.v.front();
    GridVector mu2 = other.u.front();
    for (auto& x : mu1) x = params.mu1(x);
    for (auto& x : mu2) x = params.mu2(x);
    rep.rhs = lap.neg_sobolev_norm_sq(z.front()) + lap.neg_sobolev_norm_sq(w.front()) +
              T * (zbar * zbar * lp_norm(mu1, 1.0) + wbar * wbar * lp_norm(mu2, 1.0));
    if (rep.rhs > 0.0)
        rep.ratio = rep.gap_sq / rep.rhs;
    else
        rep.ratio = rep.gap_sq == 0.0 ? 0.0 : INFINITY;
    rep.smallness_margin = params.smallness_margin(sup_u, sup_v);
    rep.smallness_ok = rep.smallness_margin > 0.0;
    rep.certified = rep.smallness_ok;
    return rep;
}

std::string DualityReport::to_json() const {
    nlohmann::ordered_json j;
    j["kind"] = kind;
    j["a"] = a;
    j["alpha"] = alpha;
    j["T"] = T;
    j["lhs_sup"] = lhs_sup;
    j["lhs_integral"] = lhs_integral;
    j["terms"] = {{"initial", initial_term},
                  {"mean_mu", mean_mu_term},
                  {"f", f_term},
                  {"r", r_term},
                  {"singular", singular_term}};
    j["rhs_stated"] = rhs_stated;
    j["slack"] = slack;
    j["ratio"] = std::isfinite(ratio) ? nlohmann::ordered_json(ratio) : nlohmann::ordered_json(nullptr);
    j["per_time_min_slack"] = per_time_min_slack;
    j["per_time_scale"] = per_time_scale;
    j["tolerance_budget"] = tolerance_budget;
    j["mean_residual"] = mean_residual;
    j["pass_per_time"] = pass_per_time;
    j["pass_sup_stated"] = pass_sup_stated;
    j["pass_sup_prefactor2"] = pass_sup_prefactor2;
    return j.dump(2);
}

DualityReport DualityReport::from_json(const std::string& text) {
    DualityReport r;
    try {
        const auto j = nlohmann::json::parse(text);
        r.kind = j.at("kind").get<std::string>();
        r.a = j.at("a").get<double>();
        r.alpha = j.at("alpha").get<double>();
        r.T = j.at("T").get<double>();
        r.lhs_sup = j.at("lhs_sup").get<double>();
        r.lhs_integral = j.at("lhs_integral").get<double>();
        const auto& t = j.at("terms");
        r.initial_term = t.at("initial").get<double>();
        r.mean_mu_term = t.at("mean_mu").get<double>();
        r.f_term = t.at("f").get<double>();
        r.r_term = t.at("r").get<double>();
        r.singular_term = t.at("singular").get<double>();
        r.rhs_stated = j.at("rhs_stated").get<double>();
        r.slack = j.at("slack").get<double>();
        r.ratio = j.at("ratio").is_null() ? INFINITY : j.at("ratio").get<double>();
        r.per_time_min_slack = j.at("per_time_min_slack").get<double>();
        r.per_time_scale = j.at("per_time_scale").get<double>();
        r.tolerance_budget = j.at("tolerance_budget").get<double>();
        r.mean_residual = j.at("mean_residual").get<double>();
        r.pass_per_time = j.at("pass_per_time").get<bool>();
        r.pass_sup_stated = j.at("pass_sup_stated").get<bool>();
        r.pass_sup_prefactor2 = j.at("pass_sup_prefactor2").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("DualityReport::from_json: ") + e.what());
    }
    return r;
}

}  // namespace sktlab
