#include "sktlab/semidiscrete.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rk4.hpp"
#include "sktlab/errors.hpp"

namespace sktlab {

OdeRhs rhs(const GridVector& u, const GridVector& v, const ModelParams& params) {
    if (u.size() != v.size()) throw DimensionMismatch("rhs: u and v differ in length");
    const PeriodicLaplacian lap(static_cast<int>(u.size()));
    const GridVector uv = hadamard(u, v);
    return {lap.apply(params.d1 * u + params.a12 * uv), lap.apply(params.d2 * v + params.a21 * uv)};
}

std::vector<double> uniform_schedule(double T, int count) {
    if (count < 2) throw InvalidArgument("uniform_schedule: need at least two points");
    if (!(T > 0.0)) throw InvalidArgument("uniform_schedule: T must be positive");
    std::vector<double> out(static_cast<std::size_t>(count));
    for (int s = 0; s < count; ++s) out[static_cast<std::size_t>(s)] = T * s / (count - 1);
    out.back() = T;
    return out;
}

OdeTrajectory integrate(const OdeState& state0, const ModelParams& params, double T, const IntegratorConfig& config) {
    const std::size_t m = state0.u.size();
    if (state0.v.size() != m) throw DimensionMismatch("integrate: u and v differ in length");
    if (!(config.step_safety > 0.0)) throw InvalidArgument("integrate: step_safety must be positive");
    if (config.fixed_step < 0.0) throw InvalidArgument("integrate: fixed_step must be non-negative");
    if (!state0.u.all_finite() || !state0.v.all_finite()) throw InvalidArgument("integrate: non-finite initial data");

    std::vector<double> schedule =
        config.snapshot_times.empty() ? uniform_schedule(T, config.snapshot_count) : config.snapshot_times;
    check_schedule(schedule);

    const PeriodicLaplacian lap(static_cast<int>(m));
    const double m2 = static_cast<double>(m) * static_cast<double>(m);
    auto field = [&](double, const std::vector<double>& y, std::vector<double>& dy) {
        GridVector a(m), b(m);
        for (std::size_t i = 0; i < m; ++i) {
            const double uv = y[i] * y[m + i];
            a[i] = params.d1 * y[i] + params.a12 * uv;
            b[i] = params.d2 * y[m + i] + params.a21 * uv;
        }
        const GridVector da = lap.apply(a);
        const GridVector db = lap.apply(b);
        std::copy(da.begin(), da.end(), dy.begin());
        std::copy(db.begin(), db.end(), dy.begin() + static_cast<long>(m));
    };

    std::vector<double> y(2 * m);
    std::copy(state0.u.begin(), state0.u.end(), y.begin());
    std::copy(state0.v.begin(), state0.v.end(), y.begin() + static_cast<long>(m));

    OdeTrajectory out;
    out.min_value = *std::min_element(y.begin(), y.end());
    auto record = [&](double t) {
        out.times.push_back(t);
        out.u.emplace_back(std::vector<double>(y.begin(), y.begin() + static_cast<long>(m)));
        out.v.emplace_back(std::vector<double>(y.begin() + static_cast<long>(m), y.end()));
    };
    record(schedule.front());

    for (std::size_t s = 1; s < schedule.size(); ++s) {
        const double t0 = schedule[s - 1];
        const double interval = schedule[s] - t0;
        double h_max = config.fixed_step;
        if (h_max == 0.0) {
            double sup_u = 0.0, sup_v = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                sup_u = std::max(sup_u, std::abs(y[i]));
                sup_v = std::max(sup_v, std::abs(y[m + i]));
            }
            const double mu_max = std::max({params.d1 + std::abs(params.a12) * sup_v,
                                            params.d2 + std::abs(params.a21) * sup_u, 1e-300});
            h_max = config.step_safety / (4.0 * m2 * mu_max);
        }
        const long n = detail::substeps(interval, h_max);
        const double h = interval / static_cast<double>(n);
        for (long k = 0; k < n; ++k) {
            detail::rk4_step(field, t0 + static_cast<double>(k) * h, h, y);
            ++out.steps;
            const double low = *std::min_element(y.begin(), y.end());
            out.min_value = std::min(out.min_value, low);
            if (low < -1e-12) {
                if (config.negativity == NegativityPolicy::reject)
                    throw NegativeDensity("integrate: component " + std::to_string(low) + " below zero at t = " +
                                          std::to_string(t0 + static_cast<double>(k + 1) * h));
                ++out.negative_steps;
            }
            if (!std::isfinite(low)) throw InvalidArgument("integrate: solution blew up");
        }
        record(schedule[s]);
    }
    return out;
}

GridVector exact_decoupled_mode(double c, double eps, int k, double d, int M, double t) {
    if (k < 0 || k >= M) throw InvalidArgument("exact_decoupled_mode: need 0 <= k < M");
    const double decay = std::exp(-d * laplacian_eigenvalue(M, k) * t);
    GridVector out(static_cast<std::size_t>(M));
    for (int j = 1; j <= M; ++j)
        out[static_cast<std::size_t>(j - 1)] =
            c + eps * decay * std::cos(2.0 * std::numbers::pi * k * static_cast<double>(j) / M);
    return out;
}

}  // namespace sktlab
