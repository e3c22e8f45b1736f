#pragma once

#include <cstddef>
#include <vector>

namespace sktlab::detail {

/// One classical fourth-order Runge-Kutta step for y' = f(t, y) on a flat state.
template <typename F>
void rk4_step(F&& f, double t, double h, std::vector<double>& y) {
    const std::size_t n = y.size();
    std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
    f(t, y, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    f(t + 0.5 * h, tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    f(t + 0.5 * h, tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
    f(t + h, tmp, k4);
    for (std::size_t i = 0; i < n; ++i) y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

/// Number of equal substeps of length ≤ h_max covering an interval.
inline long substeps(double interval, double h_max) {
    if (interval <= 0.0) return 0;
    const double ratio = interval / h_max;
    long n = static_cast<long>(ratio);
    if (static_cast<double>(n) < ratio * (1.0 - 1e-12)) ++n;
    return n < 1 ? 1 : n;
}

}  // namespace sktlab::detail
