#pragma once

#include <cstdint>
#include <limits>

namespace sktlab {

/// Coefficients of the conservative two-species cross-diffusion model
///   d/dt u = Δ((d1 + a12 v) u),  d/dt v = Δ((d2 + a21 u) v)
/// together with the lattice size, population scale and horizon.
struct ModelParams {
    double d1 = 1.0;
    double d2 = 1.0;
    double a12 = 0.0;
    double a21 = 0.0;
    int M = 8;
    std::int64_t N = 100;
    double T = 0.1;

    /// Affine motility of species 1 given the density of species 2.
    [[nodiscard]] double mu1(double v) const { return d1 + a12 * v; }
    /// Affine motility of species 2 given the density of species 1.
    [[nodiscard]] double mu2(double u) const { return d2 + a21 * u; }

    /// d1 d2 / (a12 a21); +inf when either cross coefficient vanishes.
    [[nodiscard]] double smallness_bound() const {
        const double prod = a12 * a21;
        if (prod <= 0.0) return std::numeric_limits<double>::infinity();
        return d1 * d2 / prod;
    }

    /// Margin of the smallness condition ‖ū‖∞‖v̄‖∞ < d1 d2/(a12 a21).
    [[nodiscard]] double smallness_margin(double sup_u, double sup_v) const {
        return smallness_bound() - sup_u * sup_v;
    }

    [[nodiscard]] bool zero_rates() const { return d1 == 0.0 && d2 == 0.0 && a12 == 0.0 && a21 == 0.0; }
};

}  // namespace sktlab
