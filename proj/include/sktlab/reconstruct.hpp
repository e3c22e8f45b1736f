#pragma once

// Functions on the continuous torus built from grid vectors: the step
// reconstruction σ_M, the piecewise-linear reconstruction π_M, nodal
// interpolation ι_M, fine-grid resampling and Fourier-side Sobolev norms.

#include <functional>
#include <span>
#include <vector>

#include "sktlab/grid_ops.hpp"

namespace sktlab {

/// σ_M(u): value u_k on the cell (x_{k-1}, x_k], x_k = k/M.
struct StepFunction {
    GridVector values;

    [[nodiscard]] int M() const { return static_cast<int>(values.size()); }
    /// Point evaluation with the half-open cell convention.
    [[nodiscard]] double operator()(double x) const;
};

/// π_M(u): value u_k at x_k, affine in between (hat-basis expansion).
struct PiecewiseLinear {
    GridVector nodes;

    [[nodiscard]] int M() const { return static_cast<int>(nodes.size()); }
    [[nodiscard]] double operator()(double x) const;
};

inline constexpr int kDefaultFineResolution = 4096;

/// Uniform samples of a function on 𝕋; sample j sits at (j+1)/M_ref, the same
/// indexing as GridVector.
struct FineGridFunction {
    std::vector<double> samples;

    [[nodiscard]] int M_ref() const { return static_cast<int>(samples.size()); }
};

enum class ResampleMode { step, linear };

using ScalarField = std::function<double(double)>;

/// ‖σ_M(u)‖_{L^p(𝕋)}, which coincides with ‖u‖_{p,M}.
double step_lp_norm(const StepFunction& s, double p);

/// π_M(u)(x) for any real x (wrapped onto 𝕋).
double linear_eval(const PiecewiseLinear& f, double x);

/// Exact ‖π_M(u)‖_{L^p(𝕋)} for p ∈ {1, 2}; throws InvalidArgument otherwise.
double linear_lp_norm(const PiecewiseLinear& f, double p);

/// Exact ∫_𝕋 |∂_x π_M(w)|² dx = M Σ (w_{k+1} - w_k)².
double linear_gradient_l2_sq(const PiecewiseLinear& f);

/// Nodal samples f(x_k), k = 1..M.
GridVector interpolate_nodal(const ScalarField& f, int M);

/// Samples of σ_M(u) or π_M(u) on the fine grid; M must divide M_ref.
FineGridFunction resample(const GridVector& u, int M_ref, ResampleMode mode);

/// Samples f((j+1)/M_ref).
FineGridFunction sample_function(const ScalarField& f, int M_ref);

/// Fourier-side H^s norm of the fine samples, summing over |k| ≤ M_ref/2 with
/// weights (1+k²)^s, or |k|^{2s} (k ≠ 0) when homogeneous. For homogeneous
/// negative s the mean must vanish unless remove_mean is requested.
double fourier_sobolev_norm(const FineGridFunction& F, double s, bool homogeneous, bool remove_mean = false);

/// Pieces of a trip-norm: the snapshot sup of the negative norm squared and the
/// trapezoidal time integral of the squared L² norm.
struct TripNormParts {
    double sup_neg_sq = 0.0;
    double integral_l2_sq = 0.0;

    [[nodiscard]] double squared() const { return sup_neg_sq + integral_l2_sq; }
    [[nodiscard]] double value() const;
};

/// |||·|||_T with the inhomogeneous H⁻¹ norm; snapshots may repeat a time stamp.
TripNormParts trip_norm_continuous_parts(std::span<const double> times, std::span<const FineGridFunction> path);
double trip_norm_continuous(std::span<const double> times, std::span<const FineGridFunction> path);

/// |||·|||_{T,M} built on ‖·‖₋₁,M and ‖σ_M(·)‖_{L²}.
TripNormParts trip_norm_discrete_parts(std::span<const double> times, std::span<const GridVector> path);
double trip_norm_discrete(std::span<const double> times, std::span<const GridVector> path);

/// Errors of f - π_M ι_M f. Ḣ¹ and Ḣ⁻¹ use the integer-frequency convention of
/// fourier_sobolev_norm, so the Ḣ¹ seminorm is ‖g′‖_{L²}/(2π).
struct InterpolationErrors {
    double l2 = 0.0;
    double hdot_minus1 = 0.0;
    double hdot1 = 0.0;
};

InterpolationErrors interpolation_errors(const ScalarField& f, const ScalarField& fprime, int M,
                                         int M_ref = kDefaultFineResolution);

/// (M‖π_M u‖_{H⁻¹} + ‖π_M u‖_{L²}) / (M‖u‖₋₁,M + ‖π_M u‖_{L²}), the two sides of the
/// discrete/continuous negative-norm equivalence.
double negative_norm_equivalence_ratio(const GridVector& u, int M_ref = kDefaultFineResolution);

}  // namespace sktlab
