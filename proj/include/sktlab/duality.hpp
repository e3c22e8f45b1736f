#pragma once

// Lattice Kolmogorov equations z' = Δ_M[z⊙μ + f] + r, their singular variant
// z_d(t) = ∫ Δ_M[z_d⊙μ] + x_d(t), and numerical certificates for the
// associated duality estimates.

#include <functional>
#include <string>
#include <vector>

#include "sktlab/grid_ops.hpp"
#include "sktlab/params.hpp"
#include "sktlab/semidiscrete.hpp"

namespace sktlab {

/// A time-indexed grid vector.
using TimeField = std::function<GridVector(double)>;

/// Diffusivity μ(t) with a certified lower bound α > 0.
struct EnvCoefficient {
    TimeField mu;
    double alpha = 1.0;
};

/// Constant-in-time field.
TimeField constant_field(GridVector value);
/// Zero field of length M.
TimeField zero_field(int M);
/// Piecewise-linear interpolation of snapshots (times may repeat at jumps; the
/// later entry wins at a repeated time).
TimeField interpolate_snapshots(std::vector<double> times, std::vector<GridVector> values);

/// Piecewise-constant càdlàg forcing: x_d(t) = initial + Σ_{τ_k ≤ t} increment_k.
struct JumpForcing {
    GridVector initial;
    std::vector<double> jump_times;
    std::vector<GridVector> increments;

    [[nodiscard]] GridVector at(double t) const;
    [[nodiscard]] int M() const { return static_cast<int>(initial.size()); }
};

/// Builds the piecewise-constant forcing that takes value values[s] on [times[s], times[s+1]).
JumpForcing jump_forcing_from_snapshots(const std::vector<double>& times, const std::vector<GridVector>& values);

/// Regular forcing x_r with derivative; x_r(0) must vanish.
struct RegularForcing {
    TimeField value;
    TimeField derivative;
};

struct KolmogorovConfig {
    double step_safety = 0.05;
    double fixed_step = 0.0;
    /// Snapshot schedule; when empty, snapshot_count uniform times on [0, T].
    std::vector<double> snapshot_times;
    int snapshot_count = 257;
    /// Also record the state after every integration step.
    bool dense = true;
};

struct KolmogorovSolution {
    std::vector<double> times;
    std::vector<GridVector> z;
    /// Running ∫₀ᵗ [r]_M ds integrated alongside z with the same quadrature.
    std::vector<double> mean_source;
    /// Singular solves: x_d at every snapshot (left limit at a jump's first entry).
    std::vector<GridVector> forcing;
    double T = 0.0;
    long steps = 0;

    [[nodiscard]] std::size_t size() const { return times.size(); }
};

KolmogorovSolution solve_kolmogorov(const GridVector& z0, const EnvCoefficient& env, const TimeField& f,
                                    const TimeField& r, double T, const KolmogorovConfig& config = {});

KolmogorovSolution solve_kolmogorov_singular(const EnvCoefficient& env, const JumpForcing& x_d, double T,
                                             const KolmogorovConfig& config = {});

/// Itemised inequality check. For regular forcing the per-time form is the hard
/// assertion; the stated sup form is reported both as is and with prefactor 2.
struct DualityReport {
    std::string kind;
    double a = 1.0;
    double alpha = 1.0;
    double T = 0.0;

    double lhs_sup = 0.0;       ///< sup_t ‖z(t)‖²₋₁,M over snapshots
    double lhs_integral = 0.0;  ///< ∫₀ᵀ ‖z⊙μ^{1/2}‖²_{2,M}

    double initial_term = 0.0;   ///< ‖z(0)‖²₋₁,M
    double mean_mu_term = 0.0;   ///< [z(0)]²_M ∫[μ]_M
    double f_term = 0.0;         ///< (1/α)∫‖f‖²_{2,M}
    double r_term = 0.0;         ///< (T + T∫[μ] + 1/α) ∫‖r‖²_{2,M}
    double singular_term = 0.0;  ///< sup‖x_d‖²₋₁,M + ∫[μ][x_d]²

    double rhs_stated = 0.0;
    double slack = 0.0;  ///< rhs_stated - (lhs_sup + lhs_integral)
    double ratio = 0.0;  ///< (lhs_sup + lhs_integral) / rhs_stated, or / singular_term

    double per_time_min_slack = 0.0;  ///< analytic slack of the per-time form, worst snapshot
    double per_time_scale = 0.0;      ///< right side at the worst snapshot
    double tolerance_budget = 0.0;    ///< 1e-6 · scale
    double mean_residual = 0.0;       ///< max |[z(t)] - [z(0)] - ∫[r]|

    bool pass_per_time = true;
    bool pass_sup_stated = true;
    bool pass_sup_prefactor2 = true;

    [[nodiscard]] double lhs() const { return lhs_sup + lhs_integral; }
    [[nodiscard]] std::string to_json() const;
    static DualityReport from_json(const std::string& text);
};

inline constexpr double kDualityRelTol = 1e-6;

DualityReport verify_duality(const KolmogorovSolution& solution, const EnvCoefficient& env, const TimeField& f,
                             const TimeField& r, double a);

DualityReport verify_singular(const KolmogorovSolution& solution, const EnvCoefficient& env);

/// Solves z = z_r + z_d for z(t) = z0 + ∫Δ_M[z⊙μ + f] + x_r(t) + x_d(t) and
/// checks the three-group estimate. grid_points sets the shared schedule.
struct CombinedResult {
    DualityReport report;
    KolmogorovSolution regular;
    KolmogorovSolution singular;
    std::vector<GridVector> z;
};

CombinedResult verify_combined(const GridVector& z0, const EnvCoefficient& env, const TimeField& f,
                               const RegularForcing& x_r, const JumpForcing& x_d, double a, double T,
                               int grid_points = 1025);

/// Discrete analog of the stability estimate between a target pair (ū, v̄) and a
/// second pair (u, v), all on a shared snapshot schedule.
struct StabilityReport {
    double gap_sq = 0.0;  ///< |||z|||²_{T,M} + |||w|||²_{T,M}
    double z_sq = 0.0;
    double w_sq = 0.0;
    double rhs = 0.0;  ///< initial ‖·‖²₋₁,M gaps + T([z0]²‖μ1(v0)‖₁ + [w0]²‖μ2(u0)‖₁)
    double ratio = 0.0;
    double smallness_margin = 0.0;  ///< d1d2/(a12a21) - max‖ū‖∞ max‖v̄‖∞
    bool smallness_ok = true;
    bool certified = true;
};

StabilityReport stability_gap(const OdeTrajectory& target, const OdeTrajectory& other, const ModelParams& params);

}  // namespace sktlab
