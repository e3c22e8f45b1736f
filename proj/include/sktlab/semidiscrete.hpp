#pragma once

// The semi-discrete cross-diffusion system
//   u' = Δ_M(d1 u + a12 u⊙v),  v' = Δ_M(d2 v + a21 u⊙v)
// integrated by the classical fourth-order Runge-Kutta method.

#include <vector>

#include "sktlab/grid_ops.hpp"
#include "sktlab/params.hpp"

namespace sktlab {

struct OdeState {
    GridVector u;
    GridVector v;
    double time = 0.0;
};

enum class NegativityPolicy { warn, reject };

struct IntegratorConfig {
    /// Step is step_safety / (4M² μ_max), recomputed at every snapshot boundary.
    double step_safety = 0.5;
    /// When positive, overrides the stability rule (each snapshot interval is split
    /// into equal steps no longer than this).
    double fixed_step = 0.0;
    /// Explicit snapshot times; when empty, snapshot_count uniform times on [0, T].
    std::vector<double> snapshot_times;
    int snapshot_count = 65;
    NegativityPolicy negativity = NegativityPolicy::warn;
};

struct OdeTrajectory {
    std::vector<double> times;
    std::vector<GridVector> u;
    std::vector<GridVector> v;
    long steps = 0;
    /// Steps after which some component was below -1e-12.
    long negative_steps = 0;
    double min_value = 0.0;

    [[nodiscard]] std::size_t size() const { return times.size(); }
};

struct OdeRhs {
    GridVector du;
    GridVector dv;
};

OdeRhs rhs(const GridVector& u, const GridVector& v, const ModelParams& params);

/// Uniform schedule of count points on [0, T] (count ≥ 2).
std::vector<double> uniform_schedule(double T, int count);

OdeTrajectory integrate(const OdeState& state0, const ModelParams& params, double T,
                        const IntegratorConfig& config = {});

/// c + ε e^{-d λ_k t} cos(2πk x_j) on the grid x_j = j/M.
GridVector exact_decoupled_mode(double c, double eps, int k, double d, int M, double t);

}  // namespace sktlab
