#pragma once

// Seeded replica studies: stochastic and deterministic gap rates, the rough L²
// estimate, quadratic-variation matching, duality certification and stability.

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "sktlab/duality.hpp"
#include "sktlab/params.hpp"
#include "sktlab/semidiscrete.hpp"
#include "sktlab/walkers.hpp"

namespace sktlab {

enum class StudyKind { gap_vs_n, det_order, rough, qv, duality, stability };

std::string study_name(StudyKind kind);
StudyKind study_from_name(const std::string& name);

/// Ordered numeric diagnostics; booleans are stored as 0/1.
using Diagnostics = std::vector<std::pair<std::string, double>>;

struct StudyConfig {
    StudyKind kind = StudyKind::gap_vs_n;
    ModelParams params;
    std::vector<int> M_grid;
    std::vector<std::int64_t> N_grid;
    int replicas = 64;
    double T = 0.05;
    int snapshot_count = 65;
    std::uint64_t seed = 20240601;
    int M_ref = 512;
    int threads = 0;
    /// Floor on N/M² below which a row is flagged.
    double scale_floor = 4.0;

    /// Constant target densities for the stochastic gap study and stability.
    double c1 = 1.0;
    double c2 = 1.0;
    /// Amplitude of the cosine/sine perturbation of smooth initial profiles.
    double amplitude = 0.1;
    /// Perturbation sizes for the stability study.
    std::vector<double> eps_grid;
    /// Duality suite sizes.
    int regular_instances = 100;
    int singular_instances = 50;
    int combined_instances = 20;
    std::vector<double> a_grid;
    /// Write wall-clock time into the result (breaks byte-identical output).
    bool record_runtime = false;
};

/// Defaults reproducing the desk-scale studies of each kind.
StudyConfig default_config(StudyKind kind);
/// Reads a JSON config; keys absent from the file keep the kind's defaults.
StudyConfig load_config(const std::string& path);
StudyConfig parse_config(const std::string& text);

struct StudyRow {
    int M = 0;
    std::int64_t N = 0;
    int R = 0;
    double T = 0.0;
    double mean_sq_gap = 0.0;
    double stderr_ = 0.0;
    Diagnostics extra;
};

struct StudyResult {
    std::string study;
    std::uint64_t seed = 0;
    std::vector<StudyRow> rows;
    double slope = 0.0;
    double slope_err = 0.0;
    double runtime_s = 0.0;
    bool passed = true;
    std::string message;
    Diagnostics summary;
};

/// OLS fit of log(y) against log(x); slope_err propagates the per-point
/// standard errors σ_y/y through the least-squares weights.
struct LogLogFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_err = 0.0;
};
LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& y_err = {});

struct MeanStat {
    double mean = 0.0;
    double stderr_ = 0.0;
    double stddev = 0.0;
};
MeanStat mean_stat(const std::vector<double>& samples);

/// Runs fn(i) for i in [0, n) on up to `threads` workers; results land in slot i so
/// any reduction done afterwards in index order is independent of the thread count.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

/// Effective thread budget: SKTLAB_THREADS if set, else requested, else hardware.
int resolve_threads(int requested);

/// Reference solution sampled on the coarse nodes, with Taylor remainders.
struct TargetPath {
    std::vector<double> times;
    std::vector<GridVector> u;
    std::vector<GridVector> v;
    std::vector<GridVector> r;  ///< may be empty for exact targets
    std::vector<GridVector> s;
    bool constant = false;
};

TargetPath constant_target(double c1, double c2, int M, const std::vector<double>& times);

/// Samples a fine semi-discrete trajectory on the coarse nodes and evaluates
/// r^M = (Δ_{M_ref} G)|_nodes - Δ_M(G|_nodes) with G = d1 u + a12 u v (and s^M likewise).
TargetPath restrict_reference(const OdeTrajectory& reference, const ModelParams& params, int M);

/// Z = û - U, W = v̂ - V and the coefficients of their evolution system.
struct GapDecomposition {
    std::vector<double> times;
    std::vector<GridVector> Z;
    std::vector<GridVector> W;
    std::vector<GridVector> Lambda;  ///< d1 + a12 V
    std::vector<GridVector> Gamma;   ///< d2 + a21 U
    std::vector<GridVector> F;       ///< a12 û⊙W
    std::vector<GridVector> G;       ///< a21 v̂⊙Z
    double lambda_T = 0.0;
    double gamma_T = 0.0;
};

GapDecomposition decompose_gap(const PathRecord& path, const TargetPath& target);

/// Largest residual of Z(t) - Z(0) - ∫Δ_M(Z⊙Λ + F) - X(t) over snapshots for a
/// constant target, with the time integrals taken from the path accumulators.
double gap_system_residual(const PathRecord& path, const TargetPath& target);

StudyResult run_gap_vs_N(const StudyConfig& config);
StudyResult run_deterministic_order(const StudyConfig& config);
StudyResult run_rough_estimate(const StudyConfig& config);
StudyResult run_qv_study(const StudyConfig& config);
StudyResult run_duality_suite(const StudyConfig& config);
StudyResult run_stability_study(const StudyConfig& config);
StudyResult run_study(const StudyConfig& config);

enum class OutputFormat { csv, json };

std::string to_csv(const StudyResult& result);
std::string to_json(const StudyResult& result);
StudyResult result_from_json(const std::string& text);

/// Writes <dir>/<study>.<csv|json> plus <dir>/<study>.meta.json (thread budget,
/// wall time); returns the path of the main file.
std::string emit_results(const StudyResult& result, const std::string& dir, OutputFormat format,
                         double wall_time_s = 0.0, int threads = 1);

}  // namespace sktlab
