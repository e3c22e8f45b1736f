#pragma once

// Event-driven simulation of the two-species repulsive random walk on 𝕋_M.
//
// Each species-1 individual at site j jumps at total rate 2M²(d1 + a12 V_j) to
// j-1 or j+1 with probability 1/2; species 2 likewise with (d2 + a21 U_j).
// Densities are U = n_u/N, V = n_v/N.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "sktlab/grid_ops.hpp"
#include "sktlab/params.hpp"

namespace sktlab {

struct CountsState {
    int M = 0;
    std::int64_t N = 1;
    std::vector<std::int64_t> n_u;
    std::vector<std::int64_t> n_v;

    [[nodiscard]] GridVector U() const;
    [[nodiscard]] GridVector V() const;
    [[nodiscard]] std::int64_t total_u() const;
    [[nodiscard]] std::int64_t total_v() const;
    [[nodiscard]] bool nonnegative() const;

    friend bool operator==(const CountsState&, const CountsState&) = default;
};

/// Rounds N·u0(x_i), N·v0(x_i) to the nearest integer (ties to even).
CountsState init_from_density(const std::function<double(double)>& u0, const std::function<double(double)>& v0,
                              int M, std::int64_t N);
CountsState init_from_density(const GridVector& u0, const GridVector& v0, std::int64_t N);

/// Random stream for one replica, seeded from (study seed, replica index).
class ReplicaRng {
public:
    ReplicaRng(std::uint64_t seed, std::uint64_t replica);

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Exponential with the given rate.
    double exponential(double rate);
    bool coin();

private:
    std::mt19937_64 engine_;
};

/// Binary indexed tree over the 2M channels; channel j < M is (species 1, site j),
/// channel M + j is (species 2, site j).
class RateTree {
public:
    RateTree() = default;
    RateTree(const CountsState& state, const ModelParams& params);

    [[nodiscard]] std::size_t channels() const { return weights_.size(); }
    [[nodiscard]] double weight(std::size_t channel) const { return weights_[channel]; }
    [[nodiscard]] double total() const;

    void set(std::size_t channel, double w);
    /// Recomputes all four channels of a site from the state.
    void refresh_site(const CountsState& state, const ModelParams& params, int site);
    /// Rebuilds the tree from scratch, discarding accumulated rounding.
    void rebuild(const CountsState& state, const ModelParams& params);

    /// Smallest channel whose inclusive prefix sum exceeds target.
    [[nodiscard]] std::size_t find(double target) const;

    /// Max relative deviation between stored weights/total and a full recomputation.
    [[nodiscard]] double audit(const CountsState& state, const ModelParams& params) const;

private:
    std::vector<double> weights_;
    std::vector<double> tree_;  // 1-based Fenwick array
    int log_span_ = 0;
};

/// Weight of a channel: 2M²·n·(d + a·n_other/N).
double channel_weight(const CountsState& state, const ModelParams& params, std::size_t channel);

struct JumpEvent {
    double dt = 0.0;
    int species = 1;  ///< 1 or 2
    int site = 0;     ///< 0-based source entry
    int direction = 1;
};

/// Samples waiting time, channel and direction without touching the state.
JumpEvent sample_event(const RateTree& tree, int M, ReplicaRng& rng);
/// Moves one individual and refreshes the affected channels.
void apply_event(CountsState& state, RateTree& tree, const ModelParams& params, const JumpEvent& ev);
/// sample_event + apply_event; throws FrozenState when the total rate vanishes.
JumpEvent step(CountsState& state, RateTree& tree, const ModelParams& params, ReplicaRng& rng);

struct EventLogHeader {
    std::uint32_t version = 1;
    ModelParams params;
    std::uint64_t seed = 0;
    std::uint64_t replica = 0;
};

struct LoggedEvent {
    double time = 0.0;
    std::uint8_t species = 1;
    std::uint32_t site = 0;
    std::int8_t direction = 1;
};

/// Little-endian event log: magic "SKTLOG\0\0", header, then fixed-size records
/// (f64 time, u8 species, u32 site, i8 direction).
class EventLogWriter {
public:
    EventLogWriter(std::ostream& out, const EventLogHeader& header);
    void write(double time, const JumpEvent& ev);
    [[nodiscard]] std::uint64_t count() const { return count_; }

private:
    std::ostream& out_;
    std::uint64_t count_ = 0;
};

struct EventLog {
    EventLogHeader header;
    std::vector<LoggedEvent> events;
};

EventLog read_event_log(std::istream& in);

struct SimulationOptions {
    std::uint64_t seed = 0;
    std::uint64_t replica = 0;
    /// Recompute every channel each this many events and keep the worst deviation (0 = never).
    std::uint64_t audit_interval = 0;
    /// Check non-negativity and conservation after every event.
    bool check_every_event = false;
    EventLogWriter* log = nullptr;
};

/// Trajectory of the counts at the snapshot times with exact time integrals of
/// U, V and U⊙V (piecewise constant between events).
struct PathRecord {
    ModelParams params;
    std::vector<double> times;
    std::vector<CountsState> states;
    std::vector<GridVector> int_u;
    std::vector<GridVector> int_v;
    std::vector<GridVector> int_uv;
    std::uint64_t events = 0;
    double audit_max_rel = 0.0;

    [[nodiscard]] std::size_t size() const { return times.size(); }
    [[nodiscard]] bool has_integrals() const { return int_u.size() == times.size() && !times.empty(); }
};

PathRecord simulate_path(const CountsState& state0, const ModelParams& params, std::span<const double> schedule,
                         const SimulationOptions& options = {});

/// ∫₀ᵗ Δ_M(d1 U + a12 U⊙V) ds and ∫₀ᵗ Δ_M(d2 V + a21 U⊙V) ds at every snapshot.
struct DriftIntegrals {
    std::vector<GridVector> u;
    std::vector<GridVector> v;
};
DriftIntegrals drift_integrals(const PathRecord& path);

/// ℳ(t) = U(t) - U(0) - drift, for both species.
struct MartingalePath {
    std::vector<double> times;
    std::vector<GridVector> u;
    std::vector<GridVector> v;
};
MartingalePath extract_martingale(const PathRecord& path);

/// Predicted ⟨ℳ_i⟩ at snapshot s for every site i of the given species.
GridVector predicted_qv(const PathRecord& path, int species, std::size_t snapshot);
/// Same quantity for a single site at the final snapshot.
double predicted_qv_site(const PathRecord& path, int species, int site);

}  // namespace sktlab
