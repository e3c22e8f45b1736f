#include "sktlab/walkers.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <istream>
#include <ostream>

#include "sktlab/errors.hpp"
#include "sktlab/reconstruct.hpp"

namespace sktlab {

namespace {

constexpr std::array<char, 8> kLogMagic = {'S', 'K', 'T', 'L', 'O', 'G', '\0', '\0'};
constexpr std::uint64_t kRebuildInterval = std::uint64_t{1} << 20;

template <typename T>
void put_le(std::ostream& out, T value) {
    using U = std::make_unsigned_t<T>;
    U bits = static_cast<U>(value);
    std::array<char, sizeof(T)> bytes{};
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFFu);
    out.write(bytes.data(), bytes.size());
}

void put_f64(std::ostream& out, double x) { put_le(out, std::bit_cast<std::uint64_t>(x)); }

template <typename T>
T get_le(std::istream& in) {
    std::array<unsigned char, sizeof(T)> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    if (!in) throw IoError("event log truncated");
    std::make_unsigned_t<T> bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        bits |= static_cast<std::make_unsigned_t<T>>(bytes[i]) << (8 * i);
    return static_cast<T>(bits);
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get_le<std::uint64_t>(in)); }

std::int64_t round_count(double x, std::int64_t N, const char* which) {
    if (!std::isfinite(x)) throw InvalidArgument(std::string(which) + ": non-finite initial density");
    if (x < 0.0) throw NegativeDensity(std::string(which) + ": negative initial density");
    // nearbyint follows the current rounding mode, which is ties-to-even by default
    return static_cast<std::int64_t>(std::nearbyint(static_cast<double>(N) * x));
}

}  // namespace

GridVector CountsState::U() const {
    GridVector out(n_u.size());
    for (std::size_t i = 0; i < n_u.size(); ++i) out[i] = static_cast<double>(n_u[i]) / static_cast<double>(N);
    return out;
}

GridVector CountsState::V() const {
    GridVector out(n_v.size());
    for (std::size_t i = 0; i < n_v.size(); ++i) out[i] = static_cast<double>(n_v[i]) / static_cast<double>(N);
    return out;
}

std::int64_t CountsState::total_u() const {
    std::int64_t s = 0;
    for (auto n : n_u) s += n;
    return s;
}

std::int64_t CountsState::total_v() const {
    std::int64_t s = 0;
    for (auto n : n_v) s += n;
    return s;
}

bool CountsState::nonnegative() const {
    return std::all_of(n_u.begin(), n_u.end(), [](auto n) { return n >= 0; }) &&
           std::all_of(n_v.begin(), n_v.end(), [](auto n) { return n >= 0; });
}

CountsState init_from_density(const std::function<double(double)>& u0, const std::function<double(double)>& v0,
                              int M, std::int64_t N) {
    if (M < 3) throw InvalidArgument("init_from_density: M must be >= 3");
    return init_from_density(interpolate_nodal(u0, M), interpolate_nodal(v0, M), N);
}

CountsState init_from_density(const GridVector& u0, const GridVector& v0, std::int64_t N) {
    if (u0.size() != v0.size()) throw DimensionMismatch("init_from_density: profiles differ in length");
    if (u0.size() < 3) throw InvalidArgument("init_from_density: M must be >= 3");
    if (N < 1) throw InvalidArgument("init_from_density: N must be positive");
    CountsState s;
    s.M = static_cast<int>(u0.size());
    s.N = N;
    s.n_u.resize(u0.size());
    s.n_v.resize(v0.size());
    for (std::size_t i = 0; i < u0.size(); ++i) {
        s.n_u[i] = round_count(u0[i], N, "u0");
        s.n_v[i] = round_count(v0[i], N, "v0");
    }
    return s;
}

ReplicaRng::ReplicaRng(std::uint64_t seed, std::uint64_t replica) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replica), static_cast<std::uint32_t>(replica >> 32)};
    engine_.seed(seq);
}

double ReplicaRng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double ReplicaRng::exponential(double rate) { return -std::log1p(-uniform()) / rate; }

bool ReplicaRng::coin() { return (engine_() >> 63) != 0; }

double channel_weight(const CountsState& state, const ModelParams& params, std::size_t channel) {
    const auto m = static_cast<std::size_t>(state.M);
    const double scale = 2.0 * static_cast<double>(state.M) * static_cast<double>(state.M);
    const double inv_n = 1.0 / static_cast<double>(state.N);
    if (channel < m) {
        const double n = static_cast<double>(state.n_u[channel]);
        return scale * n * (params.d1 + params.a12 * static_cast<double>(state.n_v[channel]) * inv_n);
    }
    const std::size_t j = channel - m;
    const double n = static_cast<double>(state.n_v[j]);
    return scale * n * (params.d2 + params.a21 * static_cast<double>(state.n_u[j]) * inv_n);
}

RateTree::RateTree(const CountsState& state, const ModelParams& params) { rebuild(state, params); }

void RateTree::rebuild(const CountsState& state, const ModelParams& params) {
    const std::size_t n = 2 * static_cast<std::size_t>(state.M);
    weights_.assign(n, 0.0);
    tree_.assign(n + 1, 0.0);
    for (std::size_t c = 0; c < n; ++c) {
        weights_[c] = channel_weight(state, params, c);
        tree_[c + 1] += weights_[c];
        const std::size_t parent = (c + 1) + ((c + 1) & (~(c + 1) + 1));
        if (parent <= n) tree_[parent] += tree_[c + 1];
    }
    log_span_ = static_cast<int>(std::bit_floor(n));
}

double RateTree::total() const {
    double s = 0.0;
    for (std::size_t i = weights_.size(); i > 0; i &= i - 1) s += tree_[i];
    return s;
}

void RateTree::set(std::size_t channel, double w) {
    const double delta = w - weights_[channel];
    weights_[channel] = w;
    if (delta == 0.0) return;
    for (std::size_t i = channel + 1; i <= weights_.size(); i += i & (~i + 1)) tree_[i] += delta;
}

void RateTree::refresh_site(const CountsState& state, const ModelParams& params, int site) {
    const auto j = static_cast<std::size_t>(site);
    set(j, channel_weight(state, params, j));
    set(j + static_cast<std::size_t>(state.M), channel_weight(state, params, j + static_cast<std::size_t>(state.M)));
}

std::size_t RateTree::find(double target) const {
    const std::size_t n = weights_.size();
    std::size_t pos = 0;
    for (auto step = static_cast<std::size_t>(log_span_); step > 0; step >>= 1) {
        if (pos + step <= n && tree_[pos + step] <= target) {
            pos += step;
            target -= tree_[pos];
        }
    }
    return std::min(pos, n - 1);
}

double RateTree::audit(const CountsState& state, const ModelParams& params) const {
    double worst = 0.0;
    std::vector<double> fresh(weights_.size());
    for (std::size_t c = 0; c < weights_.size(); ++c) {
        fresh[c] = channel_weight(state, params, c);
        const double scale = std::max(std::abs(fresh[c]), 1e-300);
        if (fresh[c] != weights_[c]) worst = std::max(worst, std::abs(fresh[c] - weights_[c]) / scale);
    }
    const double exact_total = compensated_sum(fresh);
    if (exact_total > 0.0) worst = std::max(worst, std::abs(total() - exact_total) / exact_total);
    return worst;
}

JumpEvent sample_event(const RateTree& tree, int M, ReplicaRng& rng) {
    const double total = tree.total();
    if (!(total > 0.0)) throw FrozenState("sample_event: total jump rate is zero");
    JumpEvent ev;
    ev.dt = rng.exponential(total);
    std::size_t channel;
    do {
        channel = tree.find(rng.uniform() * total);
    } while (tree.weight(channel) <= 0.0);
    const auto m = static_cast<std::size_t>(M);
    ev.species = channel < m ? 1 : 2;
    ev.site = static_cast<int>(channel < m ? channel : channel - m);
    ev.direction = rng.coin() ? 1 : -1;
    return ev;
}

void apply_event(CountsState& state, RateTree& tree, const ModelParams& params, const JumpEvent& ev) {
    auto& counts = ev.species == 1 ? state.n_u : state.n_v;
    const int M = state.M;
    const int dst = ((ev.site + ev.direction) % M + M) % M;
    if (counts[static_cast<std::size_t>(ev.site)] <= 0)
        throw NegativeDensity("apply_event: no individual to move at site " + std::to_string(ev.site));
    --counts[static_cast<std::size_t>(ev.site)];
    ++counts[static_cast<std::size_t>(dst)];
    tree.refresh_site(state, params, ev.site);
    tree.refresh_site(state, params, dst);
}

JumpEvent step(CountsState& state, RateTree& tree, const ModelParams& params, ReplicaRng& rng) {
    const JumpEvent ev = sample_event(tree, state.M, rng);
    apply_event(state, tree, params, ev);
    return ev;
}

EventLogWriter::EventLogWriter(std::ostream& out, const EventLogHeader& header) : out_(out) {
    out_.write(kLogMagic.data(), kLogMagic.size());
    put_le<std::uint32_t>(out_, header.version);
    put_le<std::int32_t>(out_, header.params.M);
    put_le<std::int64_t>(out_, header.params.N);
    put_f64(out_, header.params.d1);
    put_f64(out_, header.params.d2);
    put_f64(out_, header.params.a12);
    put_f64(out_, header.params.a21);
    put_f64(out_, header.params.T);
    put_le<std::uint64_t>(out_, header.seed);
    put_le<std::uint64_t>(out_, header.replica);
    if (!out_) throw IoError("event log: failed to write header");
}

void EventLogWriter::write(double time, const JumpEvent& ev) {
    put_f64(out_, time);
    put_le<std::uint8_t>(out_, static_cast<std::uint8_t>(ev.species));
    put_le<std::uint32_t>(out_, static_cast<std::uint32_t>(ev.site));
    put_le<std::int8_t>(out_, static_cast<std::int8_t>(ev.direction));
    if (!out_) throw IoError("event log: write failed");
    ++count_;
}

EventLog read_event_log(std::istream& in) {
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kLogMagic) throw IoError("event log: bad magic");
    EventLog log;
    log.header.version = get_le<std::uint32_t>(in);
    if (log.header.version != 1) throw IoError("event log: unsupported version " + std::to_string(log.header.version));
    log.header.params.M = get_le<std::int32_t>(in);
    log.header.params.N = get_le<std::int64_t>(in);
    log.header.params.d1 = get_f64(in);
    log.header.params.d2 = get_f64(in);
    log.header.params.a12 = get_f64(in);
    log.header.params.a21 = get_f64(in);
    log.header.params.T = get_f64(in);
    log.header.seed = get_le<std::uint64_t>(in);
    log.header.replica = get_le<std::uint64_t>(in);
    while (in.peek() != std::char_traits<char>::eof()) {
        LoggedEvent ev;
        ev.time = get_f64(in);
        ev.species = get_le<std::uint8_t>(in);
        ev.site = get_le<std::uint32_t>(in);
        ev.direction = get_le<std::int8_t>(in);
        log.events.push_back(ev);
    }
    return log;
}

PathRecord simulate_path(const CountsState& state0, const ModelParams& params, std::span<const double> schedule,
                         const SimulationOptions& options) {
    check_schedule(schedule);
    if (state0.M < 3 || state0.n_u.size() != static_cast<std::size_t>(state0.M) ||
        state0.n_v.size() != static_cast<std::size_t>(state0.M))
        throw DimensionMismatch("simulate_path: malformed initial state");
    if (!state0.nonnegative()) throw NegativeDensity("simulate_path: negative initial counts");

    const auto m = static_cast<std::size_t>(state0.M);
    const double n_scale = static_cast<double>(state0.N);
    CountsState state = state0;
    RateTree tree(state, params);
    ReplicaRng rng(options.seed, options.replica);
    const std::int64_t mass_u = state.total_u();
    const std::int64_t mass_v = state.total_v();

    // lazily updated per-site integrals in count units
    std::vector<double> acc_u(m, 0.0), acc_v(m, 0.0), acc_uv(m, 0.0), last(m, 0.0);
    auto flush = [&](std::size_t j, double t) {
        const double dt = t - last[j];
        if (dt > 0.0) {
            const auto nu = static_cast<double>(state.n_u[j]);
            const auto nv = static_cast<double>(state.n_v[j]);
            acc_u[j] += nu * dt;
            acc_v[j] += nv * dt;
            acc_uv[j] += nu * nv * dt;
        }
        last[j] = t;
    };

    PathRecord rec;
    rec.params = params;
    rec.params.M = state0.M;
    rec.params.N = state0.N;
    auto snapshot = [&](double t) {
        GridVector iu(m), iv(m), iuv(m);
        for (std::size_t j = 0; j < m; ++j) {
            flush(j, t);
            iu[j] = acc_u[j] / n_scale;
            iv[j] = acc_v[j] / n_scale;
            iuv[j] = acc_uv[j] / (n_scale * n_scale);
        }
        rec.times.push_back(t);
        rec.states.push_back(state);
        rec.int_u.push_back(std::move(iu));
        rec.int_v.push_back(std::move(iv));
        rec.int_uv.push_back(std::move(iuv));
    };

    std::size_t next = 0;
    double t = 0.0;
    while (next < schedule.size()) {
        if (!(tree.total() > 0.0)) {
            while (next < schedule.size()) snapshot(schedule[next++]);
            break;
        }
        const JumpEvent ev = sample_event(tree, state.M, rng);
        const double t_next = t + ev.dt;
        while (next < schedule.size() && schedule[next] < t_next) snapshot(schedule[next++]);
        if (next == schedule.size()) break;

        const auto src = static_cast<std::size_t>(ev.site);
        const auto dst = static_cast<std::size_t>(((ev.site + ev.direction) % state.M + state.M) % state.M);
        flush(src, t_next);
        flush(dst, t_next);
        apply_event(state, tree, params, ev);
        t = t_next;
        ++rec.events;
        if (options.log != nullptr) options.log->write(t, ev);
        if (options.check_every_event &&
            (!state.nonnegative() || state.total_u() != mass_u || state.total_v() != mass_v))
            throw NegativeDensity("simulate_path: conservation or positivity broken at event " +
                                  std::to_string(rec.events));
        if (options.audit_interval > 0 && rec.events % options.audit_interval == 0)
            rec.audit_max_rel = std::max(rec.audit_max_rel, tree.audit(state, params));
        if (rec.events % kRebuildInterval == 0) tree.rebuild(state, params);
    }
    for (const auto& s : rec.states)
        if (s.total_u() != mass_u || s.total_v() != mass_v || !s.nonnegative())
            throw NegativeDensity("simulate_path: conservation or positivity broken at a snapshot");
    return rec;
}

DriftIntegrals drift_integrals(const PathRecord& path) {
    if (!path.has_integrals()) throw InvalidArgument("drift_integrals: path carries no time integrals");
    const PeriodicLaplacian lap(path.params.M);
    const ModelParams& p = path.params;
    DriftIntegrals out;
    out.u.reserve(path.size());
    out.v.reserve(path.size());
    for (std::size_t s = 0; s < path.size(); ++s) {
        out.u.push_back(lap.apply(p.d1 * path.int_u[s] + p.a12 * path.int_uv[s]));
        out.v.push_back(lap.apply(p.d2 * path.int_v[s] + p.a21 * path.int_uv[s]));
    }
    return out;
}

MartingalePath extract_martingale(const PathRecord& path) {
    const DriftIntegrals drift = drift_integrals(path);
    const GridVector u0 = path.states.front().U();
    const GridVector v0 = path.states.front().V();
    MartingalePath out;
    out.times = path.times;
    for (std::size_t s = 0; s < path.size(); ++s) {
        out.u.push_back(path.states[s].U() - u0 - drift.u[s]);
        out.v.push_back(path.states[s].V() - v0 - drift.v[s]);
    }
    return out;
}

GridVector predicted_qv(const PathRecord& path, int species, std::size_t snapshot) {
    if (!path.has_integrals()) throw InvalidArgument("predicted_qv: path carries no time integrals");
    if (species != 1 && species != 2) throw InvalidArgument("predicted_qv: species must be 1 or 2");
    if (snapshot >= path.size()) throw InvalidArgument("predicted_qv: snapshot index out of range");
    const ModelParams& p = path.params;
    const GridVector& I = species == 1 ? path.int_u[snapshot] : path.int_v[snapshot];
    const GridVector& J = path.int_uv[snapshot];
    const double d = species == 1 ? p.d1 : p.d2;
    const double a = species == 1 ? p.a12 : p.a21;
    const double scale = static_cast<double>(p.M) * static_cast<double>(p.M) / static_cast<double>(p.N);
    const long m = p.M;
    GridVector out(static_cast<std::size_t>(m));
    for (long i = 0; i < m; ++i) {
        const double own = d * (2.0 * I.periodic(i) + I.periodic(i + 1) + I.periodic(i - 1));
        const double cross = a * (2.0 * J.periodic(i) + J.periodic(i + 1) + J.periodic(i - 1));
        out[static_cast<std::size_t>(i)] = scale * (own + cross);
    }
    return out;
}

double predicted_qv_site(const PathRecord& path, int species, int site) {
    if (site < 0 || site >= path.params.M) throw InvalidArgument("predicted_qv_site: site out of range");
    return predicted_qv(path, species, path.size() - 1)[static_cast<std::size_t>(site)];
}

}  // namespace sktlab
