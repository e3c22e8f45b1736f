#include "sktlab/reconstruct.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "fft.hpp"
#include "sktlab/errors.hpp"

namespace sktlab {

namespace {

// 5-point Gauss-Legendre rule on [0, 1].
constexpr std::array<double, 5> kGaussNodes = {0.046910077030668, 0.230765344947158, 0.5, 0.769234655052842,
                                               0.953089922969332};
constexpr std::array<double, 5> kGaussWeights = {0.118463442528095, 0.239314335249683, 0.284444444444444,
                                                 0.239314335249683, 0.118463442528095};

double wrap_unit(double x) {
    double y = x - std::floor(x);
    if (y >= 1.0) y -= 1.0;
    return y;
}

void require_divides(int M, int M_ref) {
    if (M < 1 || M_ref < M || M_ref % M != 0)
        throw InvalidArgument("resolution " + std::to_string(M) + " does not divide M_ref = " + std::to_string(M_ref));
}

void check_path(std::span<const double> times, std::size_t n) {
    if (times.size() < 2) throw InvalidArgument("trip norm needs at least two snapshots");
    if (times.size() != n) throw DimensionMismatch("trip norm: times and snapshots differ in length");
    check_schedule(times, true);
}

// Exact ∫ over a cell of width h of |ℓ|^p for the affine ℓ with end values a, b.
double cell_integral(double a, double b, double h, double p) {
    if (p == 2.0) return h * (a * a + a * b + b * b) / 3.0;
    const double aa = std::abs(a);
    const double bb = std::abs(b);
    if (a * b >= 0.0) return h * (aa + bb) / 2.0;
    return h * (a * a + b * b) / (2.0 * (aa + bb));
}

}  // namespace

double StepFunction::operator()(double x) const {
    const int m = M();
    // the cell (x_{k-1}, x_k] holds u_k; x = 0 is identified with x_M = 1
    double y = wrap_unit(x);
    if (y == 0.0) y = 1.0;
    int k = static_cast<int>(std::ceil(y * m));
    k = std::clamp(k, 1, m);
    return values[static_cast<std::size_t>(k - 1)];
}

double PiecewiseLinear::operator()(double x) const { return linear_eval(*this, x); }

double step_lp_norm(const StepFunction& s, double p) { return lp_norm(s.values, p); }

double linear_eval(const PiecewiseLinear& f, double x) {
    const int m = f.M();
    if (m < 1) throw DimensionMismatch("linear_eval: empty nodal vector");
    const double s = wrap_unit(x) * m;
    const double pf = std::floor(s);
    const double theta = s - pf;
    const long p = static_cast<long>(pf);
    return (1.0 - theta) * f.nodes.periodic(p - 1) + theta * f.nodes.periodic(p);
}

double linear_lp_norm(const PiecewiseLinear& f, double p) {
    if (p != 1.0 && p != 2.0) throw InvalidArgument("linear_lp_norm: only p = 1 and p = 2 are supported");
    const int m = f.M();
    if (m < 1) throw DimensionMismatch("linear_lp_norm: empty nodal vector");
    const double h = 1.0 / m;
    std::vector<double> pieces(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k)
        pieces[static_cast<std::size_t>(k)] = cell_integral(f.nodes.periodic(k), f.nodes.periodic(k + 1), h, p);
    const double total = compensated_sum(pieces);
    return p == 2.0 ? std::sqrt(total) : total;
}

double linear_gradient_l2_sq(const PiecewiseLinear& f) {
    const int m = f.M();
    std::vector<double> pieces(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
        const double d = f.nodes.periodic(k + 1) - f.nodes.periodic(k);
        pieces[static_cast<std::size_t>(k)] = d * d;
    }
    return static_cast<double>(m) * compensated_sum(pieces);
}

GridVector interpolate_nodal(const ScalarField& f, int M) {
    if (M < 1) throw InvalidArgument("interpolate_nodal: M must be positive");
    GridVector out(static_cast<std::size_t>(M));
    for (int k = 1; k <= M; ++k) out[static_cast<std::size_t>(k - 1)] = f(static_cast<double>(k) / M);
    return out;
}

FineGridFunction resample(const GridVector& u, int M_ref, ResampleMode mode) {
    const int m = static_cast<int>(u.size());
    require_divides(m, M_ref);
    const int r = M_ref / m;
    FineGridFunction out;
    out.samples.resize(static_cast<std::size_t>(M_ref));
    for (int j = 0; j < M_ref; ++j) {
        double value;
        if (mode == ResampleMode::step) {
            value = u[static_cast<std::size_t>(j / r)];
        } else {
            // fine point (j+1)/M_ref lies between coarse nodes q/m and (q+1)/m
            const int q = (j + 1) / r;
            const int rem = (j + 1) % r;
            const double theta = static_cast<double>(rem) / r;
            value = (1.0 - theta) * u.periodic(q - 1) + theta * u.periodic(q);
        }
        out.samples[static_cast<std::size_t>(j)] = value;
    }
    return out;
}

FineGridFunction sample_function(const ScalarField& f, int M_ref) {
    return FineGridFunction{interpolate_nodal(f, M_ref).vector()};
}

double fourier_sobolev_norm(const FineGridFunction& F, double s, bool homogeneous, bool remove_mean) {
    const int n = F.M_ref();
    if (n < 1) throw DimensionMismatch("fourier_sobolev_norm: no samples");
    const auto fft = shared_fft(n);
    auto c = fft->forward(F.samples);
    for (auto& ck : c) ck /= static_cast<double>(n);
    if (homogeneous && s < 0.0) {
        const double rms = lp_norm(GridVector(F.samples), 2.0);
        const double mean = c[0].real();
        if (!remove_mean && std::abs(mean) > 1e-10 * std::max(1.0, rms))
            throw NonZeroMean("homogeneous negative Sobolev norm of a function with mean " + std::to_string(mean));
    }
    std::vector<double> terms;
    terms.reserve(c.size());
    for (std::size_t k = 0; k < c.size(); ++k) {
        const double kk = static_cast<double>(k);
        double weight;
        if (homogeneous) {
            if (k == 0) continue;
            weight = std::pow(kk * kk, s);
        } else {
            weight = std::pow(1.0 + kk * kk, s);
        }
        terms.push_back(hermitian_weight(static_cast<int>(k), n) * weight * std::norm(c[k]));
    }
    return std::sqrt(compensated_sum(terms));
}

double TripNormParts::value() const { return std::sqrt(squared()); }

TripNormParts trip_norm_continuous_parts(std::span<const double> times, std::span<const FineGridFunction> path) {
    check_path(times, path.size());
    TripNormParts parts;
    std::vector<double> l2sq(path.size());
    for (std::size_t s = 0; s < path.size(); ++s) {
        const double neg = fourier_sobolev_norm(path[s], -1.0, false);
        parts.sup_neg_sq = std::max(parts.sup_neg_sq, neg * neg);
        const double l2 = fourier_sobolev_norm(path[s], 0.0, false);
        l2sq[s] = l2 * l2;
    }
    parts.integral_l2_sq = trapezoid(times, l2sq);
    return parts;
}

double trip_norm_continuous(std::span<const double> times, std::span<const FineGridFunction> path) {
    return trip_norm_continuous_parts(times, path).value();
}

TripNormParts trip_norm_discrete_parts(std::span<const double> times, std::span<const GridVector> path) {
    check_path(times, path.size());
    const PeriodicLaplacian lap(static_cast<int>(path.front().size()));
    TripNormParts parts;
    std::vector<double> l2sq(path.size());
    for (std::size_t s = 0; s < path.size(); ++s) {
        parts.sup_neg_sq = std::max(parts.sup_neg_sq, lap.neg_sobolev_norm_sq(path[s]));
        const double l2 = lp_norm(path[s], 2.0);
        l2sq[s] = l2 * l2;
    }
    parts.integral_l2_sq = trapezoid(times, l2sq);
    return parts;
}

double trip_norm_discrete(std::span<const double> times, std::span<const GridVector> path) {
    return trip_norm_discrete_parts(times, path).value();
}

InterpolationErrors interpolation_errors(const ScalarField& f, const ScalarField& fprime, int M, int M_ref) {
    require_divides(M, M_ref);
    const PiecewiseLinear interp{interpolate_nodal(f, M)};
    const double h = 1.0 / M;
    std::vector<double> l2_terms;
    std::vector<double> h1_terms;
    l2_terms.reserve(static_cast<std::size_t>(M) * kGaussNodes.size());
    h1_terms.reserve(l2_terms.capacity());
    for (int k = 0; k < M; ++k) {
        const double left = k * h;
        const double slope = (interp.nodes.periodic(k) - interp.nodes.periodic(k - 1)) * M;
        for (std::size_t q = 0; q < kGaussNodes.size(); ++q) {
            const double x = left + kGaussNodes[q] * h;
            const double e = f(x) - linear_eval(interp, x);
            const double de = fprime(x) - slope;
            l2_terms.push_back(kGaussWeights[q] * h * e * e);
            h1_terms.push_back(kGaussWeights[q] * h * de * de);
        }
    }
    InterpolationErrors out;
    out.l2 = std::sqrt(compensated_sum(l2_terms));
    out.hdot1 = std::sqrt(compensated_sum(h1_terms)) / (2.0 * std::numbers::pi);

    FineGridFunction err = sample_function(f, M_ref);
    const FineGridFunction lin = resample(interp.nodes, M_ref, ResampleMode::linear);
    for (std::size_t j = 0; j < err.samples.size(); ++j) err.samples[j] -= lin.samples[j];
    out.hdot_minus1 = fourier_sobolev_norm(err, -1.0, true, true);
    return out;
}

double negative_norm_equivalence_ratio(const GridVector& u, int M_ref) {
    const int m = static_cast<int>(u.size());
    const PeriodicLaplacian lap(m);
    const FineGridFunction fine = resample(u, M_ref, ResampleMode::linear);
    const double l2 = linear_lp_norm(PiecewiseLinear{u}, 2.0);
    const double continuous = m * fourier_sobolev_norm(fine, -1.0, false) + l2;
    const double discrete = m * lap.neg_sobolev_norm(u) + l2;
    return continuous / discrete;
}

}  // namespace sktlab
