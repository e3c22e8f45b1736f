#include "sktlab/grid_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fft.hpp"
#include "sktlab/errors.hpp"

namespace sktlab {

namespace {

void require_same_size(const GridVector& a, const GridVector& b, const char* where) {
    if (a.size() != b.size())
        throw DimensionMismatch(std::string(where) + ": sizes " + std::to_string(a.size()) + " and " +
                                std::to_string(b.size()));
}

}  // namespace

GridVector GridVector::unit(std::size_t m, std::size_t j) {
    GridVector e(m, 0.0);
    e[j] = 1.0;
    return e;
}

double GridVector::periodic(long i) const {
    const long m = static_cast<long>(values_.size());
    long r = i % m;
    if (r < 0) r += m;
    return values_[static_cast<std::size_t>(r)];
}

GridVector& GridVector::operator+=(const GridVector& other) {
    require_same_size(*this, other, "GridVector::operator+=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
}

GridVector& GridVector::operator-=(const GridVector& other) {
    require_same_size(*this, other, "GridVector::operator-=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
    return *this;
}

GridVector& GridVector::operator*=(double s) {
    for (auto& x : values_) x *= s;
    return *this;
}

bool GridVector::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
}

GridVector operator+(GridVector a, const GridVector& b) { return a += b; }
GridVector operator-(GridVector a, const GridVector& b) { return a -= b; }
GridVector operator*(double s, GridVector a) { return a *= s; }
GridVector operator*(GridVector a, double s) { return a *= s; }

GridVector hadamard(const GridVector& x, const GridVector& y) {
    require_same_size(x, y, "hadamard");
    GridVector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
    return out;
}

GridVector sqrt_of(const GridVector& x) {
    GridVector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] < 0.0) throw InvalidArgument("sqrt_of: negative entry");
        out[i] = std::sqrt(x[i]);
    }
    return out;
}

double compensated_sum(std::span<const double> values) {
    double sum = 0.0;
    double c = 0.0;
    for (double x : values) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            c += (sum - t) + x;
        else
            c += (x - t) + sum;
        sum = t;
    }
    return sum + c;
}

double mean_of(const GridVector& u) {
    if (u.empty()) throw DimensionMismatch("mean_of: empty vector");
    return compensated_sum(u.span()) / static_cast<double>(u.size());
}

GridVector tilde(const GridVector& u) {
    GridVector out = u;
    const double m = mean_of(u);
    for (auto& x : out) x -= m;
    // one refinement pass removes the rounding left by the first subtraction
    const double residual = mean_of(out);
    for (auto& x : out) x -= residual;
    return out;
}

double lp_norm(const GridVector& u, double p) {
    if (u.empty()) throw DimensionMismatch("lp_norm: empty vector");
    if (!(p >= 1.0)) throw InvalidArgument("lp_norm: p must be >= 1");
    if (std::isinf(p)) {
        double m = 0.0;
        for (double x : u) m = std::max(m, std::abs(x));
        return m;
    }
    std::vector<double> powers(u.size());
    if (p == 1.0) {
        std::transform(u.begin(), u.end(), powers.begin(), [](double x) { return std::abs(x); });
        return compensated_sum(powers) / static_cast<double>(u.size());
    }
    if (p == 2.0) {
        std::transform(u.begin(), u.end(), powers.begin(), [](double x) { return x * x; });
        return std::sqrt(compensated_sum(powers) / static_cast<double>(u.size()));
    }
    std::transform(u.begin(), u.end(), powers.begin(), [p](double x) { return std::pow(std::abs(x), p); });
    return std::pow(compensated_sum(powers) / static_cast<double>(u.size()), 1.0 / p);
}

double inner(const GridVector& u, const GridVector& v) {
    require_same_size(u, v, "inner");
    std::vector<double> prod(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) prod[i] = u[i] * v[i];
    return compensated_sum(prod) / static_cast<double>(u.size());
}

GridVector apply_mass_matrix(const GridVector& u) {
    const std::size_t m = u.size();
    if (m < 3) throw InvalidArgument("apply_mass_matrix: M must be >= 3");
    GridVector out(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double left = u[(i + m - 1) % m];
        const double right = u[(i + 1) % m];
        out[i] = (2.0 / 3.0) * u[i] + (left + right) / 6.0;
    }
    return out;
}

double laplacian_eigenvalue(int M, int k) {
    const double s = std::sin(std::numbers::pi * static_cast<double>(k) / static_cast<double>(M));
    return 4.0 * static_cast<double>(M) * static_cast<double>(M) * s * s;
}

PeriodicLaplacian::PeriodicLaplacian(int M) : M_(M) {
    if (M < 3) throw InvalidArgument("PeriodicLaplacian: M must be >= 3, got " + std::to_string(M));
    lambda_.resize(static_cast<std::size_t>(M));
    for (int k = 0; k < M; ++k) lambda_[static_cast<std::size_t>(k)] = laplacian_eigenvalue(M, k);
    lambda_[0] = 0.0;
    fft_ = shared_fft(M);
}

void PeriodicLaplacian::check_size(const GridVector& u) const {
    if (static_cast<int>(u.size()) != M_)
        throw DimensionMismatch("PeriodicLaplacian: expected length " + std::to_string(M_) + ", got " +
                                std::to_string(u.size()));
}

GridVector PeriodicLaplacian::apply(const GridVector& u) const {
    check_size(u);
    const std::size_t m = u.size();
    const double scale = static_cast<double>(M_) * static_cast<double>(M_);
    GridVector out(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double left = u[(i + m - 1) % m];
        const double right = u[(i + 1) % m];
        out[i] = scale * ((right - u[i]) - (u[i] - left));
    }
    return out;
}

std::vector<LaplacianMode> PeriodicLaplacian::eigen_system() const {
    std::vector<LaplacianMode> modes;
    modes.reserve(lambda_.size());
    for (int k = 0; k < M_; ++k) modes.push_back({k, lambda_[static_cast<std::size_t>(k)]});
    return modes;
}

GridVector PeriodicLaplacian::solve_poisson(const GridVector& w) const {
    check_size(w);
    const double mean = mean_of(w);
    const double norm = lp_norm(w, 2.0);
    if (std::abs(mean) > 1e-12 * norm)
        throw NonZeroMean("solve_poisson: right-hand side has mean " + std::to_string(mean) +
                          " (must lie in the range of the Laplacian)");
    auto c = fft_->forward(w.span());
    c[0] = 0.0;
    for (std::size_t k = 1; k < c.size(); ++k) c[k] *= -1.0 / lambda_[k];
    auto phi = fft_->backward(c);
    for (auto& x : phi) x /= static_cast<double>(M_);
    return tilde(GridVector(std::move(phi)));
}

double PeriodicLaplacian::neg_sobolev_norm_sq(const GridVector& u) const {
    check_size(u);
    const auto c = fft_->forward(u.span());
    std::vector<double> terms;
    terms.reserve(c.size());
    for (std::size_t k = 1; k < c.size(); ++k)
        terms.push_back(hermitian_weight(static_cast<int>(k), M_) * std::norm(c[k]) / lambda_[k]);
    const double m2 = static_cast<double>(M_) * static_cast<double>(M_);
    const double mean = mean_of(u);
    return compensated_sum(terms) / m2 + mean * mean;
}

double PeriodicLaplacian::neg_sobolev_norm(const GridVector& u) const { return std::sqrt(neg_sobolev_norm_sq(u)); }

double trapezoid(std::span<const double> times, std::span<const double> g) {
    if (times.size() != g.size()) throw DimensionMismatch("trapezoid: times and samples differ in length");
    std::vector<double> pieces;
    pieces.reserve(times.size());
    for (std::size_t s = 1; s < times.size(); ++s) pieces.push_back(0.5 * (times[s] - times[s - 1]) * (g[s] + g[s - 1]));
    return compensated_sum(pieces);
}

std::vector<double> cumulative_trapezoid(std::span<const double> times, std::span<const double> g) {
    if (times.size() != g.size()) throw DimensionMismatch("cumulative_trapezoid: length mismatch");
    std::vector<double> out(times.size(), 0.0);
    double sum = 0.0;
    double c = 0.0;
    for (std::size_t s = 1; s < times.size(); ++s) {
        const double x = 0.5 * (times[s] - times[s - 1]) * (g[s] + g[s - 1]);
        const double t = sum + x;
        c += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
        sum = t;
        out[s] = sum + c;
    }
    return out;
}

void check_schedule(std::span<const double> times, bool allow_repeats) {
    if (times.empty()) throw InvalidArgument("schedule is empty");
    if (times.front() != 0.0) throw InvalidArgument("schedule must start at t = 0");
    for (std::size_t s = 1; s < times.size(); ++s) {
        if (!std::isfinite(times[s])) throw InvalidArgument("schedule contains a non-finite time");
        if (times[s] < times[s - 1] || (!allow_repeats && times[s] == times[s - 1]))
            throw InvalidArgument("schedule is not sorted at index " + std::to_string(s));
    }
}

}  // namespace sktlab
