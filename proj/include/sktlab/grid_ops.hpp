#pragma once

// Vectors on the discrete torus T_M = {1/M, 2/M, ..., 1}, the periodic lattice
// Laplacian Δ_M and the rescaled norms built on it.
//
// Storage is 0-based: entry i holds the value at site i+1, i.e. at x_{i+1} = (i+1)/M.
// Neighbours are periodic, so entry M-1 is adjacent to entry 0.

#include <cstddef>
#include <initializer_list>
#include <limits>
#include <memory>
#include <span>
#include <vector>

namespace sktlab {

class GridVector {
public:
    GridVector() = default;
    explicit GridVector(std::size_t m, double fill = 0.0) : values_(m, fill) {}
    GridVector(std::initializer_list<double> init) : values_(init) {}
    explicit GridVector(std::vector<double> values) : values_(std::move(values)) {}

    static GridVector constant(std::size_t m, double c) { return GridVector(m, c); }
    /// Unit vector e_j for the 0-based entry j.
    static GridVector unit(std::size_t m, std::size_t j);

    [[nodiscard]] std::size_t size() const { return values_.size(); }
    [[nodiscard]] bool empty() const { return values_.empty(); }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }
    /// Periodic access; any integer index is wrapped onto 0..M-1.
    [[nodiscard]] double periodic(long i) const;

    [[nodiscard]] std::span<const double> span() const { return values_; }
    [[nodiscard]] std::span<double> span() { return values_; }
    [[nodiscard]] const std::vector<double>& vector() const { return values_; }

    auto begin() { return values_.begin(); }
    auto end() { return values_.end(); }
    [[nodiscard]] auto begin() const { return values_.begin(); }
    [[nodiscard]] auto end() const { return values_.end(); }

    GridVector& operator+=(const GridVector& other);
    GridVector& operator-=(const GridVector& other);
    GridVector& operator*=(double s);

    [[nodiscard]] bool all_finite() const;

    friend bool operator==(const GridVector&, const GridVector&) = default;

private:
    std::vector<double> values_;
};

GridVector operator+(GridVector a, const GridVector& b);
GridVector operator-(GridVector a, const GridVector& b);
GridVector operator*(double s, GridVector a);
GridVector operator*(GridVector a, double s);

/// Componentwise product x ⊙ y.
GridVector hadamard(const GridVector& x, const GridVector& y);
/// Componentwise square root x^{1/2}; entries must be non-negative.
GridVector sqrt_of(const GridVector& x);

/// Neumaier-compensated sum.
double compensated_sum(std::span<const double> values);

/// [u]_M = (1/M) Σ u_i.
double mean_of(const GridVector& u);
/// ũ = u - [u]_M 1_M, with the mean of the result re-centred so it vanishes to rounding.
GridVector tilde(const GridVector& u);

inline constexpr double kInfNorm = std::numeric_limits<double>::infinity();

/// ‖u‖_{p,M} = ((1/M) Σ |u_i|^p)^{1/p}, or max |u_i| for p = ∞.
double lp_norm(const GridVector& u, double p);
/// (u | v)_M = (1/M) Σ u_i v_i.
double inner(const GridVector& u, const GridVector& v);

/// B_M u with B_M the circulant (1/6, 2/3, 1/6) mass matrix of the hat basis.
GridVector apply_mass_matrix(const GridVector& u);

class RealFft;

struct LaplacianMode {
    int k;
    double lambda;  ///< 4 M² sin²(πk/M), eigenvalue of -Δ_M
};

/// The periodic lattice Laplacian Δ_M = M² tridiag(1, -2, 1) with corner couplings.
/// Immutable after construction; safe to share between threads.
class PeriodicLaplacian {
public:
    explicit PeriodicLaplacian(int M);

    [[nodiscard]] int size() const { return M_; }

    /// (Δ_M u)_i = M² (u_{i+1} + u_{i-1} - 2 u_i).
    [[nodiscard]] GridVector apply(const GridVector& u) const;

    /// λ_k = 4M² sin²(πk/M), k = 0..M-1 (spectrum of -Δ_M).
    [[nodiscard]] std::span<const double> eigenvalues() const { return lambda_; }
    [[nodiscard]] std::vector<LaplacianMode> eigen_system() const;

    /// Mean-zero Φ with Δ_M Φ = w. Throws NonZeroMean unless |[w]_M| ≤ 1e-12 ‖w‖_{2,M}.
    [[nodiscard]] GridVector solve_poisson(const GridVector& w) const;

    /// ‖u‖²_{-1,M} = -(ũ | Δ_M⁻¹ ũ)_M + [u]²_M.
    [[nodiscard]] double neg_sobolev_norm_sq(const GridVector& u) const;
    [[nodiscard]] double neg_sobolev_norm(const GridVector& u) const;

private:
    void check_size(const GridVector& u) const;

    int M_;
    std::vector<double> lambda_;
    std::shared_ptr<const RealFft> fft_;
};

/// Closed-form λ_k without building an operator.
double laplacian_eigenvalue(int M, int k);

/// A time-ordered sequence of grid vectors. Consecutive entries may share a time
/// stamp to record the two one-sided limits of a càdlàg path at a jump.
struct Trajectory {
    std::vector<double> times;
    std::vector<GridVector> values;

    [[nodiscard]] std::size_t size() const { return times.size(); }
    void push(double t, GridVector v) {
        times.push_back(t);
        values.push_back(std::move(v));
    }
};

/// Trapezoidal ∫ over the time grid of the scalar samples g.
double trapezoid(std::span<const double> times, std::span<const double> g);
/// Running trapezoidal integral; entry s is ∫_{t_0}^{t_s}.
std::vector<double> cumulative_trapezoid(std::span<const double> times, std::span<const double> g);

/// Validates a snapshot schedule: non-empty, non-decreasing, starting at 0.
void check_schedule(std::span<const double> times, bool allow_repeats = false);

}  // namespace sktlab
