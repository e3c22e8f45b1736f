#pragma once

#include <complex>
#include <memory>
#include <span>
#include <vector>

typedef struct fftw_plan_s* fftw_plan;

namespace sktlab {

/// Real-to-complex / complex-to-real DFT of a fixed length backed by FFTW.
/// Plans are created once under a global lock; execution uses the new-array
/// interface so a single instance can be shared across threads.
class RealFft {
public:
    explicit RealFft(int n);
    ~RealFft();
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    [[nodiscard]] int size() const { return n_; }
    [[nodiscard]] int spectrum_size() const { return n_ / 2 + 1; }

    /// c_k = Σ_j x_j e^{-2πi jk/n}, k = 0..n/2 (unnormalised).
    [[nodiscard]] std::vector<std::complex<double>> forward(std::span<const double> x) const;
    /// x_j = Σ_k c_k e^{2πi jk/n} over the full Hermitian spectrum (unnormalised).
    [[nodiscard]] std::vector<double> backward(std::span<const std::complex<double>> c) const;

private:
    int n_;
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
};

/// Process-wide cache of transforms keyed by length.
std::shared_ptr<const RealFft> shared_fft(int n);

/// Hermitian multiplicity of half-spectrum index k for a length-n real transform.
inline double hermitian_weight(int k, int n) {
    if (k == 0) return 1.0;
    if (n % 2 == 0 && k == n / 2) return 1.0;
    return 2.0;
}

}  // namespace sktlab
