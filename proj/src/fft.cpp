#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>

namespace sktlab {

namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

RealFft::RealFft(int n) : n_(n) {
    if (n < 1) throw std::invalid_argument("RealFft: length must be positive");
    std::vector<double> real(static_cast<std::size_t>(n));
    std::vector<std::complex<double>> spec(static_cast<std::size_t>(spectrum_size()));
    auto* c = reinterpret_cast<fftw_complex*>(spec.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    std::lock_guard lock(planner_mutex());
    forward_ = fftw_plan_dft_r2c_1d(n, real.data(), c, flags);
    backward_ = fftw_plan_dft_c2r_1d(n, c, real.data(), flags | FFTW_DESTROY_INPUT);
    if (forward_ == nullptr || backward_ == nullptr) throw std::runtime_error("RealFft: FFTW planning failed");
}

RealFft::~RealFft() {
    std::lock_guard lock(planner_mutex());
    if (forward_ != nullptr) fftw_destroy_plan(forward_);
    if (backward_ != nullptr) fftw_destroy_plan(backward_);
}

std::vector<std::complex<double>> RealFft::forward(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != n_) throw std::invalid_argument("RealFft::forward: length mismatch");
    std::vector<double> in(x.begin(), x.end());
    std::vector<std::complex<double>> out(static_cast<std::size_t>(spectrum_size()));
    fftw_execute_dft_r2c(forward_, in.data(), reinterpret_cast<fftw_complex*>(out.data()));
    return out;
}

std::vector<double> RealFft::backward(std::span<const std::complex<double>> c) const {
    if (static_cast<int>(c.size()) != spectrum_size())
        throw std::invalid_argument("RealFft::backward: spectrum length mismatch");
    std::vector<std::complex<double>> in(c.begin(), c.end());
    std::vector<double> out(static_cast<std::size_t>(n_));
    fftw_execute_dft_c2r(backward_, reinterpret_cast<fftw_complex*>(in.data()), out.data());
    return out;
}

std::shared_ptr<const RealFft> shared_fft(int n) {
    static std::mutex cache_mutex;
    static std::map<int, std::shared_ptr<const RealFft>> cache;
    std::lock_guard lock(cache_mutex);
    auto& slot = cache[n];
    if (!slot) slot = std::make_shared<const RealFft>(n);
    return slot;
}

}  // namespace sktlab
