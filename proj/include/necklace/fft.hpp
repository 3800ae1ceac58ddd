#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>

#include <fftw3.h>

#include "necklace/error.hpp"

namespace necklace {

namespace detail {
// FFTW planning is not thread-safe; execution with the new-array interface is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};
struct FftwPlanDestroy {
  void operator()(fftw_plan_s* p) const noexcept {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(p);
  }
};
using PlanHandle = std::unique_ptr<fftw_plan_s, FftwPlanDestroy>;
}  // namespace detail

/// Unnormalized complex 1-D DFT of fixed size: forward uses e^{-2πikn/N}, backward e^{+2πikn/N}.
/// Planned with FFTW_ESTIMATE so results do not depend on timing.
class ComplexFft {
 public:
  explicit ComplexFft(std::size_t n) : n_(n) {
    if (n == 0) throw ConfigError("FFT size must be positive");
    buf_.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n)));
    out_.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n)));
    std::lock_guard lock(detail::fftw_planner_mutex());
    const int ni = static_cast<int>(n);
    forward_.reset(fftw_plan_dft_1d(ni, buf_.get(), out_.get(), FFTW_FORWARD, FFTW_ESTIMATE));
    backward_.reset(fftw_plan_dft_1d(ni, buf_.get(), out_.get(), FFTW_BACKWARD, FFTW_ESTIMATE));
    if (!forward_ || !backward_) throw SolverError("FFTW planning failed");
  }

  std::size_t size() const noexcept { return n_; }

  void forward(std::span<const std::complex<double>> in, std::span<std::complex<double>> out) {
    run(forward_.get(), in, out);
  }
  void backward(std::span<const std::complex<double>> in, std::span<std::complex<double>> out) {
    run(backward_.get(), in, out);
  }

 private:
  void run(fftw_plan p, std::span<const std::complex<double>> in, std::span<std::complex<double>> out) {
    if (in.size() != n_ || out.size() != n_) throw ConfigError("FFT buffer size mismatch");
    auto* b = reinterpret_cast<std::complex<double>*>(buf_.get());
    std::copy(in.begin(), in.end(), b);
    fftw_execute_dft(p, buf_.get(), out_.get());
    const auto* o = reinterpret_cast<const std::complex<double>*>(out_.get());
    std::copy(o, o + n_, out.begin());
  }

  std::size_t n_;
  std::unique_ptr<fftw_complex[], detail::FftwFree> buf_, out_;
  detail::PlanHandle forward_, backward_;
};

/// Real-to-half-complex DFT of fixed size n (n/2 + 1 coefficients), unnormalized.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    if (n < 2 || n % 2 != 0) throw ConfigError("real FFT size must be even and >= 2");
    real_.reset(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
    spec_.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1))));
    std::lock_guard lock(detail::fftw_planner_mutex());
    const int ni = static_cast<int>(n);
    forward_.reset(fftw_plan_dft_r2c_1d(ni, real_.get(), spec_.get(), FFTW_ESTIMATE));
    backward_.reset(fftw_plan_dft_c2r_1d(ni, spec_.get(), real_.get(), FFTW_ESTIMATE));
    if (!forward_ || !backward_) throw SolverError("FFTW planning failed");
  }

  std::size_t size() const noexcept { return n_; }
  std::size_t spectrum_size() const noexcept { return n_ / 2 + 1; }

  void forward(std::span<const double> in, std::span<std::complex<double>> out) {
    if (in.size() != n_ || out.size() != spectrum_size()) throw ConfigError("FFT buffer size mismatch");
    std::copy(in.begin(), in.end(), real_.get());
    fftw_execute_dft_r2c(forward_.get(), real_.get(), spec_.get());
    const auto* s = reinterpret_cast<const std::complex<double>*>(spec_.get());
    std::copy(s, s + spectrum_size(), out.begin());
  }

  void backward(std::span<const std::complex<double>> in, std::span<double> out) {
    if (in.size() != spectrum_size() || out.size() != n_) throw ConfigError("FFT buffer size mismatch");
    auto* s = reinterpret_cast<std::complex<double>*>(spec_.get());
    std::copy(in.begin(), in.end(), s);
    fftw_execute_dft_c2r(backward_.get(), spec_.get(), real_.get());
    std::copy(real_.get(), real_.get() + n_, out.begin());
  }

 private:
  std::size_t n_;
  std::unique_ptr<double[], detail::FftwFree> real_;
  std::unique_ptr<fftw_complex[], detail::FftwFree> spec_;
  detail::PlanHandle forward_, backward_;
};

}  // namespace necklace
