#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <string_view>
#include <vector>

#include "necklace/error.hpp"
#include "necklace/fft.hpp"

namespace necklace::kdv {

using cdouble = std::complex<double>;

/// How the nonlinear coefficient treats the normalization of the band-1 eigenfunction.
///  - paper:          ν₂ = -∂ₗ²μ(0) / (4c).
///  - measured_beta:  ν₂ scaled by the value of the normalized eigenfunction at l = 0, which is
///                    what a direct evaluation of β gives; A is then the amplitude of the
///                    comparison profile ε²A f⁰.
enum class Normalization { paper, measured_beta };

inline std::string_view to_string(Normalization n) {
  return n == Normalization::paper ? "paper" : "measured_beta";
}

inline Normalization normalization_from_string(std::string_view s) {
  if (s == "paper") return Normalization::paper;
  if (s == "measured" || s == "measured_beta") return Normalization::measured_beta;
  throw ConfigError("unknown coefficient normalization '" + std::string(s) + "' (expected paper|measured)");
}

/// ∂_T A = ν₁ ∂_X³ A + ν₂ ∂_X (A²), travelling with physical speed c.
struct KdVCoeffs {
  double c = 1;
  double nu1 = -0.5;
  double nu2 = -0.5;
  Normalization normalization = Normalization::paper;
};

/// c = √(d2/2), ν₁ = d4/(48c), ν₂ = -d2/(4c) (times `eigenfunction_scale` for measured_beta).
inline KdVCoeffs coeffs_from_band(double d2_mu0, double d4_mu0, Normalization normalization,
                                  double eigenfunction_scale = 1.0 / std::sqrt(3.0 * std::numbers::pi)) {
  if (!(d2_mu0 > 0) || !std::isfinite(d2_mu0))
    throw ConfigError("coeffs_from_band needs d2_mu0 > 0 (a band with positive curvature at l = 0)");
  if (!std::isfinite(d4_mu0)) throw ConfigError("coeffs_from_band needs a finite d4_mu0");
  KdVCoeffs k;
  k.c = std::sqrt(0.5 * d2_mu0);
  k.nu1 = d4_mu0 / (48.0 * k.c);
  k.nu2 = -d2_mu0 / (4.0 * k.c);
  if (normalization == Normalization::measured_beta) k.nu2 *= eigenfunction_scale;
  k.normalization = normalization;
  return k;
}

/// Periodic amplitude on X_i = x0 + i L/n, i = 0..n-1.
struct KdVState {
  double domain_length = 0;
  double x0 = 0;
  std::vector<double> A;
  double T = 0;

  std::size_t n_modes() const noexcept { return A.size(); }
  double dx() const noexcept { return domain_length / static_cast<double>(A.size()); }
  double X(std::size_t i) const noexcept { return x0 + static_cast<double>(i) * dx(); }
};

/// State centred on X = 0 sampled from `profile`.
template <class Fn>
KdVState make_state(double domain_length, std::size_t n_modes, Fn&& profile) {
  if (!(domain_length > 0)) throw ConfigError("KdV domain length must be positive");
  if (n_modes < 4 || n_modes % 2 != 0) throw ConfigError("KdV grid needs an even number of modes >= 4");
  KdVState s;
  s.domain_length = domain_length;
  s.x0 = -0.5 * domain_length;
  s.A.resize(n_modes);
  for (std::size_t i = 0; i < n_modes; ++i) s.A[i] = profile(s.X(i));
  return s;
}

inline double sech2(double x) {
  const double c = std::cosh(x);
  return 1.0 / (c * c);
}

/// Fixed-grid integrating-factor RK4: the dispersive part is integrated exactly in Fourier space
/// and the nonlinear flux is dealiased by the 2/3 rule.
class KdVSolver {
 public:
  KdVSolver(KdVCoeffs coeffs, double domain_length, std::size_t n_modes)
      : coeffs_(coeffs), length_(domain_length), n_(n_modes), fft_(n_modes), k_(n_modes / 2 + 1),
        keep_(n_modes / 2 + 1) {
    if (!(domain_length > 0)) throw ConfigError("KdV domain length must be positive");
    const std::size_t cutoff = n_modes / 3;
    for (std::size_t q = 0; q < k_.size(); ++q) {
      k_[q] = 2.0 * std::numbers::pi * static_cast<double>(q) / domain_length;
      keep_[q] = (q <= cutoff && q < n_modes / 2) ? 1.0 : 0.0;
    }
    work_r_.resize(n_);
    work_c_.resize(k_.size());
  }

  const KdVCoeffs& coeffs() const noexcept { return coeffs_; }

  void to_spectrum(const std::vector<double>& a, std::vector<cdouble>& a_hat) {
    a_hat.resize(k_.size());
    fft_.forward(a, a_hat);
  }
  void to_physical(const std::vector<cdouble>& a_hat, std::vector<double>& a) {
    a.resize(n_);
    fft_.backward(a_hat, a);
    const double inv = 1.0 / static_cast<double>(n_);
    for (auto& v : a) v *= inv;
  }

  /// ν₂ iK F[(F⁻¹ â)²] with dealiasing.
  void nonlinear(const std::vector<cdouble>& a_hat, std::vector<cdouble>& out) {
    for (std::size_t q = 0; q < k_.size(); ++q) work_c_[q] = a_hat[q] * keep_[q];
    to_physical(work_c_, work_r_);
    for (auto& v : work_r_) v *= v;
    out.resize(k_.size());
    fft_.forward(work_r_, out);
    for (std::size_t q = 0; q < k_.size(); ++q) out[q] *= cdouble(0.0, coeffs_.nu2 * k_[q]) * keep_[q];
  }

  /// Right-hand side ∂_T â of the full equation.
  void rhs(const std::vector<cdouble>& a_hat, std::vector<cdouble>& out) {
    nonlinear(a_hat, out);
    for (std::size_t q = 0; q < k_.size(); ++q) out[q] += linear(q) * a_hat[q];
  }

  void step(KdVState& s, double dT) {
    check_state(s);
    to_spectrum(s.A, a_);
    step_spectral(a_, dT);
    to_physical(a_, s.A);
    s.T += dT;
    for (double v : s.A)
      if (!std::isfinite(v)) {
        std::ostringstream msg;
        msg << "KdV solution blew up at T = " << s.T;
        throw SolverError(msg.str());
      }
  }

  /// Advances by exactly `span` using the smallest number of equal steps no larger than `max_dT`.
  void advance(KdVState& s, double span, double max_dT) {
    if (span < 0) throw ConfigError("KdV cannot integrate backwards");
    if (!(max_dT > 0)) throw ConfigError("KdV step must be positive");
    if (span == 0) return;
    const auto steps = static_cast<long>(std::ceil(span / max_dT - 1e-9));
    const double dT = span / static_cast<double>(steps);
    const double T_end = s.T + span;
    for (long i = 0; i < steps; ++i) step(s, dT);
    s.T = T_end;
  }

 private:
  cdouble linear(std::size_t q) const {
    const double k = k_[q];
    return cdouble(0.0, -coeffs_.nu1 * k * k * k) * keep_[q];
  }

  void check_state(const KdVState& s) const {
    if (s.A.size() != n_ || std::abs(s.domain_length - length_) > 1e-12 * length_)
      throw ConfigError("KdV state grid does not match the solver");
  }

  void step_spectral(std::vector<cdouble>& a, double dT) {
    if (dT != cached_dT_) {
      e_half_.resize(k_.size());
      for (std::size_t q = 0; q < k_.size(); ++q) e_half_[q] = std::exp(linear(q) * (0.5 * dT));
      cached_dT_ = dT;
    }
    const std::size_t m = k_.size();
    s1_.resize(m);
    s2_.resize(m);
    s3_.resize(m);
    s4_.resize(m);
    tmp_.resize(m);
    nonlinear(a, s1_);
    for (std::size_t q = 0; q < m; ++q) s1_[q] *= dT;
    for (std::size_t q = 0; q < m; ++q) tmp_[q] = e_half_[q] * (a[q] + 0.5 * s1_[q]);
    nonlinear(tmp_, s2_);
    for (std::size_t q = 0; q < m; ++q) s2_[q] *= dT;
    for (std::size_t q = 0; q < m; ++q) tmp_[q] = e_half_[q] * a[q] + 0.5 * s2_[q];
    nonlinear(tmp_, s3_);
    for (std::size_t q = 0; q < m; ++q) s3_[q] *= dT;
    for (std::size_t q = 0; q < m; ++q) tmp_[q] = e_half_[q] * (e_half_[q] * a[q] + s3_[q]);
    nonlinear(tmp_, s4_);
    for (std::size_t q = 0; q < m; ++q) s4_[q] *= dT;
    for (std::size_t q = 0; q < m; ++q) {
      const cdouble e = e_half_[q];
      a[q] = e * e * a[q] + (e * e * s1_[q] + 2.0 * e * (s2_[q] + s3_[q]) + s4_[q]) / 6.0;
    }
  }

  KdVCoeffs coeffs_;
  double length_;
  std::size_t n_;
  RealFft fft_;
  std::vector<double> k_, keep_;
  std::vector<double> work_r_;
  std::vector<cdouble> work_c_, a_, s1_, s2_, s3_, s4_, tmp_, e_half_;
  double cached_dT_ = -1;
};

inline KdVState kdv_step(const KdVState& state, const KdVCoeffs& coeffs, double dT) {
  KdVSolver solver(coeffs, state.domain_length, state.n_modes());
  KdVState out = state;
  solver.step(out, dT);
  return out;
}

/// Trajectory sampled at T = 0, every `stride` steps and at T_end.
inline std::vector<KdVState> kdv_solve(const KdVState& initial, const KdVCoeffs& coeffs, double T_end,
                                       double dT, long stride = 1) {
  if (T_end < 0) throw ConfigError("T_end must be >= 0");
  if (!(dT > 0)) throw ConfigError("dT must be positive");
  if (stride < 1) throw ConfigError("snapshot stride must be >= 1");
  std::vector<KdVState> out{initial};
  if (T_end == 0) return out;
  KdVSolver solver(coeffs, initial.domain_length, initial.n_modes());
  const auto steps = static_cast<long>(std::ceil(T_end / dT - 1e-9));
  const double h = T_end / static_cast<double>(steps);
  KdVState s = initial;
  for (long i = 1; i <= steps; ++i) {
    solver.step(s, h);
    if (i == steps) s.T = initial.T + T_end;
    if (i % stride == 0 || i == steps) out.push_back(s);
  }
  return out;
}

/// ∂_X A by spectral differentiation (Nyquist mode dropped).
inline KdVState derivative(const KdVState& s) {
  const std::size_t n = s.A.size();
  RealFft fft(n);
  std::vector<cdouble> spec(n / 2 + 1);
  fft.forward(s.A, spec);
  for (std::size_t q = 0; q < spec.size(); ++q) {
    const double k = 2.0 * std::numbers::pi * static_cast<double>(q) / s.domain_length;
    spec[q] *= (q == n / 2) ? cdouble(0.0) : cdouble(0.0, k / static_cast<double>(n));
  }
  KdVState out = s;
  fft.backward(spec, out.A);
  return out;
}

/// Periodic 4-point cubic Lagrange interpolation of A at X.
inline double interpolate(const KdVState& s, double X) {
  const auto n = static_cast<long>(s.A.size());
  double r = std::fmod((X - s.x0) / s.dx(), static_cast<double>(n));
  if (r < 0) r += static_cast<double>(n);
  const auto i = static_cast<long>(std::floor(r));
  const double t = r - static_cast<double>(i);
  auto a = [&](long j) { return s.A[static_cast<std::size_t>(((j % n) + n) % n)]; };
  const double w0 = -t * (t - 1) * (t - 2) / 6.0;
  const double w1 = (t + 1) * (t - 1) * (t - 2) / 2.0;
  const double w2 = -(t + 1) * t * (t - 2) / 2.0;
  const double w3 = (t + 1) * t * (t - 1) / 6.0;
  return w0 * a(i - 1) + w1 * a(i) + w2 * a(i + 1) + w3 * a(i + 2);
}

/// Continuous Fourier amplitude Â(K) = (1/2π) ∫ A(X) e^{-iKX} dX by the periodic trapezoid rule.
/// Zero beyond the grid's Nyquist wavenumber, where the periodic sum would alias.
inline cdouble fourier_amplitude(const KdVState& s, double K) {
  if (std::abs(K) >= std::numbers::pi / s.dx()) return 0.0;
  cdouble sum = 0;
  for (std::size_t i = 0; i < s.A.size(); ++i) sum += s.A[i] * std::polar(1.0, -K * s.X(i));
  return sum * (s.dx() / (2.0 * std::numbers::pi));
}

inline double mass(const KdVState& s) {
  double m = 0;
  for (double v : s.A) m += v;
  return m * s.dx();
}

inline double momentum(const KdVState& s) {
  double m = 0;
  for (double v : s.A) m += v * v;
  return m * s.dx();
}

}  // namespace necklace::kdv
