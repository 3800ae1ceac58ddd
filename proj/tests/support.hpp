#pragma once

// Shared fixtures for the unit suites: fixed-seed random fields and an analytic Bloch mode.

#include <complex>
#include <cstdint>
#include <random>

#include "necklace/necklace.hpp"

namespace testing_support {

using namespace necklace;

/// Deterministic generator; every property test seeds its own stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo = -1.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }

 private:
  std::mt19937_64 engine_;
};

inline GraphField random_field(const LatticePtr& lat, Rng& rng) {
  GraphField u(lat);
  for (auto& v : u.values()) v = rng.uniform();
  return u;
}

inline ComplexGraphField random_complex_field(const LatticePtr& lat, Rng& rng) {
  ComplexGraphField u(lat);
  for (auto& v : u.values()) v = {rng.uniform(), rng.uniform()};
  return u;
}

/// Smooth periodic field on a line lattice: a few low harmonics of the full ring.
inline GraphField smooth_line_field(const LatticePtr& lat, Rng& rng, int harmonics = 3) {
  const double L = lat->domain_length();
  std::vector<double> a(static_cast<std::size_t>(harmonics)), b(a.size());
  for (auto& v : a) v = rng.uniform();
  for (auto& v : b) v = rng.uniform();
  return GraphField::sample(lat, [&](double x, std::size_t) {
    double s = 0;
    for (int p = 1; p <= harmonics; ++p) {
      const double q = 2.0 * std::numbers::pi * p / L;
      s += a[p - 1] * std::cos(q * x) + b[p - 1] * std::sin(q * x);
    }
    return s;
  });
}

/// Continuum band-1 Bloch wave of the symmetric necklace at wavenumber l, built from the
/// vertex-flux transfer matrices independently of the finite-element code. Values at the lattice
/// nodes (both semicircles carry the same function), complex, quasi-periodic with e^{2πil}.
inline ComplexGraphField continuum_bloch_wave(const LatticePtr& lat, double l, double* lambda_out = nullptr) {
  const double pi = std::numbers::pi;
  // band 1: sin²(π√λ) = (8/9) sin²(πl), solved here by bisection on the trace
  const double target = 2.0 * std::cos(2.0 * pi * l);
  auto trace = [&](double lam) {
    const double s = std::sin(pi * std::sqrt(lam)), c = std::cos(pi * std::sqrt(lam));
    return 2.0 * c * c - 2.5 * s * s;
  };
  double lo = 0, hi = 0.25;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (trace(mid) > target ? lo : hi) = mid;
  }
  const double lam = 0.5 * (lo + hi);
  if (lambda_out) *lambda_out = lam;
  const double k = std::sqrt(lam);
  auto T = [&](double len) {
    Eigen::Matrix2d t;
    t << std::cos(k * len), std::sin(k * len) / k, -k * std::sin(k * len), std::cos(k * len);
    return t;
  };
  const Eigen::Matrix2d half = Eigen::Vector2d(1.0, 0.5).asDiagonal();
  const Eigen::Matrix2d two = Eigen::Vector2d(1.0, 2.0).asDiagonal();
  const Eigen::Matrix2d mono = two * T(pi) * half * T(pi);
  const std::complex<double> rho = std::polar(1.0, 2.0 * pi * l);
  Eigen::Vector2cd v(mono(0, 1), rho - mono(0, 0));
  if (v.norm() < 1e-12) v = Eigen::Vector2cd(rho - mono(1, 1), mono(1, 0));
  const Eigen::Vector2cd at_pi = (half * T(pi)).cast<std::complex<double>>() * v;
  return ComplexGraphField::sample(lat, [&](double, std::size_t i) {
    const double x = lat->cell().position(lat->local_of(i));
    const std::complex<double> phase = std::pow(rho, static_cast<double>(lat->cell_of(i)));
    if (x <= pi + 1e-12) return phase * (T(x).cast<std::complex<double>>() * v)[0];
    return phase * (T(x - pi).cast<std::complex<double>>() * at_pi)[0];
  });
}

inline double observed_order(double e_coarse, double e_fine, double ratio = 2.0) {
  return std::log(e_coarse / e_fine) / std::log(ratio);
}

}  // namespace testing_support
