#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <sstream>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "necklace/lattice.hpp"

namespace necklace::spectral {

using cdouble = std::complex<double>;

inline constexpr double pi = std::numbers::pi;

/// Band-1 isolation radius in l. Band 1 is simple on the whole Brillouin zone; β is only
/// evaluated with all wavenumbers in [-δ₀/2, δ₀/2].
inline constexpr double band1_isolation_radius = 0.5;

/// Value/derivative transfer of -f'' = λ f over an interval of length `length`.
inline Eigen::Matrix2d transfer_matrix(double lambda, double length) {
  if (lambda < 0) throw ConfigError("transfer_matrix needs lambda >= 0");
  if (length <= 0) throw ConfigError("transfer_matrix needs a positive length");
  Eigen::Matrix2d t;
  if (lambda == 0.0) {
    t << 1.0, length, 0.0, 1.0;
    return t;
  }
  const double k = std::sqrt(lambda);
  const double c = std::cos(k * length);
  const double s = std::sin(k * length);
  t << c, s / k, -k * s, c;
  return t;
}

struct MonodromyMatrix {
  Eigen::Matrix2d entries;
  double trace() const { return entries.trace(); }
  double determinant() const { return entries.determinant(); }
};

/// One-cell transfer in the symmetric subspace: link, flux split into the two semicircles,
/// semicircle, flux merge back onto the next link.
inline MonodromyMatrix monodromy(double lambda) {
  Eigen::Matrix2d split = Eigen::Matrix2d::Identity();
  split(1, 1) = 0.5;
  Eigen::Matrix2d merge = Eigen::Matrix2d::Identity();
  merge(1, 1) = 2.0;
  const Eigen::Matrix2d t = transfer_matrix(lambda, pi);
  return {merge * t * split * t};
}

/// 2cos²(π√λ) − (5/2) sin²(π√λ).
inline double monodromy_trace_closed_form(double lambda) {
  const double a = pi * std::sqrt(lambda);
  const double c = std::cos(a);
  const double s = std::sin(a);
  return 2.0 * c * c - 2.5 * s * s;
}

/// λ-bracket of band `band` (>= 1): √λ ∈ [(band-1)/2, band/2], on which the trace is monotone.
inline std::pair<double, double> band_bracket(int band) {
  if (band < 1) throw ConfigError("band index must be >= 1");
  const double lo = 0.5 * (band - 1);
  const double hi = 0.5 * band;
  return {lo * lo, hi * hi};
}

struct BandPoint {
  double l = 0;
  int band = 1;
  double lambda = 0;
  double mu = 0;
  double omega = 0;  // sign(l) √μ, the right-moving branch
};

inline double mu_from_lambda(double lambda) { return lambda / (1.0 + lambda); }

/// sign(l) √μ; zero at l = 0 where the band touches λ = 0.
inline double signed_omega(double l, double mu) {
  if (l == 0.0) return 0.0;
  const double w = std::sqrt(std::max(mu, 0.0));
  return l < 0 ? -w : w;
}

/// Band 1 in closed form: sin²(π√λ) = (8/9) sin²(πl).
inline double closed_form_first_band(double l) {
  if (l < -0.5 || l > 0.5) throw ConfigError("closed_form_first_band needs l in [-1/2, 1/2]");
  const double a = std::asin(2.0 * std::sqrt(2.0) / 3.0 * std::abs(std::sin(pi * l))) / pi;
  return a * a;
}

/// Solves tr M(λ) = 2 cos(2πl) by bisection inside the band bracket.
inline BandPoint band_solve(double l, int band, double tol = 1e-15) {
  if (l < -0.5 || l > 0.5) throw ConfigError("band_solve needs l in [-1/2, 1/2]");
  const auto [lo0, hi0] = band_bracket(band);
  const double target = 2.0 * std::cos(2.0 * pi * l);
  auto g = [&](double lam) { return monodromy(lam).trace() - target; };
  double lo = lo0, hi = hi0;
  double glo = g(lo), ghi = g(hi);
  if (std::abs(glo) < 1e-14) hi = lo;
  else if (std::abs(ghi) < 1e-14) lo = hi;
  else if (glo * ghi > 0) {
    std::ostringstream msg;
    msg << "no root of the trace condition for band " << band << " at l = " << l
        << ": 2cos(2πl) lies in the spectral gap next to [" << lo0 << ", " << hi0 << "]";
    throw SolverError(msg.str());
  }
  for (int it = 0; it < 200 && hi - lo > tol * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if ((gm < 0) == (glo < 0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  BandPoint p;
  p.l = l;
  p.band = band;
  p.lambda = 0.5 * (lo + hi);
  p.mu = mu_from_lambda(p.lambda);
  p.omega = signed_omega(l, p.mu);
  if (band == 1) {
    const double reference = closed_form_first_band(l);
    if (std::abs(p.lambda - reference) > 1e-10) {
      std::ostringstream msg;
      msg << "band 1 bisection (" << p.lambda << ") disagrees with the closed form (" << reference << ") at l = " << l;
      throw SolverError(msg.str());
    }
  }
  return p;
}

inline double first_band_mu(double l) { return mu_from_lambda(closed_form_first_band(l)); }

/// μ(k) = k² / (1 + k²) of the homogeneous line.
inline double line_mu(double k) { return k * k / (1.0 + k * k); }

/// Upper edge of band 1, (arccos(1/3)/π)².
inline double first_band_edge() {
  const double a = std::acos(1.0 / 3.0) / pi;
  return a * a;
}

struct EvenDerivatives {
  double d2 = 0;
  double d4 = 0;
  double d2_level_gap = 0;  // |last two Richardson levels|
  double d4_level_gap = 0;
};

namespace detail {
// Three-step Richardson table for an estimate with error series in h², h⁴.
inline std::pair<double, double> richardson3(const std::array<double, 3>& d) {
  const double r1a = (4.0 * d[1] - d[0]) / 3.0;
  const double r1b = (4.0 * d[2] - d[1]) / 3.0;
  const double r2 = (16.0 * r1b - r1a) / 15.0;
  return {r2, std::abs(r2 - r1b)};
}
}  // namespace detail

/// Second and fourth derivative at 0 of an even function by central differences with
/// Richardson extrapolation over `steps` (each half the previous one).
template <class Fn>
EvenDerivatives even_derivatives_at_zero(Fn&& fn, std::array<double, 3> steps = {1e-2, 5e-3, 2.5e-3},
                                         double level_tolerance = 1e-5) {
  for (std::size_t i = 1; i < steps.size(); ++i)
    if (std::abs(steps[i] * 2.0 - steps[i - 1]) > 1e-15 * steps[0])
      throw ConfigError("Richardson steps must halve");
  const double f0 = fn(0.0);
  std::array<double, 3> d2{}, d4{};
  for (std::size_t i = 0; i < 3; ++i) {
    const double h = steps[i];
    const double f1 = fn(h) + fn(-h);
    const double f2 = fn(2 * h) + fn(-2 * h);
    d2[i] = (f1 - 2.0 * f0) / (h * h);
    d4[i] = (f2 - 4.0 * f1 + 6.0 * f0) / (h * h * h * h);
  }
  EvenDerivatives out;
  std::tie(out.d2, out.d2_level_gap) = detail::richardson3(d2);
  std::tie(out.d4, out.d4_level_gap) = detail::richardson3(d4);
  if (out.d2_level_gap > level_tolerance || out.d4_level_gap > level_tolerance) {
    std::ostringstream msg;
    msg << "finite-difference derivatives lost to cancellation: Richardson levels disagree by "
        << std::max(out.d2_level_gap, out.d4_level_gap) << " > " << level_tolerance;
    throw SolverError(msg.str());
  }
  return out;
}

/// Sampled band over a uniform l grid in [-1/2, 1/2] plus the derivatives of μ at l = 0.
struct BandCurve {
  int band = 1;
  std::vector<BandPoint> samples;
  double d2_mu0 = 0;
  double d4_mu0 = 0;
};

inline BandCurve sample_band(int band, int n_samples) {
  if (n_samples < 2) throw ConfigError("band sampling needs at least 2 l-samples");
  BandCurve curve;
  curve.band = band;
  for (int i = 0; i < n_samples; ++i) {
    const double l = -0.5 + static_cast<double>(i) / (n_samples - 1);
    curve.samples.push_back(band_solve(l, band));
  }
  if (band == 1) {
    const auto d = even_derivatives_at_zero(first_band_mu);
    curve.d2_mu0 = d.d2;
    curve.d4_mu0 = d.d4;
  }
  return curve;
}

/// Band-1 derivatives of μ at l = 0 for the necklace (closed form) or the homogeneous line.
inline EvenDerivatives mu_derivatives_at_zero(Mode mode) {
  if (mode == Mode::line) return even_derivatives_at_zero(line_mu);
  return even_derivatives_at_zero(first_band_mu);
}

// ---------------------------------------------------------------------------------------------
// Discrete Bloch eigenproblem on one cell.

/// Discrete (∂ₓ + il)-shifted stiffness acting on the periodic part f of a Bloch wave e^{ilx} f.
/// The element coupling picks up e^{il Δx} with Δx the signed element displacement, which equals
/// a phase e^{2πil} on the wrap-around element in the e^{ilx}-free gauge.
inline Eigen::MatrixXcd cell_stiffness(const CellGeometry& cell, double l) {
  const auto n = static_cast<Eigen::Index>(cell.size());
  Eigen::MatrixXcd k = Eigen::MatrixXcd::Zero(n, n);
  const double h = cell.h();
  for (const auto& e : cell.elements()) {
    const auto a = static_cast<Eigen::Index>(e.a);
    const auto b = static_cast<Eigen::Index>(e.b);
    const double dx = cell.position(e.b) + 2.0 * pi * e.cell_offset - cell.position(e.a);
    const cdouble phase = std::polar(1.0, l * dx);
    const double s = e.weight / h;
    k(a, a) += s;
    k(b, b) += s;
    k(a, b) -= s * phase;
    k(b, a) -= s * std::conj(phase);
  }
  return k;
}

inline Eigen::VectorXd cell_mass(const CellGeometry& cell) {
  Eigen::VectorXd m(static_cast<Eigen::Index>(cell.size()));
  for (std::size_t i = 0; i < cell.size(); ++i) m[static_cast<Eigen::Index>(i)] = cell.weight(i);
  return m;
}

struct BlochEigenpair {
  double l = 0;
  int band = 1;
  double lambda = 0;
  double mu = 0;
  double residual = 0;  // ‖K_l f − λ M f‖ / ‖f‖
  std::vector<cdouble> f;  // periodic part on the cell nodes, ‖f‖_M = 1, ⟨1, f⟩_M > 0
};

namespace detail {
inline void fix_phase(Eigen::VectorXcd& f, const Eigen::VectorXd& mass) {
  cdouble z = (mass.cast<cdouble>().array() * f.array()).sum();
  if (std::abs(z) < 1e-10) {
    // ⟨1, f⟩ vanishes (higher bands): rotate the largest entry onto the positive real axis
    Eigen::Index arg = 0;
    f.cwiseAbs().maxCoeff(&arg);
    z = f[arg];
  }
  f *= std::conj(z) / std::abs(z);
}
}  // namespace detail

/// Lowest `n_bands` eigenpairs of K_l f = λ M f on the quasi-periodically closed cell, μ = λ/(1+λ).
inline std::vector<BlochEigenpair> bloch_eigen_discrete(const CellGeometry& cell, double l, int n_bands,
                                                        double residual_tolerance = 1e-10) {
  if (l < -0.5 || l > 0.5) throw ConfigError("bloch_eigen_discrete needs l in [-1/2, 1/2]");
  const auto n = static_cast<Eigen::Index>(cell.size());
  if (n_bands < 1 || n_bands > n) throw ConfigError("requested band count exceeds the cell DOFs");
  const Eigen::MatrixXcd k = cell_stiffness(cell, l);
  const Eigen::VectorXd mass = cell_mass(cell);
  const Eigen::VectorXd inv_sqrt = mass.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXcd c = inv_sqrt.asDiagonal() * k * inv_sqrt.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(c);
  if (solver.info() != Eigen::Success) throw SolverError("Hermitian eigen-solver failed on the Bloch cell");

  std::vector<BlochEigenpair> out;
  for (Eigen::Index j = 0; j < n_bands; ++j) {
    Eigen::VectorXcd f = inv_sqrt.asDiagonal() * solver.eigenvectors().col(j);
    detail::fix_phase(f, mass);
    BlochEigenpair pair;
    pair.l = l;
    pair.band = static_cast<int>(j) + 1;
    pair.lambda = std::max(0.0, solver.eigenvalues()[j]);
    pair.mu = mu_from_lambda(pair.lambda);
    const Eigen::VectorXcd r = k * f - solver.eigenvalues()[j] * mass.cast<cdouble>().cwiseProduct(f);
    pair.residual = r.norm() / f.norm();
    if (pair.residual > residual_tolerance * std::max(1.0, k.cwiseAbs().maxCoeff())) {
      std::ostringstream msg;
      msg << "Bloch eigenpair (l = " << l << ", band " << pair.band << ") residual " << pair.residual
          << " exceeds tolerance";
      throw SolverError(msg.str());
    }
    pair.f.assign(f.data(), f.data() + f.size());
    out.push_back(std::move(pair));
  }
  return out;
}

inline BlochEigenpair first_band_eigenpair(const CellGeometry& cell, double l) {
  return bloch_eigen_discrete(cell, l, 1).front();
}

/// B̃_l² g = (M + K_l)⁻¹ K_l g on the cell.
inline Eigen::VectorXcd apply_cell_B2(const CellGeometry& cell, double l, const Eigen::VectorXcd& g) {
  const Eigen::MatrixXcd k = cell_stiffness(cell, l);
  Eigen::MatrixXcd a = k;
  a.diagonal() += cell_mass(cell).cast<cdouble>();
  return a.ldlt().solve(k * g);
}

inline cdouble cell_inner_product(const CellGeometry& cell, const std::vector<cdouble>& u,
                                  const Eigen::VectorXcd& v) {
  cdouble s = 0;
  for (std::size_t i = 0; i < cell.size(); ++i)
    s += cell.weight(i) * std::conj(u[i]) * v[static_cast<Eigen::Index>(i)];
  return s;
}

struct BetaValue {
  cdouble value;
  double prediction_paper = 0;       // ½ ∂ₗ²μ(0) l²
  double prediction_normalized = 0;  // (3π)^{-1/2} ½ ∂ₗ²μ(0) l²
};

/// β(l, l − l', l') = ⟨f(l), B̃_l² (f(l − l') f(l'))⟩ from the discrete band-1 eigenfunctions.
inline BetaValue beta(const CellGeometry& cell, double l, double l_minus_lp, double lp, double d2_mu0) {
  const double window = 0.5 * band1_isolation_radius;
  for (double q : {l, l_minus_lp, lp})
    if (std::abs(q) > window + 1e-15) {
      std::ostringstream msg;
      msg << "beta: wavenumber " << q << " outside the band-1 window [-" << window << ", " << window << "]";
      throw ConfigError(msg.str());
    }
  if (std::abs(l - (l_minus_lp + lp)) > 1e-14) throw ConfigError("beta: arguments must satisfy l = (l - l') + l'");
  const auto f = first_band_eigenpair(cell, l);
  const auto f1 = first_band_eigenpair(cell, l_minus_lp);
  const auto f2 = first_band_eigenpair(cell, lp);
  Eigen::VectorXcd prod(static_cast<Eigen::Index>(cell.size()));
  for (std::size_t i = 0; i < cell.size(); ++i) prod[static_cast<Eigen::Index>(i)] = f1.f[i] * f2.f[i];
  BetaValue out;
  out.value = cell_inner_product(cell, f.f, apply_cell_B2(cell, l, prod));
  out.prediction_paper = 0.5 * d2_mu0 * l * l;
  out.prediction_normalized = out.prediction_paper / std::sqrt(cell.length());
  return out;
}

/// lim_{l→0} β(l, l/2, l/2) / l² by Richardson over l ∈ {0.1, 0.05, 0.025}.
inline double beta_limit(const CellGeometry& cell, std::array<double, 3> ls = {0.1, 0.05, 0.025}) {
  std::array<double, 3> q{};
  for (std::size_t i = 0; i < 3; ++i) q[i] = beta(cell, ls[i], ls[i] / 2, ls[i] / 2, 0.0).value.real() / (ls[i] * ls[i]);
  return detail::richardson3(q).first;
}

}  // namespace necklace::spectral
