#include <gtest/gtest.h>

#include <numbers>

#include "support.hpp"

using namespace necklace;
using namespace necklace::spectral;
using testing_support::Rng;

namespace {

constexpr double kPi = std::numbers::pi;

// Test-side oracle: bisection on the closed-form trace written out from scratch.
double oracle_band1(double l) {
  const double target = 2.0 * std::cos(2.0 * kPi * l);
  auto tr = [](double lam) {
    const double s = std::sin(kPi * std::sqrt(lam)), c = std::cos(kPi * std::sqrt(lam));
    return 2.0 * c * c - 2.5 * s * s;
  };
  double lo = 0, hi = 0.25;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (tr(mid) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Series constants of μ(l) = λ - λ² + ..., λ = (8/9) l² - (8π²/243) l⁴ + ...
const double kD2Series = 16.0 / 9.0;
const double kD4Series = -24.0 * (8.0 * kPi * kPi + 192.0) / 243.0;

}  // namespace

TEST(Transfer, Examples) {
  const Eigen::Matrix2d t0 = transfer_matrix(0.0, kPi);
  EXPECT_EQ(t0(0, 0), 1.0);
  EXPECT_NEAR(t0(0, 1), kPi, 1e-15);
  EXPECT_EQ(t0(1, 0), 0.0);
  EXPECT_EQ(t0(1, 1), 1.0);
  const Eigen::Matrix2d t1 = transfer_matrix(1.0, kPi);
  EXPECT_NEAR(t1(0, 0), -1.0, 1e-15);
  EXPECT_NEAR(t1(0, 1), 0.0, 1e-15);
  EXPECT_NEAR(t1(1, 0), 0.0, 1e-15);
  EXPECT_NEAR(t1(1, 1), -1.0, 1e-15);
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const double lam = rng.uniform(0.0, 10.0), len = rng.uniform(0.1, 5.0);
    EXPECT_NEAR(transfer_matrix(lam, len).determinant(), 1.0, 1e-13);
  }
  EXPECT_THROW(transfer_matrix(-1.0, 1.0), ConfigError);
}

TEST(Monodromy, TraceExamplesAndDeterminant) {
  EXPECT_NEAR(monodromy(0.0).trace(), 2.0, 1e-15);
  EXPECT_NEAR(monodromy(0.25).trace(), -2.5, 1e-14);
  for (double lam : {0.01, 0.1, 1.0, 3.0}) EXPECT_NEAR(monodromy(lam).determinant(), 1.0, 1e-12);
}

TEST(Monodromy, TraceMatchesClosedFormOnRandomSamples) {
  Rng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const double lam = rng.uniform(0.0, 10.0);
    const double s = std::sin(kPi * std::sqrt(lam)), c = std::cos(kPi * std::sqrt(lam));
    EXPECT_NEAR(monodromy(lam).trace(), 2.0 * c * c - 2.5 * s * s, 1e-12) << "lambda " << lam;
  }
}

TEST(BandSolve, AnchorValues) {
  const BandPoint p0 = band_solve(0.0, 1);
  EXPECT_EQ(p0.lambda, 0.0);
  EXPECT_EQ(p0.omega, 0.0);
  const BandPoint p = band_solve(0.5, 1);
  EXPECT_NEAR(p.lambda, oracle_band1(0.5), 1e-12);
  const double a = std::acos(1.0 / 3.0) / kPi;
  EXPECT_NEAR(p.lambda, a * a, 1e-10);
  EXPECT_NEAR(p.lambda, 0.153528, 1e-6);
  EXPECT_NEAR(p.mu, 0.133094, 1e-6);
  EXPECT_NEAR(p.omega, 0.364820, 1e-6);
  EXPECT_THROW(band_solve(0.7, 1), ConfigError);
  EXPECT_THROW(band_solve(0.1, 0), ConfigError);
}

TEST(BandSolve, TraceConditionHoldsOnHigherBands) {
  for (int band = 1; band <= 4; ++band)
    for (double l : {-0.45, -0.2, 0.05, 0.33, 0.5}) {
      const BandPoint p = band_solve(l, band);
      EXPECT_NEAR(monodromy(p.lambda).trace(), 2.0 * std::cos(2.0 * kPi * l), 1e-9);
      EXPECT_GE(p.mu, 0.0);
      EXPECT_LT(p.mu, 1.0);
    }
}

TEST(BandSolve, EvenMonotoneAndBounded) {
  double prev = -1;
  for (int i = 0; i <= 100; ++i) {
    const double l = 0.005 * i;
    const auto a = band_solve(l, 1), b = band_solve(-l, 1);
    EXPECT_NEAR(a.mu, b.mu, 1e-12);
    EXPECT_GE(a.mu, 0.0);
    EXPECT_LT(a.mu, 1.0);
    EXPECT_GT(a.mu, prev);
    prev = a.mu;
    EXPECT_EQ(a.omega, -b.omega);
  }
}

TEST(ClosedForm, AgreesWithBisectionAndOracle) {
  EXPECT_EQ(closed_form_first_band(0.0), 0.0);
  EXPECT_NEAR(closed_form_first_band(0.5), oracle_band1(0.5), 1e-12);
  for (int i = 0; i <= 100; ++i) {
    const double l = -0.5 + 0.01 * i;
    EXPECT_NEAR(closed_form_first_band(l), band_solve(l, 1).lambda, 1e-10);
    EXPECT_NEAR(closed_form_first_band(l), oracle_band1(l), 1e-10);
  }
  // band 1 ends at the closed-form edge; band 2 starts on the other branch of sin(π√λ) = 2√2/3
  EXPECT_NEAR(first_band_edge(), closed_form_first_band(0.5), 1e-15);
  const double b2 = 1.0 - std::asin(2.0 * std::sqrt(2.0) / 3.0) / kPi;
  EXPECT_NEAR(band_solve(0.5, 2).lambda, b2 * b2, 1e-12);
  EXPECT_LT(monodromy_trace_closed_form(0.25), -2.0);
}

TEST(Derivatives, RichardsonAgreesWithSeriesConstants) {
  const auto d = mu_derivatives_at_zero(Mode::symmetric);
  EXPECT_NEAR(d.d2, kD2Series, 1e-6);
  EXPECT_NEAR(d.d4, kD4Series, 1e-4);
  EXPECT_NEAR(d.d4, -26.7612, 1e-4);
  EXPECT_NEAR(std::sqrt(0.5 * d.d2), 2.0 * std::sqrt(2.0) / 3.0, 1e-7);
  const auto line = mu_derivatives_at_zero(Mode::line);
  EXPECT_NEAR(line.d2, 2.0, 1e-8);
  EXPECT_NEAR(line.d4, -24.0, 1e-4);
}

TEST(Derivatives, CancellationDetectorFires) {
  // noise at 1e-12 is harmless at step 1e-2 but ruins d4 at step 1e-6
  auto noisy = [](double l) { return first_band_mu(l) + 1e-12 * std::sin(1e7 * l); };
  EXPECT_THROW(even_derivatives_at_zero(noisy, {1e-6, 5e-7, 2.5e-7}), SolverError);
  EXPECT_THROW(even_derivatives_at_zero(first_band_mu, {1e-2, 4e-3, 2e-3}), ConfigError);
}

TEST(BandCurve, SamplesAndDerivatives) {
  const auto c = sample_band(1, 3);
  ASSERT_EQ(c.samples.size(), 3u);
  EXPECT_EQ(c.samples[1].lambda, 0.0);
  EXPECT_EQ(c.samples[0].lambda, c.samples[2].lambda);
  EXPECT_NEAR(c.d2_mu0, kD2Series, 1e-6);
  EXPECT_THROW(sample_band(1, 1), ConfigError);
}

TEST(BlochEigen, ConstantModeAtZero) {
  for (Mode mode : {Mode::symmetric, Mode::full}) {
    const CellGeometry cell(20, mode);
    const auto pair = first_band_eigenpair(cell, 0.0);
    EXPECT_NEAR(pair.mu, 0.0, 1e-12);
    for (const auto& z : pair.f) {
      EXPECT_NEAR(z.real(), 1.0 / std::sqrt(3.0 * kPi), 1e-10);
      EXPECT_NEAR(z.imag(), 0.0, 1e-10);
    }
  }
  EXPECT_THROW(bloch_eigen_discrete(CellGeometry(10, Mode::symmetric), 0.6, 1), ConfigError);
  EXPECT_THROW(bloch_eigen_discrete(CellGeometry(10, Mode::symmetric), 0.1, 1000), ConfigError);
}

TEST(BlochEigen, ConvergesToClosedFormAtOrderTwo) {
  for (double l : {0.3, 0.25, -0.4}) {
    std::vector<double> errs;
    for (int m : {20, 40, 80}) {
      const auto pair = first_band_eigenpair(CellGeometry(m, Mode::symmetric), l);
      errs.push_back(std::abs(pair.lambda - closed_form_first_band(l)));
      EXPECT_LT(pair.residual, 1e-10);
    }
    for (std::size_t i = 1; i < errs.size(); ++i) {
      const double p = testing_support::observed_order(errs[i - 1], errs[i]);
      EXPECT_GE(p, 1.8) << "l = " << l;
      EXPECT_LE(p, 2.2) << "l = " << l;
    }
  }
}

TEST(BlochEigen, ConjugationSymmetryAndNormalization) {
  const CellGeometry cell(16, Mode::full);
  Rng rng(9);
  for (int i = 0; i < 20; ++i) {
    const double l = rng.uniform(-0.5, 0.5);
    const auto a = bloch_eigen_discrete(cell, l, 3);
    const auto b = bloch_eigen_discrete(cell, -l, 3);
    // band 1 is simple everywhere; its eigenfunction obeys f(-l) = conj f(l)
    for (std::size_t j = 0; j < cell.size(); ++j) EXPECT_LT(std::abs(b[0].f[j] - std::conj(a[0].f[j])), 1e-10);
    for (const auto& pair : a) {
      std::complex<double> norm = 0, mean = 0;
      for (std::size_t j = 0; j < cell.size(); ++j) {
        norm += cell.weight(j) * std::norm(pair.f[j]);
        mean += cell.weight(j) * pair.f[j];
      }
      EXPECT_NEAR(norm.real(), 1.0, 1e-12);
      if (std::abs(mean) > 1e-8) {
        EXPECT_GT(mean.real(), 0.0);
        EXPECT_NEAR(mean.imag(), 0.0, 1e-12);
      }
    }
    EXPECT_LE(a[0].lambda, a[1].lambda);
    EXPECT_LE(a[1].lambda, a[2].lambda);
  }
}

TEST(Beta, ValuesAndLimit) {
  const CellGeometry cell(40, Mode::symmetric);
  const double d2 = mu_derivatives_at_zero(Mode::symmetric).d2;
  EXPECT_NEAR(std::abs(beta(cell, 0, 0, 0, d2).value), 0.0, 1e-14);
  std::vector<double> q;
  for (double l : {0.1, 0.05, 0.025}) {
    const auto b = beta(cell, l, l, 0, d2);
    q.push_back(b.value.real() / (l * l));
    EXPECT_NEAR(b.prediction_paper, 0.5 * d2 * l * l, 1e-15);
  }
  // β(l, l, 0)/l² settles: successive differences shrink
  EXPECT_LT(std::abs(q[2] - q[1]), 0.5 * std::abs(q[1] - q[0]));
  const double limit = beta_limit(cell);
  const double paper = 8.0 / 9.0, normalized = 8.0 / 9.0 / std::sqrt(3.0 * kPi);
  EXPECT_NEAR(limit, normalized, 1e-4);
  EXPECT_GT(std::abs(limit - paper), 0.5);
  EXPECT_THROW(beta(cell, 0.3, 0.15, 0.15, d2), ConfigError);
  EXPECT_THROW(beta(cell, 0.1, 0.02, 0.02, d2), ConfigError);
}
