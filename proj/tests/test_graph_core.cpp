#include <gtest/gtest.h>

#include <map>
#include <numbers>
#include <set>

#include <Eigen/Eigenvalues>

#include "support.hpp"

using namespace necklace;
using testing_support::Rng;

namespace {

constexpr double pi = std::numbers::pi;

Eigen::MatrixXd dense(const DiscreteOperators::SparseMatrix& a) { return Eigen::MatrixXd(a); }

// Generalized eigen-decomposition of (K, M) by the symmetric scaling M^{-1/2} K M^{-1/2}.
Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> generalized(const DiscreteOperators& ops) {
  const Eigen::VectorXd s = ops.mass().cwiseSqrt().cwiseInverse();
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s.asDiagonal() * dense(ops.stiffness()) * s.asDiagonal());
}

}  // namespace

TEST(Lattice, DofCounts) {
  EXPECT_EQ(build_lattice(2, 2, Mode::full)->dof_count(), 10u);
  EXPECT_EQ(build_lattice(4, 8, Mode::symmetric)->dof_count(), 64u);
  EXPECT_EQ(build_lattice(5, 7, Mode::full)->dof_count(), 5u * (3 * 7 - 1));
  EXPECT_EQ(build_lattice(3, 6, Mode::line)->dof_count(), 3u * 12);
}

TEST(Lattice, TotalWeightIsMetricLength) {
  double w = 0;
  auto lat = build_lattice(3, 3, Mode::full);
  for (std::size_t i = 0; i < lat->dof_count(); ++i) w += lat->weight(i);
  EXPECT_NEAR(w, 9.0 * pi, 1e-12);

  for (Mode mode : {Mode::full, Mode::symmetric, Mode::line}) {
    auto l = build_lattice(6, 11, mode);
    double total = 0;
    for (std::size_t i = 0; i < l->dof_count(); ++i) {
      EXPECT_GT(l->weight(i), 0.0);
      total += l->weight(i);
    }
    EXPECT_NEAR(total, l->cell().length() * 6, 1e-11) << to_string(mode);
  }
}

TEST(Lattice, RejectsDegenerateSizes) {
  EXPECT_THROW(build_lattice(1, 4, Mode::full), ConfigError);
  EXPECT_THROW(build_lattice(0, 4, Mode::symmetric), ConfigError);
  EXPECT_THROW(build_lattice(4, 1, Mode::full), ConfigError);
  EXPECT_THROW(mode_from_string("ring"), ConfigError);
}

TEST(Lattice, DofMapIsBijectiveAndSharesVertices) {
  for (Mode mode : {Mode::full, Mode::symmetric}) {
    auto lat = build_lattice(4, 5, mode);
    std::map<std::size_t, int> endpoint_count;
    std::set<std::size_t> seen;
    const std::vector<Edge> edges = mode == Mode::full ? std::vector<Edge>{Edge::link, Edge::upper, Edge::lower}
                                                       : std::vector<Edge>{Edge::link, Edge::upper};
    for (std::size_t c = 0; c < lat->n_cells(); ++c)
      for (Edge e : edges)
        for (int p = 0; p <= lat->m(); ++p) {
          const std::size_t g = lat->dof_index(c, e, p);
          ASSERT_LT(g, lat->dof_count());
          seen.insert(g);
          if (p == 0 || p == lat->m()) ++endpoint_count[g];
        }
    EXPECT_EQ(seen.size(), lat->dof_count()) << to_string(mode);
    const int expected = mode == Mode::full ? 3 : 2;
    for (const auto& [g, count] : endpoint_count) {
      EXPECT_TRUE(lat->cell().is_vertex(lat->local_of(g)));
      EXPECT_EQ(count, expected) << "vertex " << g;
    }
  }
  // periodic closure: the last cell's right vertex is vertex 0 of cell 0
  auto lat = build_lattice(3, 4, Mode::full);
  EXPECT_EQ(lat->dof_index(2, Edge::upper, 4), lat->dof_index(0, Edge::link, 0));
}

TEST(Field, LengthMatchesLattice) {
  auto lat = build_lattice(3, 4, Mode::symmetric);
  EXPECT_EQ(GraphField(lat).size(), lat->dof_count());
  EXPECT_THROW(GraphField(lat, std::vector<double>(3)), ConfigError);
  auto other = build_lattice(4, 4, Mode::symmetric);
  EXPECT_THROW(GraphField(lat) + GraphField(other), ConfigError);
  EXPECT_THROW(inner_product(GraphField(lat), GraphField(other)), ConfigError);
}

TEST(Operators, StiffnessAnnihilatesConstantsAndIsSymmetric) {
  for (Mode mode : {Mode::full, Mode::symmetric, Mode::line}) {
    DiscreteOperators ops(build_lattice(5, 9, mode));
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(ops.mass().size());
    EXPECT_LT((ops.stiffness() * one).cwiseAbs().maxCoeff(), 1e-13) << to_string(mode);
    const Eigen::MatrixXd k = dense(ops.stiffness());
    EXPECT_EQ((k - k.transpose()).cwiseAbs().maxCoeff(), 0.0) << to_string(mode);
  }
}

TEST(Operators, ZeroIsASimpleGeneralizedEigenvalue) {
  for (Mode mode : {Mode::full, Mode::symmetric}) {
    DiscreteOperators ops(build_lattice(4, 4, mode));
    const auto eig = generalized(ops);
    EXPECT_NEAR(eig.eigenvalues()[0], 0.0, 1e-12) << to_string(mode);
    EXPECT_GT(eig.eigenvalues()[1], 1e-3) << to_string(mode);
  }
}

TEST(Operators, ConstantsAreInTheKernels) {
  auto lat = build_lattice(4, 6, Mode::full);
  DiscreteOperators ops(lat);
  const GraphField one(lat, 1.0);
  EXPECT_LT(sup_norm(ops.apply_A2(one)), 1e-13);
  EXPECT_LT(sup_norm(ops.apply_B2(one)), 1e-13);
  EXPECT_THROW(ops.apply_A2(GraphField(build_lattice(5, 6, Mode::full))), ConfigError);
}

TEST(Operators, SelfAdjointPositiveAndBounded) {
  Rng rng(101);
  for (Mode mode : {Mode::full, Mode::symmetric, Mode::line}) {
    auto lat = build_lattice(4, 7, mode);
    DiscreteOperators ops(lat);
    for (int trial = 0; trial < 100; ++trial) {
      const GraphField u = testing_support::random_field(lat, rng);
      const GraphField v = testing_support::random_field(lat, rng);
      const double scale = l2_norm(u) * l2_norm(v);
      EXPECT_LE(std::abs(inner_product(ops.apply_A2(u), v) - inner_product(u, ops.apply_A2(v))), 1e-12 * scale);
      EXPECT_LE(std::abs(inner_product(ops.apply_B2(u), v) - inner_product(u, ops.apply_B2(v))), 1e-12 * scale);
      const double uu = inner_product(u, u);
      EXPECT_GE(inner_product(ops.apply_A2(u), u), -1e-12 * uu);
      const double b = inner_product(ops.apply_B2(u), u);
      EXPECT_GE(b, -1e-12 * uu);
      EXPECT_LE(b, uu);
      EXPECT_GE(h1_norm_squared(ops, u), ops.mass_form(u.values()));
    }
  }
}

TEST(Operators, A2OfSineOnTheLine) {
  // exact discrete eigenvalue of sin on the ring: (4/h²) sin²(h/2), so the error is O(h²)
  std::vector<double> errs;
  for (int m : {16, 32, 64}) {
    auto lat = build_lattice(3, m, Mode::line);
    DiscreteOperators ops(lat);
    const GraphField u = GraphField::sample(lat, [](double x, std::size_t) { return std::sin(x); });
    const GraphField a = ops.apply_A2(u);
    errs.push_back(sup_norm(a - u));
  }
  EXPECT_LT(errs.back(), 1e-3);
  for (std::size_t i = 1; i < errs.size(); ++i) {
    const double p = testing_support::observed_order(errs[i - 1], errs[i]);
    EXPECT_GE(p, 1.8);
    EXPECT_LE(p, 2.2);
  }
}

TEST(Operators, A2OfAnalyticBlochModeConvergesAtOrderTwo) {
  for (Mode mode : {Mode::symmetric, Mode::full}) {
    std::vector<double> errs;
    for (int m : {10, 20, 40}) {
      auto lat = build_lattice(4, m, mode);
      DiscreteOperators ops(lat);
      double lambda = 0;
      const auto z = testing_support::continuum_bloch_wave(lat, 0.25, &lambda);
      GraphField u(lat);
      for (std::size_t i = 0; i < u.size(); ++i) u[i] = z[i].real();
      const GraphField r = ops.apply_A2(u) - lambda * u;
      errs.push_back(sup_norm(r) / sup_norm(u));
    }
    for (std::size_t i = 1; i < errs.size(); ++i) {
      const double p = testing_support::observed_order(errs[i - 1], errs[i]);
      EXPECT_GE(p, 1.8) << to_string(mode);
      EXPECT_LE(p, 2.2) << to_string(mode);
    }
  }
}

TEST(Helmholtz, ExactCasesAndResidual) {
  Rng rng(7);
  for (SolverKind kind : {SolverKind::direct, SolverKind::conjugate_gradient}) {
    auto lat = build_lattice(5, 8, Mode::full);
    DiscreteOperators ops(lat, SolverOptions{kind, 1e-12, 20000, true});
    EXPECT_EQ(ops.uses_direct_solver(), kind == SolverKind::direct);
    EXPECT_EQ(sup_norm(ops.helmholtz_solve(GraphField(lat))), 0.0);
    const GraphField c(lat, 2.5);
    EXPECT_LT(sup_norm(ops.helmholtz_solve(c) - c), 1e-11);
    for (int trial = 0; trial < 20; ++trial) {
      const GraphField f = testing_support::random_field(lat, rng);
      EXPECT_LE(ops.helmholtz_residual(f, ops.helmholtz_solve(f)), 1e-12);
    }
  }
}

TEST(Helmholtz, IterationCapIsAHardError) {
  auto lat = build_lattice(6, 16, Mode::full);
  DiscreteOperators ops(lat, SolverOptions{SolverKind::conjugate_gradient, 1e-14, 2, false});
  Rng rng(3);
  try {
    ops.helmholtz_solve(testing_support::random_field(lat, rng));
    FAIL() << "expected a solver error";
  } catch (const SolverError& e) {
    EXPECT_NE(std::string(e.what()).find("residual"), std::string::npos);
  }
}

TEST(B2, EigenvectorsMapToMuOfLambda) {
  auto lat = build_lattice(4, 5, Mode::full);
  DiscreteOperators ops(lat);
  const auto eig = generalized(ops);
  const Eigen::VectorXd s = ops.mass().cwiseSqrt().cwiseInverse();
  for (Eigen::Index j : {1, 5, 17, 40}) {
    const double lambda = eig.eigenvalues()[j];
    const Eigen::VectorXd x = s.asDiagonal() * eig.eigenvectors().col(j);
    GraphField u(lat, std::vector<double>(x.data(), x.data() + x.size()));
    const GraphField b = ops.apply_B2(u);
    const double mu = lambda / (1.0 + lambda);
    EXPECT_LE(sup_norm(b - mu * u), 1e-10 * mu * sup_norm(u)) << "mode " << j;
  }
}

TEST(Norms, Basics) {
  auto lat = build_lattice(7, 5, Mode::full);
  const GraphField one(lat, 1.0);
  EXPECT_NEAR(inner_product(one, one), 3.0 * pi * 7, 1e-11);
  Rng rng(11);
  auto u = testing_support::random_field(lat, rng);
  EXPECT_EQ(sup_norm(-u), sup_norm(u));
  EXPECT_NEAR(l2_norm(u) * l2_norm(u), inner_product(u, u), 1e-12);
  DiscreteOperators ops(lat);
  EXPECT_NEAR(h1_seminorm(ops, u) * h1_seminorm(ops, u), inner_product(ops.apply_A2(u), u), 1e-9);
}
