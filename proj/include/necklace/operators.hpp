#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <sstream>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "necklace/field.hpp"

namespace necklace {

enum class SolverKind { direct, conjugate_gradient };

struct SolverOptions {
  SolverKind kind = SolverKind::direct;
  double tolerance = 1e-12;  // relative residual for iterative solves
  int max_iterations = 20000;
  bool verify_residual = false;  // check direct solves against `tolerance` as well
};

/// Weak-form Laplacian K (Kirchhoff flux balance enters as natural condition), lumped mass M
/// and a factorization of M + K reused by every Helmholtz solve.
///
/// A² = M⁻¹K, (I + A²)⁻¹ f solves (M + K) u = M f, B² = I - (I + A²)⁻¹.
/// Immutable after construction; solves are safe to run concurrently.
class DiscreteOperators {
 public:
  using SparseMatrix = Eigen::SparseMatrix<double>;

  explicit DiscreteOperators(LatticePtr lattice, SolverOptions options = {})
      : lattice_(std::move(lattice)), options_(options) {
    if (!lattice_) throw ConfigError("operators need a lattice");
    assemble();
    factorize();
  }

  const NecklaceLattice& lattice() const noexcept { return *lattice_; }
  const LatticePtr& lattice_ptr() const noexcept { return lattice_; }
  const SparseMatrix& stiffness() const noexcept { return stiffness_; }
  const Eigen::VectorXd& mass() const noexcept { return mass_; }
  const SparseMatrix& helmholtz_matrix() const noexcept { return helmholtz_; }
  const SolverOptions& options() const noexcept { return options_; }
  bool uses_direct_solver() const noexcept { return static_cast<bool>(ldlt_); }

  GraphField apply_A2(const GraphField& u) const {
    check(u);
    GraphField out(lattice_);
    apply_A2(u.values(), out.values());
    return out;
  }

  GraphField helmholtz_solve(const GraphField& f) const {
    check(f);
    GraphField out(lattice_);
    helmholtz_solve(f.values(), out.values());
    return out;
  }

  GraphField apply_B2(const GraphField& u) const {
    check(u);
    GraphField out(lattice_);
    apply_B2(u.values(), out.values());
    return out;
  }

  // Span versions used by the time integrator; `out` must not alias `in`.
  void apply_A2(std::span<const double> in, std::span<double> out) const {
    auto x = map(in);
    auto y = map(out);
    y = (stiffness_ * x).cwiseQuotient(mass_);
  }

  void helmholtz_solve(std::span<const double> f, std::span<double> out) const {
    const Eigen::VectorXd rhs = mass_.cwiseProduct(map(f));
    auto u = map(out);
    solve(rhs, u);
  }

  /// B² u = u - (M + K)⁻¹ M u: one solve, exact algebraic identity.
  void apply_B2(std::span<const double> in, std::span<double> out) const {
    helmholtz_solve(in, out);
    auto y = map(out);
    y = map(in) - y;
  }

  /// xᵀ K x = ⟨A² x, x⟩_M.
  double stiffness_form(std::span<const double> x) const {
    const auto v = map(x);
    return v.dot(stiffness_ * v);
  }

  double mass_form(std::span<const double> x) const {
    const auto v = map(x);
    return v.dot(mass_.cwiseProduct(v));
  }

  /// Relative residual ‖(M+K)u − M f‖ / ‖M f‖.
  double helmholtz_residual(const GraphField& f, const GraphField& u) const {
    const Eigen::VectorXd rhs = mass_.cwiseProduct(map(f.values()));
    const Eigen::VectorXd r = helmholtz_ * map(u.values()) - rhs;
    const double scale = rhs.norm();
    return scale > 0 ? r.norm() / scale : r.norm();
  }

 private:
  static Eigen::Map<const Eigen::VectorXd> map(std::span<const double> s) {
    return {s.data(), static_cast<Eigen::Index>(s.size())};
  }
  static Eigen::Map<Eigen::VectorXd> map(std::span<double> s) {
    return {s.data(), static_cast<Eigen::Index>(s.size())};
  }

  void check(const GraphField& u) const {
    if (!u.lattice_ptr() || (u.lattice_ptr() != lattice_ && !(u.lattice() == *lattice_)))
      throw ConfigError("field lattice does not match the operator lattice");
  }

  void assemble() {
    const auto& lat = *lattice_;
    const auto& cell = lat.cell();
    const auto n = static_cast<Eigen::Index>(lat.dof_count());
    const double h = lat.h();
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(4 * cell.elements().size() * lat.n_cells());
    for (std::size_t c = 0; c < lat.n_cells(); ++c) {
      for (const auto& e : cell.elements()) {
        const auto a = static_cast<Eigen::Index>(lat.index(c, e.a));
        const auto b = static_cast<Eigen::Index>(lat.index(c + static_cast<std::size_t>(e.cell_offset), e.b));
        const double k = e.weight / h;
        triplets.emplace_back(a, a, k);
        triplets.emplace_back(b, b, k);
        triplets.emplace_back(a, b, -k);
        triplets.emplace_back(b, a, -k);
      }
    }
    stiffness_.resize(n, n);
    stiffness_.setFromTriplets(triplets.begin(), triplets.end());
    stiffness_.makeCompressed();

    mass_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) mass_[i] = lat.weight(static_cast<std::size_t>(i));

    SparseMatrix m(n, n);
    m.setIdentity();
    m = mass_.asDiagonal() * m;
    helmholtz_ = stiffness_ + m;
    helmholtz_.makeCompressed();
  }

  void factorize() {
    if (options_.kind == SolverKind::direct) {
      auto ldlt = std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>();
      ldlt->compute(helmholtz_);
      if (ldlt->info() == Eigen::Success) {
        ldlt_ = std::move(ldlt);
        return;
      }
      // fall through to the iterative solver
    }
    auto cg = std::make_shared<Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper>>();
    cg->setTolerance(options_.tolerance);
    cg->setMaxIterations(options_.max_iterations);
    cg->compute(helmholtz_);
    cg_ = std::move(cg);
  }

  template <class Out>
  void solve(const Eigen::VectorXd& rhs, Out& u) const {
    if (ldlt_) {
      u = ldlt_->solve(rhs);
      if (!options_.verify_residual) return;
      const double scale = rhs.norm();
      const double res = (helmholtz_ * u - rhs).norm() / (scale > 0 ? scale : 1.0);
      if (res <= options_.tolerance) return;
      std::ostringstream msg;
      msg << "direct Helmholtz solve residual " << res << " exceeds tolerance " << options_.tolerance;
      throw SolverError(msg.str());
    }
    u = cg_->solve(rhs);
    if (cg_->info() != Eigen::Success || cg_->error() > options_.tolerance) {
      std::ostringstream msg;
      msg << "conjugate gradient did not converge in " << cg_->iterations()
          << " iterations: relative residual " << cg_->error() << " > " << options_.tolerance;
      throw SolverError(msg.str());
    }
  }

  LatticePtr lattice_;
  SolverOptions options_;
  SparseMatrix stiffness_;
  SparseMatrix helmholtz_;
  Eigen::VectorXd mass_;
  std::shared_ptr<const Eigen::SimplicialLDLT<SparseMatrix>> ldlt_;
  std::shared_ptr<const Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper>> cg_;
};

inline DiscreteOperators assemble_operators(LatticePtr lattice, SolverOptions options = {}) {
  return DiscreteOperators(std::move(lattice), options);
}

/// ⟨A² u, u⟩^{1/2}, the discrete ‖∂ₓu‖.
inline double h1_seminorm(const DiscreteOperators& ops, const GraphField& u) {
  return std::sqrt(std::max(0.0, ops.stiffness_form(u.values())));
}

/// ‖u‖² + ⟨A²u, u⟩.
inline double h1_norm_squared(const DiscreteOperators& ops, const GraphField& u) {
  return ops.mass_form(u.values()) + ops.stiffness_form(u.values());
}

}  // namespace necklace
