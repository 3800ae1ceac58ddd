#pragma once

#include <chrono>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <sstream>
#include <vector>

#include "necklace/bloch.hpp"
#include "necklace/fft.hpp"
#include "necklace/kdv.hpp"
#include "necklace/operators.hpp"
#include "necklace/spectral.hpp"

namespace necklace {

/// Displacement U, velocity V = ∂_t U and time.
struct SimState {
  GraphField U;
  GraphField V;
  double t = 0;

  static SimState zero(const LatticePtr& lattice) { return {GraphField(lattice), GraphField(lattice), 0.0}; }
};

struct SimConfig {
  double epsilon = 0.25;
  double T0 = 0.5;
  double dt = 0.02;
  std::size_t n_cells = 40;
  int m = 40;
  Mode mode = Mode::symmetric;
  long snapshot_stride = 0;  // 0: no intermediate snapshots
  bool nonlinear = true;
};

struct SolverStats {
  long steps = 0;
  long helmholtz_solves = 0;
  double wall_seconds = 0;
};

inline constexpr double max_stable_dt = 2.5;

/// Classical RK4 for U_t = V, V_t = -B²(U + U²). One Helmholtz solve per stage.
class BoussinesqIntegrator {
 public:
  explicit BoussinesqIntegrator(std::shared_ptr<const DiscreteOperators> ops, bool nonlinear = true)
      : ops_(std::move(ops)), nonlinear_(nonlinear) {
    if (!ops_) throw ConfigError("integrator needs operators");
    const auto n = static_cast<Eigen::Index>(ops_->lattice().dof_count());
    for (auto* v : {&ku1_, &ku2_, &ku3_, &ku4_, &kv1_, &kv2_, &kv3_, &kv4_, &tu_, &tv_, &w_, &s_}) v->resize(n);
  }

  const DiscreteOperators& operators() const noexcept { return *ops_; }
  const std::shared_ptr<const DiscreteOperators>& operators_ptr() const noexcept { return ops_; }
  bool nonlinear() const noexcept { return nonlinear_; }
  long helmholtz_solves() const noexcept { return solves_; }

  void step(SimState& state, double dt) {
    if (!(std::abs(dt) <= max_stable_dt) || dt == 0.0) {
      std::ostringstream msg;
      msg << "time step " << dt << " outside (0, " << max_stable_dt << "]";
      throw ConfigError(msg.str());
    }
    check_same_lattice(state.U, state.V);
    if (state.U.lattice_ptr() != ops_->lattice_ptr() && !(state.U.lattice() == ops_->lattice()))
      throw ConfigError("state and operators live on different lattices");
    Eigen::Map<Eigen::VectorXd> u(state.U.storage().data(), tu_.size());
    Eigen::Map<Eigen::VectorXd> v(state.V.storage().data(), tv_.size());

    accel(u, kv1_);
    ku1_ = v;
    tu_ = u + 0.5 * dt * ku1_;
    tv_ = v + 0.5 * dt * kv1_;
    accel(tu_, kv2_);
    ku2_ = tv_;
    tu_ = u + 0.5 * dt * ku2_;
    tv_ = v + 0.5 * dt * kv2_;
    accel(tu_, kv3_);
    ku3_ = tv_;
    tu_ = u + dt * ku3_;
    tv_ = v + dt * kv3_;
    accel(tu_, kv4_);
    ku4_ = tv_;
    u += (dt / 6.0) * (ku1_ + 2.0 * ku2_ + 2.0 * ku3_ + ku4_);
    v += (dt / 6.0) * (kv1_ + 2.0 * kv2_ + 2.0 * kv3_ + kv4_);
    state.t += dt;
    if (!u.allFinite() || !v.allFinite()) {
      std::ostringstream msg;
      msg << "Boussinesq solution blew up at t = " << state.t;
      throw SolverError(msg.str());
    }
  }

 private:
  // out = -B²(u + u²)
  void accel(const Eigen::VectorXd& u, Eigen::VectorXd& out) {
    if (nonlinear_) w_ = u + u.cwiseProduct(u);
    else w_ = u;
    ops_->helmholtz_solve(std::span<const double>(w_.data(), static_cast<std::size_t>(w_.size())),
                          std::span<double>(s_.data(), static_cast<std::size_t>(s_.size())));
    ++solves_;
    out = s_ - w_;
  }

  std::shared_ptr<const DiscreteOperators> ops_;
  bool nonlinear_;
  long solves_ = 0;
  Eigen::VectorXd ku1_, ku2_, ku3_, ku4_, kv1_, kv2_, kv3_, kv4_, tu_, tv_, w_, s_;
};

inline SimState rk4_step(const SimState& state, const std::shared_ptr<const DiscreteOperators>& ops, double dt,
                         bool nonlinear = true) {
  BoussinesqIntegrator integrator(ops, nonlinear);
  SimState out = state;
  integrator.step(out, dt);
  return out;
}

/// Observer called with (step index, state) at step 0, every `stride` steps and at the last step.
using SimObserver = std::function<void(long, const SimState&)>;

inline SolverStats simulate(BoussinesqIntegrator& integrator, SimState& state, long n_steps, double dt,
                            long stride, const SimObserver& observer) {
  if (n_steps < 0) throw ConfigError("step count must be >= 0");
  SolverStats stats;
  const auto start = std::chrono::steady_clock::now();
  const long solves0 = integrator.helmholtz_solves();
  const double t0 = state.t;
  if (observer) observer(0, state);
  for (long i = 1; i <= n_steps; ++i) {
    integrator.step(state, dt);
    if (i == n_steps) state.t = t0 + dt * static_cast<double>(n_steps);
    if (observer && ((stride > 0 && i % stride == 0) || i == n_steps)) observer(i, state);
  }
  stats.steps = n_steps;
  stats.helmholtz_solves = integrator.helmholtz_solves() - solves0;
  stats.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return stats;
}

/// ½⟨V, V⟩ + ½⟨A²V, V⟩ + ½⟨A²U, U⟩, conserved by the linear dynamics.
inline double linear_energy(const DiscreteOperators& ops, const SimState& s) {
  return 0.5 * (ops.mass_form(s.V.values()) + ops.stiffness_form(s.V.values()) + ops.stiffness_form(s.U.values()));
}

// ---------------------------------------------------------------------------------------------
// Initial data

/// Discrete band-1 eigenpairs for every wavenumber of a lattice's Bloch grid, with
/// f(-l) = conj(f(l)) imposed and ω = sign(l) √μ_h.
struct BandTable {
  CellGeometry cell;
  std::size_t n_l = 0;
  std::vector<std::vector<std::complex<double>>> f;
  std::vector<double> lambda, mu, omega;

  double l(std::size_t k) const noexcept { return static_cast<double>(k) / static_cast<double>(n_l) - 0.5; }
};

inline BandTable build_band_table(const CellGeometry& cell, std::size_t n_l) {
  if (n_l < 2 || n_l % 2 != 0) throw ConfigError("band table needs an even number of wavenumbers");
  BandTable t{cell, n_l, {}, {}, {}, {}};
  t.f.resize(n_l);
  t.lambda.resize(n_l);
  t.mu.resize(n_l);
  t.omega.resize(n_l);
  for (std::size_t k = n_l / 2; k < n_l; ++k) {
    const auto pair = spectral::first_band_eigenpair(cell, t.l(k));
    t.f[k] = pair.f;
    t.lambda[k] = pair.lambda;
    t.mu[k] = pair.mu;
    t.omega[k] = spectral::signed_omega(t.l(k), pair.mu);
    if (k > n_l / 2) {
      const std::size_t km = n_l - k;  // l(km) = -l(k)
      t.f[km] = pair.f;
      for (auto& z : t.f[km]) z = std::conj(z);
      t.lambda[km] = pair.lambda;
      t.mu[km] = pair.mu;
      t.omega[km] = -t.omega[k];
    }
  }
  const auto edge = spectral::first_band_eigenpair(cell, -0.5);
  t.f[0] = edge.f;
  t.lambda[0] = edge.lambda;
  t.mu[0] = edge.mu;
  t.omega[0] = -std::sqrt(edge.mu);
  return t;
}

enum class InitKind {
  bloch,    // band-1 Bloch waves, all l of the grid except the unpaired zone edge
  fourier,  // line mode: plane waves with the discrete line dispersion
  plain     // ε²A(ε(x - x_c)) f⁰ sampled pointwise, V = -c ∂_x U
};

inline std::string_view to_string(InitKind k) {
  switch (k) {
    case InitKind::bloch: return "bloch";
    case InitKind::fourier: return "fourier";
    case InitKind::plain: return "plain";
  }
  return "unknown";
}

inline InitKind init_kind_from_string(std::string_view s) {
  if (s == "bloch") return InitKind::bloch;
  if (s == "fourier") return InitKind::fourier;
  if (s == "plain") return InitKind::plain;
  throw ConfigError("unknown initialization '" + std::string(s) + "' (expected bloch|fourier|plain)");
}

struct AnsatzInput {
  const kdv::KdVState* amplitude = nullptr;  // A(X, T) with X measured from the packet centre
  double epsilon = 0.25;
  double x_center = 0;   // packet centre at t = 0
  double c = 1;          // group velocity of the comparison frame
  double time = 0;       // physical time; the packet centre moves to x_center + c t
  double profile_factor = 1;  // f⁰ used by the plain initialization
};

inline constexpr double max_ansatz_epsilon = 0.5;

namespace detail {
inline void check_ansatz(const AnsatzInput& in) {
  if (!in.amplitude) throw ConfigError("ansatz needs a KdV amplitude");
  if (!(in.epsilon > 0) || in.epsilon > max_ansatz_epsilon) {
    std::ostringstream msg;
    msg << "epsilon = " << in.epsilon << " outside (0, " << max_ansatz_epsilon
        << "]: the band-1 window no longer contains the scaled profile";
    throw ConfigError(msg.str());
  }
}
}  // namespace detail

/// εÂ(l/ε) e^{-il(x_c + ct)} f(l, x) on the Bloch grid, ∂_t from the exact band frequency when
/// `velocity` is set (-iω(l) times the same), or from the frame speed c otherwise (-icl).
inline BlochField ansatz_spectrum(const BandTable& table, const AnsatzInput& in, bool velocity,
                                  bool exact_frequency = true) {
  detail::check_ansatz(in);
  BlochField out(table.cell, table.n_l);
  const double shift = in.x_center + in.c * in.time;
  for (std::size_t k = 1; k < table.n_l; ++k) {
    const double l = table.l(k);
    std::complex<double> amp = in.epsilon * kdv::fourier_amplitude(*in.amplitude, l / in.epsilon) *
                               std::polar(1.0, -l * shift);
    if (velocity) amp *= std::complex<double>(0.0, -(exact_frequency ? table.omega[k] : in.c * l));
    for (std::size_t j = 0; j < table.cell.size(); ++j) out.at(k, j) = amp * table.f[k][j];
  }
  return out;
}

inline SimState init_bloch(const LatticePtr& lattice, const BandTable& table, const AnsatzInput& in) {
  if (!(lattice->cell() == table.cell) || lattice->n_cells() != table.n_l)
    throw ConfigError("band table does not match the lattice");
  SimState s;
  s.U = inverse_bloch_real(ansatz_spectrum(table, in, false), lattice);
  s.V = inverse_bloch_real(ansatz_spectrum(table, in, true), lattice);
  s.t = in.time;
  return s;
}

/// Line mode: the ring's plane waves e^{ikx} are exact discrete eigenvectors with
/// λ_h(k) = (4/h²) sin²(kh/2).
inline SimState init_fourier(const LatticePtr& lattice, const AnsatzInput& in) {
  detail::check_ansatz(in);
  if (lattice->mode() != Mode::line) throw ConfigError("Fourier initialization needs the line lattice");
  const std::size_t n = lattice->dof_count();
  const double length = lattice->domain_length();
  const double h = lattice->h();
  const double dk = 2.0 * std::numbers::pi / length;
  const double shift = in.x_center + in.c * in.time;
  std::vector<std::complex<double>> cu(n, 0.0), cv(n, 0.0), u(n), v(n);
  const long half = static_cast<long>(n / 2);
  for (long p = -half + 1; p < half; ++p) {
    const double k = dk * static_cast<double>(p);
    const std::complex<double> a =
        dk * in.epsilon * kdv::fourier_amplitude(*in.amplitude, k / in.epsilon) * std::polar(1.0, -k * shift);
    const double s = std::sin(0.5 * k * h);
    const double lam = 4.0 * s * s / (h * h);
    const double w = spectral::signed_omega(k, spectral::mu_from_lambda(lam));
    const auto idx = static_cast<std::size_t>((p + static_cast<long>(n)) % static_cast<long>(n));
    cu[idx] = a;
    cv[idx] = std::complex<double>(0.0, -w) * a;
  }
  ComplexFft fft(n);
  fft.backward(cu, u);
  fft.backward(cv, v);
  SimState st = SimState::zero(lattice);
  for (std::size_t i = 0; i < n; ++i) {
    // node i sits at x = i h, the DFT phase is e^{2πi p i / n} = e^{i k_p x_i}
    st.U[i] = u[i].real();
    st.V[i] = v[i].real();
  }
  st.t = in.time;
  return st;
}

/// ε²A(ε(x - x_c)) f⁰ at the nodes; flux balance at the vertices holds only up to O(ε³).
inline SimState init_plain(const LatticePtr& lattice, const AnsatzInput& in) {
  detail::check_ansatz(in);
  const kdv::KdVState dA = kdv::derivative(*in.amplitude);
  SimState st = SimState::zero(lattice);
  const double e = in.epsilon;
  const double centre = in.x_center + in.c * in.time;
  for (std::size_t i = 0; i < st.U.size(); ++i) {
    const double X = e * (lattice->position(i) - centre);
    st.U[i] = e * e * in.profile_factor * kdv::interpolate(*in.amplitude, X);
    st.V[i] = -in.c * e * e * e * in.profile_factor * kdv::interpolate(dA, X);
  }
  st.t = in.time;
  return st;
}

inline SimState init_from_kdv_ansatz(const LatticePtr& lattice, const BandTable* table, const AnsatzInput& in,
                                     InitKind kind) {
  switch (kind) {
    case InitKind::bloch:
      if (!table) throw ConfigError("Bloch initialization needs a band table");
      return init_bloch(lattice, *table, in);
    case InitKind::fourier: return init_fourier(lattice, in);
    case InitKind::plain: return init_plain(lattice, in);
  }
  throw ConfigError("unknown initialization kind");
}

/// Real Bloch mode U = Re(a e^{ilx} f(l,x)), V = Re(-iω a e^{ilx} f(l,x)) for grid wavenumber index k.
inline SimState init_bloch_mode(const LatticePtr& lattice, const BandTable& table, std::size_t k, double a) {
  SimState st = SimState::zero(lattice);
  const double l = table.l(k);
  for (std::size_t i = 0; i < st.U.size(); ++i) {
    const std::complex<double> z =
        a * std::polar(1.0, l * lattice->position(i)) * table.f[k][lattice->local_of(i)];
    st.U[i] = z.real();
    st.V[i] = (std::complex<double>(0.0, -table.omega[k]) * z).real();
  }
  return st;
}

}  // namespace necklace
