#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "necklace/boussinesq.hpp"
#include "necklace/kdv.hpp"
#include "necklace/spectral.hpp"

namespace necklace::validation {

/// |X| beyond which sech²(X/2) < 1e-8.
inline double profile_half_width() { return 2.0 * std::acosh(1e4); }

inline double initial_profile(double X) { return kdv::sech2(0.5 * X); }

struct ComparisonConfig {
  Mode mode = Mode::symmetric;
  int m = 40;
  double T0 = 0.5;
  double dt = 0.02;
  kdv::Normalization normalization = kdv::Normalization::measured_beta;
  std::optional<InitKind> init;  // default: fourier on the line, plain on the necklace
  double margin = 4.0 * std::numbers::pi;
  std::size_t kdv_min_modes = 1024;
  double kdv_dx = 0.06;   // upper bound on the KdV grid spacing
  double kdv_max_dT = 1e-3;
  long samples = 200;
  double wrap_threshold = 1e-6;

  InitKind resolved_init() const {
    if (init) return *init;
    return mode == Mode::line ? InitKind::fourier : InitKind::plain;
  }
};

/// f⁰ of the comparison profile: (cell length)^{-1/2} on the necklace, 1 on the line.
inline double profile_factor(Mode mode, int m = 40) {
  if (mode == Mode::line) return 1.0;
  return 1.0 / std::sqrt(CellGeometry(std::max(m, 2), mode).length());
}

inline kdv::KdVCoeffs comparison_coeffs(Mode mode, kdv::Normalization normalization) {
  const auto d = spectral::mu_derivatives_at_zero(mode);
  return kdv::coeffs_from_band(d.d2, d.d4, normalization, profile_factor(mode));
}

struct Sizing {
  double t_max = 0;
  std::size_t n_cells = 0;
  double domain_length = 0;
  double x_center = 0;
  double kdv_length = 0;
  std::size_t kdv_modes = 0;
};

/// Packet centred in a periodic domain with room for the profile width plus c t_max on both
/// sides (left-moving radiation travels at -c).
inline Sizing size_domain(double epsilon, double T0, double c, const ComparisonConfig& cfg) {
  if (!(epsilon > 0)) throw ConfigError("epsilon must be positive");
  if (!(T0 > 0)) throw ConfigError("T0 must be positive");
  Sizing s;
  s.t_max = T0 / (epsilon * epsilon * epsilon);
  const double half = profile_half_width() / epsilon + c * s.t_max + cfg.margin;
  const double two_pi = 2.0 * std::numbers::pi;
  s.n_cells = static_cast<std::size_t>(std::ceil(2.0 * half / two_pi));
  if (s.n_cells % 2 != 0) ++s.n_cells;
  s.n_cells = std::max<std::size_t>(s.n_cells, 2);
  s.domain_length = two_pi * static_cast<double>(s.n_cells);
  s.x_center = 0.5 * s.domain_length;
  s.kdv_length = epsilon * s.domain_length;
  s.kdv_modes = cfg.kdv_min_modes;
  while (s.kdv_length / static_cast<double>(s.kdv_modes) > cfg.kdv_dx) s.kdv_modes *= 2;
  return s;
}

struct ErrorReport {
  double epsilon = 0;
  double T0 = 0;
  double t_max = 0;
  std::vector<double> times;
  std::vector<double> sup_error;
  double max_sup_error = 0;
  double signal = 0;  // ε² f⁰ max A(·, 0)
  bool valid = true;
  std::string diagnostic;
  bool continuous = true;  // no jump > 5x between adjacent samples
  Sizing sizing;
  Mode mode = Mode::symmetric;
  int m = 0;
  kdv::Normalization normalization = kdv::Normalization::paper;
  InitKind init = InitKind::bloch;
  kdv::KdVCoeffs coeffs;
  SolverStats stats;
  double wall_seconds = 0;
};

namespace detail {
inline bool seam_clear(const GraphField& u, double threshold) {
  const auto& lat = u.lattice();
  const std::size_t d = lat.dofs_per_cell();
  const std::size_t n = lat.n_cells();
  for (std::size_t c : {std::size_t{0}, n - 1})
    for (std::size_t j = 0; j < d; ++j)
      if (std::abs(u[lat.index(c, j)]) > threshold) return false;
  return true;
}

// Pairs whose larger entry is below 1% of the series maximum are ignored: the error starts from
// an exact zero when the initial data is the comparison profile itself.
inline bool no_jumps(const std::vector<double>& e) {
  double top = 0;
  for (double v : e) top = std::max(top, v);
  const double floor = std::max(1e-14, 1e-2 * top);
  for (std::size_t i = 1; i < e.size(); ++i) {
    const double a = e[i - 1], b = e[i];
    const double lo = std::min(a, b), hi = std::max(a, b);
    if (hi > 5.0 * lo && hi > floor) return false;
  }
  return true;
}
}  // namespace detail

/// sup_x |U(x, t) - ε² f⁰ A(ε(x - x_c - ct), ε³t)| on [0, T0/ε³] from the KdV and Boussinesq runs.
inline ErrorReport run_comparison(const ComparisonConfig& cfg, double epsilon) {
  const auto start = std::chrono::steady_clock::now();
  ErrorReport rep;
  rep.epsilon = epsilon;
  rep.T0 = cfg.T0;
  rep.mode = cfg.mode;
  rep.m = cfg.m;
  rep.normalization = cfg.normalization;
  rep.init = cfg.resolved_init();
  rep.coeffs = comparison_coeffs(cfg.mode, cfg.normalization);
  const double f0 = profile_factor(cfg.mode, cfg.m);
  rep.sizing = size_domain(epsilon, cfg.T0, rep.coeffs.c, cfg);
  rep.t_max = rep.sizing.t_max;

  auto lattice = build_lattice(rep.sizing.n_cells, cfg.m, cfg.mode);
  auto ops = std::make_shared<const DiscreteOperators>(lattice);
  kdv::KdVState A = kdv::make_state(rep.sizing.kdv_length, rep.sizing.kdv_modes, initial_profile);
  rep.signal = epsilon * epsilon * f0 * *std::max_element(A.A.begin(), A.A.end());

  std::optional<BandTable> table;
  if (rep.init == InitKind::bloch) table = build_band_table(lattice->cell(), lattice->n_cells());
  AnsatzInput in;
  in.amplitude = &A;
  in.epsilon = epsilon;
  in.x_center = rep.sizing.x_center;
  in.c = rep.coeffs.c;
  in.profile_factor = f0;
  SimState state = init_from_kdv_ansatz(lattice, table ? &*table : nullptr, in, rep.init);

  const auto n_steps = static_cast<long>(std::ceil(rep.t_max / cfg.dt - 1e-9));
  const double dt = rep.t_max / static_cast<double>(n_steps);
  const long stride = std::max<long>(1, n_steps / std::max<long>(1, cfg.samples));
  kdv::KdVSolver kdv_solver(rep.coeffs, A.domain_length, A.n_modes());
  const double e3 = epsilon * epsilon * epsilon;

  auto compare = [&](const SimState& s) {
    if (rep.valid && !detail::seam_clear(s.U, cfg.wrap_threshold)) {
      rep.valid = false;
      std::ostringstream msg;
      msg << "wrap-around: |U| > " << cfg.wrap_threshold << " next to the periodic seam at t = " << s.t;
      rep.diagnostic = msg.str();
    }
    kdv_solver.advance(A, e3 * s.t - A.T, cfg.kdv_max_dT);
    double err = 0;
    for (std::size_t i = 0; i < s.U.size(); ++i) {
      const double X = epsilon * (lattice->position(i) - rep.sizing.x_center - rep.coeffs.c * s.t);
      const double ref = epsilon * epsilon * f0 * kdv::interpolate(A, X);
      err = std::max(err, std::abs(s.U[i] - ref));
    }
    rep.times.push_back(s.t);
    rep.sup_error.push_back(err);
  };

  BoussinesqIntegrator integrator(ops, true);
  rep.stats = simulate(integrator, state, n_steps, dt, stride, [&](long, const SimState& s) { compare(s); });
  rep.max_sup_error = *std::max_element(rep.sup_error.begin(), rep.sup_error.end());
  rep.continuous = detail::no_jumps(rep.sup_error);
  for (double e : rep.sup_error)
    if (!std::isfinite(e)) {
      rep.valid = false;
      rep.diagnostic = "non-finite error sample";
    }
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

struct ConvergenceFit {
  std::vector<double> epsilons;
  std::vector<double> errors;
  double slope = std::nan("");
  double intercept = std::nan("");
  std::vector<double> residuals;
  bool fitted = false;
  bool poisoned = false;  // some ladder run was invalidated
  bool strictly_decreasing = false;
};

/// Least-squares line through (log ε, log error).
inline ConvergenceFit fit_convergence(const std::vector<double>& epsilons, const std::vector<double>& errors,
                                      bool poisoned = false) {
  if (epsilons.size() != errors.size()) throw ConfigError("ladder and error counts differ");
  ConvergenceFit fit;
  fit.epsilons = epsilons;
  fit.errors = errors;
  fit.poisoned = poisoned;
  fit.strictly_decreasing = errors.size() >= 2;
  for (std::size_t i = 1; i < errors.size(); ++i)
    if (!(errors[i] < errors[i - 1])) fit.strictly_decreasing = false;
  if (epsilons.size() < 3) return fit;
  for (std::size_t i = 1; i < epsilons.size(); ++i)
    if (!(epsilons[i] < epsilons[i - 1])) throw ConfigError("epsilon ladder must be strictly decreasing");
  const auto n = static_cast<double>(epsilons.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (!(errors[i] > 0)) return fit;
    const double x = std::log(epsilons[i]), y = std::log(errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  fit.intercept = (sy - fit.slope * sx) / n;
  for (std::size_t i = 0; i < epsilons.size(); ++i)
    fit.residuals.push_back(std::log(errors[i]) - (fit.intercept + fit.slope * std::log(epsilons[i])));
  fit.fitted = true;
  return fit;
}

/// Worker count from NECKLACE_WORKERS, else the hardware concurrency.
inline unsigned worker_count() {
  if (const char* env = std::getenv("NECKLACE_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1)
      throw ConfigError(std::string("NECKLACE_WORKERS must be a positive integer, got '") + env + "'");
    return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs `job(i)` for i in [0, n) on at most `workers` threads; rethrows the first failure.
template <class Job>
void parallel_for(std::size_t n, unsigned workers, Job&& job) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned count = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < count; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

struct LadderResult {
  std::vector<ErrorReport> reports;
  ConvergenceFit fit;
};

inline LadderResult convergence_ladder(const std::vector<double>& epsilons, const ComparisonConfig& cfg,
                                       unsigned workers = worker_count()) {
  if (epsilons.empty()) throw ConfigError("epsilon ladder is empty");
  LadderResult out;
  out.reports.resize(epsilons.size());
  parallel_for(epsilons.size(), workers, [&](std::size_t i) { out.reports[i] = run_comparison(cfg, epsilons[i]); });
  std::vector<double> errors;
  bool poisoned = false;
  for (const auto& r : out.reports) {
    errors.push_back(r.max_sup_error);
    poisoned = poisoned || !r.valid;
  }
  out.fit = fit_convergence(epsilons, errors, poisoned);
  return out;
}

// ---------------------------------------------------------------------------------------------
// Residual of the first-order ansatz

struct ResidualNorms {
  double sup = 0;
  double l2 = 0;
};

/// ∂_t²U + B²U + B²(U²) at the centre of five ansatz fields U(t + k dt_r), k = -2..2, with the
/// second time derivative by fourth-order central differences.
inline ResidualNorms residual_norm(const std::array<GraphField, 5>& u, double dt_r, const DiscreteOperators& ops) {
  for (const auto& f : u) check_same_lattice(u[2], f);
  const std::size_t n = u[2].size();
  GraphField d2(u[2].lattice_ptr());
  GraphField w(u[2].lattice_ptr());
  for (std::size_t i = 0; i < n; ++i) {
    d2[i] = (-u[0][i] + 16.0 * u[1][i] - 30.0 * u[2][i] + 16.0 * u[3][i] - u[4][i]) / (12.0 * dt_r * dt_r);
    w[i] = u[2][i] + u[2][i] * u[2][i];
  }
  const GraphField r = d2 + ops.apply_B2(w);
  return {sup_norm(r), l2_norm(r)};
}

struct ResidualConfig {
  Mode mode = Mode::symmetric;
  int m = 40;
  double T0 = 0.5;
  double dt_r = 0.1;
  int n_times = 5;  // evaluation times spread over [0, T0/ε³]
  double cancellation_tolerance = 5e-2;
  kdv::Normalization normalization = kdv::Normalization::measured_beta;
  ComparisonConfig sizing;  // margin / KdV grid settings
};

struct ResidualReport {
  double epsilon = 0;
  std::vector<double> times;
  std::vector<ResidualNorms> norms;
  double max_sup = 0;
  double max_l2 = 0;
};

/// First-order ansatz U = inverse Bloch [ε Â(T, l/ε) e^{-il(x_c + ct)} f(l, x)] with A from the KdV
/// equation (Fourier modes in line mode).
inline ResidualReport residual_experiment(const ResidualConfig& cfg, double epsilon) {
  ResidualReport rep;
  rep.epsilon = epsilon;
  ComparisonConfig cc = cfg.sizing;
  cc.mode = cfg.mode;
  cc.m = cfg.m;
  cc.T0 = cfg.T0;
  const auto coeffs = comparison_coeffs(cfg.mode, cfg.normalization);
  const Sizing sz = size_domain(epsilon, cfg.T0, coeffs.c, cc);
  auto lattice = build_lattice(sz.n_cells, cfg.m, cfg.mode);
  const DiscreteOperators ops(lattice);
  std::optional<BandTable> table;
  if (cfg.mode != Mode::line) table = build_band_table(lattice->cell(), lattice->n_cells());
  kdv::KdVState A = kdv::make_state(sz.kdv_length, sz.kdv_modes, initial_profile);
  kdv::KdVSolver solver(coeffs, A.domain_length, A.n_modes());
  const double e3 = epsilon * epsilon * epsilon;

  auto field_at = [&](double t, const kdv::KdVState& amp) {
    AnsatzInput in;
    in.amplitude = &amp;
    in.epsilon = epsilon;
    in.x_center = sz.x_center;
    in.c = coeffs.c;
    in.time = t;
    if (cfg.mode == Mode::line) return init_fourier(lattice, in).U;
    return inverse_bloch_real(ansatz_spectrum(*table, in, false), lattice);
  };

  auto norms_at = [&](double t, double h, const kdv::KdVState& base) {
    std::array<GraphField, 5> u;
    for (int k = -2; k <= 2; ++k) {
      kdv::KdVState s = base;  // base sits at ε³(t - 2h)
      solver.advance(s, e3 * (t + k * h) - s.T, cfg.sizing.kdv_max_dT);
      u[static_cast<std::size_t>(k + 2)] = field_at(t + k * h, s);
    }
    return residual_norm(u, h, ops);
  };

  const double t_max = sz.t_max;
  const double lead = 4.0 * cfg.dt_r;  // the ansatz is evaluated at t - 2(2dt_r) >= 0
  for (int i = 0; i < cfg.n_times; ++i) {
    const double t = lead + (t_max - 2.0 * lead) * static_cast<double>(i) / std::max(1, cfg.n_times - 1);
    kdv::KdVState base = A;
    solver.advance(base, e3 * (t - 2.0 * cfg.dt_r) - base.T, cfg.sizing.kdv_max_dT);
    const ResidualNorms r1 = norms_at(t, cfg.dt_r, base);
    kdv::KdVState base2 = A;
    solver.advance(base2, e3 * (t - 4.0 * cfg.dt_r) - base2.T, cfg.sizing.kdv_max_dT);
    const ResidualNorms r2 = norms_at(t, 2.0 * cfg.dt_r, base2);
    if (std::abs(r1.sup - r2.sup) > cfg.cancellation_tolerance * std::max(r1.sup, 1e-300)) {
      std::ostringstream msg;
      msg << "residual time differences lost to cancellation or truncation: dt_r = " << cfg.dt_r << " gives "
          << r1.sup << ", 2 dt_r gives " << r2.sup;
      throw SolverError(msg.str());
    }
    rep.times.push_back(t);
    rep.norms.push_back(r1);
    rep.max_sup = std::max(rep.max_sup, r1.sup);
    rep.max_l2 = std::max(rep.max_l2, r1.l2);
  }
  return rep;
}

// ---------------------------------------------------------------------------------------------
// Dispersion

struct DispersionRow {
  int m = 0;
  double l = 0;
  double lambda_discrete = 0;
  double lambda_exact = 0;
  double deviation = 0;
};

struct DispersionReport {
  std::vector<DispersionRow> rows;
  std::vector<double> orders;  // observed order per l from consecutive refinements
  double max_deviation = 0;
  bool below_band_edge = true;
};

/// Band-1 eigenvalues of the discrete cell against the closed form; `ms` should double.
inline DispersionReport dispersion_check(const std::vector<int>& ms, const std::vector<double>& ls,
                                          Mode mode = Mode::symmetric) {
  DispersionReport rep;
  const double edge = spectral::first_band_edge();
  for (double l : ls) {
    std::vector<double> dev;
    for (int m : ms) {
      const CellGeometry cell(m, mode);
      const auto pair = spectral::first_band_eigenpair(cell, l);
      DispersionRow row{m, l, pair.lambda, spectral::closed_form_first_band(l), 0};
      row.deviation = std::abs(row.lambda_discrete - row.lambda_exact);
      rep.max_deviation = std::max(rep.max_deviation, row.deviation);
      if (row.lambda_discrete > edge * (1.0 + 1.0 / (static_cast<double>(m) * m))) rep.below_band_edge = false;
      dev.push_back(row.deviation);
      rep.rows.push_back(row);
    }
    for (std::size_t i = 1; i < dev.size(); ++i)
      if (dev[i] > 0 && dev[i - 1] > 0)
        rep.orders.push_back(std::log(dev[i - 1] / dev[i]) / std::log(static_cast<double>(ms[i]) / ms[i - 1]));
  }
  return rep;
}

/// Frequency of the simulated linear Bloch mode at grid index k, from the unwrapped phase of its
/// projection over `periods` oscillations.
inline double measure_mode_frequency(const LatticePtr& lattice, const BandTable& table, std::size_t k,
                                     double periods = 10, double dt = 0.02) {
  auto ops = std::make_shared<const DiscreteOperators>(lattice);
  SimState s = init_bloch_mode(lattice, table, k, 1e-3);
  const double omega = std::abs(table.omega[k]);
  if (omega == 0) return 0;
  const double t_end = periods * 2.0 * std::numbers::pi / omega;
  const auto n_steps = static_cast<long>(std::ceil(t_end / dt));
  const double h = t_end / static_cast<double>(n_steps);
  const double l = table.l(k);
  std::vector<std::complex<double>> phi(s.U.size());
  for (std::size_t i = 0; i < phi.size(); ++i)
    phi[i] = std::polar(1.0, l * lattice->position(i)) * table.f[k][lattice->local_of(i)];
  std::vector<double> ts, phases;
  double prev = 0, offset = 0;
  auto project = [&](long, const SimState& st) {
    std::complex<double> z = 0;
    for (std::size_t i = 0; i < phi.size(); ++i) z += lattice->weight(i) * std::conj(phi[i]) * st.U[i];
    double p = std::arg(z);
    if (!phases.empty()) {
      while (p + offset - prev > std::numbers::pi) offset -= 2.0 * std::numbers::pi;
      while (p + offset - prev < -std::numbers::pi) offset += 2.0 * std::numbers::pi;
    }
    prev = p + offset;
    ts.push_back(st.t);
    phases.push_back(prev);
  };
  BoussinesqIntegrator integrator(ops, false);
  simulate(integrator, s, n_steps, h, 1, project);
  // phase = -ω t + const
  double st = 0, sp = 0, stt = 0, stp = 0;
  const auto n = static_cast<double>(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    st += ts[i];
    sp += phases[i];
    stt += ts[i] * ts[i];
    stp += ts[i] * phases[i];
  }
  return -(n * stp - st * sp) / (n * stt - st * st);
}

}  // namespace necklace::validation
