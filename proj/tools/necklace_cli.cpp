// Command-line front end: band tables, Boussinesq runs, KdV trajectories, validation ladders and
// the residual experiment. Exit codes: 0 success, 1 validation failed, 2 config, 3 solver, 4 I/O.

#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "necklace/necklace.hpp"

namespace {

using namespace necklace;
using io::json;
namespace fs = std::filesystem;

bool g_record_timings = false;

json wall(double seconds) { return g_record_timings ? json(seconds) : json(nullptr); }

/// Flag/config binding: values from the JSON config apply only where the flag was not given.
class Bindings {
 public:
  template <class T>
  CLI::Option* add(CLI::App* app, const std::string& name, T& target, const std::string& help) {
    auto* opt = app->add_option("--" + name, target, help)->capture_default_str();
    setters_[name] = {opt, [&target](const json& j) { target = j.get<T>(); }};
    keys_[name] = [&target]() { return json(target); };
    return opt;
  }
  CLI::Option* flag(CLI::App* app, const std::string& name, bool& target, const std::string& help) {
    auto* opt = app->add_flag("--" + name, target, help);
    setters_[name] = {opt, [&target](const json& j) { target = j.get<bool>(); }};
    keys_[name] = [&target]() { return json(target); };
    return opt;
  }

  void apply(const json& section) {
    if (!section.is_object()) throw ConfigError("config section must be a JSON object");
    for (const auto& [key, value] : section.items()) {
      auto it = setters_.find(key);
      if (it == setters_.end()) throw ConfigError("unknown config key '" + key + "'");
      if (it->second.first->count() > 0) continue;
      try {
        it->second.second(value);
      } catch (const json::exception& e) {
        throw ConfigError("config key '" + key + "': " + e.what());
      }
    }
  }

  json resolved() const {
    json j = json::object();
    for (const auto& [k, get] : keys_) j[k] = get();
    return j;
  }

 private:
  std::map<std::string, std::pair<CLI::Option*, std::function<void(const json&)>>> setters_;
  std::map<std::string, std::function<json()>> keys_;
};

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t next = s.find(',', pos);
    const std::string tok = s.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    if (!tok.empty()) {
      try {
        std::size_t used = 0;
        out.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ConfigError("not a number in list: '" + tok + "'");
      }
    }
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  if (out.empty()) throw ConfigError("empty number list");
  return out;
}

// ---------------------------------------------------------------------------------------------

struct BandsArgs {
  int l_samples = 101;
  int bands = 3;
  int m = 40;
  std::string out = "out/bands";
  bool svg = false;
};

int run_bands(const BandsArgs& a, const json& resolved) {
  if (a.l_samples < 2) throw ConfigError("--l-samples must be >= 2");
  if (a.bands < 1) throw ConfigError("--bands must be >= 1");
  const fs::path out(a.out);
  io::ensure_directory(out);
  std::vector<spectral::BandCurve> curves;
  for (int b = 1; b <= a.bands; ++b) curves.push_back(spectral::sample_band(b, a.l_samples));
  io::write_bands_csv(out / "bands.csv", curves);
  io::write_json(out / "band_derivs.json", io::to_json(io::band_derivatives(Mode::symmetric, a.m)));
  if (a.svg) {
    svg::Plot plot{"necklace band structure", "l", "omega", false, false, {}};
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
    for (const auto& c : curves) {
      svg::Series up{"band " + std::to_string(c.band), {}, {}, colors[(c.band - 1) % 5], false};
      svg::Series down{"", {}, {}, colors[(c.band - 1) % 5], false};
      for (const auto& p : c.samples) {
        up.x.push_back(p.l);
        up.y.push_back(std::sqrt(p.mu));
        down.x.push_back(p.l);
        down.y.push_back(-std::sqrt(p.mu));
      }
      plot.series.push_back(up);
      plot.series.push_back(down);
    }
    io::write_text(out / "bands.svg", svg::render(plot));
  }
  io::write_json(out / "config.json", resolved);
  return 0;
}

// ---------------------------------------------------------------------------------------------

struct SimulateArgs {
  std::string mode = "symmetric";
  int m = 40;
  std::size_t n_cells = 0;  // 0: sized for T0/ε³ without wrap-around
  double epsilon = 0.25;
  double T0 = 0.5;
  double dt = 0.02;
  double t_end = -1;  // < 0: T0/ε³
  long snapshot_stride = 0;
  std::string init;  // empty: fourier on the line, plain on the necklace
  std::string coeffs = "measured";
  double amplitude = 1.0;
  bool linear = false;
  std::string out = "out/simulate";
};

int run_simulate(const SimulateArgs& a, const json& resolved) {
  validation::ComparisonConfig cfg;
  cfg.mode = mode_from_string(a.mode);
  cfg.m = a.m;
  cfg.normalization = kdv::normalization_from_string(a.coeffs);
  if (!a.init.empty()) cfg.init = init_kind_from_string(a.init);
  if (a.snapshot_stride < 0) throw ConfigError("--snapshot-stride must be >= 0");
  const auto coeffs = validation::comparison_coeffs(cfg.mode, cfg.normalization);
  validation::Sizing sz = validation::size_domain(a.epsilon, a.T0, coeffs.c, cfg);
  if (a.n_cells > 0) {
    sz.n_cells = a.n_cells;
    sz.domain_length = 2.0 * std::numbers::pi * static_cast<double>(a.n_cells);
    sz.x_center = 0.5 * sz.domain_length;
    sz.kdv_length = a.epsilon * sz.domain_length;
  }
  const double t_end = a.t_end >= 0 ? a.t_end : sz.t_max;
  if (!(a.dt > 0)) throw ConfigError("--dt must be positive");

  auto lattice = build_lattice(sz.n_cells, a.m, cfg.mode);
  auto ops = std::make_shared<const DiscreteOperators>(lattice);
  const auto A = kdv::make_state(sz.kdv_length, sz.kdv_modes,
                                 [&](double X) { return a.amplitude * validation::initial_profile(X); });
  const InitKind kind = cfg.resolved_init();
  std::optional<BandTable> table;
  if (kind == InitKind::bloch) table = build_band_table(lattice->cell(), lattice->n_cells());
  AnsatzInput in;
  in.amplitude = &A;
  in.epsilon = a.epsilon;
  in.x_center = sz.x_center;
  in.c = coeffs.c;
  in.profile_factor = validation::profile_factor(cfg.mode, a.m);
  SimState state = init_from_kdv_ansatz(lattice, table ? &*table : nullptr, in, kind);

  const fs::path out(a.out);
  const fs::path snaps = out / "snapshots";
  io::ensure_directory(snaps);
  const auto n_steps = static_cast<long>(std::ceil(t_end / a.dt - 1e-9));
  const double dt = n_steps > 0 ? t_end / static_cast<double>(n_steps) : a.dt;
  json names = json::array();
  auto observer = [&](long step, const SimState& s) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "%08ld", step);
    io::write_snapshot(snaps, std::string("U_") + stem, s.U, s.t, a.epsilon);
    io::write_snapshot(snaps, std::string("V_") + stem, s.V, s.t, a.epsilon);
    names.push_back(stem);
  };
  BoussinesqIntegrator integrator(ops, !a.linear);
  const SolverStats stats = simulate(integrator, state, n_steps, dt, a.snapshot_stride, observer);

  const auto d = spectral::mu_derivatives_at_zero(cfg.mode);
  json meta{{"config", resolved},
            {"lattice",
             json{{"n_cells", lattice->n_cells()},
                  {"m", lattice->m()},
                  {"mode", std::string(to_string(lattice->mode()))},
                  {"dof_count", lattice->dof_count()},
                  {"h", lattice->h()}}},
            {"init", std::string(to_string(kind))},
            {"band_derivatives", json{{"d2_mu0", d.d2}, {"d4_mu0", d.d4}}},
            {"coeffs", io::to_json(coeffs)},
            {"solver",
             json{{"direct", ops->uses_direct_solver()},
                  {"dt", dt},
                  {"steps", stats.steps},
                  {"helmholtz_solves", stats.helmholtz_solves},
                  {"final_linear_energy", linear_energy(*ops, state)}}},
            {"snapshots", names},
            {"wall_s", wall(stats.wall_seconds)}};
  io::write_json(out / "sim_meta.json", meta);
  io::write_json(out / "config.json", resolved);
  return 0;
}

// ---------------------------------------------------------------------------------------------

struct KdvArgs {
  std::string mode = "symmetric";
  std::string coeffs = "measured";
  double T_end = 0.5;
  double dT = 1e-3;
  std::size_t n_modes = 1024;
  double length = 60;
  long stride = 50;
  double amplitude = 1.0;
  std::string out = "out/kdv";
};

int run_kdv(const KdvArgs& a, const json& resolved) {
  const auto coeffs = validation::comparison_coeffs(mode_from_string(a.mode), kdv::normalization_from_string(a.coeffs));
  const auto init = kdv::make_state(a.length, a.n_modes, [&](double X) { return a.amplitude * validation::initial_profile(X); });
  const auto traj = kdv::kdv_solve(init, coeffs, a.T_end, a.dT, a.stride);
  const fs::path out(a.out);
  io::write_kdv_traj_csv(out / "kdv_traj.csv", traj, coeffs);
  io::write_json(out / "config.json", resolved);
  return 0;
}

// ---------------------------------------------------------------------------------------------

struct ValidateArgs {
  std::string eps = "0.45,0.375,0.3,0.25";
  double T0 = 0.5;
  std::string mode = "symmetric";
  std::string coeffs = "both";
  int m = 40;
  double dt = 0.02;
  std::string init;
  long samples = 200;
  bool svg = false;
  std::string out = "out/validate";
};

svg::Plot fit_plot(const validation::LadderResult& r, const std::string& title) {
  svg::Plot p{title, "epsilon", "max sup error", true, true, {}};
  svg::Series pts{"measured", r.fit.epsilons, r.fit.errors, "#1f77b4", true};
  p.series.push_back(pts);
  if (r.fit.fitted) {
    svg::Series line{"fit, slope " + io::fmt(std::round(r.fit.slope * 1000) / 1000), {}, {}, "#d62728", false};
    for (double e : r.fit.epsilons) {
      line.x.push_back(e);
      line.y.push_back(std::exp(r.fit.intercept + r.fit.slope * std::log(e)));
    }
    p.series.push_back(line);
  }
  return p;
}

int run_validate(const ValidateArgs& a, const json& resolved) {
  const auto eps = parse_list(a.eps);
  validation::ComparisonConfig cfg;
  cfg.mode = mode_from_string(a.mode);
  cfg.m = a.m;
  cfg.T0 = a.T0;
  cfg.dt = a.dt;
  cfg.samples = a.samples;
  if (!a.init.empty()) cfg.init = init_kind_from_string(a.init);
  std::vector<kdv::Normalization> choices;
  if (a.coeffs == "both") choices = {kdv::Normalization::paper, kdv::Normalization::measured_beta};
  else choices = {kdv::normalization_from_string(a.coeffs)};

  const fs::path out(a.out);
  io::ensure_directory(out);
  const unsigned workers = validation::worker_count();
  json runs = json::array();
  json passing = json::array();
  for (auto choice : choices) {
    cfg.normalization = choice;
    const auto res = validation::convergence_ladder(eps, cfg, workers);
    json report = io::ladder_report(cfg, res, g_record_timings);
    const fs::path dir = choices.size() > 1 ? out / std::string(kdv::to_string(choice)) : out;
    for (const auto& r : res.reports) io::write_error_series_csv(dir / io::error_series_name(r.epsilon), r);
    if (a.svg) io::write_text(dir / "fit.svg", svg::render(fit_plot(res, std::string(to_string(cfg.mode)) + ", " +
                                                                               std::string(kdv::to_string(choice)))));
    if (choices.size() > 1) io::write_json(dir / "report.json", report);
    if (report["pass"].get<bool>()) passing.push_back(std::string(kdv::to_string(choice)));
    std::cout << to_string(cfg.mode) << " " << kdv::to_string(choice) << ": slope "
              << (res.fit.fitted ? io::fmt(res.fit.slope) : std::string("n/a")) << ", errors "
              << (res.fit.strictly_decreasing ? "decreasing" : "not decreasing")
              << (res.fit.poisoned ? ", ladder poisoned by an invalid run" : "") << " -> "
              << (report["pass"].get<bool>() ? "PASS" : "FAIL") << "\n";
    runs.push_back(std::move(report));
  }
  json top;
  if (choices.size() == 1) {
    top = runs.front();
  } else {
    const auto th = io::thresholds_for(cfg.mode);
    top = json{{"mode", std::string(to_string(cfg.mode))},
               {"coeff_choice", "both"},
               {"runs", runs},
               {"passing_normalizations", passing},
               {"pass", !passing.empty()},
               {"thresholds", json{{"slope_min", th.slope_min}, {"slope_max", th.slope_max}}}};
  }
  io::write_json(out / "report.json", top);
  io::write_json(out / "config.json", resolved);
  return top["pass"].get<bool>() ? 0 : 1;
}

// ---------------------------------------------------------------------------------------------

struct ResidualArgs {
  std::string eps = "0.45,0.375,0.3,0.25";
  std::string mode = "symmetric";
  std::string coeffs = "measured";
  double T0 = 0.5;
  double dt_r = 0.1;
  int m = 40;
  int n_times = 5;
  std::string out = "out/residual";
};

int run_residual(const ResidualArgs& a, const json& resolved) {
  const auto eps = parse_list(a.eps);
  validation::ResidualConfig cfg;
  cfg.mode = mode_from_string(a.mode);
  cfg.normalization = kdv::normalization_from_string(a.coeffs);
  cfg.T0 = a.T0;
  cfg.dt_r = a.dt_r;
  cfg.m = a.m;
  cfg.n_times = a.n_times;
  std::vector<validation::ResidualReport> reps(eps.size());
  validation::parallel_for(eps.size(), validation::worker_count(),
                           [&](std::size_t i) { reps[i] = validation::residual_experiment(cfg, eps[i]); });
  json ladder = json::array();
  std::vector<double> sups;
  for (const auto& r : reps) {
    json sup = json::array(), l2 = json::array();
    for (const auto& n : r.norms) {
      sup.push_back(n.sup);
      l2.push_back(n.l2);
    }
    ladder.push_back(json{{"epsilon", r.epsilon}, {"max_sup", r.max_sup}, {"max_l2", r.max_l2}, {"times", r.times},
                          {"sup", sup}, {"l2", l2}});
    sups.push_back(r.max_sup);
  }
  const auto fit = validation::fit_convergence(eps, sups);
  const bool pass = fit.fitted && fit.strictly_decreasing && fit.slope >= 3.0;
  io::write_json(fs::path(a.out) / "residual.json",
                 json{{"mode", a.mode},
                      {"coeff_choice", std::string(kdv::to_string(cfg.normalization))},
                      {"ladder", ladder},
                      {"slope", io::nullable(fit.slope)},
                      {"strictly_decreasing", fit.strictly_decreasing},
                      {"slope_min", 3.0},
                      {"pass", pass}});
  io::write_json(fs::path(a.out) / "config.json", resolved);
  std::cout << "residual slope " << (fit.fitted ? io::fmt(fit.slope) : std::string("n/a")) << " -> "
            << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boussinesq/KdV laboratory on the periodic necklace graph"};
  app.require_subcommand(1);
  std::string config_path;
  bool seedless = false;
  app.add_option("--config", config_path, "JSON config; top-level keys name subcommands")->check(CLI::ExistingFile);
  app.add_flag("--seedless", seedless, "accepted for scripting; the core uses no randomness");
  app.add_flag("--record-timings", g_record_timings, "write wall-clock seconds instead of null");

  Bindings bind;
  BandsArgs bands;
  auto* c_bands = app.add_subcommand("bands", "band curves, band derivatives and the β limit");
  bind.add(c_bands, "l-samples", bands.l_samples, "number of l samples on [-1/2, 1/2]");
  bind.add(c_bands, "bands", bands.bands, "number of bands");
  bind.add(c_bands, "m", bands.m, "grid points per edge for the β measurement");
  bind.add(c_bands, "out", bands.out, "output directory");
  bind.flag(c_bands, "svg", bands.svg, "also write bands.svg");
  Bindings bind_sim;
  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Boussinesq run from KdV-ansatz initial data");
  bind_sim.add(c_sim, "mode", sim.mode, "full|symmetric|line");
  bind_sim.add(c_sim, "m", sim.m, "grid points per edge");
  bind_sim.add(c_sim, "n-cells", sim.n_cells, "number of cells (0: no-wrap sizing)");
  bind_sim.add(c_sim, "epsilon", sim.epsilon, "small parameter");
  bind_sim.add(c_sim, "T0", sim.T0, "slow horizon");
  bind_sim.add(c_sim, "dt", sim.dt, "time step");
  bind_sim.add(c_sim, "t-end", sim.t_end, "end time (negative: T0/eps^3)");
  bind_sim.add(c_sim, "snapshot-stride", sim.snapshot_stride, "steps between snapshots (0: first and last only)");
  bind_sim.add(c_sim, "init", sim.init, "bloch|fourier|plain");
  bind_sim.add(c_sim, "coeffs", sim.coeffs, "paper|measured");
  bind_sim.add(c_sim, "amplitude", sim.amplitude, "scale of the initial KdV profile");
  bind_sim.flag(c_sim, "linear", sim.linear, "drop the quadratic term");
  bind_sim.add(c_sim, "out", sim.out, "output directory");
  Bindings bind_kdv;
  KdvArgs kd;
  auto* c_kdv = app.add_subcommand("kdv", "KdV trajectory with band-derived coefficients");
  bind_kdv.add(c_kdv, "mode", kd.mode, "full|symmetric|line");
  bind_kdv.add(c_kdv, "coeffs", kd.coeffs, "paper|measured");
  bind_kdv.add(c_kdv, "T-end", kd.T_end, "final slow time");
  bind_kdv.add(c_kdv, "dT", kd.dT, "time step");
  bind_kdv.add(c_kdv, "n-modes", kd.n_modes, "grid size");
  bind_kdv.add(c_kdv, "length", kd.length, "periodic domain length");
  bind_kdv.add(c_kdv, "stride", kd.stride, "steps between trajectory samples");
  bind_kdv.add(c_kdv, "amplitude", kd.amplitude, "scale of the initial profile");
  bind_kdv.add(c_kdv, "out", kd.out, "output directory");
  Bindings bind_val;
  ValidateArgs val;
  auto* c_val = app.add_subcommand("validate", "epsilon ladder against the KdV approximation");
  bind_val.add(c_val, "eps", val.eps, "comma-separated decreasing epsilons");
  bind_val.add(c_val, "T0", val.T0, "slow horizon");
  bind_val.add(c_val, "mode", val.mode, "full|symmetric|line");
  bind_val.add(c_val, "coeffs", val.coeffs, "paper|measured|both");
  bind_val.add(c_val, "m", val.m, "grid points per edge");
  bind_val.add(c_val, "dt", val.dt, "time step");
  bind_val.add(c_val, "init", val.init, "bloch|fourier|plain");
  bind_val.add(c_val, "samples", val.samples, "error samples per run");
  bind_val.flag(c_val, "svg", val.svg, "also write the log-log fit as SVG");
  bind_val.add(c_val, "out", val.out, "output directory");
  Bindings bind_res;
  ResidualArgs res;
  auto* c_res = app.add_subcommand("residual", "residual of the first-order ansatz along the ladder");
  bind_res.add(c_res, "eps", res.eps, "comma-separated decreasing epsilons");
  bind_res.add(c_res, "mode", res.mode, "full|symmetric|line");
  bind_res.add(c_res, "coeffs", res.coeffs, "paper|measured");
  bind_res.add(c_res, "T0", res.T0, "slow horizon");
  bind_res.add(c_res, "dt-r", res.dt_r, "time step of the difference quotient");
  bind_res.add(c_res, "m", res.m, "grid points per edge");
  bind_res.add(c_res, "n-times", res.n_times, "evaluation times");
  bind_res.add(c_res, "out", res.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    json config = json::object();
    if (!config_path.empty()) config = io::read_json(config_path);
    auto section = [&](const char* name) { return config.contains(name) ? config[name] : json::object(); };
    if (*c_bands) {
      bind.apply(section("bands"));
      return run_bands(bands, bind.resolved());
    }
    if (*c_sim) {
      bind_sim.apply(section("simulate"));
      return run_simulate(sim, bind_sim.resolved());
    }
    if (*c_kdv) {
      bind_kdv.apply(section("kdv"));
      return run_kdv(kd, bind_kdv.resolved());
    }
    if (*c_val) {
      bind_val.apply(section("validate"));
      return run_validate(val, bind_val.resolved());
    }
    if (*c_res) {
      bind_res.apply(section("residual"));
      return run_residual(res, bind_res.resolved());
    }
  } catch (const necklace::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(Error::Category::solver);
  }
  return 2;
}
