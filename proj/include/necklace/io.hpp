#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "necklace/boussinesq.hpp"
#include "necklace/kdv.hpp"
#include "necklace/spectral.hpp"
#include "necklace/validation.hpp"

namespace necklace::io {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

inline void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
}

inline std::ofstream open_output(const fs::path& path, bool binary = false) {
  if (path.has_parent_path()) ensure_directory(path.parent_path());
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

inline void close_checked(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw IoError("write to " + path.string() + " failed");
}

inline void write_text(const fs::path& path, const std::string& text) {
  auto out = open_output(path);
  out << text;
  close_checked(out, path);
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

/// Shortest round-trip decimal form, identical across runs.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

// ---------------------------------------------------------------------------------------------
// Snapshots: little-endian float64 in DOF order plus a JSON sidecar.

struct SnapshotMeta {
  std::size_t n_cells = 0;
  int m = 0;
  Mode mode = Mode::symmetric;
  double time = 0;
  double epsilon = 0;
  std::size_t dof_count = 0;
};

inline json to_json(const SnapshotMeta& m) {
  return json{{"n_cells", m.n_cells}, {"m", m.m},         {"mode", std::string(to_string(m.mode))},
              {"time", m.time},       {"epsilon", m.epsilon}, {"dof_count", m.dof_count}};
}

inline void write_field_binary(const fs::path& path, const GraphField& u) {
  auto out = open_output(path, true);
  for (double v : u.values()) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  close_checked(out, path);
}

inline std::vector<double> read_field_binary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<double> values;
  std::uint64_t bits = 0;
  while (in.read(reinterpret_cast<char*>(&bits), sizeof bits)) {
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    values.push_back(std::bit_cast<double>(bits));
  }
  if (!in.eof()) throw IoError("read from " + path.string() + " failed");
  return values;
}

/// Writes `<stem>.bin` and `<stem>.json`.
inline void write_snapshot(const fs::path& dir, const std::string& stem, const GraphField& u, double time,
                           double epsilon) {
  const auto& lat = u.lattice();
  SnapshotMeta meta{lat.n_cells(), lat.m(), lat.mode(), time, epsilon, lat.dof_count()};
  write_field_binary(dir / (stem + ".bin"), u);
  write_json(dir / (stem + ".json"), to_json(meta));
}

inline GraphField read_snapshot(const fs::path& dir, const std::string& stem, SnapshotMeta* meta_out = nullptr) {
  const json j = read_json(dir / (stem + ".json"));
  SnapshotMeta meta;
  try {
    meta.n_cells = j.at("n_cells").get<std::size_t>();
    meta.m = j.at("m").get<int>();
    meta.mode = mode_from_string(j.at("mode").get<std::string>());
    meta.time = j.at("time").get<double>();
    meta.epsilon = j.at("epsilon").get<double>();
    meta.dof_count = j.at("dof_count").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ConfigError("snapshot sidecar " + (dir / (stem + ".json")).string() + ": " + e.what());
  }
  auto values = read_field_binary(dir / (stem + ".bin"));
  if (values.size() != meta.dof_count) throw IoError("snapshot " + stem + " value count does not match its sidecar");
  if (meta_out) *meta_out = meta;
  return GraphField(build_lattice(meta.n_cells, meta.m, meta.mode), std::move(values));
}

// ---------------------------------------------------------------------------------------------
// Band data

inline void write_bands_csv(const fs::path& path, const std::vector<spectral::BandCurve>& curves) {
  std::ostringstream s;
  s << "l,band,lambda,mu,omega_plus,omega_minus\n";
  for (const auto& c : curves)
    for (const auto& p : c.samples) {
      const double w = std::sqrt(p.mu);
      s << fmt(p.l) << ',' << p.band << ',' << fmt(p.lambda) << ',' << fmt(p.mu) << ',' << fmt(w) << ','
        << fmt(-w) << '\n';
    }
  write_text(path, s.str());
}

struct BandDerivatives {
  double d2_mu0 = 0, d4_mu0 = 0, c = 0, nu1 = 0, nu2_paper = 0, nu2_normalized = 0, beta_limit_measured = 0;
};

inline BandDerivatives band_derivatives(Mode mode, int m_for_beta = 40) {
  const auto d = spectral::mu_derivatives_at_zero(mode);
  const auto paper = kdv::coeffs_from_band(d.d2, d.d4, kdv::Normalization::paper);
  BandDerivatives b;
  b.d2_mu0 = d.d2;
  b.d4_mu0 = d.d4;
  b.c = paper.c;
  b.nu1 = paper.nu1;
  b.nu2_paper = paper.nu2;
  b.nu2_normalized = paper.nu2 * validation::profile_factor(mode, m_for_beta);
  b.beta_limit_measured = spectral::beta_limit(CellGeometry(m_for_beta, mode == Mode::line ? Mode::line : Mode::symmetric));
  return b;
}

inline json to_json(const BandDerivatives& b) {
  return json{{"d2_mu0", b.d2_mu0},       {"d4_mu0", b.d4_mu0},         {"c", b.c},
              {"nu1", b.nu1},             {"nu2_paper", b.nu2_paper},   {"nu2_normalized", b.nu2_normalized},
              {"beta_limit_measured", b.beta_limit_measured}};
}

// ---------------------------------------------------------------------------------------------
// KdV trajectories: '#'-prefixed JSON header line, then T,X,A rows.

inline json to_json(const kdv::KdVCoeffs& k) {
  return json{{"c", k.c}, {"nu1", k.nu1}, {"nu2", k.nu2}, {"normalization", std::string(kdv::to_string(k.normalization))}};
}

inline void write_kdv_traj_csv(const fs::path& path, const std::vector<kdv::KdVState>& traj, const kdv::KdVCoeffs& k) {
  std::ostringstream s;
  json header{{"coeffs", to_json(k)}};
  if (!traj.empty())
    header["grid"] = json{{"domain_length", traj.front().domain_length},
                          {"n_modes", traj.front().n_modes()},
                          {"x0", traj.front().x0}};
  s << "# " << header.dump() << "\n";
  s << "T,X,A\n";
  for (const auto& st : traj)
    for (std::size_t i = 0; i < st.n_modes(); ++i) s << fmt(st.T) << ',' << fmt(st.X(i)) << ',' << fmt(st.A[i]) << '\n';
  write_text(path, s.str());
}

// ---------------------------------------------------------------------------------------------
// Validation reports

struct Thresholds {
  double slope_min = 2.3;
  double slope_max = 3.6;
};

inline Thresholds thresholds_for(Mode mode) {
  return mode == Mode::line ? Thresholds{2.7, 3.6} : Thresholds{2.3, 3.6};
}

inline bool ladder_passes(const validation::ConvergenceFit& fit, const Thresholds& th) {
  return fit.fitted && !fit.poisoned && fit.strictly_decreasing && fit.slope >= th.slope_min && fit.slope <= th.slope_max;
}

inline json fingerprint(const validation::ComparisonConfig& cfg) {
  return json{{"mode", std::string(to_string(cfg.mode))},
              {"m", cfg.m},
              {"T0", cfg.T0},
              {"dt", cfg.dt},
              {"normalization", std::string(kdv::to_string(cfg.normalization))},
              {"init", std::string(to_string(cfg.resolved_init()))},
              {"margin", cfg.margin},
              {"kdv_min_modes", cfg.kdv_min_modes},
              {"kdv_dx", cfg.kdv_dx},
              {"kdv_max_dT", cfg.kdv_max_dT},
              {"samples", cfg.samples},
              {"wrap_threshold", cfg.wrap_threshold}};
}

inline json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json ladder_report(const validation::ComparisonConfig& cfg, const validation::LadderResult& res,
                          bool record_timings) {
  const Thresholds th = thresholds_for(cfg.mode);
  json ladder = json::array();
  for (const auto& r : res.reports) {
    json e{{"epsilon", r.epsilon},
           {"max_sup_error", r.max_sup_error},
           {"t_max", r.t_max},
           {"wall_s", record_timings ? json(r.wall_seconds) : json(nullptr)},
           {"sup_error0", r.sup_error.empty() ? 0.0 : r.sup_error.front()},
           {"signal", r.signal},
           {"n_cells", r.sizing.n_cells},
           {"kdv_modes", r.sizing.kdv_modes},
           {"valid", r.valid},
           {"continuous", r.continuous}};
    if (!r.valid) e["diagnostic"] = r.diagnostic;
    ladder.push_back(e);
  }
  json fit_residuals = json::array();
  for (double v : res.fit.residuals) fit_residuals.push_back(v);
  return json{{"mode", std::string(to_string(cfg.mode))},
              {"coeff_choice", std::string(kdv::to_string(cfg.normalization))},
              {"ladder", ladder},
              {"slope", nullable(res.fit.slope)},
              {"intercept", nullable(res.fit.intercept)},
              {"fit_residuals", fit_residuals},
              {"strictly_decreasing", res.fit.strictly_decreasing},
              {"poisoned", res.fit.poisoned},
              {"fitted", res.fit.fitted},
              {"pass", ladder_passes(res.fit, th)},
              {"thresholds", json{{"slope_min", th.slope_min}, {"slope_max", th.slope_max}}},
              {"config", fingerprint(cfg)}};
}

inline void write_error_series_csv(const fs::path& path, const validation::ErrorReport& r) {
  std::ostringstream s;
  s << "t,sup_error\n";
  for (std::size_t i = 0; i < r.times.size(); ++i) s << fmt(r.times[i]) << ',' << fmt(r.sup_error[i]) << '\n';
  write_text(path, s.str());
}

/// `error_series_<eps>.csv` with ε in shortest form.
inline std::string error_series_name(double epsilon) { return "error_series_" + fmt(epsilon) + ".csv"; }

}  // namespace necklace::io
