#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "necklace/necklace.hpp"
#include "support.hpp"

using namespace necklace;
namespace fs = std::filesystem;
using json = io::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("necklace_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

// Exit status of the CLI with `args`; stdout and stderr are discarded.
int cli(const std::string& args) {
  const std::string cmd = std::string("\"") + NECKLACE_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Snapshot, BinaryAndSidecarRoundTrip) {
  testing_support::Rng rng(21);
  const auto dir = scratch("snap");
  for (Mode mode : {Mode::full, Mode::symmetric, Mode::line}) {
    auto lat = build_lattice(5, 7, mode);
    const auto u = testing_support::random_field(lat, rng);
    io::write_snapshot(dir, "U_a", u, 1.25, 0.3);
    io::SnapshotMeta meta;
    const auto back = io::read_snapshot(dir, "U_a", &meta);
    EXPECT_TRUE(std::ranges::equal(back.values(), u.values()));
    EXPECT_EQ(meta.n_cells, 5u);
    EXPECT_EQ(meta.m, 7);
    EXPECT_EQ(meta.mode, mode);
    EXPECT_EQ(meta.time, 1.25);
    EXPECT_EQ(meta.epsilon, 0.3);
    EXPECT_EQ(fs::file_size(dir / "U_a.bin"), 8 * lat->dof_count());
  }
  // truncated payload
  fs::resize_file(dir / "U_a.bin", 16);
  EXPECT_THROW(io::read_snapshot(dir, "U_a"), IoError);
  EXPECT_THROW(io::read_snapshot(dir, "missing"), IoError);
  fs::remove_all(dir);
}

TEST(Formatting, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 2.5e-17, -7.0, 0.942809041582063}) EXPECT_EQ(std::strtod(io::fmt(v).c_str(), nullptr), v);
  EXPECT_EQ(io::fmt(0.25), "0.25");
  EXPECT_EQ(io::error_series_name(0.375), "error_series_0.375.csv");
}

TEST(BandFiles, CsvColumnsAndDerivatives) {
  const auto dir = scratch("bandfiles");
  io::write_bands_csv(dir / "bands.csv", {spectral::sample_band(1, 5), spectral::sample_band(2, 5)});
  const auto rows = lines(dir / "bands.csv");
  ASSERT_EQ(rows.size(), 11u);
  EXPECT_EQ(rows[0], "l,band,lambda,mu,omega_plus,omega_minus");
  EXPECT_EQ(rows[3].rfind("0,1,0,0,0,", 0), 0u);
  const auto d = io::band_derivatives(Mode::symmetric);
  EXPECT_NEAR(d.c, 0.942809, 1e-6);
  EXPECT_NEAR(d.nu2_paper, -d.c / 2, 1e-12);
  EXPECT_NEAR(d.beta_limit_measured, 8.0 / 9.0 / std::sqrt(3.0 * std::numbers::pi), 1e-4);
  fs::remove_all(dir);
}

TEST(Reports, LadderJsonSchema) {
  validation::ComparisonConfig cfg;
  validation::LadderResult res;
  res.reports.resize(2);
  res.fit = validation::fit_convergence({0.4, 0.2}, {1.0, 0.1});
  const json j = io::ladder_report(cfg, res, false);
  for (const char* key : {"mode", "coeff_choice", "ladder", "slope", "intercept", "pass", "thresholds"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_TRUE(j["slope"].is_null());
  EXPECT_FALSE(j["pass"].get<bool>());
  EXPECT_TRUE(j["ladder"][0]["wall_s"].is_null());
  EXPECT_EQ(j["thresholds"]["slope_min"].get<double>(), 2.3);
  EXPECT_EQ(io::thresholds_for(Mode::line).slope_min, 2.7);
}

TEST(Cli, BandsSubcommand) {
  const auto dir = scratch("cli_bands");
  ASSERT_EQ(cli("bands --l-samples 3 --bands 1 --out " + dir.string()), 0);
  const auto rows = lines(dir / "bands.csv");
  ASSERT_EQ(rows.size(), 4u);
  auto field = [](const std::string& row, int col) {
    std::stringstream s(row);
    std::string cell;
    for (int i = 0; i <= col; ++i) std::getline(s, cell, ',');
    return std::stod(cell);
  };
  EXPECT_EQ(field(rows[2], 2), 0.0);
  EXPECT_EQ(field(rows[1], 2), field(rows[3], 2));
  const json d = io::read_json(dir / "band_derivs.json");
  EXPECT_NEAR(d["c"].get<double>(), 0.942809, 1e-6);
  EXPECT_TRUE(fs::exists(dir / "config.json"));
  fs::remove_all(dir);
}

TEST(Cli, ZeroAmplitudeSimulationStaysZero) {
  const auto dir = scratch("cli_sim_zero");
  ASSERT_EQ(cli("simulate --n-cells 4 --m 8 --t-end 1 --amplitude 0 --epsilon 0.3 --out " + dir.string()), 0);
  const json meta = io::read_json(dir / "sim_meta.json");
  const auto names = meta["snapshots"];
  ASSERT_EQ(names.size(), 2u);
  for (const auto& n : names) {
    const auto u = io::read_snapshot(dir / "snapshots", "U_" + n.get<std::string>());
    const auto v = io::read_snapshot(dir / "snapshots", "V_" + n.get<std::string>());
    EXPECT_EQ(sup_norm(u), 0.0);
    EXPECT_EQ(sup_norm(v), 0.0);
  }
  EXPECT_EQ(meta["solver"]["helmholtz_solves"].get<long>(), 4 * meta["solver"]["steps"].get<long>());
  EXPECT_TRUE(meta["wall_s"].is_null());
  fs::remove_all(dir);
}

TEST(Cli, LineModeKdvAndNestedOutputDirectory) {
  const auto dir = scratch("cli_line");
  ASSERT_EQ(cli("simulate --mode line --n-cells 6 --m 8 --t-end 0.5 --snapshot-stride 5 --out " +
                (dir / "a" / "b").string()),
            0);
  const json meta = io::read_json(dir / "a" / "b" / "sim_meta.json");
  EXPECT_EQ(meta["init"].get<std::string>(), "fourier");
  EXPECT_EQ(meta["snapshots"].size(), 6u);  // steps 0, 5, ..., 25
  ASSERT_EQ(cli("kdv --T-end 0.01 --dT 0.005 --n-modes 64 --stride 1 --out " + (dir / "kdv").string()), 0);
  const auto rows = lines(dir / "kdv" / "kdv_traj.csv");
  EXPECT_EQ(rows[0].rfind("# ", 0), 0u);
  EXPECT_EQ(rows[1], "T,X,A");
  EXPECT_EQ(rows.size(), 2u + 3 * 64);
  fs::remove_all(dir);
}

TEST(Cli, SinglePointLadderIsReportedButNotFitted) {
  const auto dir = scratch("cli_validate");
  EXPECT_EQ(cli("validate --eps 0.45 --T0 0.05 --mode line --coeffs paper --m 16 --out " + dir.string()), 1);
  const json rep = io::read_json(dir / "report.json");
  EXPECT_TRUE(rep["slope"].is_null());
  EXPECT_FALSE(rep["pass"].get<bool>());
  EXPECT_EQ(rep["ladder"].size(), 1u);
  EXPECT_TRUE(fs::exists(dir / "error_series_0.45.csv"));
  fs::remove_all(dir);
}

TEST(Cli, RepeatRunsAreByteIdentical) {
  const auto a = scratch("cli_det_a"), b = scratch("cli_det_b");
  const std::string args = "validate --eps 0.45,0.4,0.35 --T0 0.05 --mode line --m 16 --out ";
  const int ra = cli(args + a.string()), rb = cli(args + b.string());
  EXPECT_EQ(ra, rb);
  ASSERT_TRUE(fs::exists(a / "report.json"));
  EXPECT_EQ(slurp(a / "report.json"), slurp(b / "report.json"));
  for (const char* f : {"error_series_0.45.csv", "error_series_0.4.csv", "error_series_0.35.csv"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  // sim_meta.json records the output path, so both runs write to the same place
  const std::string sim = "simulate --n-cells 4 --m 8 --t-end 0.4 --epsilon 0.4 --out " + (a / "s").string();
  ASSERT_EQ(cli(sim), 0);
  const std::string meta = slurp(a / "s" / "sim_meta.json");
  const std::string snap = slurp(a / "s" / "snapshots" / "U_00000020.bin");
  ASSERT_EQ(cli(sim), 0);
  EXPECT_EQ(slurp(a / "s" / "sim_meta.json"), meta);
  EXPECT_EQ(slurp(a / "s" / "snapshots" / "U_00000020.bin"), snap);
  EXPECT_EQ(snap.size(), 8u * 64);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, ConfigFileAndOverrides) {
  const auto dir = scratch("cli_config");
  fs::create_directories(dir);
  io::write_json(dir / "cfg.json", json{{"bands", json{{"l-samples", 5}, {"bands", 2}}}});
  ASSERT_EQ(cli("--config " + (dir / "cfg.json").string() + " bands --out " + (dir / "o1").string()), 0);
  EXPECT_EQ(lines(dir / "o1" / "bands.csv").size(), 11u);
  ASSERT_EQ(cli("--config " + (dir / "cfg.json").string() + " bands --l-samples 3 --out " + (dir / "o2").string()),
            0);
  EXPECT_EQ(lines(dir / "o2" / "bands.csv").size(), 7u);
  const json resolved = io::read_json(dir / "o2" / "config.json");
  EXPECT_EQ(resolved["l-samples"].get<int>(), 3);
  EXPECT_EQ(resolved["bands"].get<int>(), 2);
  io::write_json(dir / "bad.json", json{{"bands", json{{"colour", 1}}}});
  EXPECT_EQ(cli("--config " + (dir / "bad.json").string() + " bands --out " + (dir / "o3").string()), 2);
  fs::remove_all(dir);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli_codes");
  EXPECT_EQ(cli("--help"), 0);
  EXPECT_EQ(cli(""), 2);
  EXPECT_EQ(cli("bands --bogus"), 2);
  EXPECT_EQ(cli("simulate --mode ring --out " + dir.string()), 2);
  EXPECT_EQ(cli("simulate --epsilon 0.7 --n-cells 4 --m 8 --t-end 0.1 --out " + dir.string()), 2);
  // a regular file where a directory is needed
  fs::create_directories(dir);
  { std::ofstream(dir / "blocker") << "x"; }
  EXPECT_EQ(cli("bands --l-samples 3 --out " + (dir / "blocker" / "sub").string()), 4);
  fs::remove_all(dir);
}
