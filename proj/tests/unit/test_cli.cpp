#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "qsde/cli.hpp"

using namespace qsde;
using namespace qsde::cli;

namespace {

std::vector<std::string> config_errors(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.errors();
  }
  return {};
}

bool any_contains(const std::vector<std::string>& v, const std::string& needle) {
  for (const auto& s : v) {
    if (s.find(needle) != std::string::npos) return true;
  }
  return false;
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("qsde_cli_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kSmallTrajectories = R"(
model:
  preset: mollow
  initial_state: ground
run:
  command: trajectories
  dt: 0.01
  horizon: 0.5
  ensemble: 40
  seed: 5
  checkpoints: 5
)";

}  // namespace

TEST_CASE("complex literals") {
  CHECK(parse_complex("0.5-0.5i") == Complex(0.5, -0.5));
  CHECK(parse_complex(" 1 + 2i ") == Complex(1.0, 2.0));
  CHECK(parse_complex("i") == Complex(0.0, 1.0));
  CHECK(parse_complex("-i") == Complex(0.0, -1.0));
  CHECK(parse_complex("3") == Complex(3.0, 0.0));
  CHECK(parse_complex("-2.5e-3+1e2i") == Complex(-2.5e-3, 100.0));
  CHECK(parse_complex("1e-3i") == Complex(0.0, 1e-3));
  CHECK(parse_complex("2-i") == Complex(2.0, -1.0));
  for (const char* bad : {"", "abc", "1+2", "1+2ix", "1..2i", "i2"}) {
    CHECK_THROWS_AS(parse_complex(bad), std::invalid_argument);
  }
  const Complex z(0.1, -1.0 / 3.0);
  CHECK(parse_complex(format_complex(z)) == z);
}

TEST_CASE("mollow preset defaults") {
  const RunConfig cfg = parse_config("model:\n  preset: mollow\nrun:\n  command: verify\n");
  CHECK(cfg.dt == 1e-3);
  CHECK(cfg.ensemble == 10000);
  REQUIRE(cfg.mollow.has_value());
  CHECK(rabi_frequency(*cfg.mollow) == doctest::Approx(5.0).epsilon(1e-14));
  CHECK(cfg.model.dim() == 2);
  REQUIRE(cfg.initial_vector.has_value());
  CHECK((*cfg.initial_vector)(1) == Complex(1.0));
  CHECK(cfg.precision == 17);

  const RunConfig s = parse_config("model:\n  preset: mollow\nrun:\n  command: spectrum\n");
  CHECK(s.nu_grid.size() == 201);
  CHECK(s.nu_grid.front() == 0.0);
  CHECK(s.nu_grid.back() == 20.0);
}

TEST_CASE("configuration errors are all reported") {
  const auto errors = config_errors(R"(
model:
  dim: 2
  hamiltonian: [[1, 0], [0, 1], [0, 0]]
  channels:
    - [[0, 0], ["1+i", 0]]
run:
  command: trajectories
  dt: -1
  ensemble: 0
)");
  CHECK(any_contains(errors, "model.hamiltonian (line 4): expected 2 rows, got 3"));
  CHECK(any_contains(errors, "run.dt"));
  CHECK(any_contains(errors, "run.ensemble"));

  CHECK(any_contains(config_errors("model:\n  preset: mollow\n  colour: red\nrun:\n  command: verify\n"),
                     "model.colour (line 3): unknown key"));
  CHECK(any_contains(config_errors("model: [1, 2\nrun: {}\n"), "syntax error at line"));
  CHECK(any_contains(config_errors("model:\n  preset: mollow\n  lambda: [1, 0]\nrun:\n  command: verify\n"),
                     "lambda_0 must be 0"));
  CHECK(any_contains(config_errors("model:\n  preset: mollow\nrun:\n  command: fly\n"),
                     "unknown command"));
  CHECK(any_contains(config_errors("model:\n  preset: mollow\nrun:\n  command: verify\n  horizon: 1.0005\n"),
                     "integer multiple"));
  CHECK(any_contains(config_errors(R"(
model:
  dim: 2
  hamiltonian: [[1, 0], [0, 1]]
  channels: [[[0, 0], [1, 0]]]
  initial_state: {density: [[0.5, 0], [0, 0.6]]}
run:
  command: master
)"),
                     "unit trace"));
}

TEST_CASE("empty spectrum grid is rejected before anything runs") {
  const auto errors = config_errors(R"(
model:
  dim: 2
  hamiltonian: [[1, 0], [0, 0]]
  channels: [[[0, 0], [1, 0]]]
run:
  command: spectrum
  nu_grid: []
)");
  CHECK(any_contains(errors, "frequency grid is empty"));
}

TEST_CASE("explicit models accept every complex spelling") {
  const RunConfig cfg = parse_config(R"(
model:
  dim: 2
  hamiltonian: [["1", "0.5-0.5i"], [[0.5, 0.5], -1]]
  channels:
    - [[0, 0], [1, 0]]
  drive: {amplitudes: ["0.3i"], carrier: 2}
  detection: {kind: unitary, matrix: [["i"]]}
run:
  command: verify
)");
  CHECK(cfg.model.hamiltonian(0, 1) == Complex(0.5, -0.5));
  CHECK(cfg.model.hamiltonian(1, 0) == Complex(0.5, 0.5));
  CHECK(cfg.model.drive.amplitudes[0] == Complex(0.0, 0.3));
  CHECK(cfg.model.detection.kind == DetectionSpec::Kind::ConstantUnitary);
  const ResultBundle b = run_command(cfg);
  CHECK(b.passed());
}

TEST_CASE("CSV formatting") {
  Table t{{"name", "value"}, {{std::string("a,b"), 0.1}, {std::string("say \"hi\""), 2.0}}};
  CHECK(to_csv(t, 17) == "name,value\r\n\"a,b\",0.10000000000000001\r\n\"say \"\"hi\"\"\",2\r\n");
  CHECK(to_csv(t, 3) == "name,value\r\n\"a,b\",0.1\r\n\"say \"\"hi\"\"\",2\r\n");
}

TEST_CASE("JSON round trip and config echo") {
  RunConfig cfg = parse_config(kSmallTrajectories);
  cfg.timing = true;
  const ResultBundle b = run_command(cfg);
  REQUIRE(b.wall_time.has_value());
  const ResultBundle back = bundle_from_json(nlohmann::json::parse(bundle_to_json(b).dump()));
  CHECK(back == b);

  // The echo alone reproduces the run.
  const RunConfig again = parse_config(b.config.dump());
  const ResultBundle b2 = run_command(again);
  REQUIRE(b2.tables.size() == b.tables.size());
  for (std::size_t k = 0; k < b.tables.size(); ++k) CHECK(b2.tables[k] == b.tables[k]);
  CHECK(b2.config == b.config);
}

TEST_CASE("results do not depend on the worker count") {
  const RunConfig cfg = parse_config(kSmallTrajectories);
  setenv("QSDE_WORKERS", "1", 1);
  const ResultBundle a = run_command(cfg);
  setenv("QSDE_WORKERS", "3", 1);
  const ResultBundle b = run_command(cfg);
  unsetenv("QSDE_WORKERS");
  CHECK(bundle_to_json(a).dump() == bundle_to_json(b).dump());
  for (const auto& [name, t] : a.tables) CHECK(to_csv(t, 17) == to_csv(*b.table(name), 17));
}

TEST_CASE("emit writes command-prefixed, seed-suffixed files") {
  RunConfig cfg = parse_config(R"(
model:
  preset: mollow
run:
  command: moments
  dt: 0.01
  horizon: 0.5
  ensemble: 50
  seed: 12
  checkpoints: 5
  time_pairs: [[0.5, 0.2]]
)");
  const auto dir = scratch_dir("emit");
  cfg.directory = dir.string();
  const ResultBundle b = run_command(cfg);
  const auto files = emit(b, cfg);
  CHECK(std::filesystem::exists(dir / "moments_mean_12.csv"));
  CHECK(std::filesystem::exists(dir / "moments_correlation_12.csv"));
  CHECK(std::filesystem::exists(dir / "moments_checks_12.csv"));
  CHECK(std::filesystem::exists(dir / "moments_12.json"));
  CHECK(files.size() == 4);
  const std::string mean = slurp(dir / "moments_mean_12.csv");
  CHECK(mean.rfind("t,channel,analytic,mc,stderr\r\n", 0) == 0);
  const ResultBundle parsed = bundle_from_json(nlohmann::json::parse(slurp(dir / "moments_12.json")));
  CHECK(parsed == b);
  std::filesystem::remove_all(dir);
}

TEST_CASE("command line entry point") {
  const auto dir = scratch_dir("main");
  {
    std::ofstream(dir / "ok.yaml") << "model:\n  preset: mollow\nrun:\n  command: verify\n";
    std::ofstream(dir / "bad.yaml") << "model:\n  preset: mollow\nrun:\n  command: verify\n  dt: 0\n";
  }
  const std::string out = (dir / "out").string();
  const std::string ok = (dir / "ok.yaml").string();
  const std::string bad = (dir / "bad.yaml").string();
  {
    std::vector<std::string> args{"qsde", "--config", ok, "--seed", "42", "--out", out};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    CHECK(run_cli(static_cast<int>(argv.size()), argv.data()) == 0);
    CHECK(std::filesystem::exists(dir / "out" / "verify_a4_42.csv"));
  }
  {
    std::vector<std::string> args{"qsde", "--config", bad};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    CHECK(run_cli(static_cast<int>(argv.size()), argv.data()) == 2);
  }
  {
    std::vector<std::string> args{"qsde"};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    CHECK(run_cli(static_cast<int>(argv.size()), argv.data()) == 2);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("spectrum on the canonical preset") {
  RunConfig cfg = parse_config("model:\n  preset: mollow\nrun:\n  command: spectrum\n  spectrum_dt: 0.02\n");
  const ResultBundle b = run_command(cfg);
  REQUIRE(b.table("spectrum") != nullptr);
  CHECK(b.table("spectrum")->rows.size() == 201);
  CHECK(b.table("peaks")->rows.size() == 3);
  CHECK(b.passed());
}
