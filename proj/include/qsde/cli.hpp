#pragma once

// Batch front end: YAML run configs, command dispatch and CSV/JSON output.
//
// Config layout (see configs/ for complete examples):
//
//   model:            preset: mollow + MollowConfig fields, or
//                     dim, hamiltonian, channels, drive, detection, frame
//                     initial_state (vector, density matrix, ground/excited)
//   run:              command, dt, horizon, ensemble, seed, checkpoints, ...
//   output:           directory, formats, precision, timing
//
// Complex entries are "a+bi" strings, plain numbers or [re, im] pairs;
// matrices are lists of rows.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "qsde/mollow.hpp"
#include "qsde/model.hpp"

namespace qsde::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Every problem found in a config; what() joins them one per line.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

/// "a+bi", "a-bi", "bi", "a", "i", "-i" (whitespace ignored).
Complex parse_complex(const std::string& text);
std::string format_complex(Complex z);

enum class Command { Verify, Trajectories, Master, Moments, Spectrum, Mollow };
std::string command_name(Command c);

struct RunConfig {
  // model
  std::optional<MollowConfig> mollow;
  SystemModel model;
  std::optional<ComplexVector> initial_vector;
  std::optional<ComplexMatrix> initial_density;

  // run
  Command command = Command::Verify;
  double dt = 1e-3;
  double horizon = 2.0;
  std::size_t ensemble = 10000;
  std::uint64_t seed = 1;
  std::size_t checkpoints = 10;
  bool nonlinear = false;          // trajectories/moments: sample the P-hat ensemble
  double confidence = 0.99;        // Wiener-law tests
  double sigma_tolerance = 4.0;    // MC checks: |mc - analytic| <= k stderr
  double a4_tolerance = 1e-12;
  double analytic_dt = 0.0;        // 0: dt
  std::vector<std::pair<std::size_t, std::size_t>> channel_pairs{{0, 0}};
  std::vector<std::pair<double, double>> time_pairs;  // empty: {(horizon, horizon)}
  std::vector<double> nu_grid;     // empty with the mollow preset: 201 points on w0 +- 2 rabi
  double spectrum_dt = 1e-2;
  double min_horizon = 0.0;        // 0: 30 / gamma (mollow) or horizon
  bool variance_mode = false;

  // output
  std::string directory = ".";
  bool csv = true;
  bool json = true;
  int precision = 17;
  bool timing = false;

  std::size_t nsteps() const;
  std::size_t record_stride() const;
  ComplexMatrix initial_rho() const;
};

/// Parses and validates YAML text; throws ConfigError listing every problem.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Config echo: a JSON document that parse_config accepts and that
/// reproduces the run.
nlohmann::json config_to_json(const RunConfig& cfg);

using Cell = std::variant<double, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  bool operator==(const Table&) const = default;
};

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;

  bool operator==(const Check&) const = default;
};

struct ResultBundle {
  std::string command;
  std::uint64_t seed = 0;
  std::string version;
  nlohmann::json config;
  std::optional<double> wall_time;
  std::vector<std::pair<std::string, Table>> tables;
  std::vector<Check> checks;

  bool passed() const;
  const Table* table(const std::string& name) const;
  bool operator==(const ResultBundle&) const = default;
};

ResultBundle run_command(const RunConfig& cfg);

nlohmann::json bundle_to_json(const ResultBundle& bundle);
ResultBundle bundle_from_json(const nlohmann::json& doc);

std::string to_csv(const Table& table, int precision);

/// Writes <command>_<table>_<seed>.csv per table and <command>_<seed>.json.
std::vector<std::filesystem::path> emit(const ResultBundle& bundle, const RunConfig& cfg);

/// Exit codes: 0 all checks passed, 1 a check failed, 2 bad config or
/// arguments, 3 numerical or I/O failure.
int run_cli(int argc, char** argv);

}  // namespace qsde::cli
