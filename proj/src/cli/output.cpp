#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "qsde/cli.hpp"

namespace qsde::cli {

namespace {

std::string csv_field(const Cell& cell, int precision) {
  if (const double* v = std::get_if<double>(&cell)) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", precision, *v);
    return buf;
  }
  const std::string& s = std::get<std::string>(cell);
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << content;
  out.close();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

std::string to_csv(const Table& table, int precision) {
  std::string out;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    out += (c ? "," : "") + csv_field(table.columns[c], precision);
  }
  out += "\r\n";
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out += (c ? "," : "") + csv_field(row[c], precision);
    }
    out += "\r\n";
  }
  return out;
}

nlohmann::json bundle_to_json(const ResultBundle& b) {
  nlohmann::json meta{{"command", b.command},
                      {"seed", b.seed},
                      {"version", b.version},
                      {"config", b.config}};
  if (b.wall_time) meta["wall_time"] = *b.wall_time;
  auto checks = nlohmann::json::array();
  for (const auto& c : b.checks) {
    checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  }
  auto tables = nlohmann::json::array();
  for (const auto& [name, t] : b.tables) {
    auto rows = nlohmann::json::array();
    for (const auto& row : t.rows) {
      auto r = nlohmann::json::array();
      for (const auto& cell : row) {
        if (const double* v = std::get_if<double>(&cell)) r.push_back(*v);
        else r.push_back(std::get<std::string>(cell));
      }
      rows.push_back(std::move(r));
    }
    tables.push_back({{"name", name}, {"columns", t.columns}, {"rows", std::move(rows)}});
  }
  return {{"metadata", meta}, {"checks", checks}, {"tables", tables}};
}

ResultBundle bundle_from_json(const nlohmann::json& doc) {
  ResultBundle b;
  const auto& meta = doc.at("metadata");
  b.command = meta.at("command").get<std::string>();
  b.seed = meta.at("seed").get<std::uint64_t>();
  b.version = meta.at("version").get<std::string>();
  b.config = meta.at("config");
  if (meta.contains("wall_time")) b.wall_time = meta.at("wall_time").get<double>();
  for (const auto& c : doc.at("checks")) {
    b.checks.push_back({c.at("name").get<std::string>(), c.at("passed").get<bool>(),
                        c.at("detail").get<std::string>()});
  }
  for (const auto& t : doc.at("tables")) {
    Table table;
    table.columns = t.at("columns").get<std::vector<std::string>>();
    for (const auto& r : t.at("rows")) {
      std::vector<Cell> row;
      for (const auto& cell : r) {
        if (cell.is_string()) row.emplace_back(cell.get<std::string>());
        else row.emplace_back(cell.get<double>());
      }
      table.rows.push_back(std::move(row));
    }
    b.tables.emplace_back(t.at("name").get<std::string>(), std::move(table));
  }
  return b;
}

std::vector<std::filesystem::path> emit(const ResultBundle& b, const RunConfig& cfg) {
  const std::filesystem::path dir(cfg.directory);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  const std::string seed = std::to_string(b.seed);
  std::vector<std::filesystem::path> written;
  if (cfg.csv) {
    for (const auto& [name, t] : b.tables) {
      const auto path = dir / (b.command + "_" + name + "_" + seed + ".csv");
      write_file(path, to_csv(t, cfg.precision));
      written.push_back(path);
    }
    Table checks{{"check", "passed", "detail"}, {}};
    for (const auto& c : b.checks) checks.rows.push_back({c.name, c.passed ? 1.0 : 0.0, c.detail});
    const auto path = dir / (b.command + "_checks_" + seed + ".csv");
    write_file(path, to_csv(checks, cfg.precision));
    written.push_back(path);
  }
  if (cfg.json) {
    const auto path = dir / (b.command + "_" + seed + ".json");
    write_file(path, bundle_to_json(b).dump(2) + "\n");
    written.push_back(path);
  }
  return written;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Quantum trajectories, master equation and heterodyne output statistics"};
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  app.add_option("--config", config_path, "YAML run configuration")->required();
  app.add_option("--seed", seed, "override run.seed");
  app.add_option("--out", out_dir, "override output.directory");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  RunConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const ConfigError& e) {
    std::cerr << "invalid config " << config_path << ":\n";
    for (const auto& m : e.errors()) std::cerr << "  " << m << "\n";
    return 2;
  }
  if (seed) cfg.seed = *seed;
  if (out_dir) cfg.directory = *out_dir;

  ResultBundle bundle;
  try {
    bundle = run_command(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << command_name(cfg.command) << " failed: " << e.what() << "\n";
    return 3;
  }
  for (const auto& c : bundle.checks) {
    std::cout << (c.passed ? "[PASS] " : "[FAIL] ") << c.name << ": " << c.detail << "\n";
  }
  try {
    for (const auto& p : emit(bundle, cfg)) std::cout << "wrote " << p.string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return bundle.passed() ? 0 : 1;
}

}  // namespace qsde::cli
