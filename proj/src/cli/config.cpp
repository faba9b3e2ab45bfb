#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "qsde/cli.hpp"

namespace qsde::cli {

namespace {

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += (out.empty() ? "" : "\n") + l;
  return out;
}

double parse_real(const std::string& s, std::size_t& pos) {
  const char* begin = s.c_str() + pos;
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin) throw std::invalid_argument("bad complex literal '" + s + "'");
  pos += static_cast<std::size_t>(end - begin);
  return v;
}

ComplexVector basis_vector(Index d, Index k) {
  ComplexVector v = ComplexVector::Zero(d);
  v(k) = 1.0;
  return v;
}

// "ground"/"excited" or an explicit state.
struct InitialSpec {
  std::string named;
  std::optional<ComplexVector> vector;
  std::optional<ComplexMatrix> density;
};

class Reader {
 public:
  std::vector<std::string> errors;

  void error(const YAML::Node& node, const std::string& key, const std::string& msg) {
    std::string where = key;
    if (node.IsDefined() && node.Mark().line >= 0) {
      where += " (line " + std::to_string(node.Mark().line + 1) + ")";
    }
    errors.push_back(where + ": " + msg);
  }
  void error(const std::string& key, const std::string& msg) { errors.push_back(key + ": " + msg); }

  void only_keys(const YAML::Node& map, const std::string& section,
                 const std::set<std::string>& allowed) {
    for (const auto& kv : map) {
      const std::string k = kv.first.as<std::string>();
      if (!allowed.count(k)) error(kv.first, section + "." + k, "unknown key");
    }
  }

  bool is_map(const YAML::Node& n, const std::string& key) {
    if (n.IsMap()) return true;
    error(n, key, "expected a mapping");
    return false;
  }

  std::optional<double> real(const YAML::Node& n, const std::string& key) {
    if (n.IsScalar()) {
      try {
        const double v = n.as<double>();
        if (std::isfinite(v)) return v;
      } catch (const YAML::Exception&) {
      }
    }
    error(n, key, "expected a finite number");
    return std::nullopt;
  }

  std::optional<long long> integer(const YAML::Node& n, const std::string& key) {
    if (n.IsScalar()) {
      try {
        return n.as<long long>();
      } catch (const YAML::Exception&) {
      }
    }
    error(n, key, "expected an integer");
    return std::nullopt;
  }

  std::optional<bool> boolean(const YAML::Node& n, const std::string& key) {
    if (n.IsScalar()) {
      try {
        return n.as<bool>();
      } catch (const YAML::Exception&) {
      }
    }
    error(n, key, "expected true or false");
    return std::nullopt;
  }

  std::optional<std::string> string(const YAML::Node& n, const std::string& key) {
    if (n.IsScalar()) return n.Scalar();
    error(n, key, "expected a string");
    return std::nullopt;
  }

  std::optional<Complex> complex(const YAML::Node& n, const std::string& key) {
    if (n.IsScalar()) {
      try {
        return parse_complex(n.Scalar());
      } catch (const std::invalid_argument& e) {
        error(n, key, e.what());
        return std::nullopt;
      }
    }
    if (n.IsSequence() && n.size() == 2) {
      const auto re = real(n[0], key + "[0]");
      const auto im = real(n[1], key + "[1]");
      if (re && im) return Complex(*re, *im);
      return std::nullopt;
    }
    error(n, key, "expected a complex number (\"a+bi\" or [re, im])");
    return std::nullopt;
  }

  std::optional<std::vector<Complex>> complex_list(const YAML::Node& n, const std::string& key) {
    if (!n.IsSequence()) {
      error(n, key, "expected a list");
      return std::nullopt;
    }
    std::vector<Complex> out;
    bool ok = true;
    for (std::size_t i = 0; i < n.size(); ++i) {
      const auto z = complex(n[i], key + "[" + std::to_string(i) + "]");
      if (z) out.push_back(*z); else ok = false;
    }
    if (!ok) return std::nullopt;
    return out;
  }

  std::optional<ComplexMatrix> matrix(const YAML::Node& n, const std::string& key, Index rows,
                                      Index cols) {
    if (!n.IsSequence()) {
      error(n, key, "expected a list of rows");
      return std::nullopt;
    }
    if (static_cast<Index>(n.size()) != rows) {
      error(n, key, "expected " + std::to_string(rows) + " rows, got " + std::to_string(n.size()));
      return std::nullopt;
    }
    ComplexMatrix m(rows, cols);
    bool ok = true;
    for (Index r = 0; r < rows; ++r) {
      const std::string rk = key + "[" + std::to_string(r) + "]";
      const auto row = complex_list(n[static_cast<std::size_t>(r)], rk);
      if (!row) {
        ok = false;
        continue;
      }
      if (static_cast<Index>(row->size()) != cols) {
        error(n[static_cast<std::size_t>(r)], rk,
              "expected " + std::to_string(cols) + " entries, got " + std::to_string(row->size()));
        ok = false;
        continue;
      }
      for (Index c = 0; c < cols; ++c) m(r, c) = (*row)[static_cast<std::size_t>(c)];
    }
    if (!ok) return std::nullopt;
    return m;
  }

  std::optional<std::vector<double>> real_list(const YAML::Node& n, const std::string& key) {
    if (!n.IsSequence()) {
      error(n, key, "expected a list");
      return std::nullopt;
    }
    std::vector<double> out;
    bool ok = true;
    for (std::size_t i = 0; i < n.size(); ++i) {
      const auto v = real(n[i], key + "[" + std::to_string(i) + "]");
      if (v) out.push_back(*v); else ok = false;
    }
    if (!ok) return std::nullopt;
    return out;
  }

  template <typename T>
  std::optional<std::vector<std::pair<T, T>>> pair_list(const YAML::Node& n,
                                                        const std::string& key) {
    if (!n.IsSequence()) {
      error(n, key, "expected a list of pairs");
      return std::nullopt;
    }
    std::vector<std::pair<T, T>> out;
    bool ok = true;
    for (std::size_t i = 0; i < n.size(); ++i) {
      const std::string k = key + "[" + std::to_string(i) + "]";
      if (!n[i].IsSequence() || n[i].size() != 2) {
        error(n[i], k, "expected a pair");
        ok = false;
        continue;
      }
      if constexpr (std::is_same_v<T, double>) {
        const auto a = real(n[i][0], k);
        const auto b = real(n[i][1], k);
        if (a && b) out.emplace_back(*a, *b); else ok = false;
      } else {
        const auto a = integer(n[i][0], k);
        const auto b = integer(n[i][1], k);
        if (a && b && *a >= 0 && *b >= 0) {
          out.emplace_back(static_cast<T>(*a), static_cast<T>(*b));
        } else {
          if (a && b) error(n[i], k, "channel indices must be >= 0");
          ok = false;
        }
      }
    }
    if (!ok) return std::nullopt;
    return out;
  }
};

void read_initial(Reader& rd, const YAML::Node& n, Index dim, InitialSpec& out) {
  const std::string key = "model.initial_state";
  if (n.IsScalar()) {
    out.named = n.Scalar();
    if (out.named != "ground" && out.named != "excited") {
      rd.error(n, key, "expected ground, excited, {vector: ...} or {density: ...}");
    }
    return;
  }
  if (!rd.is_map(n, key)) return;
  rd.only_keys(n, key, {"vector", "density"});
  if (n["vector"] && n["density"]) {
    rd.error(n, key, "give either vector or density, not both");
    return;
  }
  if (n["vector"]) {
    const auto v = rd.complex_list(n["vector"], key + ".vector");
    if (!v) return;
    if (dim > 0 && static_cast<Index>(v->size()) != dim) {
      rd.error(n["vector"], key + ".vector",
               "expected " + std::to_string(dim) + " entries, got " + std::to_string(v->size()));
      return;
    }
    out.vector = Eigen::Map<const ComplexVector>(v->data(), static_cast<Index>(v->size()));
    if (!(out.vector->norm() > 0.0)) rd.error(n["vector"], key + ".vector", "must be nonzero");
  } else if (n["density"]) {
    if (dim <= 0) return;
    out.density = rd.matrix(n["density"], key + ".density", dim, dim);
  } else {
    rd.error(n, key, "expected vector or density");
  }
}

void read_mollow(Reader& rd, const YAML::Node& m, RunConfig& cfg, InitialSpec& init) {
  rd.only_keys(m, "model",
               {"preset", "omega", "omega0", "nu", "alpha", "lambda", "rabi", "initial_state"});
  MollowConfig mc = MollowConfig::canonical();
  if (m["omega"]) if (auto v = rd.real(m["omega"], "model.omega")) mc.omega = *v;
  if (m["omega0"]) if (auto v = rd.real(m["omega0"], "model.omega0")) mc.omega0 = *v;
  if (m["nu"]) if (auto v = rd.real(m["nu"], "model.nu")) mc.nu = *v;
  if (m["alpha"]) if (auto v = rd.complex_list(m["alpha"], "model.alpha")) mc.alpha = *v;
  if (m["lambda"] && m["rabi"]) {
    rd.error(m["rabi"], "model.rabi", "give either lambda or rabi, not both");
  } else if (m["lambda"]) {
    if (auto v = rd.complex_list(m["lambda"], "model.lambda")) mc.lambda = *v;
  } else if (m["rabi"] || m["alpha"]) {
    // Drive channel 1 so that the Rabi frequency is `rabi` (default 5).
    double rabi = 5.0;
    if (m["rabi"]) {
      if (auto v = rd.real(m["rabi"], "model.rabi")) rabi = *v;
    }
    if (mc.alpha.size() < 2 || mc.alpha[1] == Complex{}) {
      rd.error(m["rabi"] ? m["rabi"] : m["alpha"], "model.rabi",
               "needs a nonzero alpha[1] to drive");
    } else {
      mc.lambda.assign(mc.alpha.size(), Complex{});
      mc.lambda[1] = rabi / (2.0 * std::conj(mc.alpha[1]));
    }
  }
  if (m["initial_state"]) read_initial(rd, m["initial_state"], 2, init);
  cfg.mollow = mc;
}

void read_explicit(Reader& rd, const YAML::Node& m, RunConfig& cfg, InitialSpec& init) {
  rd.only_keys(m, "model",
               {"dim", "hamiltonian", "channels", "drive", "detection", "frame", "initial_state"});
  Index dim = 0;
  if (!m["dim"]) {
    rd.error(m, "model.dim", "required");
  } else if (auto v = rd.integer(m["dim"], "model.dim")) {
    if (*v < 1) rd.error(m["dim"], "model.dim", "must be >= 1"); else dim = static_cast<Index>(*v);
  }
  SystemModel& model = cfg.model;
  if (!m["hamiltonian"]) rd.error(m, "model.hamiltonian", "required");
  if (!m["channels"]) rd.error(m, "model.channels", "required");
  if (dim > 0) {
    if (m["hamiltonian"]) {
      if (auto h = rd.matrix(m["hamiltonian"], "model.hamiltonian", dim, dim)) model.hamiltonian = *h;
    }
    if (m["channels"]) {
      const YAML::Node ch = m["channels"];
      if (!ch.IsSequence() || ch.size() == 0) {
        rd.error(ch, "model.channels", "expected a non-empty list of matrices");
      } else {
        for (std::size_t j = 0; j < ch.size(); ++j) {
          const auto l = rd.matrix(ch[j], "model.channels[" + std::to_string(j) + "]", dim, dim);
          model.channels.push_back(l ? *l : zero(dim));
        }
      }
    }
    model.frame = zero(dim);
    if (m["frame"]) {
      if (auto f = rd.matrix(m["frame"], "model.frame", dim, dim)) model.frame = *f;
    }
  }
  const std::size_t nch = model.channels.size();
  model.drive.amplitudes.assign(nch, Complex{});
  if (m["drive"] && rd.is_map(m["drive"], "model.drive")) {
    const YAML::Node d = m["drive"];
    rd.only_keys(d, "model.drive", {"amplitudes", "carrier"});
    if (d["amplitudes"]) {
      if (auto a = rd.complex_list(d["amplitudes"], "model.drive.amplitudes")) {
        model.drive.amplitudes = *a;
      }
    }
    if (d["carrier"]) {
      if (auto c = rd.real(d["carrier"], "model.drive.carrier")) model.drive.carrier = *c;
    }
  }
  model.detection = DetectionSpec::diagonal_phase(0.0);
  if (m["detection"] && rd.is_map(m["detection"], "model.detection")) {
    const YAML::Node d = m["detection"];
    rd.only_keys(d, "model.detection", {"kind", "nu", "matrix"});
    std::string kind = "phase";
    if (d["kind"]) kind = rd.string(d["kind"], "model.detection.kind").value_or("phase");
    if (kind == "phase") {
      double nu = 0.0;
      if (d["nu"]) nu = rd.real(d["nu"], "model.detection.nu").value_or(0.0);
      if (d["matrix"]) rd.error(d["matrix"], "model.detection.matrix", "only used with kind unitary");
      model.detection = DetectionSpec::diagonal_phase(nu);
    } else if (kind == "unitary") {
      if (d["nu"]) rd.error(d["nu"], "model.detection.nu", "only used with kind phase");
      if (!d["matrix"]) {
        rd.error(d, "model.detection.matrix", "required for kind unitary");
      } else if (nch > 0) {
        const auto n = static_cast<Index>(nch);
        if (auto v = rd.matrix(d["matrix"], "model.detection.matrix", n, n)) {
          model.detection = DetectionSpec::constant_unitary(*v);
        }
      }
    } else {
      rd.error(d["kind"], "model.detection.kind", "expected phase or unitary");
    }
  }
  if (m["initial_state"]) read_initial(rd, m["initial_state"], dim, init);
}

Command parse_command(Reader& rd, const YAML::Node& n) {
  static const std::vector<std::pair<std::string, Command>> names{
      {"verify", Command::Verify},     {"trajectories", Command::Trajectories},
      {"master", Command::Master},     {"moments", Command::Moments},
      {"spectrum", Command::Spectrum}, {"mollow", Command::Mollow}};
  if (auto s = rd.string(n, "run.command")) {
    for (const auto& [name, c] : names) {
      if (*s == name) return c;
    }
    rd.error(n, "run.command",
             "unknown command '" + *s + "' (verify, trajectories, master, moments, spectrum, mollow)");
  }
  return Command::Verify;
}

void read_run(Reader& rd, const YAML::Node& r, RunConfig& cfg) {
  rd.only_keys(r, "run",
               {"command", "dt", "horizon", "ensemble", "seed", "checkpoints", "measure",
                "confidence", "sigma_tolerance", "a4_tolerance", "analytic_dt", "channel_pairs",
                "time_pairs", "nu_grid", "spectrum_dt", "min_horizon", "variance_mode"});
  if (!r["command"]) rd.error(r, "run.command", "required");
  else cfg.command = parse_command(rd, r["command"]);
  auto set_real = [&](const char* k, double& dst) {
    if (r[k]) if (auto v = rd.real(r[k], std::string("run.") + k)) dst = *v;
  };
  set_real("dt", cfg.dt);
  set_real("horizon", cfg.horizon);
  set_real("confidence", cfg.confidence);
  set_real("sigma_tolerance", cfg.sigma_tolerance);
  set_real("a4_tolerance", cfg.a4_tolerance);
  set_real("analytic_dt", cfg.analytic_dt);
  set_real("spectrum_dt", cfg.spectrum_dt);
  set_real("min_horizon", cfg.min_horizon);
  if (r["ensemble"]) {
    if (auto v = rd.integer(r["ensemble"], "run.ensemble")) {
      if (*v < 1) rd.error(r["ensemble"], "run.ensemble", "must be >= 1");
      else cfg.ensemble = static_cast<std::size_t>(*v);
    }
  }
  if (r["checkpoints"]) {
    if (auto v = rd.integer(r["checkpoints"], "run.checkpoints")) {
      if (*v < 1) rd.error(r["checkpoints"], "run.checkpoints", "must be >= 1");
      else cfg.checkpoints = static_cast<std::size_t>(*v);
    }
  }
  if (r["seed"]) {
    try {
      cfg.seed = r["seed"].as<std::uint64_t>();
    } catch (const YAML::Exception&) {
      rd.error(r["seed"], "run.seed", "expected a non-negative integer");
    }
  }
  if (r["measure"]) {
    const auto m = rd.string(r["measure"], "run.measure");
    if (m == "linear") cfg.nonlinear = false;
    else if (m == "nonlinear") cfg.nonlinear = true;
    else if (m) rd.error(r["measure"], "run.measure", "expected linear or nonlinear");
  }
  if (r["variance_mode"]) {
    cfg.variance_mode = rd.boolean(r["variance_mode"], "run.variance_mode").value_or(false);
  }
  if (r["channel_pairs"]) {
    if (auto p = rd.pair_list<std::size_t>(r["channel_pairs"], "run.channel_pairs")) {
      cfg.channel_pairs = *p;
    }
  }
  if (r["time_pairs"]) {
    if (auto p = rd.pair_list<double>(r["time_pairs"], "run.time_pairs")) cfg.time_pairs = *p;
  }
  if (r["nu_grid"]) {
    const YAML::Node g = r["nu_grid"];
    if (g.IsMap()) {
      rd.only_keys(g, "run.nu_grid", {"from", "to", "points"});
      if (!g["from"] || !g["to"] || !g["points"]) {
        rd.error(g, "run.nu_grid", "needs from, to and points");
      } else {
        const double lo = rd.real(g["from"], "run.nu_grid.from").value_or(NAN);
        const double hi = rd.real(g["to"], "run.nu_grid.to").value_or(NAN);
        const long long n = rd.integer(g["points"], "run.nu_grid.points").value_or(-1);
        if (std::isfinite(lo) && std::isfinite(hi) && n != -1) {
          if (n < 1) rd.error(g["points"], "run.nu_grid.points", "must be >= 1");
          else if (n > 1 && !(hi > lo)) rd.error(g["to"], "run.nu_grid.to", "must exceed from");
          else cfg.nu_grid = uniform_grid(lo, hi, static_cast<std::size_t>(n));
        }
      }
    } else if (auto v = rd.real_list(g, "run.nu_grid")) {
      cfg.nu_grid = *v;
      if (v->empty()) rd.error(g, "run.nu_grid", "frequency grid is empty");
    }
  }
}

void read_output(Reader& rd, const YAML::Node& o, RunConfig& cfg) {
  rd.only_keys(o, "output", {"directory", "formats", "precision", "timing"});
  if (o["directory"]) {
    if (auto d = rd.string(o["directory"], "output.directory")) cfg.directory = *d;
  }
  if (o["formats"]) {
    const YAML::Node f = o["formats"];
    if (!f.IsSequence() || f.size() == 0) {
      rd.error(f, "output.formats", "expected a non-empty list of csv/json");
    } else {
      cfg.csv = cfg.json = false;
      for (std::size_t i = 0; i < f.size(); ++i) {
        const auto s = rd.string(f[i], "output.formats");
        if (s == "csv") cfg.csv = true;
        else if (s == "json") cfg.json = true;
        else if (s) rd.error(f[i], "output.formats", "unknown format '" + *s + "'");
      }
    }
  }
  if (o["precision"]) {
    if (auto p = rd.integer(o["precision"], "output.precision")) {
      if (*p < 1 || *p > 17) rd.error(o["precision"], "output.precision", "must lie in 1..17");
      else cfg.precision = static_cast<int>(*p);
    }
  }
  if (o["timing"]) cfg.timing = rd.boolean(o["timing"], "output.timing").value_or(false);
}

bool on_grid(double t, double step) {
  const double x = t / step;
  return std::abs(x - std::round(x)) <= 1e-9 * std::max(1.0, x);
}

void validate_run(Reader& rd, RunConfig& cfg, const InitialSpec& init) {
  if (!(cfg.dt > 0.0)) rd.error("run.dt", "must be > 0");
  if (!(cfg.horizon > 0.0)) rd.error("run.horizon", "must be > 0");
  if (cfg.dt > 0.0 && cfg.horizon > 0.0) {
    if (!on_grid(cfg.horizon, cfg.dt)) {
      rd.error("run.horizon", "must be an integer multiple of run.dt");
    } else if (cfg.nsteps() % cfg.checkpoints != 0) {
      rd.error("run.checkpoints", "must divide horizon / dt = " + std::to_string(cfg.nsteps()));
    }
  }
  if (!(cfg.confidence > 0.0 && cfg.confidence < 1.0)) {
    rd.error("run.confidence", "must lie in (0, 1)");
  }
  if (!(cfg.sigma_tolerance > 0.0)) rd.error("run.sigma_tolerance", "must be > 0");
  if (!(cfg.a4_tolerance > 0.0)) rd.error("run.a4_tolerance", "must be > 0");
  if (cfg.analytic_dt < 0.0) rd.error("run.analytic_dt", "must be >= 0");
  if (!(cfg.spectrum_dt > 0.0)) rd.error("run.spectrum_dt", "must be > 0");
  if (cfg.min_horizon < 0.0) rd.error("run.min_horizon", "must be >= 0");

  const std::size_t nch = cfg.model.nchannels();
  if (cfg.command == Command::Moments) {
    for (const auto& [i, j] : cfg.channel_pairs) {
      if (i >= nch || j >= nch) {
        rd.error("run.channel_pairs", "channel index out of range (" + std::to_string(nch) +
                                          " channels)");
      }
    }
    const double sample = cfg.horizon / static_cast<double>(cfg.checkpoints);
    for (const auto& [t1, t2] : cfg.time_pairs) {
      for (double t : {t1, t2}) {
        if (!(t > 0.0 && t <= cfg.horizon * (1.0 + 1e-12)) || !on_grid(t, sample)) {
          rd.error("run.time_pairs", "time " + std::to_string(t) +
                                         " is not a recorded checkpoint (multiples of " +
                                         std::to_string(sample) + " up to the horizon)");
        }
      }
    }
  }
  const bool scan = cfg.command == Command::Spectrum || cfg.command == Command::Mollow;
  if (cfg.command == Command::Mollow && !cfg.mollow) {
    rd.error("run.command", "mollow needs model.preset: mollow");
  }
  if (scan) {
    if (cfg.nu_grid.empty() && !cfg.mollow) {
      rd.error("run.nu_grid", "frequency grid is empty");
    }
    if (!cfg.mollow && cfg.model.detection.kind != DetectionSpec::Kind::DiagonalPhase) {
      rd.error("model.detection.kind", "spectrum scans need phase detection");
    }
    if (cfg.mollow) {
      for (double nu : cfg.nu_grid) {
        if (nu < 0.0) {
          rd.error("run.nu_grid", "frequencies must be >= 0");
          break;
        }
      }
    }
  }

  const Index d = cfg.model.dim();
  if (!init.named.empty()) {
    if (!cfg.mollow) rd.error("model.initial_state", "ground/excited need the mollow preset");
    else cfg.initial_vector = basis_vector(2, init.named == "excited" ? 0 : 1);
  } else if (init.vector) {
    cfg.initial_vector = *init.vector / init.vector->norm();
  } else if (init.density) {
    const ComplexMatrix& rho = *init.density;
    if (!is_hermitian(rho, 1e-10)) rd.error("model.initial_state.density", "must be Hermitian");
    else if (std::abs(rho.trace() - Complex(1.0)) > 1e-10) {
      rd.error("model.initial_state.density", "must have unit trace");
    } else if (min_eigenvalue(rho) < -1e-10) {
      rd.error("model.initial_state.density", "must be positive semidefinite");
    } else {
      cfg.initial_density = rho;
    }
  } else if (d > 0) {
    cfg.initial_vector = basis_vector(d, cfg.mollow ? 1 : 0);
  }
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error(join_lines(errors)), errors_(std::move(errors)) {}

Complex parse_complex(const std::string& text) {
  std::string s;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) s += c;
  }
  if (s.empty()) throw std::invalid_argument("empty complex literal");
  if (s.back() != 'i' && s.back() != 'j') {
    std::size_t pos = 0;
    const double re = parse_real(s, pos);
    if (pos != s.size()) throw std::invalid_argument("bad complex literal '" + text + "'");
    return {re, 0.0};
  }
  const std::string body = s.substr(0, s.size() - 1);
  // Split at the last sign that is not an exponent sign or the leading sign.
  std::size_t split = std::string::npos;
  for (std::size_t k = body.size(); k-- > 1;) {
    if ((body[k] == '+' || body[k] == '-') && body[k - 1] != 'e' && body[k - 1] != 'E') {
      split = k;
      break;
    }
  }
  auto imag_of = [&](const std::string& part) {
    if (part.empty() || part == "+") return 1.0;
    if (part == "-") return -1.0;
    std::size_t pos = 0;
    const double v = parse_real(part, pos);
    if (pos != part.size()) throw std::invalid_argument("bad complex literal '" + text + "'");
    return v;
  };
  if (split == std::string::npos) return {0.0, imag_of(body)};
  const std::string re_part = body.substr(0, split);
  std::size_t pos = 0;
  const double re = parse_real(re_part, pos);
  if (pos != re_part.size()) throw std::invalid_argument("bad complex literal '" + text + "'");
  return {re, imag_of(body.substr(split))};
}

std::string format_complex(Complex z) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.17g%+.17gi", z.real(), z.imag());
  return buf;
}

std::string command_name(Command c) {
  switch (c) {
    case Command::Verify: return "verify";
    case Command::Trajectories: return "trajectories";
    case Command::Master: return "master";
    case Command::Moments: return "moments";
    case Command::Spectrum: return "spectrum";
    case Command::Mollow: return "mollow";
  }
  return "unknown";
}

std::size_t RunConfig::nsteps() const {
  return static_cast<std::size_t>(std::llround(horizon / dt));
}

std::size_t RunConfig::record_stride() const { return nsteps() / checkpoints; }

ComplexMatrix RunConfig::initial_rho() const {
  if (initial_density) return *initial_density;
  return *initial_vector * initial_vector->adjoint();
}

RunConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError({"syntax error at line " + std::to_string(e.mark.line + 1) + ": " + e.msg});
  }
  Reader rd;
  RunConfig cfg;
  if (!root.IsMap()) throw ConfigError({"config must be a mapping with model, run, output"});
  rd.only_keys(root, "config", {"model", "run", "output"});

  InitialSpec init;
  const YAML::Node model = root["model"];
  if (!model) {
    rd.error("model", "required");
  } else if (rd.is_map(model, "model")) {
    if (model["preset"]) {
      const auto p = rd.string(model["preset"], "model.preset");
      if (p == "mollow") read_mollow(rd, model, cfg, init);
      else if (p) rd.error(model["preset"], "model.preset", "unknown preset '" + *p + "'");
    } else {
      read_explicit(rd, model, cfg, init);
    }
  }
  const YAML::Node run = root["run"];
  if (!run) rd.error("run", "required");
  else if (rd.is_map(run, "run")) read_run(rd, run, cfg);
  if (const YAML::Node out = root["output"]) {
    if (rd.is_map(out, "output")) read_output(rd, out, cfg);
  }

  if (cfg.mollow) {
    if (cfg.ensemble >= 1) cfg.mollow->ensemble = cfg.ensemble;
    if (cfg.dt > 0.0) cfg.mollow->dt = cfg.dt;
    if (cfg.horizon > 0.0) cfg.mollow->horizon = cfg.horizon;
    for (const auto& e : cfg.mollow->validation_errors()) rd.error("model", e);
    if (cfg.mollow->validation_errors().empty()) {
      cfg.model = build_mollow_model(*cfg.mollow);
      if (cfg.nu_grid.empty() &&
          (cfg.command == Command::Spectrum || cfg.command == Command::Mollow)) {
        const double rabi = rabi_frequency(*cfg.mollow);
        cfg.nu_grid = uniform_grid(cfg.mollow->omega0 - 2.0 * rabi,
                                   cfg.mollow->omega0 + 2.0 * rabi, 201);
      }
    }
  } else if (cfg.model.dim() > 0 && !cfg.model.channels.empty()) {
    for (const auto& e : cfg.model.validation_errors()) rd.error("model", e);
  }
  validate_run(rd, cfg, init);

  if (!rd.errors.empty()) throw ConfigError(rd.errors);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read config file " + path.string()});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace {

nlohmann::json complex_json(Complex z) { return nlohmann::json::array({z.real(), z.imag()}); }

nlohmann::json complex_list_json(const std::vector<Complex>& v) {
  auto a = nlohmann::json::array();
  for (const auto& z : v) a.push_back(complex_json(z));
  return a;
}

nlohmann::json matrix_json(const ComplexMatrix& m) {
  auto rows = nlohmann::json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(complex_json(m(r, c)));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

nlohmann::json config_to_json(const RunConfig& cfg) {
  nlohmann::json model;
  if (cfg.mollow) {
    model["preset"] = "mollow";
    model["omega"] = cfg.mollow->omega;
    model["omega0"] = cfg.mollow->omega0;
    model["nu"] = cfg.mollow->nu;
    model["alpha"] = complex_list_json(cfg.mollow->alpha);
    model["lambda"] = complex_list_json(cfg.mollow->lambda);
  } else {
    const SystemModel& m = cfg.model;
    model["dim"] = m.dim();
    model["hamiltonian"] = matrix_json(m.hamiltonian);
    auto ch = nlohmann::json::array();
    for (const auto& l : m.channels) ch.push_back(matrix_json(l));
    model["channels"] = ch;
    model["drive"] = {{"amplitudes", complex_list_json(m.drive.amplitudes)},
                      {"carrier", m.drive.carrier}};
    if (m.detection.kind == DetectionSpec::Kind::DiagonalPhase) {
      model["detection"] = {{"kind", "phase"}, {"nu", m.detection.nu}};
    } else {
      model["detection"] = {{"kind", "unitary"}, {"matrix", matrix_json(m.detection.unitary)}};
    }
    model["frame"] = matrix_json(m.frame);
  }
  if (cfg.initial_density) {
    model["initial_state"] = {{"density", matrix_json(*cfg.initial_density)}};
  } else if (cfg.initial_vector) {
    std::vector<Complex> v(cfg.initial_vector->data(),
                           cfg.initial_vector->data() + cfg.initial_vector->size());
    model["initial_state"] = {{"vector", complex_list_json(v)}};
  }

  nlohmann::json run;
  run["command"] = command_name(cfg.command);
  run["dt"] = cfg.dt;
  run["horizon"] = cfg.horizon;
  run["ensemble"] = cfg.ensemble;
  run["seed"] = cfg.seed;
  run["checkpoints"] = cfg.checkpoints;
  run["measure"] = cfg.nonlinear ? "nonlinear" : "linear";
  run["confidence"] = cfg.confidence;
  run["sigma_tolerance"] = cfg.sigma_tolerance;
  run["a4_tolerance"] = cfg.a4_tolerance;
  run["analytic_dt"] = cfg.analytic_dt;
  run["channel_pairs"] = cfg.channel_pairs;
  run["time_pairs"] = cfg.time_pairs;
  if (!cfg.nu_grid.empty()) run["nu_grid"] = cfg.nu_grid;
  run["spectrum_dt"] = cfg.spectrum_dt;
  run["min_horizon"] = cfg.min_horizon;
  run["variance_mode"] = cfg.variance_mode;

  nlohmann::json output;
  output["directory"] = cfg.directory;
  auto formats = nlohmann::json::array();
  if (cfg.csv) formats.push_back("csv");
  if (cfg.json) formats.push_back("json");
  output["formats"] = formats;
  output["precision"] = cfg.precision;
  output["timing"] = cfg.timing;

  return {{"model", model}, {"run", run}, {"output", output}};
}

}  // namespace qsde::cli
