#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "qsde/cli.hpp"
#include "qsde/master.hpp"
#include "qsde/statistics.hpp"
#include "qsde/trajectories.hpp"

namespace qsde::cli {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double flag(bool b) { return b ? 1.0 : 0.0; }

Table table(std::vector<std::string> columns) { return Table{std::move(columns), {}}; }

InitialState initial_state(const RunConfig& cfg) {
  if (cfg.initial_density) return InitialState::from_density(*cfg.initial_density);
  return InitialState::from_vector(*cfg.initial_vector);
}

EnsembleSpec ensemble_spec(const RunConfig& cfg) {
  EnsembleSpec spec;
  spec.trajectories = cfg.ensemble;
  spec.dt = cfg.dt;
  spec.nsteps = cfg.nsteps();
  spec.base_seed = cfg.seed;
  spec.record_stride = cfg.record_stride();
  return spec;
}

double analytic_step(const RunConfig& cfg) { return cfg.analytic_dt > 0.0 ? cfg.analytic_dt : cfg.dt; }

Table law_table(const WienerLawReport& r) {
  Table t = table({"test", "channel", "other", "statistic", "stderr", "z", "passed"});
  for (const auto& x : r.tests) {
    t.rows.push_back({x.name, static_cast<double>(x.channel), static_cast<double>(x.other),
                      x.statistic, x.stderr, x.z, flag(x.passed)});
  }
  return t;
}

Check law_check(const WienerLawReport& r) {
  double worst = 0.0;
  for (const auto& x : r.tests) worst = std::max(worst, std::abs(x.z));
  return {"Wiener law of the shifted noise", r.passed,
          "max |z| " + fmt(worst) + " vs critical " + fmt(r.critical_z)};
}

void run_verify(const RunConfig& cfg, ResultBundle& b) {
  const Coefficients coeffs(cfg.model);
  std::vector<double> times;
  for (std::size_t n = 0; n <= cfg.checkpoints; ++n) {
    times.push_back(cfg.horizon * static_cast<double>(n) / static_cast<double>(cfg.checkpoints));
  }
  const A4Report a4 = verify_A4(coeffs, times, cfg.a4_tolerance);
  Table t = table({"t", "residual"});
  for (std::size_t n = 0; n < a4.times.size(); ++n) t.rows.push_back({a4.times[n], a4.residuals[n]});
  b.tables.emplace_back("a4", std::move(t));
  b.checks.push_back({"dissipation identity", a4.passed,
                      "max residual " + fmt(a4.max_residual) + " <= " + fmt(cfg.a4_tolerance)});

  const NormBoundsReport nb = operator_norm_bounds(coeffs, cfg.horizon);
  Table bt = table({"horizon", "samples", "sup_dissipation_norm", "sup_k_norm",
                    "min_dissipation_norm"});
  bt.rows.push_back({nb.horizon, static_cast<double>(nb.samples), nb.sup_dissipation_norm,
                     nb.sup_k_norm, nb.min_dissipation_norm});
  b.tables.emplace_back("bounds", std::move(bt));
  const bool finite = std::isfinite(nb.sup_dissipation_norm) && std::isfinite(nb.sup_k_norm);
  b.checks.push_back({"bounded coefficients", finite,
                      "sup ||K|| " + fmt(nb.sup_k_norm) + ", sup ||sum R*R|| " +
                          fmt(nb.sup_dissipation_norm)});
}

Table summary_table(std::size_t channels, bool linear) {
  std::vector<std::string> cols{"trajectory", "seed"};
  if (linear) {
    cols.push_back("final_weight");
    cols.push_back("degenerate");
  }
  for (std::size_t k = 0; k < channels; ++k) cols.push_back("W" + std::to_string(k));
  for (std::size_t k = 0; k < channels; ++k) cols.push_back("What" + std::to_string(k));
  return table(cols);
}

void run_trajectories(const RunConfig& cfg, ResultBundle& b) {
  const Coefficients coeffs(cfg.model);
  const EnsembleSpec spec = ensemble_spec(cfg);
  const std::size_t nch = coeffs.nchannels();
  if (!cfg.nonlinear) {
    const auto recs = run_linear_ensemble(coeffs, initial_state(cfg), spec);
    Table s = summary_table(nch, true);
    for (std::size_t i = 0; i < recs.size(); ++i) {
      const auto& r = recs[i];
      std::vector<Cell> row{static_cast<double>(i), std::to_string(r.seed), r.weight.back(),
                            flag(r.degenerate)};
      for (std::size_t k = 0; k < nch; ++k) row.emplace_back(r.w_path.back()[k]);
      for (std::size_t k = 0; k < nch; ++k) row.emplace_back(r.what_path.back()[k]);
      s.rows.push_back(std::move(row));
    }
    b.tables.emplace_back("summary", std::move(s));

    const OutputEnsemble ens = OutputEnsemble::from_linear(recs);
    Table m = table({"t", "mean_weight", "stderr", "z"});
    bool ok = true;
    double worst = 0.0;
    for (std::size_t n = 0; n < ens.samples(); ++n) {
      const Estimate e = mc_mean_weight(ens, n);
      const double dev = e.value - 1.0;
      const double z = e.stderr > 0.0 ? dev / e.stderr : 0.0;
      ok = ok && std::abs(dev) <= cfg.sigma_tolerance * e.stderr + 1e-12;
      worst = std::max(worst, std::abs(z));
      m.rows.push_back({ens.times[n], e.value, e.stderr, z});
    }
    b.tables.emplace_back("martingale", std::move(m));
    b.checks.push_back({"martingale weight", ok,
                        "max |z| " + fmt(worst) + " <= " + fmt(cfg.sigma_tolerance)});
    const WienerLawReport law = wiener_law_tests(recs, cfg.confidence, true);
    b.tables.emplace_back("wiener_law", law_table(law));
    b.checks.push_back(law_check(law));
  } else {
    const auto recs = run_nonlinear_ensemble(coeffs, initial_state(cfg), spec);
    Table s = summary_table(nch, false);
    for (std::size_t i = 0; i < recs.size(); ++i) {
      const auto& r = recs[i];
      std::vector<Cell> row{static_cast<double>(i), std::to_string(r.seed)};
      for (std::size_t k = 0; k < nch; ++k) row.emplace_back(r.output_path.back()[k]);
      for (std::size_t k = 0; k < nch; ++k) row.emplace_back(r.what_path.back()[k]);
      s.rows.push_back(std::move(row));
    }
    b.tables.emplace_back("summary", std::move(s));
    const WienerLawReport law = wiener_law_tests(recs, cfg.confidence);
    b.tables.emplace_back("wiener_law", law_table(law));
    b.checks.push_back(law_check(law));
  }
}

void push_matrix(Table& t, const std::vector<Cell>& prefix, const ComplexMatrix& m) {
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      std::vector<Cell> row = prefix;
      row.insert(row.end(), {static_cast<double>(r), static_cast<double>(c), m(r, c).real(),
                             m(r, c).imag()});
      t.rows.push_back(std::move(row));
    }
  }
}

void run_master(const RunConfig& cfg, ResultBundle& b) {
  const LindbladPropagator gen{Coefficients(cfg.model)};
  const double h = analytic_step(cfg);
  const std::size_t nsteps = static_cast<std::size_t>(std::llround(cfg.horizon / h));
  if (std::abs(static_cast<double>(nsteps) * h - cfg.horizon) > 1e-9 * cfg.horizon ||
      nsteps % cfg.checkpoints != 0) {
    throw std::invalid_argument("master: horizon / analytic_dt must be a multiple of checkpoints");
  }
  const auto series = propagate_master_series(gen, cfg.initial_rho(), 0.0, h, nsteps);
  const std::size_t stride = nsteps / cfg.checkpoints;
  Table rho = table({"t", "row", "col", "re", "im"});
  Table s = table({"t", "trace", "min_eigenvalue", "purity"});
  double worst_trace = 0.0;
  double worst_eig = 0.0;
  for (std::size_t n = 0; n <= nsteps; n += stride) {
    const double t = static_cast<double>(n) * h;
    const ComplexMatrix& r = series[n];
    const ComplexMatrix herm = 0.5 * (r + r.adjoint());
    const double tr = r.trace().real();
    const double eig = min_eigenvalue(herm);
    push_matrix(rho, {t}, r);
    s.rows.push_back({t, tr, eig, (r * r).trace().real()});
    worst_trace = std::max(worst_trace, std::abs(tr - 1.0));
    worst_eig = std::min(worst_eig, eig);
  }
  b.tables.emplace_back("rho", std::move(rho));
  b.tables.emplace_back("summary", std::move(s));
  b.checks.push_back({"trace preserved", worst_trace <= 1e-9,
                      "max |tr rho - 1| " + fmt(worst_trace)});
  b.checks.push_back({"positivity", worst_eig >= -1e-6, "min eigenvalue " + fmt(worst_eig)});

  if (gen.time_independent()) {
    const StationaryResult st = stationary_state(gen);
    Table t = table({"row", "col", "re", "im"});
    push_matrix(t, {}, st.rho);
    b.tables.emplace_back("stationary", std::move(t));
    b.checks.push_back({"stationary state", st.residual <= 1e-8,
                        "residual " + fmt(st.residual) + ", null dimension " +
                            std::to_string(st.null_dimension)});
  }
}

void run_moments(const RunConfig& cfg, ResultBundle& b) {
  const Coefficients coeffs(cfg.model);
  const LindbladPropagator gen(coeffs);
  const EnsembleSpec spec = ensemble_spec(cfg);
  const OutputEnsemble ens =
      cfg.nonlinear
          ? OutputEnsemble::from_nonlinear(run_nonlinear_ensemble(coeffs, initial_state(cfg), spec))
          : OutputEnsemble::from_linear(run_linear_ensemble(coeffs, initial_state(cfg), spec));
  MomentRequest req;
  req.dt = analytic_step(cfg);
  req.channel_pairs = cfg.channel_pairs;
  req.time_pairs = cfg.time_pairs;
  if (req.time_pairs.empty()) req.time_pairs = {{cfg.horizon, cfg.horizon}};
  const MomentReport rep = mc_output_moments(gen, cfg.initial_rho(), ens, req);

  const double k = cfg.sigma_tolerance;
  Table mean = table({"t", "channel", "analytic", "mc", "stderr"});
  double worst = 0.0;
  bool ok = true;
  for (const auto& r : rep.means) {
    mean.rows.push_back({r.t, static_cast<double>(r.channel), r.analytic, r.mc, r.stderr});
    const double dev = std::abs(r.mc - r.analytic);
    ok = ok && dev <= k * r.stderr + 1e-12;
    if (r.stderr > 0.0) worst = std::max(worst, dev / r.stderr);
  }
  b.tables.emplace_back("mean", std::move(mean));
  b.checks.push_back({"mean output", ok, "max |mc - analytic| / stderr " + fmt(worst)});

  Table corr = table({"i", "j", "t1", "t2", "analytic", "mc", "stderr"});
  worst = 0.0;
  ok = true;
  for (const auto& r : rep.correlations) {
    corr.rows.push_back({static_cast<double>(r.i), static_cast<double>(r.j), r.t1, r.t2,
                         r.analytic, r.mc, r.stderr});
    const double dev = std::abs(r.mc - r.analytic);
    ok = ok && dev <= k * r.stderr + 1e-12;
    if (r.stderr > 0.0) worst = std::max(worst, dev / r.stderr);
  }
  b.tables.emplace_back("correlation", std::move(corr));
  b.checks.push_back({"second moment", ok, "max |mc - analytic| / stderr " + fmt(worst)});
}

void spectrum_tables(const SpectrumScan& scan, const std::vector<Peak>& peaks, ResultBundle& b) {
  Table s = table({"nu", "S"});
  for (std::size_t q = 0; q < scan.nu.size(); ++q) s.rows.push_back({scan.nu[q], scan.s[q]});
  b.tables.emplace_back("spectrum", std::move(s));
  Table p = table({"index", "nu", "S"});
  for (const auto& pk : peaks) p.rows.push_back({static_cast<double>(pk.index), pk.nu, pk.value});
  b.tables.emplace_back("peaks", std::move(p));
  const bool finite = std::all_of(scan.s.begin(), scan.s.end(), [](double v) { return std::isfinite(v); });
  b.checks.push_back({"finite spectrum", finite, std::to_string(scan.s.size()) + " frequencies"});
}

void run_mollow(const RunConfig& cfg, ResultBundle& b) {
  const MollowConfig& mc = *cfg.mollow;
  MollowSpectrumOptions opts;
  opts.dt = cfg.spectrum_dt;
  opts.min_horizon = cfg.min_horizon;
  opts.variance_mode = cfg.variance_mode;
  const MollowSpectrumReport r = run_mollow_spectrum(mc, cfg.nu_grid, opts);
  spectrum_tables(r.scan, r.peaks, b);
  Table s = table({"horizon", "dt", "rabi", "gamma", "spacing", "peaks", "symmetry_error"});
  s.rows.push_back({r.scan.horizon, r.scan.dt, r.rabi, mc.gamma(), r.spacing,
                    static_cast<double>(r.peaks.size()), r.symmetry_error});
  b.tables.emplace_back("summary", std::move(s));

  const double gamma = mc.gamma();
  if (r.rabi >= 2.0 * gamma) {
    b.checks.push_back({"Mollow triplet", r.triplet,
                        std::to_string(r.peaks.size()) + " peaks, sidebands expected at " +
                            fmt(mc.omega0 - r.rabi) + " and " + fmt(mc.omega0 + r.rabi)});
  } else if (r.rabi <= 0.25 * gamma) {
    b.checks.push_back({"single line", r.single_peak,
                        std::to_string(r.peaks.size()) + " peaks, expected 1 at " + fmt(mc.omega0)});
  }
  const bool resonant = std::abs(mc.omega - mc.omega0) <= 1e-12 * mc.omega0;
  if (resonant && r.mirrored_pairs > 0 && !cfg.variance_mode) {
    b.checks.push_back({"symmetric about the laser frequency", r.symmetry_error <= 1e-3,
                        "relative asymmetry " + fmt(r.symmetry_error) + " over " +
                            std::to_string(r.mirrored_pairs) + " mirrored pairs"});
  }
}

void run_spectrum(const RunConfig& cfg, ResultBundle& b) {
  if (cfg.mollow) {
    run_mollow(cfg, b);
    return;
  }
  SpectrumOptions opts;
  opts.dt = cfg.spectrum_dt;
  opts.variance_mode = cfg.variance_mode;
  opts.initial_state = cfg.initial_density;
  const double min_h = cfg.min_horizon > 0.0 ? cfg.min_horizon : cfg.horizon;
  if (cfg.nu_grid.size() >= 2) {
    const double spacing = (cfg.nu_grid.back() - cfg.nu_grid.front()) /
                           static_cast<double>(cfg.nu_grid.size() - 1);
    opts.horizon = spacing > 0.0 ? commensurate_horizon(spacing, min_h) : min_h;
  } else {
    opts.horizon = min_h;
  }
  const SystemModel base = cfg.model;
  const auto factory = [&base](double nu) {
    SystemModel m = base;
    m.detection = DetectionSpec::diagonal_phase(nu);
    return Coefficients(m);
  };
  const SpectrumScan scan = spectrum_scan(factory, cfg.nu_grid, opts);
  double smax = 0.0;
  for (double v : scan.s) smax = std::max(smax, std::abs(v));
  spectrum_tables(scan, detect_peaks(scan, 1e-6 * smax), b);
  Table s = table({"horizon", "dt"});
  s.rows.push_back({scan.horizon, scan.dt});
  b.tables.emplace_back("summary", std::move(s));
}

}  // namespace

bool ResultBundle::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

const Table* ResultBundle::table(const std::string& name) const {
  for (const auto& [n, t] : tables) {
    if (n == name) return &t;
  }
  return nullptr;
}

ResultBundle run_command(const RunConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  ResultBundle b;
  b.command = command_name(cfg.command);
  b.seed = cfg.seed;
  b.version = kVersion;
  b.config = config_to_json(cfg);
  switch (cfg.command) {
    case Command::Verify: run_verify(cfg, b); break;
    case Command::Trajectories: run_trajectories(cfg, b); break;
    case Command::Master: run_master(cfg, b); break;
    case Command::Moments: run_moments(cfg, b); break;
    case Command::Spectrum: run_spectrum(cfg, b); break;
    case Command::Mollow: run_mollow(cfg, b); break;
  }
  if (cfg.timing) {
    b.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return b;
}

}  // namespace qsde::cli
