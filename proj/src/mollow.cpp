#include "qsde/mollow.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qsde {

double MollowConfig::gamma() const {
  double g = 0.0;
  for (const auto& a : alpha) g += std::norm(a);
  return g;
}

std::vector<std::string> MollowConfig::validation_errors() const {
  std::vector<std::string> errors;
  if (!(omega > 0.0)) errors.push_back("omega must be > 0");
  if (!(omega0 > 0.0)) errors.push_back("omega0 must be > 0");
  if (!(nu >= 0.0) || !std::isfinite(nu)) errors.push_back("nu must be finite and >= 0");
  if (alpha.empty()) errors.push_back("alpha must list at least one channel");
  if (lambda.size() != alpha.size()) {
    errors.push_back("lambda needs one entry per channel (" + std::to_string(alpha.size()) +
                     "), got " + std::to_string(lambda.size()));
  }
  if (!lambda.empty() && lambda.front() != Complex{}) {
    errors.push_back("lambda_0 must be 0 (the measured channel is undriven)");
  }
  if (!(gamma() > 0.0) || !std::isfinite(gamma())) {
    errors.push_back("sum of |alpha_j|^2 must be > 0");
  }
  if (ensemble == 0) errors.push_back("ensemble must be >= 1");
  if (!(dt > 0.0)) errors.push_back("dt must be > 0");
  if (!(horizon > 0.0)) errors.push_back("horizon must be > 0");
  return errors;
}

void MollowConfig::validate() const {
  auto errors = validation_errors();
  if (!errors.empty()) throw ModelError(std::move(errors));
}

MollowConfig MollowConfig::canonical(double rabi) {
  MollowConfig cfg;
  const double a = 1.0 / std::sqrt(2.0);
  cfg.alpha = {a, a};
  cfg.lambda = {0.0, rabi / (2.0 * a)};
  return cfg;
}

ComplexMatrix sigma_minus() {
  ComplexMatrix m = zero(2);
  m(1, 0) = 1.0;
  return m;
}

SystemModel build_mollow_model(const MollowConfig& cfg) {
  cfg.validate();
  ComplexMatrix excited = zero(2);
  excited(0, 0) = 1.0;
  SystemModel m;
  m.hamiltonian = cfg.omega * excited;
  for (const auto& a : cfg.alpha) m.channels.push_back(a * sigma_minus());
  m.drive.amplitudes = cfg.lambda;
  m.drive.carrier = cfg.omega0;
  m.detection = DetectionSpec::diagonal_phase(cfg.nu);
  m.frame = cfg.omega0 * excited;
  return m;
}

double rabi_frequency(const MollowConfig& cfg) {
  Complex s{};
  const std::size_t n = std::min(cfg.alpha.size(), cfg.lambda.size());
  for (std::size_t j = 0; j < n; ++j) s += std::conj(cfg.lambda[j]) * cfg.alpha[j];
  return 2.0 * std::abs(s);
}

std::vector<double> uniform_grid(double lo, double hi, std::size_t count) {
  if (count == 0) throw std::invalid_argument("uniform_grid: count must be >= 1");
  if (count == 1) return {lo};
  if (!(hi > lo)) throw std::invalid_argument("uniform_grid: hi must exceed lo");
  std::vector<double> g(count);
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t k = 0; k < count; ++k) g[k] = lo + step * static_cast<double>(k);
  g.back() = hi;
  return g;
}

double commensurate_horizon(double spacing, double min_horizon) {
  if (!(spacing > 0.0)) throw std::invalid_argument("commensurate_horizon: spacing must be > 0");
  const double period = 2.0 * std::numbers::pi / spacing;
  const double m = std::max(1.0, std::ceil(min_horizon / period - 1e-12));
  return m * period;
}

std::vector<Peak> detect_peaks(const SpectrumScan& scan, double tolerance) {
  std::vector<Peak> peaks;
  for (std::size_t q = 1; q + 1 < scan.s.size(); ++q) {
    if (scan.s[q] - scan.s[q - 1] > tolerance && scan.s[q] - scan.s[q + 1] > tolerance) {
      peaks.push_back({q, scan.nu[q], scan.s[q]});
    }
  }
  return peaks;
}

MollowSpectrumReport run_mollow_spectrum(const MollowConfig& cfg,
                                         const std::vector<double>& nu_grid,
                                         const MollowSpectrumOptions& opts) {
  cfg.validate();
  if (nu_grid.size() < 3) {
    throw std::invalid_argument("run_mollow_spectrum: need at least 3 frequencies");
  }
  MollowSpectrumReport report;
  report.rabi = rabi_frequency(cfg);
  report.spacing = (nu_grid.back() - nu_grid.front()) / static_cast<double>(nu_grid.size() - 1);

  SpectrumOptions so;
  so.dt = opts.dt;
  so.horizon = commensurate_horizon(
      report.spacing, opts.min_horizon > 0.0 ? opts.min_horizon : 30.0 / cfg.gamma());
  so.variance_mode = opts.variance_mode;
  so.workers = opts.workers;
  so.channel = 0;

  auto factory = [&cfg](double nu) {
    MollowConfig c = cfg;
    c.nu = nu;
    return Coefficients(build_mollow_model(c));
  };
  report.scan = spectrum_scan(factory, nu_grid, so);

  double smax = 0.0;
  for (double v : report.scan.s) smax = std::max(smax, std::abs(v));
  report.peaks = detect_peaks(report.scan, opts.peak_tolerance * smax);

  const double window = 2.0 * report.spacing + 1e-9;
  auto near = [&](double nu, double target) { return std::abs(nu - target) <= window; };
  if (report.peaks.size() == 3) {
    report.triplet = near(report.peaks[0].nu, cfg.omega0 - report.rabi) &&
                     near(report.peaks[1].nu, cfg.omega0) &&
                     near(report.peaks[2].nu, cfg.omega0 + report.rabi);
  }
  report.single_peak = report.peaks.size() == 1 && near(report.peaks[0].nu, cfg.omega0);

  const auto& nu = report.scan.nu;
  const double tol = 1e-9 * std::max(1.0, std::abs(cfg.omega0));
  for (std::size_t a = 0; a < nu.size(); ++a) {
    for (std::size_t b = a; b < nu.size(); ++b) {
      if (std::abs(nu[a] + nu[b] - 2.0 * cfg.omega0) <= tol) {
        ++report.mirrored_pairs;
        const double diff = std::abs(report.scan.s[a] - report.scan.s[b]);
        report.symmetry_error = std::max(report.symmetry_error, smax > 0.0 ? diff / smax : diff);
      }
    }
  }
  return report;
}

}  // namespace qsde
