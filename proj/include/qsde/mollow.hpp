#pragma once

// Laser-driven two-level atom under heterodyne detection. Basis order is
// (excited, ground); H = omega diag(1, 0), L_j = alpha_j sigma_minus,
// f_j(t) = lambda_j exp(-i omega0 t), H0 = omega0 diag(1, 0) and the
// detection phase is exp(-i nu s).

#include <cstdint>
#include <string>
#include <vector>

#include "qsde/model.hpp"
#include "qsde/statistics.hpp"

namespace qsde {

struct MollowConfig {
  double omega = 10.0;
  double omega0 = 10.0;
  double nu = 10.0;
  std::vector<Complex> alpha;
  std::vector<Complex> lambda;
  std::size_t ensemble = 10000;
  double dt = 1e-3;
  double horizon = 2.0;

  double gamma() const;  // sum_j |alpha_j|^2

  std::vector<std::string> validation_errors() const;
  void validate() const;

  /// gamma = 1, omega = omega0 = nu = 10, two channels with equal couplings,
  /// only channel 1 driven, Rabi frequency `rabi`.
  static MollowConfig canonical(double rabi = 5.0);
};

ComplexMatrix sigma_minus();

SystemModel build_mollow_model(const MollowConfig& cfg);

/// 2 |sum_j conj(lambda_j) alpha_j|
double rabi_frequency(const MollowConfig& cfg);

std::vector<double> uniform_grid(double lo, double hi, std::size_t count);

/// Smallest multiple of 2 pi / spacing that is >= min_horizon. On such a
/// horizon every oscillating boundary term e^{i (nu - omega0) T} takes the
/// same value across a grid of that spacing.
double commensurate_horizon(double spacing, double min_horizon);

struct Peak {
  std::size_t index = 0;
  double nu = 0.0;
  double value = 0.0;
};

/// Interior points exceeding both neighbours by more than `tolerance`.
std::vector<Peak> detect_peaks(const SpectrumScan& scan, double tolerance);

struct MollowSpectrumOptions {
  double dt = 1e-2;           // quadrature step upper bound
  double min_horizon = 0.0;   // 0: 30 / gamma
  double peak_tolerance = 1e-6;  // relative to max S
  bool variance_mode = false;
  std::size_t workers = 0;
};

struct MollowSpectrumReport {
  SpectrumScan scan;
  std::vector<Peak> peaks;
  double rabi = 0.0;
  double spacing = 0.0;
  bool triplet = false;         // exactly 3 peaks at omega0, omega0 +- rabi within 2 spacings
  bool single_peak = false;     // exactly 1 peak within 2 spacings of omega0
  double symmetry_error = 0.0;  // max |S(w0 + d) - S(w0 - d)| / max S over mirrored pairs
  std::size_t mirrored_pairs = 0;
};

MollowSpectrumReport run_mollow_spectrum(const MollowConfig& cfg,
                                         const std::vector<double>& nu_grid,
                                         const MollowSpectrumOptions& opts = {});

}  // namespace qsde
