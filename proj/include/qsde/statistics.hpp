#pragma once

// Output statistics: analytic first and second moments of W_k from the
// master equation, Monte Carlo estimators with jackknife errors, the
// heterodyne spectrum scan and Wiener-law tests for the shifted noises.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qsde/master.hpp"
#include "qsde/model.hpp"
#include "qsde/trajectories.hpp"

namespace qsde {

/// int_0^t Tr{rho_s (R_k(s) + R_k(s)^*)} ds by the trapezoid rule on a grid
/// of step <= dt, with rho_s from RK4.
double analytic_mean_output(const LindbladPropagator& gen, const ComplexMatrix& rho0,
                            std::size_t k, double t, double dt);

/// The same integral at every point t_n = n dt, n = 0..nsteps.
std::vector<double> analytic_mean_series(const LindbladPropagator& gen,
                                         const ComplexMatrix& rho0, std::size_t k, double dt,
                                         std::size_t nsteps);

/// E[W_i(t1) W_j(t2)] under the physical measure:
///
///   delta_ij min(t1, t2) + A(i, j, t1, t2) + A(j, i, t2, t1),
///   A(i, j, t1, t2) = int_0^t1 ds1 int_0^{min(t2, s1)} ds2
///                     Tr{(R_i + R_i^*)(s1) U(s1, s2)[R_j rho_s2 + rho_s2 R_j^*]}
///
/// Both double integrals use nested trapezoid rules on a uniform grid with
/// step h = max(t1, t2) / ceil(max(t1, t2) / dt); min(t1, t2) must lie on
/// that grid.
double analytic_second_moment(const LindbladPropagator& gen, const ComplexMatrix& rho0,
                              std::size_t i, std::size_t j, double t1, double t2, double dt);

struct Estimate {
  double value = 0.0;
  double stderr = 0.0;
};

/// Mean with its leave-one-out jackknife standard error.
Estimate jackknife_mean(std::span<const double> values);

/// Weights and output paths of an ensemble on a shared sample grid.
/// Linear records contribute their weights ||psi_t||^2 and raw W; normalized
/// records contribute weight 1 and W = What + 2 int Re mhat.
struct OutputEnsemble {
  std::vector<double> times;
  std::size_t trajectories = 0;
  std::size_t channels = 0;
  std::vector<double> weights;  // [i * samples + n]
  std::vector<double> outputs;  // [(i * samples + n) * channels + k]

  std::size_t samples() const { return times.size(); }
  double weight(std::size_t i, std::size_t n) const { return weights[i * samples() + n]; }
  double output(std::size_t i, std::size_t n, std::size_t k) const {
    return outputs[(i * samples() + n) * channels + k];
  }
  /// Sample index of time t (exact grid match within 1e-9).
  std::size_t index_of(double t) const;

  static OutputEnsemble from_linear(const std::vector<TrajectoryRecord>& records);
  static OutputEnsemble from_nonlinear(const std::vector<NormalizedRecord>& records);
};

/// E[W_k(t_n)] reweighted by the weight at t_n.
Estimate mc_mean_output(const OutputEnsemble& ens, std::size_t k, std::size_t n);

/// E[W_i(t_n1) W_j(t_n2)] reweighted by the weight at max(t_n1, t_n2).
Estimate mc_second_moment(const OutputEnsemble& ens, std::size_t i, std::size_t j,
                          std::size_t n1, std::size_t n2);

/// E[weight(t_n)] (martingale check).
Estimate mc_mean_weight(const OutputEnsemble& ens, std::size_t n);

struct MeanRow {
  double t = 0.0;
  std::size_t channel = 0;
  double analytic = 0.0;
  double mc = 0.0;
  double stderr = 0.0;
};

struct CorrelationRow {
  std::size_t i = 0;
  std::size_t j = 0;
  double t1 = 0.0;
  double t2 = 0.0;
  double analytic = 0.0;
  double mc = 0.0;
  double stderr = 0.0;
};

struct MomentRequest {
  double dt = 1e-3;  // analytic quadrature step
  std::vector<std::pair<std::size_t, std::size_t>> channel_pairs;
  std::vector<std::pair<double, double>> time_pairs;
};

struct MomentReport {
  std::vector<MeanRow> means;
  std::vector<CorrelationRow> correlations;
};

/// Analytic and MC moments side by side: means at every sample time of
/// every channel, correlations for every requested pair.
MomentReport mc_output_moments(const LindbladPropagator& gen, const ComplexMatrix& rho0,
                               const OutputEnsemble& ens, const MomentRequest& request);

/// Bias estimate C dt from a coupled step-halving pair: 2 |est(dt) - est(dt/2)|.
double halving_bias(double estimate_dt, double estimate_half_dt);

struct SpectrumOptions {
  double horizon = 0.0;
  double dt = 1e-2;
  std::size_t channel = 0;
  bool variance_mode = false;  // subtract E[W(T)]^2
  std::optional<ComplexMatrix> initial_state;  // default: stationary state
  std::size_t workers = 0;
};

struct SpectrumScan {
  std::vector<double> nu;
  std::vector<double> s;
  double horizon = 0.0;
  double dt = 0.0;
  bool variance_mode = false;
};

/// S(nu) = E[W_c(T)^2] / T for each nu, with the coefficients rebuilt by
/// `factory` and rho_0 the stationary state of each generator.
SpectrumScan spectrum_scan(const std::function<Coefficients(double)>& factory,
                           const std::vector<double>& nu_grid, const SpectrumOptions& opts);

struct LawTest {
  std::string name;
  std::size_t channel = 0;
  std::size_t other = 0;
  double statistic = 0.0;  // deviation from the expected value
  double stderr = 0.0;
  double z = 0.0;
  bool passed = false;
};

struct WienerLawReport {
  double confidence = 0.0;
  double critical_z = 0.0;
  std::vector<LawTest> tests;
  bool passed = false;

  const LawTest* find(const std::string& name, std::size_t channel) const;
};

/// Mean, variance, cross-covariance and lag-1 autocovariance of the What
/// increments between recorded samples, normalized by their intervals.
/// Linear records are reweighted by their terminal weight unless
/// `reweight` is false. `confidence` applies to the family of tests
/// (Bonferroni), so critical_z grows with the number of channels.
WienerLawReport wiener_law_tests(const std::vector<TrajectoryRecord>& records,
                                 double confidence, bool reweight = true);
WienerLawReport wiener_law_tests(const std::vector<NormalizedRecord>& records,
                                 double confidence);

/// Two-sided standard normal critical value for a confidence level.
double normal_critical_value(double confidence);

}  // namespace qsde
