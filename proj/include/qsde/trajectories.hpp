#pragma once

// Euler-Maruyama integrators for the linear SSE
//
//   dpsi = sum_j R_j(t) psi dW_j - i K(t) psi dt
//
// and for the normalized (nonlinear) SSE driven by the shifted noises
// What_k = W_k - 2 int Re mhat_k ds. All coefficients are evaluated at the
// left point of each step.

#include <cstdint>
#include <optional>
#include <vector>

#include "qsde/linalg.hpp"
#include "qsde/model.hpp"
#include "qsde/wiener.hpp"

namespace qsde {

/// K_n, R_{j,n} and the nonlinear drift operator on t_n = n dt,
/// n = 0..nsteps-1, shared read-only by every trajectory of an ensemble.
class CoefficientGrid {
 public:
  CoefficientGrid(const Coefficients& coeffs, double dt, std::size_t nsteps);

  double dt() const { return dt_; }
  std::size_t nsteps() const { return nsteps_; }
  Index dim() const { return dim_; }
  std::size_t nchannels() const { return nchannels_; }

  const ComplexMatrix& k(std::size_t n) const { return k_[slot(n)]; }
  const ComplexMatrix& r(std::size_t n, std::size_t j) const {
    return r_[slot(n) * nchannels_ + j];
  }
  /// -(i/2)(K + K^*) - (1/2) sum_j R_j^* R_j
  const ComplexMatrix& g(std::size_t n) const { return g_[slot(n)]; }

 private:
  std::size_t slot(std::size_t n) const { return constant_ ? 0 : n; }

  double dt_;
  std::size_t nsteps_;
  Index dim_;
  std::size_t nchannels_;
  bool constant_;
  std::vector<ComplexMatrix> k_;
  std::vector<ComplexMatrix> r_;
  std::vector<ComplexMatrix> g_;
};

struct TrajectoryOptions {
  std::size_t record_stride = 1;  // the final step is always recorded
  double weight_floor = 1e-12;    // relative to the initial weight
};

struct TrajectoryRecord {
  double dt = 0.0;
  std::vector<double> times;
  std::vector<std::size_t> steps;  // grid index of each sample
  std::vector<ComplexVector> psi;
  std::vector<double> weight;
  std::vector<std::vector<Complex>> mhat;
  std::vector<std::vector<double>> w_path;
  std::vector<std::vector<double>> drift;  // 2 sum_{m<n} Re mhat_k(t_m) dt
  std::vector<std::vector<double>> what_path;
  std::uint64_t seed = 0;
  bool degenerate = false;  // weight fell below the floor; state frozen
  std::size_t degenerate_step = 0;

  std::size_t size() const { return times.size(); }
};

struct NormalizedRecord {
  double dt = 0.0;
  std::vector<double> times;
  std::vector<std::size_t> steps;
  std::vector<ComplexVector> psihat;
  std::vector<std::vector<Complex>> mhat;
  std::vector<std::vector<double>> what_path;    // driving noise
  std::vector<std::vector<double>> output_path;  // What + 2 int Re mhat
  std::uint64_t seed = 0;

  std::size_t size() const { return times.size(); }
};

TrajectoryRecord integrate_linear(const CoefficientGrid& grid, const ComplexVector& psi0,
                                  const WienerPath& path, const TrajectoryOptions& opts = {});
TrajectoryRecord integrate_linear(const Coefficients& coeffs, const ComplexVector& psi0,
                                  const WienerPath& path, const TrajectoryOptions& opts = {});

/// Recomputes what_path = w_path - drift.
void girsanov_output(TrajectoryRecord& record);

/// `path` is interpreted as What.
NormalizedRecord integrate_nonlinear(const CoefficientGrid& grid, const ComplexVector& psihat0,
                                     const WienerPath& path,
                                     const TrajectoryOptions& opts = {});
NormalizedRecord integrate_nonlinear(const Coefficients& coeffs, const ComplexVector& psihat0,
                                     const WienerPath& path,
                                     const TrajectoryOptions& opts = {});

/// psi / ||psi|| at each sample, without the stochastic phase factor.
NormalizedRecord normalize_posterior(const TrajectoryRecord& record);

/// What increments of a linear trajectory integrated with record_stride 1.
WienerPath shifted_path(const TrajectoryRecord& record, const WienerPath& path);

/// <psi|R psi> / ||psi||^2
Complex normalized_expectation(const ComplexMatrix& r, const ComplexVector& psi);

/// Pure state, or a density matrix sampled per trajectory through its
/// eigendecomposition (eigenvector k with probability p_k).
struct InitialState {
  std::optional<ComplexVector> pure;
  std::optional<ComplexMatrix> mixed;

  static InitialState from_vector(ComplexVector psi);
  static InitialState from_density(ComplexMatrix rho);

  Index dim() const;
  ComplexVector sample(std::uint64_t seed) const;
  ComplexMatrix density() const;
};

struct EnsembleSpec {
  std::size_t trajectories = 0;
  double dt = 0.0;          // integration step
  std::size_t nsteps = 0;   // steps of size dt
  std::uint64_t base_seed = 0;
  std::size_t record_stride = 1;
  std::size_t refinement = 1;  // noise drawn on dt / refinement, then summed
  double weight_floor = 1e-12;
  std::size_t workers = 0;     // 0: worker_count()
};

/// Noise of trajectory i, drawn on the finest grid of the spec and coarsened
/// to dt. Specs with equal dt/refinement and seed share Brownian paths.
WienerPath ensemble_path(const EnsembleSpec& spec, std::size_t nchannels, std::size_t index);

std::vector<TrajectoryRecord> run_linear_ensemble(const Coefficients& coeffs,
                                                  const InitialState& init,
                                                  const EnsembleSpec& spec);
std::vector<NormalizedRecord> run_nonlinear_ensemble(const Coefficients& coeffs,
                                                     const InitialState& init,
                                                     const EnsembleSpec& spec);

}  // namespace qsde
