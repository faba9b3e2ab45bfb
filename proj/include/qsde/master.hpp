#pragma once

// Lindblad generators built from the SDE coefficients.
//
//   Heisenberg:   L[a]    = (i/2)[K + K^*, a] + sum_j (R_j^* a R_j - 1/2 {R_j^* R_j, a})
//   Schrodinger:  L_*[rho] = -(i/2)[K + K^*, rho] + sum_j (R_j rho R_j^* - 1/2 {R_j^* R_j, rho})
//
// The two are trace dual: Tr{L_*[rho] a} = Tr{rho L[a]}.

#include <optional>
#include <vector>

#include "qsde/linalg.hpp"
#include "qsde/model.hpp"
#include "qsde/trajectories.hpp"

namespace qsde {

Superoperator heisenberg_generator(const CoefficientSample& s, Index d);
Superoperator schrodinger_generator(const CoefficientSample& s, Index d);

Superoperator build_heisenberg_generator(const Coefficients& coeffs, double t);
Superoperator build_schrodinger_generator(const Coefficients& coeffs, double t);

/// L_*[rho] evaluated directly from the coefficients.
ComplexMatrix apply_schrodinger(const CoefficientSample& s, const ComplexMatrix& rho);

class LindbladPropagator {
 public:
  explicit LindbladPropagator(Coefficients coeffs);

  const Coefficients& coefficients() const { return coeffs_; }
  Index dim() const { return coeffs_.dim(); }

  /// L(t)_* as a d^2 x d^2 matrix.
  Superoperator generator_at(double t) const;

  /// Whether L(t)_* was found constant in t (sampled at fixed probe times).
  bool time_independent() const { return static_.has_value(); }

  /// The constant generator; throws unless time_independent().
  const Superoperator& constant_generator() const;

  ComplexMatrix apply(double t, const ComplexMatrix& rho) const;

 private:
  Coefficients coeffs_;
  std::optional<Superoperator> static_;
};

struct MasterSolution {
  ComplexMatrix rho;
  double min_eigenvalue = 0.0;
  bool positive = true;  // min eigenvalue >= -1e-6
};

/// RK4 from t0 to t1 with steps no longer than dt; the result is
/// re-symmetrized and trace-renormalized once at the end.
MasterSolution propagate_master(const LindbladPropagator& gen, const ComplexMatrix& rho0,
                                double t0, double t1, double dt);

/// Raw RK4 states on t_n = t0 + n dt, n = 0..nsteps (no renormalization).
std::vector<ComplexMatrix> propagate_master_series(const LindbladPropagator& gen,
                                                   const ComplexMatrix& rho0, double t0,
                                                   double dt, std::size_t nsteps);

/// U(t, s). Constant generators use one matrix exponential; otherwise a
/// time-ordered product of midpoint exponentials over sub-steps <= dt.
Superoperator evolution_operator(const LindbladPropagator& gen, double s, double t,
                                 double dt = 1e-2);

struct StationaryResult {
  ComplexMatrix rho;
  std::size_t null_dimension = 0;
  double residual = 0.0;
  bool unique = false;
};

/// Null space of L_* (SVD) plus a trace-constrained least-squares solve.
/// A degenerate null space is reported through `unique`, not thrown.
StationaryResult stationary_state(const LindbladPropagator& gen);

struct DensityEstimate {
  std::vector<double> times;
  std::vector<ComplexMatrix> mean;
  std::vector<Eigen::MatrixXd> stderr_entries;  // per-entry standard error
  std::size_t samples = 0;

  /// Root-sum-square of the entry standard errors at sample n.
  double sigma(std::size_t n) const;
};

/// P-form: mean of |psi><psi| over linear records (weights inside psi).
DensityEstimate apriori_from_linear(const std::vector<TrajectoryRecord>& records);

/// P-hat form: mean of |psihat><psihat| over normalized records.
DensityEstimate apriori_from_nonlinear(const std::vector<NormalizedRecord>& records);

}  // namespace qsde
