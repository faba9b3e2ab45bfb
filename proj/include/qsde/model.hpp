#pragma once

// Physical model data (H, L_j, drive, detection, rotating frame) and the
// time-dependent SDE coefficients K(t), R_j(t) built from it:
//
//   K(t)   = e^{iH0 t} { Kt - H0 + i sum_j [conj(f_j(t)) L_j - f_j(t) L_j^*] } e^{-iH0 t}
//   R_j(t) = sum_i conj(V_ij(t)) e^{iH0 t} L_i e^{-iH0 t}
//
// with Kt = H - (i/2) sum_j L_j^* L_j and f_j(t) = lambda_j e^{-i w0 t}.

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsde/linalg.hpp"

namespace qsde {

/// Invalid model or configuration data. what() joins every message.
class ModelError : public std::invalid_argument {
 public:
  explicit ModelError(std::vector<std::string> messages);
  const std::vector<std::string>& messages() const { return messages_; }

 private:
  std::vector<std::string> messages_;
};

/// f_j(t) = amplitudes[j] * exp(-i carrier t).
struct DriveSpec {
  std::vector<Complex> amplitudes;
  double carrier = 0.0;

  Complex at(std::size_t channel, double t) const;
};

/// Detection unitary family V(t) mixing the output channels.
///
/// Entry (i, j) of `unitary` is V_ij = <e_j | V e_i>, so that
/// R_j = sum_i conj(V_ij) L_i.
struct DetectionSpec {
  enum class Kind { DiagonalPhase, ConstantUnitary };

  Kind kind = Kind::DiagonalPhase;
  double nu = 0.0;        // V_ij(s) = exp(-i nu s) delta_ij
  ComplexMatrix unitary;  // used for ConstantUnitary

  static DetectionSpec diagonal_phase(double nu);
  static DetectionSpec constant_unitary(ComplexMatrix v);
};

struct SystemModel {
  ComplexMatrix hamiltonian;
  std::vector<ComplexMatrix> channels;
  DriveSpec drive;
  DetectionSpec detection;
  ComplexMatrix frame;  // H0

  Index dim() const { return hamiltonian.rows(); }
  std::size_t nchannels() const { return channels.size(); }

  /// Every violated invariant; empty when the model is usable.
  std::vector<std::string> validation_errors() const;
  void validate() const;
};

/// H - (i/2) sum_j L_j^* L_j.
ComplexMatrix build_ktilde(const SystemModel& model);

struct CoefficientSample {
  ComplexMatrix k;
  std::vector<ComplexMatrix> r;
};

/// Immutable evaluator t -> (K(t), R_j(t)). Cheap to copy; safe to share
/// between threads.
class Coefficients {
 public:
  explicit Coefficients(const SystemModel& model);

  /// Time-independent coefficients given directly (no model behind them).
  static Coefficients constant(ComplexMatrix k, std::vector<ComplexMatrix> r);

  Index dim() const;
  std::size_t nchannels() const;

  /// True only for coefficients built with constant().
  bool is_constant() const;

  CoefficientSample at(double t) const;
  void evaluate(double t, CoefficientSample& out) const;

  /// Null for coefficients built with constant().
  const SystemModel* model() const;

 private:
  struct Impl;
  explicit Coefficients(std::shared_ptr<const Impl> impl);
  std::shared_ptr<const Impl> impl_;
};

Coefficients build_coefficients(const SystemModel& model);

struct A4Report {
  std::vector<double> times;
  std::vector<double> residuals;
  double tolerance = 0.0;
  double max_residual = 0.0;
  bool passed = false;
};

/// Max-entry residual of -i(K^* - K) - sum_j R_j^* R_j at each time.
A4Report verify_A4(const Coefficients& coeffs, const std::vector<double>& times,
                   double tol);

struct NormBoundsReport {
  double horizon = 0.0;
  std::size_t samples = 0;
  double sup_dissipation_norm = 0.0;  // sup_t || sum_j R_j^* R_j ||
  double sup_k_norm = 0.0;            // sup_t || K(t) ||
  double min_dissipation_norm = 0.0;  // inf over the same grid
};

NormBoundsReport operator_norm_bounds(const Coefficients& coeffs, double horizon,
                                      std::size_t samples = 101);

}  // namespace qsde
