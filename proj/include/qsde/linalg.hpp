#pragma once

// Dense complex linear algebra for small Hilbert spaces plus the
// superoperator layer used by the master-equation code.
//
// Vectorization is column stacking: vec(m)[i + j*d] = m(i, j), so that
// vec(A X B) = (B^T kron A) vec(X).

#include <complex>
#include <cstddef>

#include <Eigen/Dense>

namespace qsde {

using Complex = std::complex<double>;
using Index = Eigen::Index;

using ComplexMatrix =
    Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ComplexVector = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;

inline constexpr Complex kI{0.0, 1.0};

/// Matrix of a linear map on d x d matrices, acting on vectorized operands.
struct Superoperator {
  Index dim = 0;
  ComplexMatrix matrix;

  Superoperator() = default;
  Superoperator(Index d, ComplexMatrix m);

  static Superoperator identity(Index d);
  static Superoperator zero(Index d);

  ComplexMatrix apply(const ComplexMatrix& rho) const;
  ComplexVector apply(const ComplexVector& vec_rho) const;

  Superoperator operator*(const Superoperator& rhs) const;
};

ComplexMatrix identity(Index d);
ComplexMatrix zero(Index rows, Index cols);
inline ComplexMatrix zero(Index d) { return zero(d, d); }

ComplexMatrix adjoint(const ComplexMatrix& m);

/// ab - ba. Throws std::invalid_argument unless both are square of equal size.
ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b);
ComplexMatrix anticommutator(const ComplexMatrix& a, const ComplexMatrix& b);

/// exp(t * m) by scaling and squaring with a degree-13 Pade kernel.
ComplexMatrix matrix_exp(const ComplexMatrix& m, double t);

ComplexVector vectorize(const ComplexMatrix& m);
ComplexMatrix devectorize(const ComplexVector& v, Index d);

/// Superoperator of X -> A X B.
Superoperator sandwich(const ComplexMatrix& a, const ComplexMatrix& b);

bool is_hermitian(const ComplexMatrix& m, double tol);
bool is_finite(const ComplexMatrix& m);

/// Largest absolute entry.
double max_abs(const ComplexMatrix& m);

double spectral_norm(const ComplexMatrix& m);
double trace_norm(const ComplexMatrix& m);

/// 0.5 * || a - b ||_1.
double trace_distance(const ComplexMatrix& a, const ComplexMatrix& b);

/// Smallest eigenvalue of the Hermitian part of m.
double min_eigenvalue(const ComplexMatrix& m);

/// Kronecker product a kron b.
ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);

}  // namespace qsde
