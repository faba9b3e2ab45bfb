#include "qsde/linalg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace qsde {

namespace {

void require_square(const ComplexMatrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument(std::string(what) + ": matrix is not square (" +
                                std::to_string(m.rows()) + "x" +
                                std::to_string(m.cols()) + ")");
  }
}

void require_same_square(const ComplexMatrix& a, const ComplexMatrix& b,
                         const char* what) {
  require_square(a, what);
  require_square(b, what);
  if (a.rows() != b.rows()) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                std::to_string(a.rows()) + " vs " +
                                std::to_string(b.rows()) + ")");
  }
}

double one_norm(const ComplexMatrix& m) {
  double best = 0.0;
  for (Index j = 0; j < m.cols(); ++j) {
    best = std::max(best, m.col(j).cwiseAbs().sum());
  }
  return best;
}

}  // namespace

Superoperator::Superoperator(Index d, ComplexMatrix m) : dim(d), matrix(std::move(m)) {
  if (matrix.rows() != d * d || matrix.cols() != d * d) {
    throw std::invalid_argument("Superoperator: matrix must be d^2 x d^2");
  }
}

Superoperator Superoperator::identity(Index d) {
  return Superoperator(d, qsde::identity(d * d));
}

Superoperator Superoperator::zero(Index d) {
  return Superoperator(d, qsde::zero(d * d));
}

ComplexMatrix Superoperator::apply(const ComplexMatrix& rho) const {
  return devectorize(apply(vectorize(rho)), dim);
}

ComplexVector Superoperator::apply(const ComplexVector& vec_rho) const {
  if (vec_rho.size() != dim * dim) {
    throw std::invalid_argument("Superoperator::apply: operand dimension mismatch");
  }
  return matrix * vec_rho;
}

Superoperator Superoperator::operator*(const Superoperator& rhs) const {
  if (rhs.dim != dim) {
    throw std::invalid_argument("Superoperator composition: dimension mismatch");
  }
  return Superoperator(dim, matrix * rhs.matrix);
}

ComplexMatrix identity(Index d) { return ComplexMatrix::Identity(d, d); }

ComplexMatrix zero(Index rows, Index cols) { return ComplexMatrix::Zero(rows, cols); }

ComplexMatrix adjoint(const ComplexMatrix& m) { return m.adjoint(); }

ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b) {
  require_same_square(a, b, "commutator");
  return a * b - b * a;
}

ComplexMatrix anticommutator(const ComplexMatrix& a, const ComplexMatrix& b) {
  require_same_square(a, b, "anticommutator");
  return a * b + b * a;
}

ComplexMatrix matrix_exp(const ComplexMatrix& m, double t) {
  require_square(m, "matrix_exp");
  if (!is_finite(m) || !std::isfinite(t)) {
    throw std::invalid_argument("matrix_exp: non-finite input");
  }
  const Index d = m.rows();
  ComplexMatrix a = t * m;
  const double norm = one_norm(a);
  if (norm == 0.0) return identity(d);

  // Higham (2005) degree-13 coefficients; theta_13 bounds the scaled 1-norm.
  static constexpr std::array<double, 14> b = {
      64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
      1187353796428800.0,  129060195264000.0,   10559470521600.0,
      670442572800.0,      33522128640.0,       1323241920.0,
      40840800.0,          960960.0,            16380.0,
      182.0,               1.0};
  constexpr double theta13 = 5.371920351148152;

  int squarings = 0;
  if (norm > theta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / theta13)));
    a /= std::ldexp(1.0, squarings);
  }

  const ComplexMatrix id = identity(d);
  const ComplexMatrix a2 = a * a;
  const ComplexMatrix a4 = a2 * a2;
  const ComplexMatrix a6 = a4 * a2;

  ComplexMatrix u_inner = b[13] * a6 + b[11] * a4 + b[9] * a2;
  ComplexMatrix u = a * (a6 * u_inner + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
  ComplexMatrix v_inner = b[12] * a6 + b[10] * a4 + b[8] * a2;
  ComplexMatrix v = a6 * v_inner + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;

  ComplexMatrix result = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < squarings; ++k) {
    result = (result * result).eval();
  }
  return result;
}

ComplexVector vectorize(const ComplexMatrix& m) {
  require_square(m, "vectorize");
  const Index d = m.rows();
  ComplexVector v(d * d);
  for (Index j = 0; j < d; ++j) {
    for (Index i = 0; i < d; ++i) v(i + j * d) = m(i, j);
  }
  return v;
}

ComplexMatrix devectorize(const ComplexVector& v, Index d) {
  if (d <= 0 || v.size() != d * d) {
    throw std::invalid_argument("devectorize: vector length " + std::to_string(v.size()) +
                                " is not " + std::to_string(d) + "^2");
  }
  ComplexMatrix m(d, d);
  for (Index j = 0; j < d; ++j) {
    for (Index i = 0; i < d; ++i) m(i, j) = v(i + j * d);
  }
  return m;
}

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Superoperator sandwich(const ComplexMatrix& a, const ComplexMatrix& b) {
  require_same_square(a, b, "sandwich");
  return Superoperator(a.rows(), kron(b.transpose(), a));
}

bool is_hermitian(const ComplexMatrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return max_abs(m - m.adjoint()) <= tol;
}

bool is_finite(const ComplexMatrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (!std::isfinite(m(i, j).real()) || !std::isfinite(m(i, j).imag())) return false;
    }
  }
  return true;
}

double max_abs(const ComplexMatrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

double spectral_norm(const ComplexMatrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  return svd.singularValues()(0);
}

double trace_norm(const ComplexMatrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  return svd.singularValues().sum();
}

double trace_distance(const ComplexMatrix& a, const ComplexMatrix& b) {
  return 0.5 * trace_norm(a - b);
}

double min_eigenvalue(const ComplexMatrix& m) {
  require_square(m, "min_eigenvalue");
  const Eigen::MatrixXcd herm = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace qsde
