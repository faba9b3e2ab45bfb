#pragma once

#include <cmath>
#include <random>

#include "qsde/linalg.hpp"

namespace testing {

using qsde::Complex;
using qsde::ComplexMatrix;
using qsde::ComplexVector;
using qsde::Index;

// Basis order (excited, ground).
inline ComplexMatrix sigma_minus() {
  ComplexMatrix m = qsde::zero(2);
  m(1, 0) = 1.0;
  return m;
}

inline ComplexMatrix sigma_plus() { return sigma_minus().adjoint(); }

inline ComplexMatrix diag2(Complex a, Complex b) {
  ComplexMatrix m = qsde::zero(2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

inline ComplexMatrix random_rect(std::mt19937_64& rng, Index rows, Index cols,
                                 double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  ComplexMatrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = Complex(g(rng), g(rng));
  return m;
}

inline ComplexMatrix random_matrix(std::mt19937_64& rng, Index d, double scale = 1.0) {
  return random_rect(rng, d, d, scale);
}

inline ComplexMatrix random_hermitian(std::mt19937_64& rng, Index d, double scale = 1.0) {
  const ComplexMatrix m = random_matrix(rng, d, scale);
  return 0.5 * (m + m.adjoint());
}

inline ComplexMatrix random_density(std::mt19937_64& rng, Index d) {
  const ComplexMatrix m = random_matrix(rng, d);
  ComplexMatrix rho = m * m.adjoint();
  return rho / rho.trace().real();
}

inline ComplexVector random_unit(std::mt19937_64& rng, Index d) {
  std::normal_distribution<double> g;
  ComplexVector v(d);
  for (Index i = 0; i < d; ++i) v(i) = Complex(g(rng), g(rng));
  return v / v.norm();
}

inline ComplexVector basis(Index d, Index k) {
  ComplexVector v = ComplexVector::Zero(d);
  v(k) = 1.0;
  return v;
}

}  // namespace testing
