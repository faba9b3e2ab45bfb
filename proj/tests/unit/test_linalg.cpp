#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "qsde/linalg.hpp"

using namespace qsde;
using namespace testing;

namespace {

// Plain Taylor series with many terms; only used for small-norm inputs.
ComplexMatrix taylor_exp(const ComplexMatrix& m) {
  ComplexMatrix term = identity(m.rows());
  ComplexMatrix sum = term;
  for (int k = 1; k < 60; ++k) {
    term = term * m / static_cast<double>(k);
    sum += term;
  }
  return sum;
}

}  // namespace

TEST_CASE("adjoint") {
  CHECK(adjoint(identity(2)) == identity(2));
  CHECK(adjoint(sigma_minus()) == sigma_plus());
  CHECK(adjoint(diag2(Complex(0, 1), 0.0)) == diag2(Complex(0, -1), 0.0));

  std::mt19937_64 rng(1);
  const ComplexMatrix m = random_rect(rng, 3, 5);
  CHECK(adjoint(adjoint(m)) == m);
  CHECK(adjoint(m).rows() == 5);
}

TEST_CASE("commutator") {
  const ComplexMatrix pp = sigma_plus() * sigma_minus();
  CHECK(commutator(pp, pp) == zero(2));
  CHECK(commutator(sigma_minus(), sigma_plus()) == diag2(-1.0, 1.0));

  std::mt19937_64 rng(2);
  const ComplexMatrix b = random_matrix(rng, 4);
  CHECK(max_abs(commutator(identity(4), b)) == 0.0);

  for (int k = 0; k < 10; ++k) {
    const ComplexMatrix x = random_matrix(rng, 5);
    const ComplexMatrix y = random_matrix(rng, 5);
    CHECK(std::abs(commutator(x, y).trace()) <= 1e-12);
  }

  CHECK_THROWS_AS(commutator(identity(2), identity(3)), std::invalid_argument);
  CHECK_THROWS_AS(commutator(zero(2, 3), zero(2, 3)), std::invalid_argument);
  CHECK(anticommutator(sigma_minus(), sigma_plus()) == identity(2));
}

TEST_CASE("matrix_exp closed forms") {
  std::mt19937_64 rng(3);
  const ComplexMatrix m = random_matrix(rng, 3);
  CHECK(matrix_exp(m, 0.0) == identity(3));

  const double a = 0.7, b = -2.3, t = 1.9;
  const ComplexMatrix e = matrix_exp(diag2(Complex(0, a), Complex(0, b)), t);
  CHECK(std::abs(e(0, 0) - std::exp(Complex(0, a * t))) < 1e-14);
  CHECK(std::abs(e(1, 1) - std::exp(Complex(0, b * t))) < 1e-14);
  CHECK(std::abs(e(0, 1)) < 1e-15);

  ComplexMatrix gen = zero(2);
  gen(0, 1) = 1.0;
  gen(1, 0) = -1.0;
  const ComplexMatrix rot = matrix_exp(gen, 1.0);
  CHECK(std::abs(rot(0, 0) - std::cos(1.0)) < 1e-14);
  CHECK(std::abs(rot(0, 1) - std::sin(1.0)) < 1e-14);
  CHECK(std::abs(rot(1, 0) + std::sin(1.0)) < 1e-14);
  CHECK(std::abs(rot(1, 1) - std::cos(1.0)) < 1e-14);
}

TEST_CASE("matrix_exp against Taylor series and self-consistency") {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 20; ++k) {
    const ComplexMatrix m = random_matrix(rng, 4, 0.3);
    const ComplexMatrix ref = taylor_exp(m);
    CHECK(max_abs(matrix_exp(m, 1.0) - ref) <= 1e-12 * max_abs(ref));
  }
  for (int k = 0; k < 20; ++k) {
    ComplexMatrix m = random_matrix(rng, 5);
    m *= 5.0 / m.eigenvalues().cwiseAbs().maxCoeff();
    const ComplexMatrix full = matrix_exp(m, 1.3);
    const ComplexMatrix half = matrix_exp(m, 0.65);
    CHECK(max_abs(full - half * half) <= 1e-10 * max_abs(full));
    CHECK(max_abs(matrix_exp(m, 1.0) * matrix_exp(m, -1.0) - identity(5)) <= 1e-9);
  }
  ComplexMatrix bad = identity(2);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(matrix_exp(bad, 1.0), std::invalid_argument);
}

TEST_CASE("vectorization") {
  const ComplexVector v = vectorize(identity(2));
  CHECK(v.size() == 4);
  CHECK(v(0) == 1.0);
  CHECK(v(1) == 0.0);
  CHECK(v(2) == 0.0);
  CHECK(v(3) == 1.0);
  CHECK(vectorize(zero(2)) == ComplexVector::Zero(4));

  ComplexMatrix m = zero(2);
  m(1, 0) = 5.0;  // column 0, row 1
  CHECK(vectorize(m)(1) == 5.0);

  std::mt19937_64 rng(5);
  const ComplexMatrix a = random_matrix(rng, 3);
  const ComplexMatrix b = random_matrix(rng, 3);
  CHECK(devectorize(vectorize(a), 3) == a);
  const Complex alpha(0.25, -2.0);
  CHECK(vectorize(alpha * a + b) == alpha * vectorize(a) + vectorize(b));

  CHECK_THROWS_AS(devectorize(ComplexVector::Zero(5), 2), std::invalid_argument);
  CHECK_THROWS_AS(vectorize(zero(2, 3)), std::invalid_argument);
}

TEST_CASE("sandwich superoperator realizes A X B") {
  std::mt19937_64 rng(6);
  const ComplexMatrix a = random_matrix(rng, 3);
  const ComplexMatrix b = random_matrix(rng, 3);
  const ComplexMatrix x = random_matrix(rng, 3);
  const Superoperator s = sandwich(a, b);
  CHECK(max_abs(s.apply(x) - a * x * b) < 1e-13);
  const Superoperator s2 = sandwich(b, a) * s;
  CHECK(max_abs(s2.apply(x) - b * a * x * b * a) < 1e-12);
  CHECK(Superoperator::identity(3).apply(x) == x);
  CHECK_THROWS_AS(Superoperator(2, zero(3)), std::invalid_argument);
}

TEST_CASE("is_hermitian") {
  CHECK(is_hermitian(diag2(3.5, 0.0), 1e-12));
  CHECK_FALSE(is_hermitian(sigma_minus(), 1e-12));
  std::mt19937_64 rng(7);
  const ComplexMatrix m = random_matrix(rng, 4);
  CHECK(is_hermitian(m + adjoint(m), 1e-12));
  CHECK_FALSE(is_hermitian(zero(2, 3), 1.0));
}

TEST_CASE("norms") {
  CHECK(trace_distance(diag2(1.0, 0.0), diag2(0.0, 1.0)) == doctest::Approx(1.0));
  CHECK(spectral_norm(diag2(-3.0, 2.0)) == doctest::Approx(3.0));
  CHECK(trace_norm(diag2(-3.0, 2.0)) == doctest::Approx(5.0));
  CHECK(min_eigenvalue(diag2(-0.5, 2.0)) == doctest::Approx(-0.5));
  CHECK(is_finite(identity(2)));
}
