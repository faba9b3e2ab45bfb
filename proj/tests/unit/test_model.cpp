#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "models.hpp"
#include "qsde/model.hpp"

using namespace qsde;
using namespace testing;

namespace {

// Hand-derived coefficients of the driven two-level atom in the frame
// omega0 * diag(1, 0).
void mollow_closed_form(double omega, double omega0, double nu,
                        const std::vector<Complex>& alpha, const std::vector<Complex>& lambda,
                        double t, ComplexMatrix& k, std::vector<ComplexMatrix>& r) {
  const ComplexMatrix sm = sigma_minus();
  const ComplexMatrix sp = sigma_plus();
  double gamma = 0.0;
  Complex drive{};
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    gamma += std::norm(alpha[j]);
    drive += std::conj(lambda[j]) * alpha[j];
  }
  k = (omega - omega0) * diag2(1.0, 0.0) - 0.5 * kI * gamma * (sp * sm) +
      kI * (drive * sm - std::conj(drive) * sp);
  r.clear();
  for (const auto& a : alpha) r.push_back(std::exp(kI * ((nu - omega0) * t)) * a * sm);
}

}  // namespace

TEST_CASE("build_ktilde") {
  const ComplexMatrix h = diag2(2.0, -1.0);
  CHECK(build_ktilde(plain_model(h, {zero(2), zero(2)})) == h);

  const ComplexMatrix k1 = build_ktilde(plain_model(zero(2), {sigma_minus()}));
  CHECK(max_abs(k1 - (-0.5 * kI) * diag2(1.0, 0.0)) == 0.0);

  const Complex a0(0.3, 0.4), a1(-1.2, 0.0);
  const ComplexMatrix k2 = build_ktilde(plain_model(h, {a0 * sigma_minus(), a1 * sigma_minus()}));
  const ComplexMatrix expect =
      h - 0.5 * kI * (std::norm(a0) + std::norm(a1)) * (sigma_plus() * sigma_minus());
  CHECK(max_abs(k2 - expect) < 1e-15);
}

TEST_CASE("undressed coefficients are exactly K-tilde and L") {
  std::mt19937_64 rng(11);
  const SystemModel m = plain_model(random_hermitian(rng, 3),
                                    {random_matrix(rng, 3), random_matrix(rng, 3)});
  const Coefficients c(m);
  const ComplexMatrix kt = build_ktilde(m);
  for (double t : {0.0, 0.5, 7.25}) {
    const auto s = c.at(t);
    CHECK(s.k == kt);
    CHECK(s.r[0] == m.channels[0]);
    CHECK(s.r[1] == m.channels[1]);
  }
  SystemModel mi = m;
  mi.detection = DetectionSpec::constant_unitary(identity(2));
  const auto s = Coefficients(mi).at(1.5);
  CHECK(s.r[0] == m.channels[0]);
  CHECK(s.r[1] == m.channels[1]);
}

TEST_CASE("constant unitary detection mixes channels with conj(V_ij)") {
  std::mt19937_64 rng(12);
  SystemModel m = plain_model(zero(2), {random_matrix(rng, 2), random_matrix(rng, 2)});
  const ComplexMatrix v = random_unitary(rng, 2);
  m.detection = DetectionSpec::constant_unitary(v);
  const auto s = Coefficients(m).at(0.3);
  for (Index j = 0; j < 2; ++j) {
    const ComplexMatrix expect =
        std::conj(v(0, j)) * m.channels[0] + std::conj(v(1, j)) * m.channels[1];
    CHECK(max_abs(s.r[static_cast<std::size_t>(j)] - expect) < 1e-14);
  }
}

TEST_CASE("driven two-level atom matches the hand-derived coefficients") {
  const std::vector<Complex> alpha{Complex(0.6, 0.2), Complex(-0.3, 0.7)};
  const std::vector<Complex> lambda{0.0, Complex(1.5, -0.5)};
  const double omega = 10.3, omega0 = 9.8, nu = 7.1;
  const Coefficients c(mollow_like(omega, omega0, nu, alpha, lambda));
  for (double t : {0.0, 0.37, 1.9}) {
    ComplexMatrix k;
    std::vector<ComplexMatrix> r;
    mollow_closed_form(omega, omega0, nu, alpha, lambda, t, k, r);
    const auto s = c.at(t);
    CHECK(max_abs(s.k - k) < 1e-13);
    for (std::size_t j = 0; j < alpha.size(); ++j) CHECK(max_abs(s.r[j] - r[j]) < 1e-13);
  }

  const Coefficients res(mollow_like(10.0, 10.0, 10.0, alpha, lambda));
  const auto s0 = res.at(0.0);
  for (double t : {0.37, 1.9, 25.0}) {
    const auto s = res.at(t);
    CHECK(max_abs(s.k - s0.k) < 1e-12);
    for (std::size_t j = 0; j < alpha.size(); ++j) CHECK(max_abs(s.r[j] - s0.r[j]) < 1e-12);
  }
}

TEST_CASE("verify_A4 on hand-built coefficients") {
  const auto fail = verify_A4(Coefficients::constant(zero(2), {sigma_minus()}), {0.0, 1.0}, 1e-12);
  CHECK_FALSE(fail.passed);
  CHECK(fail.max_residual == doctest::Approx(1.0));
  CHECK(fail.residuals.size() == 2);

  const auto pass = verify_A4(
      Coefficients::constant(-0.5 * kI * (sigma_plus() * sigma_minus()), {sigma_minus()}),
      {0.0, 2.0}, 1e-12);
  CHECK(pass.passed);
  CHECK(pass.max_residual == 0.0);
}

TEST_CASE("random models satisfy the dissipation identity") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> times(0.0, 20.0);
  for (int k = 0; k < 10; ++k) {
    const Index d = 2 + k % 3;
    const Coefficients c(random_model(rng, d, 1 + static_cast<std::size_t>(k % 3)));
    std::vector<double> ts;
    for (int i = 0; i < 10; ++i) ts.push_back(times(rng));
    const auto report = verify_A4(c, ts, 1e-11);
    CHECK(report.passed);

    const auto bounds = operator_norm_bounds(c, 20.0, 51);
    CHECK(bounds.sup_dissipation_norm - bounds.min_dissipation_norm <= 1e-10);
    CHECK(std::isfinite(bounds.sup_k_norm));
  }
}

TEST_CASE("operator_norm_bounds") {
  const std::vector<Complex> alpha{Complex(0.6, 0.2), Complex(-0.3, 0.7)};
  const Coefficients c(mollow_like(10.0, 9.0, 11.0, alpha, {0.0, 2.0}));
  const auto b = operator_norm_bounds(c, 5.0);
  const double gamma = std::norm(alpha[0]) + std::norm(alpha[1]);
  CHECK(b.sup_dissipation_norm == doctest::Approx(gamma).epsilon(1e-12));
  CHECK(b.min_dissipation_norm == doctest::Approx(gamma).epsilon(1e-12));

  const auto zero_model = operator_norm_bounds(Coefficients(plain_model(zero(2), {zero(2)})), 1.0);
  CHECK(zero_model.sup_dissipation_norm == 0.0);
  CHECK(zero_model.sup_k_norm == 0.0);

  const auto decay = operator_norm_bounds(Coefficients(plain_model(zero(2), {sigma_minus(), zero(2)})), 1.0);
  CHECK(decay.sup_k_norm == doctest::Approx(0.5));
  CHECK_THROWS_AS(operator_norm_bounds(c, 0.0), std::invalid_argument);
}

TEST_CASE("model validation collects every error") {
  SystemModel m = plain_model(sigma_minus(), {identity(2), zero(3)});
  m.drive.amplitudes = {1.0};
  m.frame = zero(3);
  try {
    m.validate();
    FAIL("expected ModelError");
  } catch (const ModelError& e) {
    CHECK(e.messages().size() == 4);
  }

  SystemModel v = plain_model(zero(2), {sigma_minus(), sigma_minus()});
  ComplexMatrix bad = identity(2);
  bad(0, 1) = 0.5;
  v.detection = DetectionSpec::constant_unitary(bad);
  CHECK_THROWS_AS(Coefficients{v}, ModelError);

  CHECK_THROWS_AS(Coefficients::constant(zero(2, 3), {}), std::invalid_argument);
}
