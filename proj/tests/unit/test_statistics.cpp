#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "models.hpp"
#include "qsde/statistics.hpp"

using namespace qsde;
using namespace testing;

namespace {

// rho -> -i(K rho - rho K^*) + sum_j R_j rho R_j^*, built column by column.
ComplexMatrix hand_generator(const CoefficientSample& s) {
  const Index d = s.k.rows();
  ComplexMatrix m(d * d, d * d);
  for (Index b = 0; b < d; ++b) {
    for (Index a = 0; a < d; ++a) {
      ComplexMatrix e = zero(d);
      e(a, b) = 1.0;
      ComplexMatrix out = Complex(0.0, -1.0) * (s.k * e - e * s.k.adjoint());
      for (const auto& r : s.r) out += r * e * r.adjoint();
      m.col(b * d + a) = vectorize(out);
    }
  }
  return m;
}

double trapezoid_weight(std::size_t n, std::size_t last) {
  return (n == 0 || n == last) ? 0.5 : 1.0;
}

// Nested trapezoid sum written straight from the definition, for a constant
// generator with possibly time-dependent R. U(s1, s2) = exp(L (s1 - s2)).
double brute_second_moment(const Coefficients& c, const ComplexMatrix& rho0, std::size_t i,
                           std::size_t j, double t1, double t2, double h) {
  const Index d = c.dim();
  const ComplexMatrix l = hand_generator(c.at(0.0));
  auto rho_at = [&](double s) { return devectorize(matrix_exp(l, s) * vectorize(rho0), d); };
  auto a_term = [&](std::size_t ci, std::size_t cj, double ta, double tb) {
    const auto na = static_cast<std::size_t>(std::lround(ta / h));
    double outer = 0.0;
    for (std::size_t p = 0; p <= na; ++p) {
      const double s1 = static_cast<double>(p) * h;
      const double upper = std::min(tb, s1);
      const auto nb = static_cast<std::size_t>(std::lround(upper / h));
      const ComplexMatrix ri = c.at(s1).r[ci];
      double inner = 0.0;
      for (std::size_t q = 0; q <= nb; ++q) {
        const double s2 = static_cast<double>(q) * h;
        const ComplexMatrix rj = c.at(s2).r[cj];
        const ComplexMatrix rho = rho_at(s2);
        const ComplexMatrix x = rj * rho + rho * rj.adjoint();
        const ComplexMatrix ux = devectorize(matrix_exp(l, s1 - s2) * vectorize(x), d);
        inner += trapezoid_weight(q, nb) * ((ri + ri.adjoint()) * ux).trace().real();
      }
      outer += trapezoid_weight(p, na) * (nb == 0 ? 0.0 : inner * h);
    }
    return outer * h;
  };
  const double shot = i == j ? std::min(t1, t2) : 0.0;
  return shot + a_term(i, j, t1, t2) + a_term(j, i, t2, t1);
}

Coefficients pure_decay(double gamma) {
  return Coefficients::constant(-0.5 * kI * gamma * (sigma_plus() * sigma_minus()),
                                {std::sqrt(gamma) * sigma_minus()});
}

// E[W(t)^2] for spontaneous decay from the excited state.
double decay_second_moment(double gamma, double t) {
  const double e = 1.0 - std::exp(-0.5 * gamma * t);
  return t + 8.0 / gamma * e * e;
}

ComplexMatrix excited_density() { return diag2(1.0, 0.0); }

Coefficients random_constant(std::mt19937_64& rng, Index d, std::size_t nch) {
  std::vector<ComplexMatrix> rs;
  ComplexMatrix k = random_hermitian(rng, d);
  for (std::size_t j = 0; j < nch; ++j) {
    rs.push_back(random_matrix(rng, d, 0.6));
    k -= 0.5 * kI * rs.back().adjoint() * rs.back();
  }
  return Coefficients::constant(k, rs);
}

Coefficients mollow(double rabi, double nu, Complex driven_phase = 1.0) {
  const double a = 1.0 / std::sqrt(2.0);
  return Coefficients(
      mollow_like(10.0, 10.0, nu, {a, a * driven_phase}, {0.0, driven_phase * rabi / (2.0 * a)}));
}

}  // namespace

TEST_CASE("analytic mean output closed forms") {
  const ComplexMatrix sx = sigma_minus() + sigma_plus();
  const Coefficients anti = Coefficients::constant(-0.5 * kI * identity(2), {kI * sx});
  const LindbladPropagator ga(anti);
  CHECK(std::abs(analytic_mean_output(ga, excited_density(), 0, 1.3, 1e-2)) <= 1e-14);

  const Coefficients unit = Coefficients::constant(-0.5 * kI * identity(2), {identity(2)});
  const LindbladPropagator gu(unit);
  for (double t : {0.0, 0.25, 1.0, 2.7}) {
    CHECK(analytic_mean_output(gu, excited_density(), 0, t, 1e-2) ==
          doctest::Approx(2.0 * t).epsilon(1e-12));
  }
  const auto series = analytic_mean_series(gu, excited_density(), 0, 0.1, 10);
  REQUIRE(series.size() == 11);
  CHECK(series[7] == doctest::Approx(1.4).epsilon(1e-12));

  CHECK_THROWS_AS(analytic_mean_output(gu, excited_density(), 1, 1.0, 1e-2),
                  std::invalid_argument);
}

TEST_CASE("second moment without coupling is the Brownian covariance") {
  const Coefficients c = Coefficients::constant(diag2(1.0, -1.0), {zero(2), zero(2)});
  const LindbladPropagator g(c);
  std::mt19937_64 rng(61);
  const ComplexMatrix rho = random_density(rng, 2);
  CHECK(analytic_second_moment(g, rho, 0, 0, 0.6, 0.6, 0.05) == 0.6);
  CHECK(analytic_second_moment(g, rho, 1, 1, 0.3, 0.9, 0.05) == 0.3);
  CHECK(analytic_second_moment(g, rho, 0, 1, 0.9, 0.9, 0.05) == 0.0);
  CHECK(analytic_second_moment(g, rho, 0, 0, 0.0, 0.0, 0.05) == 0.0);
}

TEST_CASE("second moment of spontaneous decay") {
  const double gamma = 1.3;
  const LindbladPropagator g(pure_decay(gamma));
  for (double t : {0.5, 1.0, 3.0}) {
    CHECK(analytic_second_moment(g, excited_density(), 0, 0, t, t, 1e-3) ==
          doctest::Approx(decay_second_moment(gamma, t)).epsilon(1e-6));
  }
  CHECK(std::abs(analytic_mean_output(g, excited_density(), 0, 2.0, 1e-3)) <= 1e-14);
}

TEST_CASE("second moment recursion matches the nested trapezoid sum") {
  std::mt19937_64 rng(62);
  const Coefficients c = random_constant(rng, 2, 2);
  const LindbladPropagator g(c);
  const ComplexMatrix rho = random_density(rng, 2);
  const double h = 0.01;  // rho comes from RK4 here, exact in the oracle: O(h^4) gap
  for (auto [t1, t2] : {std::pair{0.6, 0.4}, std::pair{0.3, 0.6}, std::pair{0.5, 0.5}}) {
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t j = 0; j < 2; ++j) {
        const double fast = analytic_second_moment(g, rho, i, j, t1, t2, h);
        const double slow = brute_second_moment(c, rho, i, j, t1, t2, h);
        CHECK(fast == doctest::Approx(slow).epsilon(1e-8));
      }
    }
  }

  // Time-dependent R through the detection phase.
  const Coefficients m = mollow(3.0, 7.0);
  const LindbladPropagator gm(m);
  REQUIRE(gm.time_independent());
  const ComplexMatrix g0 = diag2(0.0, 1.0);
  CHECK(analytic_second_moment(gm, g0, 0, 0, 0.8, 0.8, h) ==
        doctest::Approx(brute_second_moment(m, g0, 0, 0, 0.8, 0.8, h)).epsilon(1e-8));
  CHECK(analytic_second_moment(gm, g0, 0, 1, 0.4, 0.8, h) ==
        doctest::Approx(brute_second_moment(m, g0, 0, 1, 0.4, 0.8, h)).epsilon(1e-8));
}

TEST_CASE("second moment symmetry and grid checks") {
  std::mt19937_64 rng(63);
  const Coefficients c(random_model(rng, 3, 2));
  const LindbladPropagator g(c);
  const ComplexMatrix rho = random_density(rng, 3);
  const double a = analytic_second_moment(g, rho, 0, 1, 0.7, 0.35, 0.01);
  const double b = analytic_second_moment(g, rho, 1, 0, 0.35, 0.7, 0.01);
  CHECK(a == doctest::Approx(b).epsilon(1e-9));
  CHECK_THROWS_AS(analytic_second_moment(g, rho, 0, 0, 0.7, 0.333, 0.01), std::invalid_argument);
  CHECK_THROWS_AS(analytic_second_moment(g, rho, 0, 2, 0.7, 0.7, 0.01), std::invalid_argument);
}

TEST_CASE("jackknife mean error equals the classical standard error") {
  std::mt19937_64 rng(64);
  std::normal_distribution<double> n01;
  std::vector<double> x(257);
  for (auto& v : x) v = 3.0 + 2.0 * n01(rng);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double se = std::sqrt(ss / static_cast<double>(x.size() - 1) / static_cast<double>(x.size()));
  const Estimate e = jackknife_mean(x);
  CHECK(e.value == doctest::Approx(mean).epsilon(1e-14));
  CHECK(e.stderr == doctest::Approx(se).epsilon(1e-10));
  CHECK(jackknife_mean(std::vector<double>{4.0}).stderr == 0.0);
  CHECK_THROWS_AS(jackknife_mean(std::vector<double>{}), std::invalid_argument);
  CHECK(halving_bias(1.0, 1.25) == 0.5);
}

TEST_CASE("Monte Carlo moments agree with the analytic values") {
  const double gamma = 1.0;
  const Coefficients c = pure_decay(gamma);
  EnsembleSpec spec;
  spec.trajectories = 4000;
  spec.dt = 1e-3;
  spec.nsteps = 1000;
  spec.base_seed = 8080;
  spec.record_stride = 250;
  const auto init = InitialState::from_vector(basis(2, 0));
  const LindbladPropagator g(c);

  MomentRequest req;
  req.dt = 1e-3;
  req.channel_pairs = {{0, 0}};
  req.time_pairs = {{1.0, 1.0}, {0.5, 1.0}};

  const auto lin = OutputEnsemble::from_linear(run_linear_ensemble(c, init, spec));
  const auto non = OutputEnsemble::from_nonlinear(run_nonlinear_ensemble(c, init, spec));
  CHECK(lin.samples() == 5);
  CHECK(lin.index_of(0.75) == 3);
  CHECK_THROWS_AS(lin.index_of(0.3), std::invalid_argument);

  for (const OutputEnsemble* ens : {&lin, &non}) {
    const MomentReport rep = mc_output_moments(g, excited_density(), *ens, req);
    REQUIRE(rep.means.size() == 5);
    for (const auto& row : rep.means) {
      CHECK(std::abs(row.mc - row.analytic) <= 4.0 * row.stderr + 1e-12);
    }
    REQUIRE(rep.correlations.size() == 2);
    CHECK(rep.correlations[0].analytic ==
          doctest::Approx(decay_second_moment(gamma, 1.0)).epsilon(1e-5));
    for (const auto& row : rep.correlations) {
      CHECK(std::abs(row.mc - row.analytic) <= 4.0 * row.stderr);
    }
  }
  const Estimate w = mc_mean_weight(lin, 4);
  CHECK(std::abs(w.value - 1.0) <= 4.0 * w.stderr);
}

TEST_CASE("spectrum of an uncoupled system is flat") {
  const auto factory = [](double) {
    return Coefficients::constant(diag2(1.0, -1.0), {zero(2), zero(2)});
  };
  SpectrumOptions opts;
  opts.horizon = 2.0;
  opts.dt = 0.05;
  opts.initial_state = diag2(0.5, 0.5);
  const SpectrumScan s = spectrum_scan(factory, {1.0, 2.0, 3.0}, opts);
  for (double v : s.s) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));

  opts.initial_state.reset();
  CHECK_THROWS_AS(spectrum_scan(factory, {1.0}, opts), std::invalid_argument);
  CHECK_THROWS_AS(spectrum_scan(factory, {}, opts), std::invalid_argument);
}

TEST_CASE("spectrum is unchanged by rephasing the driven channel") {
  SpectrumOptions opts;
  opts.horizon = 4.0 * std::numbers::pi;
  opts.dt = 0.02;
  const std::vector<double> nus{8.0, 10.0, 13.0};
  const auto a = spectrum_scan([](double nu) { return mollow(5.0, nu); }, nus, opts);
  const Complex phase = std::polar(1.0, 0.9);
  const auto b = spectrum_scan([&](double nu) { return mollow(5.0, nu, phase); }, nus, opts);
  for (std::size_t q = 0; q < nus.size(); ++q) {
    CHECK(a.s[q] == doctest::Approx(b.s[q]).epsilon(1e-8));
  }

  opts.variance_mode = true;
  const auto v = spectrum_scan([](double nu) { return mollow(5.0, nu); }, nus, opts);
  for (std::size_t q = 0; q < nus.size(); ++q) CHECK(v.s[q] <= a.s[q] + 1e-12);

  // Undriven atom relaxes to the ground state, which emits nothing.
  const auto dark = spectrum_scan([](double nu) { return mollow(0.0, nu); }, nus, opts);
  for (double s : dark.s) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("normal critical values") {
  CHECK(normal_critical_value(0.95) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_critical_value(0.99) == doctest::Approx(2.5758293035489).epsilon(1e-12));
  CHECK_THROWS_AS(normal_critical_value(1.0), std::invalid_argument);
}

TEST_CASE("Wiener-law tests") {
  EnsembleSpec spec;
  spec.trajectories = 600;
  spec.dt = 1e-3;
  spec.nsteps = 400;
  spec.base_seed = 31337;
  spec.record_stride = 4;
  const auto init = InitialState::from_vector(basis(2, 0));

  const Coefficients free = Coefficients::constant(diag2(1.0, 0.0), {zero(2), zero(2)});
  const WienerLawReport ok = wiener_law_tests(run_linear_ensemble(free, init, spec), 0.999);
  CHECK(ok.passed);
  CHECK(ok.tests.size() == 7);
  CHECK(ok.critical_z == doctest::Approx(normal_critical_value(1.0 - 0.001 / 7.0)));
  REQUIRE(ok.find("cross", 0) != nullptr);
  CHECK(ok.find("cross", 0)->other == 1);
  CHECK(ok.find("lag1", 2) == nullptr);

  // With R = I the raw noise carries a drift that only the reweighting removes.
  spec.nsteps = 200;
  spec.trajectories = 2000;
  const Coefficients unit = Coefficients::constant(-0.5 * kI * identity(2), {identity(2)});
  const auto recs = run_linear_ensemble(unit, init, spec);
  CHECK(wiener_law_tests(recs, 0.999, true).passed);
  const WienerLawReport raw = wiener_law_tests(recs, 0.999, false);
  CHECK_FALSE(raw.passed);
  CHECK_FALSE(raw.find("mean", 0)->passed);

  const WienerLawReport nl = wiener_law_tests(run_nonlinear_ensemble(pure_decay(1.0), init, spec), 0.999);
  CHECK(nl.passed);
}
