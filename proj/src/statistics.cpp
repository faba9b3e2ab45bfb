#include "qsde/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

#include "qsde/parallel.hpp"

namespace qsde {

namespace {

std::size_t steps_for(double t, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step size must be > 0");
  if (!(t >= 0.0)) throw std::invalid_argument("time must be >= 0");
  if (t == 0.0) return 0;
  return static_cast<std::size_t>(std::max(1.0, std::ceil(t / dt - 1e-9)));
}

// Index of t on the grid n * h, or throws.
std::size_t grid_index(double t, double h) {
  const double x = t / h;
  const double r = std::round(x);
  if (std::abs(x - r) > 1e-9 * std::max(1.0, x)) {
    throw std::invalid_argument("time " + std::to_string(t) +
                                " does not lie on the quadrature grid");
  }
  return static_cast<std::size_t>(r);
}

void check_channel(const LindbladPropagator& gen, std::size_t k) {
  if (k >= gen.coefficients().nchannels()) {
    throw std::invalid_argument("channel " + std::to_string(k) + " out of range");
  }
}

// Tr{a b}
Complex trace_product(const ComplexMatrix& a, const ComplexMatrix& b) {
  Complex s{};
  for (Index r = 0; r < a.rows(); ++r) s += a.row(r).transpose().cwiseProduct(b.col(r)).sum();
  return s;
}

double trapezoid(const std::vector<double>& f, double h) {
  if (f.size() < 2) return 0.0;
  double s = 0.5 * (f.front() + f.back());
  for (std::size_t n = 1; n + 1 < f.size(); ++n) s += f[n];
  return s * h;
}

// Everything the double integrals need on the grid t_n = n h, n = 0..nsteps.
struct MomentGrid {
  double h = 0.0;
  std::vector<ComplexMatrix> rho;
  std::vector<CoefficientSample> coeffs;
  std::optional<ComplexMatrix> step;       // constant one-step propagator
  std::vector<ComplexMatrix> steps;        // U(t_n, t_{n-1}) at index n
  const ComplexMatrix& u(std::size_t n) const { return step ? *step : steps[n]; }
};

MomentGrid make_grid(const LindbladPropagator& gen, const ComplexMatrix& rho0, double h,
                     std::size_t nsteps) {
  MomentGrid g;
  g.h = h;
  g.rho = propagate_master_series(gen, rho0, 0.0, h, nsteps);
  g.coeffs.resize(nsteps + 1);
  for (std::size_t n = 0; n <= nsteps; ++n) {
    gen.coefficients().evaluate(static_cast<double>(n) * h, g.coeffs[n]);
  }
  if (gen.time_independent()) {
    g.step = matrix_exp(gen.constant_generator().matrix, h);
  } else {
    g.steps.resize(nsteps + 1);
    for (std::size_t n = 1; n <= nsteps; ++n) {
      g.steps[n] = evolution_operator(gen, static_cast<double>(n - 1) * h,
                                      static_cast<double>(n) * h, h)
                       .matrix;
    }
  }
  return g;
}

// A(i, j, t_n1, t_n2) by the recursion
//   Y_n = U_n Y_{n-1} + (h/2)(U_n X_{n-1} + X_n)   for n <= n2
//   Y_n = U_n Y_{n-1}                               for n > n2
// which reproduces the nested trapezoid rule exactly.
double ordered_integral(const MomentGrid& g, std::size_t i, std::size_t j, std::size_t n1,
                        std::size_t n2) {
  if (n1 == 0) return 0.0;
  const Index d = g.rho.front().rows();
  auto x_at = [&](std::size_t n) {
    const ComplexMatrix& r = g.coeffs[n].r[j];
    return vectorize(r * g.rho[n] + g.rho[n] * r.adjoint());
  };
  std::vector<double> f(n1 + 1, 0.0);
  ComplexVector y = ComplexVector::Zero(d * d);
  ComplexVector x_prev = x_at(0);
  for (std::size_t n = 1; n <= n1; ++n) {
    const ComplexMatrix& u = g.u(n);
    if (n <= n2) {
      const ComplexVector x = x_at(n);
      y = u * (y + 0.5 * g.h * x_prev) + 0.5 * g.h * x;
      x_prev = x;
    } else {
      y = u * y;
    }
    const ComplexMatrix& r = g.coeffs[n].r[i];
    const ComplexMatrix b = r + r.adjoint();
    f[n] = trace_product(b, devectorize(y, d)).real();
  }
  return trapezoid(f, g.h);
}

}  // namespace

std::vector<double> analytic_mean_series(const LindbladPropagator& gen,
                                         const ComplexMatrix& rho0, std::size_t k, double dt,
                                         std::size_t nsteps) {
  check_channel(gen, k);
  const auto rho = propagate_master_series(gen, rho0, 0.0, dt, nsteps);
  std::vector<double> out(nsteps + 1, 0.0);
  CoefficientSample s;
  double prev = 0.0;
  for (std::size_t n = 0; n <= nsteps; ++n) {
    gen.coefficients().evaluate(static_cast<double>(n) * dt, s);
    const ComplexMatrix& r = s.r[k];
    const double f = trace_product(rho[n], r + r.adjoint()).real();
    if (n > 0) out[n] = out[n - 1] + 0.5 * dt * (prev + f);
    prev = f;
  }
  return out;
}

double analytic_mean_output(const LindbladPropagator& gen, const ComplexMatrix& rho0,
                            std::size_t k, double t, double dt) {
  const std::size_t n = steps_for(t, dt);
  if (n == 0) return 0.0;
  return analytic_mean_series(gen, rho0, k, t / static_cast<double>(n), n).back();
}

double analytic_second_moment(const LindbladPropagator& gen, const ComplexMatrix& rho0,
                              std::size_t i, std::size_t j, double t1, double t2, double dt) {
  check_channel(gen, i);
  check_channel(gen, j);
  const double tmax = std::max(t1, t2);
  const std::size_t nmax = steps_for(tmax, dt);
  const double shot = i == j ? std::min(t1, t2) : 0.0;
  if (nmax == 0) return shot;
  const double h = tmax / static_cast<double>(nmax);
  const std::size_t n1 = grid_index(t1, h);
  const std::size_t n2 = grid_index(t2, h);
  const MomentGrid g = make_grid(gen, rho0, h, nmax);
  if (i == j && n1 == n2) return shot + 2.0 * ordered_integral(g, i, i, n1, n1);
  return shot + ordered_integral(g, i, j, n1, n2) + ordered_integral(g, j, i, n2, n1);
}

Estimate jackknife_mean(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n == 0) throw std::invalid_argument("jackknife_mean: no samples");
  const double total = pairwise_sum(values);
  Estimate e;
  e.value = total / static_cast<double>(n);
  if (n < 2) return e;
  // Leave-one-out means theta_i = (total - x_i) / (n - 1).
  std::vector<double> dev(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double theta = (total - values[k]) / static_cast<double>(n - 1);
    dev[k] = (theta - e.value) * (theta - e.value);
  }
  e.stderr = std::sqrt(static_cast<double>(n - 1) / static_cast<double>(n) * pairwise_sum(dev));
  return e;
}

std::size_t OutputEnsemble::index_of(double t) const {
  for (std::size_t n = 0; n < times.size(); ++n) {
    if (std::abs(times[n] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return n;
  }
  throw std::invalid_argument("time " + std::to_string(t) + " is not a recorded sample");
}

namespace {

template <typename Record>
void check_records(const std::vector<Record>& records, const char* who) {
  if (records.empty()) throw std::invalid_argument(std::string(who) + ": empty ensemble");
  for (const auto& r : records) {
    if (r.steps != records.front().steps) {
      throw std::invalid_argument(std::string(who) + ": records are on different grids");
    }
  }
}

}  // namespace

OutputEnsemble OutputEnsemble::from_linear(const std::vector<TrajectoryRecord>& records) {
  check_records(records, "OutputEnsemble::from_linear");
  OutputEnsemble e;
  e.times = records.front().times;
  e.trajectories = records.size();
  e.channels = records.front().w_path.front().size();
  const std::size_t s = e.samples();
  e.weights.resize(e.trajectories * s);
  e.outputs.resize(e.trajectories * s * e.channels);
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (std::size_t n = 0; n < s; ++n) {
      e.weights[i * s + n] = records[i].weight[n];
      for (std::size_t k = 0; k < e.channels; ++k) {
        e.outputs[(i * s + n) * e.channels + k] = records[i].w_path[n][k];
      }
    }
  }
  return e;
}

OutputEnsemble OutputEnsemble::from_nonlinear(const std::vector<NormalizedRecord>& records) {
  check_records(records, "OutputEnsemble::from_nonlinear");
  OutputEnsemble e;
  e.times = records.front().times;
  e.trajectories = records.size();
  e.channels = records.front().output_path.front().size();
  const std::size_t s = e.samples();
  e.weights.assign(e.trajectories * s, 1.0);
  e.outputs.resize(e.trajectories * s * e.channels);
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (std::size_t n = 0; n < s; ++n) {
      for (std::size_t k = 0; k < e.channels; ++k) {
        e.outputs[(i * s + n) * e.channels + k] = records[i].output_path[n][k];
      }
    }
  }
  return e;
}

Estimate mc_mean_output(const OutputEnsemble& ens, std::size_t k, std::size_t n) {
  std::vector<double> v(ens.trajectories);
  for (std::size_t i = 0; i < ens.trajectories; ++i) v[i] = ens.weight(i, n) * ens.output(i, n, k);
  return jackknife_mean(v);
}

Estimate mc_second_moment(const OutputEnsemble& ens, std::size_t i, std::size_t j,
                          std::size_t n1, std::size_t n2) {
  const std::size_t late = std::max(n1, n2);
  std::vector<double> v(ens.trajectories);
  for (std::size_t m = 0; m < ens.trajectories; ++m) {
    v[m] = ens.weight(m, late) * ens.output(m, n1, i) * ens.output(m, n2, j);
  }
  return jackknife_mean(v);
}

Estimate mc_mean_weight(const OutputEnsemble& ens, std::size_t n) {
  std::vector<double> v(ens.trajectories);
  for (std::size_t i = 0; i < ens.trajectories; ++i) v[i] = ens.weight(i, n);
  return jackknife_mean(v);
}

MomentReport mc_output_moments(const LindbladPropagator& gen, const ComplexMatrix& rho0,
                               const OutputEnsemble& ens, const MomentRequest& request) {
  if (ens.channels != gen.coefficients().nchannels()) {
    throw std::invalid_argument("mc_output_moments: channel count mismatch");
  }
  MomentReport report;
  for (std::size_t k = 0; k < ens.channels; ++k) {
    for (std::size_t n = 0; n < ens.samples(); ++n) {
      MeanRow row;
      row.t = ens.times[n];
      row.channel = k;
      row.analytic = analytic_mean_output(gen, rho0, k, row.t, request.dt);
      const Estimate e = mc_mean_output(ens, k, n);
      row.mc = e.value;
      row.stderr = e.stderr;
      report.means.push_back(row);
    }
  }
  for (const auto& [i, j] : request.channel_pairs) {
    for (const auto& [t1, t2] : request.time_pairs) {
      CorrelationRow row;
      row.i = i;
      row.j = j;
      row.t1 = t1;
      row.t2 = t2;
      row.analytic = analytic_second_moment(gen, rho0, i, j, t1, t2, request.dt);
      const Estimate e = mc_second_moment(ens, i, j, ens.index_of(t1), ens.index_of(t2));
      row.mc = e.value;
      row.stderr = e.stderr;
      report.correlations.push_back(row);
    }
  }
  return report;
}

double halving_bias(double estimate_dt, double estimate_half_dt) {
  return 2.0 * std::abs(estimate_dt - estimate_half_dt);
}

SpectrumScan spectrum_scan(const std::function<Coefficients(double)>& factory,
                           const std::vector<double>& nu_grid, const SpectrumOptions& opts) {
  if (nu_grid.empty()) throw std::invalid_argument("spectrum_scan: empty frequency grid");
  if (!(opts.horizon > 0.0)) throw std::invalid_argument("spectrum_scan: horizon must be > 0");
  if (!(opts.dt > 0.0)) throw std::invalid_argument("spectrum_scan: dt must be > 0");
  SpectrumScan scan;
  scan.nu = nu_grid;
  scan.s.assign(nu_grid.size(), 0.0);
  const std::size_t nsteps = steps_for(opts.horizon, opts.dt);
  scan.horizon = opts.horizon;
  scan.dt = opts.horizon / static_cast<double>(nsteps);
  scan.variance_mode = opts.variance_mode;

  parallel_for(
      nu_grid.size(),
      [&](std::size_t q) {
        const double nu = nu_grid[q];
        const LindbladPropagator gen(factory(nu));
        ComplexMatrix rho0;
        if (opts.initial_state) {
          rho0 = *opts.initial_state;
        } else {
          const StationaryResult ss = stationary_state(gen);
          if (!ss.unique) {
            throw std::invalid_argument("spectrum_scan: stationary state is not unique at nu = " +
                                        std::to_string(nu));
          }
          rho0 = ss.rho;
        }
        const double m2 = analytic_second_moment(gen, rho0, opts.channel, opts.channel,
                                                 opts.horizon, opts.horizon, scan.dt);
        double value = m2;
        if (opts.variance_mode) {
          const double m1 = analytic_mean_output(gen, rho0, opts.channel, opts.horizon, scan.dt);
          value -= m1 * m1;
        }
        scan.s[q] = value / opts.horizon;
      },
      opts.workers);
  return scan;
}

double normal_critical_value(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw std::invalid_argument("confidence must lie in (0, 1)");
  }
  const boost::math::normal_distribution<double> normal;
  return boost::math::quantile(normal, 1.0 - 0.5 * (1.0 - confidence));
}

const LawTest* WienerLawReport::find(const std::string& name, std::size_t channel) const {
  for (const auto& t : tests) {
    if (t.name == name && t.channel == channel) return &t;
  }
  return nullptr;
}

namespace {

// Per-trajectory view: sample times, What at each sample, weight.
struct LawInput {
  const std::vector<double>* times;
  const std::vector<std::vector<double>>* what;
  double weight;
};

WienerLawReport law_tests(const std::vector<LawInput>& in, double confidence) {
  if (in.empty()) throw std::invalid_argument("wiener_law_tests: empty ensemble");
  const auto& times = *in.front().times;
  const std::size_t m = times.size() - 1;  // increments per trajectory
  if (m < 2) throw std::invalid_argument("wiener_law_tests: need at least 3 samples");
  const std::size_t nch = in.front().what->front().size();

  WienerLawReport report;
  report.confidence = confidence;
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw std::invalid_argument("confidence must lie in (0, 1)");
  }

  std::vector<double> dt(m);
  for (std::size_t n = 0; n < m; ++n) dt[n] = times[n + 1] - times[n];
  auto inc = [&](const LawInput& x, std::size_t n, std::size_t k) {
    return ((*x.what)[n + 1][k] - (*x.what)[n][k]) / std::sqrt(dt[n]);
  };

  auto run = [&](const std::string& name, std::size_t c, std::size_t o, auto&& per_traj) {
    std::vector<double> v(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) v[i] = in[i].weight * per_traj(in[i]);
    const Estimate e = jackknife_mean(v);
    LawTest t;
    t.name = name;
    t.channel = c;
    t.other = o;
    t.statistic = e.value;
    t.stderr = e.stderr;
    t.z = e.stderr > 0.0 ? e.value / e.stderr : (e.value == 0.0 ? 0.0 : INFINITY);
    report.tests.push_back(t);
  };

  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < nch; ++k) {
    run("mean", k, k, [&](const LawInput& x) {
      double s = 0.0;
      for (std::size_t n = 0; n < m; ++n) s += inc(x, n, k);
      return s * inv_m;
    });
    run("variance", k, k, [&](const LawInput& x) {
      double s = 0.0;
      for (std::size_t n = 0; n < m; ++n) s += inc(x, n, k) * inc(x, n, k) - 1.0;
      return s * inv_m;
    });
    run("lag1", k, k, [&](const LawInput& x) {
      double s = 0.0;
      for (std::size_t n = 0; n + 1 < m; ++n) s += inc(x, n, k) * inc(x, n + 1, k);
      return s / static_cast<double>(m - 1);
    });
  }
  for (std::size_t j = 0; j < nch; ++j) {
    for (std::size_t k = j + 1; k < nch; ++k) {
      run("cross", j, k, [&](const LawInput& x) {
        double s = 0.0;
        for (std::size_t n = 0; n < m; ++n) s += inc(x, n, j) * inc(x, n, k);
        return s * inv_m;
      });
    }
  }
  // Bonferroni: the whole family holds at `confidence`.
  const double per_test = 1.0 - (1.0 - confidence) / static_cast<double>(report.tests.size());
  report.critical_z = normal_critical_value(per_test);
  for (auto& t : report.tests) t.passed = std::abs(t.z) <= report.critical_z;
  report.passed = std::all_of(report.tests.begin(), report.tests.end(),
                              [](const LawTest& t) { return t.passed; });
  return report;
}

}  // namespace

WienerLawReport wiener_law_tests(const std::vector<TrajectoryRecord>& records, double confidence,
                                 bool reweight) {
  check_records(records, "wiener_law_tests");
  std::vector<LawInput> in;
  in.reserve(records.size());
  for (const auto& r : records) {
    in.push_back({&r.times, &r.what_path, reweight ? r.weight.back() : 1.0});
  }
  return law_tests(in, confidence);
}

WienerLawReport wiener_law_tests(const std::vector<NormalizedRecord>& records,
                                 double confidence) {
  check_records(records, "wiener_law_tests");
  std::vector<LawInput> in;
  in.reserve(records.size());
  for (const auto& r : records) in.push_back({&r.times, &r.what_path, 1.0});
  return law_tests(in, confidence);
}

}  // namespace qsde
