#include "qsde/master.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

#include "qsde/parallel.hpp"

namespace qsde {

namespace {

// Matrix of X -> A X B.
ComplexMatrix side(const ComplexMatrix& a, const ComplexMatrix& b) {
  return kron(b.transpose(), a);
}

ComplexMatrix dissipation(const CoefficientSample& s, Index d) {
  ComplexMatrix sum = zero(d);
  for (const auto& r : s.r) sum.noalias() += r.adjoint() * r;
  return sum;
}

std::size_t step_count(double span, double dt) {
  if (span <= 0.0) return 0;
  return static_cast<std::size_t>(std::max(1.0, std::ceil(span / dt - 1e-9)));
}

// Probe times for detecting a time-independent generator.
constexpr double kProbeTimes[] = {0.0, 0.3719, 1.1347, 2.7183, 5.9021, 13.317, 31.73};

}  // namespace

Superoperator schrodinger_generator(const CoefficientSample& s, Index d) {
  const ComplexMatrix id = identity(d);
  const ComplexMatrix h = 0.5 * (s.k + s.k.adjoint());
  const ComplexMatrix diss = dissipation(s, d);
  ComplexMatrix m = side(-kI * h - 0.5 * diss, id) + side(id, kI * h - 0.5 * diss);
  for (const auto& r : s.r) m += side(r, r.adjoint());
  return Superoperator(d, std::move(m));
}

Superoperator heisenberg_generator(const CoefficientSample& s, Index d) {
  const ComplexMatrix id = identity(d);
  const ComplexMatrix h = 0.5 * (s.k + s.k.adjoint());
  const ComplexMatrix diss = dissipation(s, d);
  ComplexMatrix m = side(kI * h - 0.5 * diss, id) + side(id, -kI * h - 0.5 * diss);
  for (const auto& r : s.r) m += side(r.adjoint(), r);
  return Superoperator(d, std::move(m));
}

Superoperator build_heisenberg_generator(const Coefficients& coeffs, double t) {
  return heisenberg_generator(coeffs.at(t), coeffs.dim());
}

Superoperator build_schrodinger_generator(const Coefficients& coeffs, double t) {
  return schrodinger_generator(coeffs.at(t), coeffs.dim());
}

ComplexMatrix apply_schrodinger(const CoefficientSample& s, const ComplexMatrix& rho) {
  const ComplexMatrix h = 0.5 * (s.k + s.k.adjoint());
  ComplexMatrix out = -kI * (h * rho - rho * h);
  for (const auto& r : s.r) {
    const ComplexMatrix rr = r.adjoint() * r;
    out.noalias() += r * rho * r.adjoint();
    out.noalias() -= 0.5 * (rr * rho + rho * rr);
  }
  return out;
}

LindbladPropagator::LindbladPropagator(Coefficients coeffs) : coeffs_(std::move(coeffs)) {
  Superoperator first = generator_at(kProbeTimes[0]);
  if (coeffs_.is_constant()) {
    static_ = std::move(first);
    return;
  }
  const double scale = 1.0 + max_abs(first.matrix);
  for (double t : kProbeTimes) {
    if (max_abs(generator_at(t).matrix - first.matrix) > 1e-12 * scale) return;
  }
  static_ = std::move(first);
}

Superoperator LindbladPropagator::generator_at(double t) const {
  if (static_) return *static_;
  return build_schrodinger_generator(coeffs_, t);
}

const Superoperator& LindbladPropagator::constant_generator() const {
  if (!static_) throw std::logic_error("LindbladPropagator: generator is time-dependent");
  return *static_;
}

ComplexMatrix LindbladPropagator::apply(double t, const ComplexMatrix& rho) const {
  if (static_) return static_->apply(rho);
  return apply_schrodinger(coeffs_.at(t), rho);
}

namespace {

// One RK4 step of size h for a constant generator, as a d^2 x d^2 matrix.
ComplexMatrix rk4_step_matrix(const Superoperator& gen, double h) {
  const ComplexMatrix a = h * gen.matrix;
  const ComplexMatrix id = identity(a.rows());
  return id + a * (id + a * (0.5 * id + a * (id / 6.0 + a / 24.0)));
}

ComplexMatrix rk4_step(const LindbladPropagator& gen, double t, double h,
                       const ComplexMatrix& rho) {
  const ComplexMatrix k1 = gen.apply(t, rho);
  const ComplexMatrix k2 = gen.apply(t + 0.5 * h, rho + 0.5 * h * k1);
  const ComplexMatrix k3 = gen.apply(t + 0.5 * h, rho + 0.5 * h * k2);
  const ComplexMatrix k4 = gen.apply(t + h, rho + h * k3);
  return rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

void check_rho(const LindbladPropagator& gen, const ComplexMatrix& rho0, const char* who) {
  if (rho0.rows() != gen.dim() || rho0.cols() != gen.dim()) {
    throw std::invalid_argument(std::string(who) + ": rho0 must be " +
                                std::to_string(gen.dim()) + "x" + std::to_string(gen.dim()));
  }
}

}  // namespace

MasterSolution propagate_master(const LindbladPropagator& gen, const ComplexMatrix& rho0,
                                double t0, double t1, double dt) {
  check_rho(gen, rho0, "propagate_master");
  if (!(t1 >= t0)) throw std::invalid_argument("propagate_master: t1 < t0");
  if (!(dt > 0.0)) throw std::invalid_argument("propagate_master: dt must be > 0");

  ComplexMatrix rho = rho0;
  const std::size_t n = step_count(t1 - t0, dt);
  if (n > 0) {
    const double h = (t1 - t0) / static_cast<double>(n);
    if (gen.time_independent()) {
      const ComplexMatrix step = rk4_step_matrix(gen.constant_generator(), h);
      ComplexVector v = vectorize(rho);
      ComplexVector next(v.size());
      for (std::size_t k = 0; k < n; ++k) {
        next.noalias() = step * v;
        v.swap(next);
      }
      rho = devectorize(v, gen.dim());
    } else {
      for (std::size_t k = 0; k < n; ++k) {
        rho = rk4_step(gen, t0 + static_cast<double>(k) * h, h, rho);
      }
    }
  }

  MasterSolution out;
  out.rho = 0.5 * (rho + rho.adjoint());
  const Complex tr = out.rho.trace();
  if (std::abs(tr) > 0.0) out.rho /= tr.real();
  out.min_eigenvalue = min_eigenvalue(out.rho);
  out.positive = out.min_eigenvalue >= -1e-6;
  return out;
}

std::vector<ComplexMatrix> propagate_master_series(const LindbladPropagator& gen,
                                                   const ComplexMatrix& rho0, double t0,
                                                   double dt, std::size_t nsteps) {
  check_rho(gen, rho0, "propagate_master_series");
  if (!(dt > 0.0)) throw std::invalid_argument("propagate_master_series: dt must be > 0");
  std::vector<ComplexMatrix> out;
  out.reserve(nsteps + 1);
  out.push_back(rho0);
  if (gen.time_independent()) {
    const ComplexMatrix step = rk4_step_matrix(gen.constant_generator(), dt);
    ComplexVector v = vectorize(rho0);
    for (std::size_t k = 0; k < nsteps; ++k) {
      v = step * v;
      out.push_back(devectorize(v, gen.dim()));
    }
  } else {
    for (std::size_t k = 0; k < nsteps; ++k) {
      out.push_back(rk4_step(gen, t0 + static_cast<double>(k) * dt, dt, out.back()));
    }
  }
  return out;
}

Superoperator evolution_operator(const LindbladPropagator& gen, double s, double t, double dt) {
  if (!(t >= s)) throw std::invalid_argument("evolution_operator: requires t >= s");
  const Index d = gen.dim();
  if (t == s) return Superoperator::identity(d);
  if (gen.time_independent()) {
    return Superoperator(d, matrix_exp(gen.constant_generator().matrix, t - s));
  }
  if (!(dt > 0.0)) throw std::invalid_argument("evolution_operator: dt must be > 0");
  const std::size_t n = step_count(t - s, dt);
  const double h = (t - s) / static_cast<double>(n);
  ComplexMatrix u = identity(d * d);
  for (std::size_t k = 0; k < n; ++k) {
    const double mid = s + (static_cast<double>(k) + 0.5) * h;
    u = matrix_exp(gen.generator_at(mid).matrix, h) * u;
  }
  return Superoperator(d, std::move(u));
}

StationaryResult stationary_state(const LindbladPropagator& gen) {
  if (!gen.time_independent()) {
    throw std::invalid_argument("stationary_state: generator is time-dependent");
  }
  const Index d = gen.dim();
  const ComplexMatrix& l = gen.constant_generator().matrix;
  const Index n = d * d;

  Eigen::BDCSVD<Eigen::MatrixXcd> svd(l);
  const auto& sv = svd.singularValues();
  const double cutoff = 1e-10 * std::max(1.0, sv.size() ? sv(0) : 0.0);
  StationaryResult out;
  for (Index k = 0; k < sv.size(); ++k) {
    if (sv(k) <= cutoff) ++out.null_dimension;
  }
  out.unique = out.null_dimension == 1;

  Eigen::MatrixXcd a(n + 1, n);
  a.topRows(n) = l;
  a.row(n).setZero();
  for (Index i = 0; i < d; ++i) a(n, i + i * d) = 1.0;
  Eigen::VectorXcd b = Eigen::VectorXcd::Zero(n + 1);
  b(n) = 1.0;
  const Eigen::VectorXcd x = a.completeOrthogonalDecomposition().solve(b);

  ComplexMatrix rho = devectorize(ComplexVector(x), d);
  rho = 0.5 * (rho + rho.adjoint());
  rho /= rho.trace().real();
  out.residual = max_abs(gen.constant_generator().apply(rho));
  out.rho = std::move(rho);
  return out;
}

double DensityEstimate::sigma(std::size_t n) const {
  return std::sqrt(stderr_entries.at(n).array().square().sum());
}

namespace {

template <typename Sample>
DensityEstimate estimate(std::size_t count, const std::vector<double>& times,
                         const Sample& sample) {
  DensityEstimate est;
  est.times = times;
  est.samples = count;
  std::vector<ComplexMatrix> terms(count);
  for (std::size_t n = 0; n < times.size(); ++n) {
    for (std::size_t i = 0; i < count; ++i) {
      const ComplexVector& v = sample(i, n);
      terms[i] = v * v.adjoint();
    }
    const Index d = terms[0].rows();
    auto add = [](const ComplexMatrix& x, const ComplexMatrix& y) -> ComplexMatrix {
      return x + y;
    };
    const ComplexMatrix mean =
        pairwise_reduce(std::span<const ComplexMatrix>(terms), ComplexMatrix(zero(d)), add) /
        static_cast<double>(count);
    Eigen::MatrixXd se = Eigen::MatrixXd::Zero(d, d);
    if (count > 1) {
      std::vector<Eigen::MatrixXd> sq(count);
      for (std::size_t i = 0; i < count; ++i) sq[i] = (terms[i] - mean).cwiseAbs2();
      auto add_real = [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) -> Eigen::MatrixXd {
        return x + y;
      };
      const Eigen::MatrixXd ss = pairwise_reduce(std::span<const Eigen::MatrixXd>(sq),
                                                 Eigen::MatrixXd(Eigen::MatrixXd::Zero(d, d)),
                                                 add_real);
      const double c = static_cast<double>(count);
      se = (ss / (c * (c - 1.0))).cwiseSqrt();
    }
    est.mean.push_back(mean);
    est.stderr_entries.push_back(std::move(se));
  }
  return est;
}

template <typename Record>
void check_grid(const std::vector<Record>& records, const char* who) {
  if (records.empty()) throw std::invalid_argument(std::string(who) + ": empty ensemble");
  for (const auto& r : records) {
    if (r.steps != records.front().steps) {
      throw std::invalid_argument(std::string(who) + ": records are on different grids");
    }
  }
}

}  // namespace

DensityEstimate apriori_from_linear(const std::vector<TrajectoryRecord>& records) {
  check_grid(records, "apriori_from_linear");
  return estimate(records.size(), records.front().times,
                  [&](std::size_t i, std::size_t n) -> const ComplexVector& {
                    return records[i].psi[n];
                  });
}

DensityEstimate apriori_from_nonlinear(const std::vector<NormalizedRecord>& records) {
  check_grid(records, "apriori_from_nonlinear");
  return estimate(records.size(), records.front().times,
                  [&](std::size_t i, std::size_t n) -> const ComplexVector& {
                    return records[i].psihat[n];
                  });
}

}  // namespace qsde
