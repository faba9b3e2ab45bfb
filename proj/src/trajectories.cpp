#include "qsde/trajectories.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "qsde/parallel.hpp"

namespace qsde {

namespace {

void check_inputs(const CoefficientGrid& grid, const ComplexVector& psi0,
                  const WienerPath& path, const TrajectoryOptions& opts, const char* who) {
  const std::string w(who);
  if (psi0.size() != grid.dim()) {
    throw std::invalid_argument(w + ": initial state has dimension " +
                                std::to_string(psi0.size()) + ", model has " +
                                std::to_string(grid.dim()));
  }
  if (path.nchannels != grid.nchannels()) {
    throw std::invalid_argument(w + ": path has " + std::to_string(path.nchannels) +
                                " channels, model has " + std::to_string(grid.nchannels()));
  }
  if (path.nsteps != grid.nsteps()) {
    throw std::invalid_argument(w + ": path has " + std::to_string(path.nsteps) +
                                " steps, grid has " + std::to_string(grid.nsteps()));
  }
  if (std::abs(path.dt - grid.dt()) > 1e-12 * grid.dt()) {
    throw std::invalid_argument(w + ": path dt does not match the grid dt");
  }
  if (opts.record_stride == 0) throw std::invalid_argument(w + ": record_stride must be >= 1");
}

bool record_step(std::size_t n, std::size_t nsteps, std::size_t stride) {
  return n % stride == 0 || n == nsteps;
}

}  // namespace

CoefficientGrid::CoefficientGrid(const Coefficients& coeffs, double dt, std::size_t nsteps)
    : dt_(dt),
      nsteps_(nsteps),
      dim_(coeffs.dim()),
      nchannels_(coeffs.nchannels()),
      constant_(coeffs.is_constant()) {
  if (!(dt > 0.0)) throw std::invalid_argument("CoefficientGrid: dt must be > 0");
  if (nsteps == 0) throw std::invalid_argument("CoefficientGrid: nsteps must be >= 1");
  const std::size_t points = constant_ ? 1 : nsteps + 1;
  k_.reserve(points);
  g_.reserve(points);
  r_.reserve(points * nchannels_);
  CoefficientSample s;
  for (std::size_t n = 0; n < points; ++n) {
    coeffs.evaluate(static_cast<double>(n) * dt, s);
    ComplexMatrix g = -0.5 * kI * (s.k + s.k.adjoint());
    for (const auto& r : s.r) g.noalias() -= 0.5 * (r.adjoint() * r);
    k_.push_back(s.k);
    g_.push_back(std::move(g));
    for (auto& r : s.r) r_.push_back(r);
  }
}

Complex normalized_expectation(const ComplexMatrix& r, const ComplexVector& psi) {
  const double w = psi.squaredNorm();
  if (!(w > 0.0)) throw std::invalid_argument("normalized_expectation: zero vector");
  return psi.dot(r * psi) / w;
}

TrajectoryRecord integrate_linear(const CoefficientGrid& grid, const ComplexVector& psi0,
                                  const WienerPath& path, const TrajectoryOptions& opts) {
  check_inputs(grid, psi0, path, opts, "integrate_linear");
  const std::size_t nsteps = grid.nsteps();
  const std::size_t nch = grid.nchannels();
  const Index d = grid.dim();
  const double dt = grid.dt();
  const Complex minus_i_dt{0.0, -dt};

  TrajectoryRecord rec;
  rec.dt = dt;
  rec.seed = path.seed;
  const std::size_t nrec = nsteps / opts.record_stride + 2;
  rec.times.reserve(nrec);
  rec.steps.reserve(nrec);
  rec.psi.reserve(nrec);
  rec.weight.reserve(nrec);

  ComplexVector psi = psi0;
  ComplexVector next(d);
  ComplexVector kpsi(d);
  std::vector<ComplexVector> rpsi(nch, ComplexVector(d));
  std::vector<Complex> m(nch, Complex{});
  std::vector<double> w(nch, 0.0);
  std::vector<double> drift(nch, 0.0);

  const double floor = opts.weight_floor * psi0.squaredNorm();
  bool frozen = false;

  for (std::size_t n = 0;; ++n) {
    const double weight = psi.squaredNorm();
    if (!frozen && !(weight >= floor && weight > 0.0)) {
      frozen = true;
      rec.degenerate = true;
      rec.degenerate_step = n;
    }
    if (!frozen) {
      for (std::size_t j = 0; j < nch; ++j) {
        rpsi[j].noalias() = grid.r(n, j) * psi;
        m[j] = psi.dot(rpsi[j]) / weight;
      }
    }
    if (record_step(n, nsteps, opts.record_stride)) {
      rec.times.push_back(static_cast<double>(n) * dt);
      rec.steps.push_back(n);
      rec.psi.push_back(psi);
      rec.weight.push_back(weight);
      rec.mhat.push_back(m);
      rec.w_path.push_back(w);
      rec.drift.push_back(drift);
    }
    if (n == nsteps) break;

    if (!frozen) {
      kpsi.noalias() = grid.k(n) * psi;
      next = psi + minus_i_dt * kpsi;
      for (std::size_t j = 0; j < nch; ++j) next += path.increment(n, j) * rpsi[j];
      psi.swap(next);
    }
    for (std::size_t j = 0; j < nch; ++j) {
      drift[j] += 2.0 * m[j].real() * dt;
      w[j] += path.increment(n, j);
    }
  }
  girsanov_output(rec);
  return rec;
}

TrajectoryRecord integrate_linear(const Coefficients& coeffs, const ComplexVector& psi0,
                                  const WienerPath& path, const TrajectoryOptions& opts) {
  return integrate_linear(CoefficientGrid(coeffs, path.dt, path.nsteps), psi0, path, opts);
}

void girsanov_output(TrajectoryRecord& record) {
  record.what_path.resize(record.w_path.size());
  for (std::size_t n = 0; n < record.w_path.size(); ++n) {
    const auto& w = record.w_path[n];
    const auto& drift = record.drift[n];
    auto& what = record.what_path[n];
    what.resize(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) what[k] = w[k] - drift[k];
  }
}

NormalizedRecord integrate_nonlinear(const CoefficientGrid& grid, const ComplexVector& psihat0,
                                     const WienerPath& path, const TrajectoryOptions& opts) {
  check_inputs(grid, psihat0, path, opts, "integrate_nonlinear");
  if (std::abs(psihat0.norm() - 1.0) > 1e-10) {
    throw std::invalid_argument("integrate_nonlinear: initial state must have unit norm");
  }
  const std::size_t nsteps = grid.nsteps();
  const std::size_t nch = grid.nchannels();
  const Index d = grid.dim();
  const double dt = grid.dt();

  NormalizedRecord rec;
  rec.dt = dt;
  rec.seed = path.seed;
  const std::size_t nrec = nsteps / opts.record_stride + 2;
  rec.times.reserve(nrec);
  rec.psihat.reserve(nrec);

  ComplexVector psi = psihat0;
  ComplexVector next(d);
  std::vector<ComplexVector> rpsi(nch, ComplexVector(d));
  std::vector<Complex> m(nch);
  std::vector<double> what(nch, 0.0);
  std::vector<double> out(nch, 0.0);

  for (std::size_t n = 0;; ++n) {
    for (std::size_t j = 0; j < nch; ++j) {
      rpsi[j].noalias() = grid.r(n, j) * psi;
      m[j] = psi.dot(rpsi[j]);
    }
    if (record_step(n, nsteps, opts.record_stride)) {
      rec.times.push_back(static_cast<double>(n) * dt);
      rec.steps.push_back(n);
      rec.psihat.push_back(psi);
      rec.mhat.push_back(m);
      rec.what_path.push_back(what);
      rec.output_path.push_back(out);
    }
    if (n == nsteps) break;

    // drift: G psi + sum_k [conj(m_k) R_k - |m_k|^2 / 2] psi
    // noise: sum_k (R_k - m_k) psi dWhat_k
    Complex scalar{1.0, 0.0};
    next.noalias() = grid.g(n) * psi;
    next *= dt;
    for (std::size_t j = 0; j < nch; ++j) {
      const double dw = path.increment(n, j);
      scalar -= 0.5 * std::norm(m[j]) * dt + m[j] * dw;
      next += (std::conj(m[j]) * dt + dw) * rpsi[j];
    }
    next += scalar * psi;
    const double norm = next.norm();
    if (!(norm > 1e-150) || !std::isfinite(norm)) {
      throw std::runtime_error("integrate_nonlinear: state norm collapsed at step " +
                               std::to_string(n));
    }
    psi = next / norm;
    for (std::size_t j = 0; j < nch; ++j) {
      what[j] += path.increment(n, j);
      out[j] += path.increment(n, j) + 2.0 * m[j].real() * dt;
    }
  }
  return rec;
}

NormalizedRecord integrate_nonlinear(const Coefficients& coeffs, const ComplexVector& psihat0,
                                     const WienerPath& path, const TrajectoryOptions& opts) {
  return integrate_nonlinear(CoefficientGrid(coeffs, path.dt, path.nsteps), psihat0, path,
                             opts);
}

NormalizedRecord normalize_posterior(const TrajectoryRecord& record) {
  NormalizedRecord out;
  out.dt = record.dt;
  out.seed = record.seed;
  out.times = record.times;
  out.steps = record.steps;
  out.mhat = record.mhat;
  out.what_path = record.what_path;
  out.output_path = record.w_path;
  out.psihat.reserve(record.psi.size());
  for (std::size_t n = 0; n < record.psi.size(); ++n) {
    const double norm = record.psi[n].norm();
    if (!(norm > 0.0)) {
      throw std::invalid_argument("normalize_posterior: zero-norm state at sample " +
                                  std::to_string(n));
    }
    out.psihat.push_back(record.psi[n] / norm);
  }
  return out;
}

WienerPath shifted_path(const TrajectoryRecord& record, const WienerPath& path) {
  if (record.steps.size() != path.nsteps + 1) {
    throw std::invalid_argument("shifted_path: record must hold every step (record_stride 1)");
  }
  WienerPath out = path;
  for (std::size_t n = 0; n < path.nsteps; ++n) {
    for (std::size_t j = 0; j < path.nchannels; ++j) {
      out.increments[n * path.nchannels + j] =
          path.increment(n, j) - 2.0 * record.mhat[n][j].real() * path.dt;
    }
  }
  return out;
}

InitialState InitialState::from_vector(ComplexVector psi) {
  if (psi.size() == 0) throw std::invalid_argument("InitialState: empty vector");
  InitialState s;
  s.pure = std::move(psi);
  return s;
}

InitialState InitialState::from_density(ComplexMatrix rho) {
  if (rho.rows() == 0 || rho.rows() != rho.cols()) {
    throw std::invalid_argument("InitialState: density matrix must be square");
  }
  if (!is_hermitian(rho, 1e-10)) {
    throw std::invalid_argument("InitialState: density matrix is not Hermitian");
  }
  InitialState s;
  s.mixed = std::move(rho);
  return s;
}

Index InitialState::dim() const { return pure ? pure->size() : mixed->rows(); }

ComplexVector InitialState::sample(std::uint64_t seed) const {
  if (pure) return *pure;
  const Eigen::MatrixXcd herm = 0.5 * (*mixed + mixed->adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm);
  const auto& p = es.eigenvalues();
  double total = 0.0;
  for (Index k = 0; k < p.size(); ++k) total += std::max(p(k), 0.0);
  if (!(total > 0.0)) throw std::invalid_argument("InitialState: density matrix has no weight");
  const double u = uniform01(seed, 0, 7) * total;
  double acc = 0.0;
  Index pick = p.size() - 1;
  for (Index k = 0; k < p.size(); ++k) {
    acc += std::max(p(k), 0.0);
    if (u < acc) {
      pick = k;
      break;
    }
  }
  return es.eigenvectors().col(pick);
}

ComplexMatrix InitialState::density() const {
  if (pure) return (*pure) * pure->adjoint() / pure->squaredNorm();
  return *mixed;
}

WienerPath ensemble_path(const EnsembleSpec& spec, std::size_t nchannels, std::size_t index) {
  const std::uint64_t seed = trajectory_seed(spec.base_seed, index);
  const std::size_t r = spec.refinement == 0 ? 1 : spec.refinement;
  WienerPath p = generate_wiener(seed, spec.dt / static_cast<double>(r), spec.nsteps * r,
                                 nchannels);
  if (r > 1) p = p.coarsened(r);
  p.dt = spec.dt;
  return p;
}

namespace {

void check_spec(const EnsembleSpec& spec, const Coefficients& coeffs, const InitialState& init) {
  if (spec.trajectories == 0) throw std::invalid_argument("ensemble: trajectories must be >= 1");
  if (!(spec.dt > 0.0)) throw std::invalid_argument("ensemble: dt must be > 0");
  if (spec.nsteps == 0) throw std::invalid_argument("ensemble: nsteps must be >= 1");
  if (init.dim() != coeffs.dim()) {
    throw std::invalid_argument("ensemble: initial state dimension mismatch");
  }
}

}  // namespace

std::vector<TrajectoryRecord> run_linear_ensemble(const Coefficients& coeffs,
                                                  const InitialState& init,
                                                  const EnsembleSpec& spec) {
  check_spec(spec, coeffs, init);
  const CoefficientGrid grid(coeffs, spec.dt, spec.nsteps);
  TrajectoryOptions opts;
  opts.record_stride = spec.record_stride;
  opts.weight_floor = spec.weight_floor;
  std::vector<TrajectoryRecord> out(spec.trajectories);
  parallel_for(
      spec.trajectories,
      [&](std::size_t i) {
        const WienerPath path = ensemble_path(spec, grid.nchannels(), i);
        out[i] = integrate_linear(grid, init.sample(path.seed), path, opts);
      },
      spec.workers);
  return out;
}

std::vector<NormalizedRecord> run_nonlinear_ensemble(const Coefficients& coeffs,
                                                     const InitialState& init,
                                                     const EnsembleSpec& spec) {
  check_spec(spec, coeffs, init);
  const CoefficientGrid grid(coeffs, spec.dt, spec.nsteps);
  TrajectoryOptions opts;
  opts.record_stride = spec.record_stride;
  std::vector<NormalizedRecord> out(spec.trajectories);
  parallel_for(
      spec.trajectories,
      [&](std::size_t i) {
        const WienerPath path = ensemble_path(spec, grid.nchannels(), i);
        ComplexVector psi0 = init.sample(path.seed);
        psi0 /= psi0.norm();
        out[i] = integrate_nonlinear(grid, psi0, path, opts);
      },
      spec.workers);
  return out;
}

}  // namespace qsde
