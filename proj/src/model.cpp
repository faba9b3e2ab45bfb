#include "qsde/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace qsde {

namespace {

std::string join(const std::vector<std::string>& messages) {
  std::ostringstream os;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    if (i) os << "; ";
    os << messages[i];
  }
  return os.str();
}

bool is_diagonal(const ComplexMatrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (i != j && m(i, j) != Complex{}) return false;
    }
  }
  return true;
}

}  // namespace

ModelError::ModelError(std::vector<std::string> messages)
    : std::invalid_argument(join(messages)), messages_(std::move(messages)) {}

Complex DriveSpec::at(std::size_t channel, double t) const {
  if (channel >= amplitudes.size()) return {};
  if (carrier == 0.0) return amplitudes[channel];
  return amplitudes[channel] * std::exp(-kI * (carrier * t));
}

DetectionSpec DetectionSpec::diagonal_phase(double nu) {
  DetectionSpec d;
  d.kind = Kind::DiagonalPhase;
  d.nu = nu;
  return d;
}

DetectionSpec DetectionSpec::constant_unitary(ComplexMatrix v) {
  DetectionSpec d;
  d.kind = Kind::ConstantUnitary;
  d.unitary = std::move(v);
  return d;
}

std::vector<std::string> SystemModel::validation_errors() const {
  std::vector<std::string> errors;
  const Index d = hamiltonian.rows();
  if (d <= 0 || hamiltonian.cols() != d) {
    errors.push_back("hamiltonian must be a non-empty square matrix");
    return errors;
  }
  if (!is_finite(hamiltonian)) errors.push_back("hamiltonian has non-finite entries");
  if (!is_hermitian(hamiltonian, 1e-12)) errors.push_back("hamiltonian is not Hermitian");
  if (frame.rows() != d || frame.cols() != d) {
    errors.push_back("frame must be " + std::to_string(d) + "x" + std::to_string(d));
  } else {
    if (!is_finite(frame)) errors.push_back("frame has non-finite entries");
    if (!is_hermitian(frame, 1e-12)) errors.push_back("frame is not Hermitian");
  }
  if (channels.empty()) errors.push_back("at least one channel is required");
  for (std::size_t j = 0; j < channels.size(); ++j) {
    if (channels[j].rows() != d || channels[j].cols() != d) {
      errors.push_back("channel " + std::to_string(j) + " must be " + std::to_string(d) +
                       "x" + std::to_string(d));
    } else if (!is_finite(channels[j])) {
      errors.push_back("channel " + std::to_string(j) + " has non-finite entries");
    }
  }
  if (drive.amplitudes.size() != channels.size()) {
    errors.push_back("drive needs one amplitude per channel (" +
                     std::to_string(channels.size()) + "), got " +
                     std::to_string(drive.amplitudes.size()));
  }
  if (!std::isfinite(drive.carrier)) errors.push_back("drive carrier is not finite");
  if (detection.kind == DetectionSpec::Kind::ConstantUnitary) {
    const auto& v = detection.unitary;
    const Index j = static_cast<Index>(channels.size());
    if (v.rows() != j || v.cols() != j) {
      errors.push_back("detection unitary must be " + std::to_string(j) + "x" +
                       std::to_string(j));
    } else if (max_abs(v.adjoint() * v - identity(j)) > 1e-10) {
      errors.push_back("detection matrix is not unitary");
    }
  } else if (!std::isfinite(detection.nu)) {
    errors.push_back("detection nu is not finite");
  }
  return errors;
}

void SystemModel::validate() const {
  auto errors = validation_errors();
  if (!errors.empty()) throw ModelError(std::move(errors));
}

ComplexMatrix build_ktilde(const SystemModel& model) {
  ComplexMatrix sum = zero(model.dim());
  for (const auto& l : model.channels) sum.noalias() += l.adjoint() * l;
  return model.hamiltonian - 0.5 * kI * sum;
}

// Everything is stored in the eigenbasis of H0 so that conjugation by
// e^{iH0 t} is an entrywise phase: (D X D^*)_ab = e^{i(e_a - e_b)t} X_ab.
struct Coefficients::Impl {
  Index dim = 0;
  std::size_t nchannels = 0;

  bool constant = false;
  ComplexMatrix constant_k;
  std::vector<ComplexMatrix> constant_r;

  std::shared_ptr<const SystemModel> model;
  bool rotate = false;  // false when H0 is diagonal in the given basis
  ComplexMatrix basis;  // columns are eigenvectors of H0
  Eigen::VectorXd energies;
  ComplexMatrix k_static;  // Kt - H0, frame basis
  std::vector<ComplexMatrix> l;
  std::vector<ComplexMatrix> l_adj;

  ComplexMatrix dress(const ComplexMatrix& x, double t) const {
    ComplexMatrix out(dim, dim);
    for (Index a = 0; a < dim; ++a) {
      for (Index b = 0; b < dim; ++b) {
        const double w = energies(a) - energies(b);
        out(a, b) = (w == 0.0 || x(a, b) == Complex{}) ? x(a, b)
                                                        : x(a, b) * std::exp(kI * (w * t));
      }
    }
    if (!rotate) return out;
    return basis * out * basis.adjoint();
  }
};

Coefficients::Coefficients(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

Coefficients::Coefficients(const SystemModel& model) {
  model.validate();
  auto impl = std::make_shared<Impl>();
  impl->dim = model.dim();
  impl->nchannels = model.nchannels();
  impl->model = std::make_shared<const SystemModel>(model);

  const Index d = model.dim();
  if (is_diagonal(model.frame)) {
    impl->rotate = false;
    impl->basis = identity(d);
    impl->energies = model.frame.diagonal().real();
  } else {
    impl->rotate = true;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
        Eigen::MatrixXcd(0.5 * (model.frame + model.frame.adjoint())));
    impl->basis = es.eigenvectors();
    impl->energies = es.eigenvalues();
  }
  auto to_frame = [&](const ComplexMatrix& x) -> ComplexMatrix {
    if (!impl->rotate) return x;
    return impl->basis.adjoint() * x * impl->basis;
  };
  impl->k_static = to_frame(build_ktilde(model) - model.frame);
  for (const auto& l : model.channels) {
    impl->l.push_back(to_frame(l));
    impl->l_adj.push_back(impl->l.back().adjoint());
  }
  impl_ = std::move(impl);
}

Coefficients Coefficients::constant(ComplexMatrix k, std::vector<ComplexMatrix> r) {
  if (k.rows() != k.cols() || k.rows() == 0) {
    throw std::invalid_argument("Coefficients::constant: K must be square and non-empty");
  }
  for (const auto& m : r) {
    if (m.rows() != k.rows() || m.cols() != k.cols()) {
      throw std::invalid_argument("Coefficients::constant: R_j dimension mismatch");
    }
  }
  auto impl = std::make_shared<Impl>();
  impl->dim = k.rows();
  impl->nchannels = r.size();
  impl->constant = true;
  impl->constant_k = std::move(k);
  impl->constant_r = std::move(r);
  return Coefficients(std::move(impl));
}

Index Coefficients::dim() const { return impl_->dim; }

std::size_t Coefficients::nchannels() const { return impl_->nchannels; }

bool Coefficients::is_constant() const { return impl_->constant; }

const SystemModel* Coefficients::model() const { return impl_->model.get(); }

CoefficientSample Coefficients::at(double t) const {
  CoefficientSample out;
  evaluate(t, out);
  return out;
}

void Coefficients::evaluate(double t, CoefficientSample& out) const {
  const Impl& p = *impl_;
  if (p.constant) {
    out.k = p.constant_k;
    out.r = p.constant_r;
    return;
  }
  const SystemModel& m = *p.model;

  ComplexMatrix inner = p.k_static;
  for (std::size_t j = 0; j < p.nchannels; ++j) {
    const Complex f = m.drive.at(j, t);
    if (f == Complex{}) continue;
    inner += kI * (std::conj(f) * p.l[j] - f * p.l_adj[j]);
  }
  out.k = p.dress(inner, t);

  std::vector<ComplexMatrix> dressed;
  dressed.reserve(p.nchannels);
  for (const auto& l : p.l) dressed.push_back(p.dress(l, t));

  out.r.resize(p.nchannels);
  if (m.detection.kind == DetectionSpec::Kind::DiagonalPhase) {
    const double nu = m.detection.nu;
    const Complex phase = nu == 0.0 ? Complex{1.0, 0.0} : std::exp(kI * (nu * t));
    for (std::size_t j = 0; j < p.nchannels; ++j) {
      out.r[j] = nu == 0.0 ? dressed[j] : ComplexMatrix(phase * dressed[j]);
    }
  } else {
    const auto& v = m.detection.unitary;
    for (std::size_t j = 0; j < p.nchannels; ++j) {
      out.r[j] = zero(p.dim);
      for (std::size_t i = 0; i < p.nchannels; ++i) {
        const Complex c = std::conj(v(static_cast<Index>(i), static_cast<Index>(j)));
        if (c != Complex{}) out.r[j] += c * dressed[i];
      }
    }
  }
}

Coefficients build_coefficients(const SystemModel& model) { return Coefficients(model); }

A4Report verify_A4(const Coefficients& coeffs, const std::vector<double>& times,
                   double tol) {
  A4Report report;
  report.times = times;
  report.tolerance = tol;
  CoefficientSample s;
  for (double t : times) {
    coeffs.evaluate(t, s);
    ComplexMatrix lhs = -kI * (s.k.adjoint() - s.k);
    for (const auto& r : s.r) lhs.noalias() -= r.adjoint() * r;
    const double res = max_abs(lhs);
    report.residuals.push_back(res);
    report.max_residual = std::max(report.max_residual, res);
  }
  report.passed = report.max_residual <= tol;
  return report;
}

NormBoundsReport operator_norm_bounds(const Coefficients& coeffs, double horizon,
                                      std::size_t samples) {
  if (!(horizon > 0.0)) throw std::invalid_argument("operator_norm_bounds: horizon must be > 0");
  samples = std::max<std::size_t>(samples, 2);
  NormBoundsReport report;
  report.horizon = horizon;
  report.samples = samples;
  report.min_dissipation_norm = std::numeric_limits<double>::infinity();
  CoefficientSample s;
  for (std::size_t n = 0; n < samples; ++n) {
    const double t = horizon * static_cast<double>(n) / static_cast<double>(samples - 1);
    coeffs.evaluate(t, s);
    ComplexMatrix diss = zero(coeffs.dim());
    for (const auto& r : s.r) diss.noalias() += r.adjoint() * r;
    const double dn = spectral_norm(diss);
    report.sup_dissipation_norm = std::max(report.sup_dissipation_norm, dn);
    report.min_dissipation_norm = std::min(report.min_dissipation_norm, dn);
    report.sup_k_norm = std::max(report.sup_k_norm, spectral_norm(s.k));
  }
  return report;
}

}  // namespace qsde
