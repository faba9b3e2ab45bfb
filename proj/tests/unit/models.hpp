#pragma once

#include <random>

#include "helpers.hpp"
#include "qsde/model.hpp"

namespace testing {

inline qsde::SystemModel plain_model(ComplexMatrix h, std::vector<ComplexMatrix> channels) {
  qsde::SystemModel m;
  const Index d = h.rows();
  m.hamiltonian = std::move(h);
  m.channels = std::move(channels);
  m.drive.amplitudes.assign(m.channels.size(), Complex{});
  m.detection = qsde::DetectionSpec::diagonal_phase(0.0);
  m.frame = qsde::zero(d);
  return m;
}

inline ComplexMatrix random_unitary(std::mt19937_64& rng, Index n) {
  const Eigen::MatrixXcd m = random_matrix(rng, n);
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(m);
  return qr.householderQ();
}

inline qsde::SystemModel random_model(std::mt19937_64& rng, Index d, std::size_t nch) {
  std::vector<ComplexMatrix> ls;
  for (std::size_t j = 0; j < nch; ++j) ls.push_back(random_matrix(rng, d, 0.5));
  qsde::SystemModel m = plain_model(random_hermitian(rng, d), ls);
  m.frame = random_hermitian(rng, d, 2.0);
  std::normal_distribution<double> g;
  for (auto& a : m.drive.amplitudes) a = Complex(g(rng), g(rng));
  m.drive.carrier = 3.0 * g(rng);
  m.detection =
      qsde::DetectionSpec::constant_unitary(random_unitary(rng, static_cast<Index>(nch)));
  return m;
}

// Driven two-level atom written out by hand, independent of the mollow module.
inline qsde::SystemModel mollow_like(double omega, double omega0, double nu,
                                     const std::vector<Complex>& alpha,
                                     const std::vector<Complex>& lambda) {
  std::vector<ComplexMatrix> ls;
  for (const auto& a : alpha) ls.push_back(a * sigma_minus());
  qsde::SystemModel m = plain_model(omega * diag2(1.0, 0.0), ls);
  m.drive.amplitudes = lambda;
  m.drive.carrier = omega0;
  m.detection = qsde::DetectionSpec::diagonal_phase(nu);
  m.frame = omega0 * diag2(1.0, 0.0);
  return m;
}

}  // namespace testing
