#pragma once

// Counter-based Gaussian noise. Every increment is addressable by
// (seed, step, channel), so paths do not depend on draw order or threads.

#include <array>
#include <cstdint>
#include <vector>

#include "qsde/linalg.hpp"

namespace qsde {

/// Philox4x32-10 block function.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

std::uint64_t splitmix64(std::uint64_t x);

/// Independent per-trajectory seed derived from an ensemble base seed.
std::uint64_t trajectory_seed(std::uint64_t base_seed, std::uint64_t index);

/// Two standard normals for (seed, step, pair, stream).
std::array<double, 2> normal_pair(std::uint64_t seed, std::uint64_t step,
                                  std::uint32_t pair, std::uint32_t stream = 0);

/// Uniform in (0, 1) for (seed, index, stream).
double uniform01(std::uint64_t seed, std::uint64_t index, std::uint32_t stream);

struct WienerPath {
  double dt = 0.0;
  std::size_t nsteps = 0;
  std::size_t nchannels = 0;
  std::uint64_t seed = 0;
  std::vector<double> increments;  // row n holds W_j(t_{n+1}) - W_j(t_n)

  double increment(std::size_t n, std::size_t j) const {
    return increments[n * nchannels + j];
  }

  /// Path on the grid dt * factor: sums of `factor` consecutive increments.
  WienerPath coarsened(std::size_t factor) const;

  /// Cumulative W_j(t_n), n = 0..nsteps.
  std::vector<double> cumulative(std::size_t channel) const;
};

WienerPath generate_wiener(std::uint64_t seed, double dt, std::size_t nsteps,
                           std::size_t nchannels);

}  // namespace qsde
