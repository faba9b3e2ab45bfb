#include "qsde/wiener.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qsde {

namespace {

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

// 53-bit uniform strictly inside (0, 1).
inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t x = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return (static_cast<double>(x) + 0.5) * 0x1.0p-53;
}

std::array<std::uint32_t, 4> block(std::uint64_t seed, std::uint64_t index,
                                   std::uint32_t word2, std::uint32_t word3) {
  return philox4x32({static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                     word2, word3},
                    {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k) {
  constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
  constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(m0, c[0], hi0, lo0);
    mulhilo(m1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += w0;
    k[1] += w1;
  }
  return c;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t trajectory_seed(std::uint64_t base_seed, std::uint64_t index) {
  return splitmix64(splitmix64(base_seed) ^ splitmix64(index + 0x632BE59BD9B4E019ull));
}

std::array<double, 2> normal_pair(std::uint64_t seed, std::uint64_t step, std::uint32_t pair,
                                  std::uint32_t stream) {
  const auto r = block(seed, step, pair, stream);
  const double u1 = to_unit(r[0], r[1]);
  const double u2 = to_unit(r[2], r[3]);
  const double rad = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {rad * std::cos(angle), rad * std::sin(angle)};
}

double uniform01(std::uint64_t seed, std::uint64_t index, std::uint32_t stream) {
  const auto r = block(seed, index, 0xFFFFFFFFu, stream);
  return to_unit(r[0], r[1]);
}

WienerPath generate_wiener(std::uint64_t seed, double dt, std::size_t nsteps,
                           std::size_t nchannels) {
  if (!(dt > 0.0)) throw std::invalid_argument("generate_wiener: dt must be > 0");
  if (nsteps == 0) throw std::invalid_argument("generate_wiener: nsteps must be >= 1");
  WienerPath path;
  path.dt = dt;
  path.nsteps = nsteps;
  path.nchannels = nchannels;
  path.seed = seed;
  path.increments.resize(nsteps * nchannels);
  const double scale = std::sqrt(dt);
  for (std::size_t n = 0; n < nsteps; ++n) {
    for (std::size_t j = 0; j < nchannels; j += 2) {
      const auto z = normal_pair(seed, n, static_cast<std::uint32_t>(j / 2));
      path.increments[n * nchannels + j] = scale * z[0];
      if (j + 1 < nchannels) path.increments[n * nchannels + j + 1] = scale * z[1];
    }
  }
  return path;
}

WienerPath WienerPath::coarsened(std::size_t factor) const {
  if (factor == 0 || nsteps % factor != 0) {
    throw std::invalid_argument("WienerPath::coarsened: factor must divide nsteps");
  }
  WienerPath out;
  out.dt = dt * static_cast<double>(factor);
  out.nsteps = nsteps / factor;
  out.nchannels = nchannels;
  out.seed = seed;
  out.increments.assign(out.nsteps * nchannels, 0.0);
  for (std::size_t n = 0; n < out.nsteps; ++n) {
    for (std::size_t j = 0; j < nchannels; ++j) {
      double s = 0.0;
      for (std::size_t m = 0; m < factor; ++m) s += increment(n * factor + m, j);
      out.increments[n * nchannels + j] = s;
    }
  }
  return out;
}

std::vector<double> WienerPath::cumulative(std::size_t channel) const {
  std::vector<double> w(nsteps + 1, 0.0);
  for (std::size_t n = 0; n < nsteps; ++n) w[n + 1] = w[n] + increment(n, channel);
  return w;
}

}  // namespace qsde
