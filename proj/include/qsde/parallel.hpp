#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace qsde {

/// QSDE_WORKERS if set to a positive integer, else hardware concurrency.
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) on a static block partition. Results must be
/// written by index so the outcome does not depend on the worker count.
/// The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t workers = 0);

/// Fixed-shape pairwise reduction; the tree depends only on the length.
template <typename T, typename Add>
T pairwise_reduce(std::span<const T> values, T zero_value, Add add) {
  if (values.empty()) return zero_value;
  if (values.size() == 1) return values[0];
  if (values.size() <= 8) {
    T acc = values[0];
    for (std::size_t i = 1; i < values.size(); ++i) acc = add(acc, values[i]);
    return acc;
  }
  const std::size_t half = values.size() / 2;
  return add(pairwise_reduce(values.subspan(0, half), zero_value, add),
             pairwise_reduce(values.subspan(half), zero_value, add));
}

double pairwise_sum(std::span<const double> values);

}  // namespace qsde
