// SPDX-License-Identifier: Apache-2.0
//
// Data-parallel primitives behind the parallel l-infinity proximal step:
// descending sort with permutation tracking, inclusive prefix and suffix sums,
// and inverse permutation.
#pragma once

#include <atomic>
#include <concepts>
#include <cstddef>
#include <span>
#include <vector>

namespace autosize::scan {

struct ScanOptions {
  /// Threads used by the tree scan and the merge sort. Results do not depend on it.
  std::size_t workers = 1;
  /// Inputs shorter than this take the single-sweep serial path.
  std::size_t serial_threshold = 4096;
};

/// Counts full sweeps over the data. Shared across threads.
class PassCounter {
 public:
  void add(std::size_t n = 1) { passes_.fetch_add(n, std::memory_order_relaxed); }
  std::size_t count() const { return passes_.load(std::memory_order_relaxed); }
  void reset() { passes_.store(0, std::memory_order_relaxed); }

 private:
  std::atomic<std::size_t> passes_{0};
};

template <std::floating_point T>
struct IndexedVector {
  std::vector<T> values;
  /// permutation[i] is the original index of values[i].
  std::vector<std::size_t> permutation;
};

/// Stable descending sort; ties keep ascending original index.
/// Throws InvalidInput for empty or non-finite input.
template <std::floating_point T>
IndexedVector<T> sort_desc_with_permutation(std::span<const T> v, const ScanOptions& options = {},
                                            PassCounter* counter = nullptr);

/// Inclusive prefix sum, accumulated in double.
template <std::floating_point T>
std::vector<T> prefix_sum(std::span<const T> v, const ScanOptions& options = {},
                          PassCounter* counter = nullptr);

/// Inclusive suffix sum: out[i] = sum of v[i..n).
template <std::floating_point T>
std::vector<T> suffix_sum(std::span<const T> v, const ScanOptions& options = {},
                          PassCounter* counter = nullptr);

/// out[permutation[i]] = values[i]. Throws InvalidInput on length mismatch or non-bijection.
template <typename T>
std::vector<T> apply_inverse_permutation(std::span<const T> values,
                                         std::span<const std::size_t> permutation);

// Convenience overloads for braced lists and vectors.
template <std::floating_point T>
IndexedVector<T> sort_desc_with_permutation(const std::vector<T>& v, const ScanOptions& options = {},
                                            PassCounter* counter = nullptr) {
  return sort_desc_with_permutation(std::span<const T>(v), options, counter);
}
template <std::floating_point T>
std::vector<T> prefix_sum(const std::vector<T>& v, const ScanOptions& options = {},
                          PassCounter* counter = nullptr) {
  return prefix_sum(std::span<const T>(v), options, counter);
}
template <std::floating_point T>
std::vector<T> suffix_sum(const std::vector<T>& v, const ScanOptions& options = {},
                          PassCounter* counter = nullptr) {
  return suffix_sum(std::span<const T>(v), options, counter);
}
template <typename T>
std::vector<T> apply_inverse_permutation(const std::vector<T>& values,
                                         const std::vector<std::size_t>& permutation) {
  return apply_inverse_permutation(std::span<const T>(values),
                                   std::span<const std::size_t>(permutation));
}

}  // namespace autosize::scan
