// SPDX-License-Identifier: Apache-2.0
#include "autosize/scan.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "autosize/errors.hpp"
#include "autosize/worker_pool.hpp"

namespace autosize::scan {

namespace {

// Below this many independent node updates a tree level runs on the caller.
constexpr std::size_t kLevelGrain = 2048;

std::size_t ceil_log2(std::size_t n) { return n <= 1 ? 0 : std::bit_width(n - 1); }

void count_pass(PassCounter* counter, std::size_t n = 1) {
  if (counter) counter->add(n);
}

template <typename Fn>
void parallel_range(WorkerPool& pool, std::size_t count, Fn&& fn) {
  if (count < kLevelGrain || pool.workers() == 1) {
    fn(std::size_t{0}, count);
    return;
  }
  pool.run(count, [&](std::size_t b, std::size_t e) { fn(b, e); });
}

template <typename T>
void require_finite(std::span<const T> v, const char* what) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw InvalidInput(std::string(what) + ": non-finite entry at index " + std::to_string(i));
    }
  }
}

// Up-sweep / down-sweep exclusive scan over a power-of-two buffer. Each tree
// level is one pass; the node arithmetic is the same for any worker count.
void tree_exclusive_scan(std::vector<double>& a, WorkerPool& pool, PassCounter* counter) {
  const std::size_t m = a.size();
  for (std::size_t stride = 1; stride < m; stride *= 2) {
    const std::size_t nodes = m / (2 * stride);
    parallel_range(pool, nodes, [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) {
        const std::size_t i = (k + 1) * 2 * stride - 1;
        a[i] += a[i - stride];
      }
    });
    count_pass(counter);
  }
  a[m - 1] = 0.0;
  for (std::size_t stride = m / 2; stride >= 1; stride /= 2) {
    const std::size_t nodes = m / (2 * stride);
    parallel_range(pool, nodes, [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) {
        const std::size_t i = (k + 1) * 2 * stride - 1;
        const double left = a[i - stride];
        a[i - stride] = a[i];
        a[i] += left;
      }
    });
    count_pass(counter);
  }
}

template <std::floating_point T>
std::vector<T> inclusive_scan(std::span<const T> v, bool from_right, const ScanOptions& options,
                              PassCounter* counter) {
  const std::size_t n = v.size();
  std::vector<T> out(n);
  if (n == 0) return out;

  if (n < options.serial_threshold) {
    double acc = 0.0;
    if (from_right) {
      for (std::size_t i = n; i-- > 0;) {
        acc += static_cast<double>(v[i]);
        out[i] = static_cast<T>(acc);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        acc += static_cast<double>(v[i]);
        out[i] = static_cast<T>(acc);
      }
    }
    count_pass(counter);
    return out;
  }

  WorkerPool& pool = shared_pool(options.workers);
  const std::size_t m = std::bit_ceil(n);
  std::vector<double> a(m, 0.0);
  auto source = [&](std::size_t i) { return from_right ? v[n - 1 - i] : v[i]; };
  parallel_range(pool, n, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) a[i] = static_cast<double>(source(i));
  });
  count_pass(counter);

  tree_exclusive_scan(a, pool, counter);

  parallel_range(pool, n, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const double inclusive = a[i] + static_cast<double>(source(i));
      out[from_right ? n - 1 - i : i] = static_cast<T>(inclusive);
    }
  });
  count_pass(counter);
  return out;
}

}  // namespace

template <std::floating_point T>
IndexedVector<T> sort_desc_with_permutation(std::span<const T> v, const ScanOptions& options,
                                            PassCounter* counter) {
  if (v.empty()) throw InvalidInput("sort_desc_with_permutation: empty input");
  require_finite(v, "sort_desc_with_permutation");

  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  auto desc = [&](std::size_t a, std::size_t b) { return v[a] > v[b]; };

  const std::size_t workers = std::max<std::size_t>(1, options.workers);
  if (n < options.serial_threshold || workers == 1) {
    std::stable_sort(idx.begin(), idx.end(), desc);
    count_pass(counter, std::max<std::size_t>(1, ceil_log2(n)));
  } else {
    // Chunked stable sort, then pairwise merge rounds. std::merge takes from
    // the left run on ties, so ascending-index order among equals survives.
    WorkerPool& pool = shared_pool(workers);
    const std::size_t chunks = std::min(workers, n);
    std::vector<std::size_t> bounds(chunks + 1);
    for (std::size_t c = 0; c <= chunks; ++c) bounds[c] = c * n / chunks;
    pool.run(chunks, [&](std::size_t b, std::size_t e) {
      for (std::size_t c = b; c < e; ++c) {
        std::stable_sort(idx.begin() + bounds[c], idx.begin() + bounds[c + 1], desc);
      }
    });
    count_pass(counter, std::max<std::size_t>(1, ceil_log2(bounds[1] - bounds[0])));

    std::vector<std::size_t> scratch(n);
    for (std::size_t width = 1; width < chunks; width *= 2) {
      const std::size_t merges = (chunks + 2 * width - 1) / (2 * width);
      pool.run(merges, [&](std::size_t b, std::size_t e) {
        for (std::size_t m = b; m < e; ++m) {
          const std::size_t lo = bounds[m * 2 * width];
          const std::size_t mid = bounds[std::min(chunks, m * 2 * width + width)];
          const std::size_t hi = bounds[std::min(chunks, m * 2 * width + 2 * width)];
          std::merge(idx.begin() + lo, idx.begin() + mid, idx.begin() + mid, idx.begin() + hi,
                     scratch.begin() + lo, desc);
        }
      });
      idx.swap(scratch);
      count_pass(counter);
    }
  }

  IndexedVector<T> out;
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.values[i] = v[idx[i]];
  out.permutation = std::move(idx);
  return out;
}

template <std::floating_point T>
std::vector<T> prefix_sum(std::span<const T> v, const ScanOptions& options, PassCounter* counter) {
  require_finite(v, "prefix_sum");
  return inclusive_scan(v, false, options, counter);
}

template <std::floating_point T>
std::vector<T> suffix_sum(std::span<const T> v, const ScanOptions& options, PassCounter* counter) {
  require_finite(v, "suffix_sum");
  return inclusive_scan(v, true, options, counter);
}

template <typename T>
std::vector<T> apply_inverse_permutation(std::span<const T> values,
                                         std::span<const std::size_t> permutation) {
  const std::size_t n = values.size();
  if (permutation.size() != n) {
    throw InvalidInput("apply_inverse_permutation: " + std::to_string(n) + " values but " +
                       std::to_string(permutation.size()) + " permutation entries");
  }
  std::vector<T> out(n);
  std::vector<bool> seen(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t p = permutation[i];
    if (p >= n || seen[p]) {
      throw InvalidInput("apply_inverse_permutation: permutation is not a bijection (entry " +
                         std::to_string(i) + " = " + std::to_string(p) + ")");
    }
    seen[p] = true;
    out[p] = values[i];
  }
  return out;
}

#define AUTOSIZE_INSTANTIATE_SCAN(T)                                                              \
  template IndexedVector<T> sort_desc_with_permutation<T>(std::span<const T>, const ScanOptions&, \
                                                          PassCounter*);                          \
  template std::vector<T> prefix_sum<T>(std::span<const T>, const ScanOptions&, PassCounter*);    \
  template std::vector<T> suffix_sum<T>(std::span<const T>, const ScanOptions&, PassCounter*);    \
  template std::vector<T> apply_inverse_permutation<T>(std::span<const T>,                        \
                                                       std::span<const std::size_t>);

AUTOSIZE_INSTANTIATE_SCAN(float)
AUTOSIZE_INSTANTIATE_SCAN(double)
#undef AUTOSIZE_INSTANTIATE_SCAN

}  // namespace autosize::scan
