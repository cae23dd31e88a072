// SPDX-License-Identifier: Apache-2.0
#include "autosize/prox.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

#include "autosize/errors.hpp"
#include "autosize/worker_pool.hpp"

namespace autosize::prox {

std::string to_string(Norm norm) { return norm == Norm::L21 ? "l21" : "linf1"; }

Norm parse_norm(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "l21" || lower == "l2,1") return Norm::L21;
  if (lower == "linf1" || lower == "linf,1") return Norm::LInf1;
  throw InvalidInput("unknown regularizer '" + std::string(text) + "' (expected l21 or linf1)");
}

RegularizerKind::RegularizerKind(Norm n, double l) : norm(n), lambda(l) {
  if (!std::isfinite(l) || l < 0.0) {
    throw InvalidInput("regularizer strength must be finite and non-negative");
  }
}

ProxStepSize::ProxStepSize(double eta_lambda) : eta_lambda_(eta_lambda) {
  if (!std::isfinite(eta_lambda) || eta_lambda < 0.0) {
    throw InvalidInput("prox step eta*lambda must be finite and non-negative");
  }
}

namespace {

template <typename T>
void require_finite(std::span<const T> v, const char* what) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw InvalidInput(std::string(what) + ": non-finite entry at index " + std::to_string(i));
    }
  }
}

template <typename Fn>
void elementwise(std::size_t n, const scan::ScanOptions& options, scan::PassCounter* counter,
                 Fn&& fn) {
  if (n >= options.serial_threshold && options.workers > 1) {
    shared_pool(options.workers).run(n, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) fn(i);
    });
  } else {
    for (std::size_t i = 0; i < n; ++i) fn(i);
  }
  if (counter) counter->add();
}

// The shape of |v| sorted in decreasing order, cut from the top with area
// `budget`. `decrease[i]` is how far the i-th largest magnitude drops.
struct SortedCut {
  scan::IndexedVector<double> sorted;
  std::vector<double> decrease;
  bool exhausted = false;  // budget >= ||v||_1
};

template <typename T>
SortedCut cut_from_top(std::span<const T> v, double budget, const scan::ScanOptions& options,
                       scan::PassCounter* counter) {
  const std::size_t n = v.size();
  std::vector<double> magnitude(n);
  elementwise(n, options, counter, [&](std::size_t i) { magnitude[i] = std::abs(static_cast<double>(v[i])); });

  SortedCut cut;
  cut.sorted = scan::sort_desc_with_permutation(std::span<const double>(magnitude), options, counter);
  const auto& s = cut.sorted.values;

  // Layer i (1-based) of the stacked view is i wide and s_i - s_{i+1} high.
  std::vector<double> layer_area(n);
  elementwise(n, options, counter, [&](std::size_t i) {
    const double next = i + 1 < n ? s[i + 1] : 0.0;
    layer_area[i] = static_cast<double>(i + 1) * (s[i] - next);
  });
  const std::vector<double> cumulative = scan::prefix_sum(std::span<const double>(layer_area), options, counter);

  cut.exhausted = budget >= cumulative.back();

  // Height removed from layer i: the part of the budget falling in
  // [c_{i-1}, c_i], spread over its width. c_0 = 0.
  std::vector<double> layer_cut(n);
  elementwise(n, options, counter, [&](std::size_t i) {
    const double lo = i == 0 ? 0.0 : cumulative[i - 1];
    const double hi = std::max(lo, cumulative[i]);
    const double clipped = std::min(std::max(budget, lo), hi);
    layer_cut[i] = (clipped - lo) / static_cast<double>(i + 1);
  });
  cut.decrease = scan::suffix_sum(std::span<const double>(layer_cut), options, counter);
  return cut;
}

template <typename T>
std::vector<T> restore(const std::vector<double>& sorted_values, std::span<const std::size_t> permutation,
                       std::span<const T> original, const scan::ScanOptions& options,
                       scan::PassCounter* counter) {
  std::vector<double> unsorted = scan::apply_inverse_permutation(std::span<const double>(sorted_values), permutation);
  if (counter) counter->add();
  std::vector<T> out(original.size());
  elementwise(original.size(), options, counter, [&](std::size_t i) {
    const double magnitude = unsorted[i];
    out[i] = magnitude == 0.0 ? T{0} : static_cast<T>(std::signbit(original[i]) ? -magnitude : magnitude);
  });
  return out;
}

}  // namespace

template <std::floating_point T>
std::vector<T> linf_prox_row(std::span<const T> v, ProxStepSize step,
                             const scan::ScanOptions& options, scan::PassCounter* counter) {
  require_finite(v, "linf_prox_row");
  const double budget = step.value();
  if (v.empty() || budget == 0.0) return {v.begin(), v.end()};

  const SortedCut cut = cut_from_top(v, budget, options, counter);
  if (cut.exhausted) return std::vector<T>(v.size(), T{0});

  const auto& s = cut.sorted.values;
  std::vector<double> remaining(s.size());
  elementwise(s.size(), options, counter,
              [&](std::size_t i) { remaining[i] = std::max(0.0, s[i] - cut.decrease[i]); });
  return restore(remaining, cut.sorted.permutation, v, options, counter);
}

template <std::floating_point T>
std::vector<T> l1_ball_project(std::span<const T> v, double radius, const scan::ScanOptions& options,
                               scan::PassCounter* counter) {
  if (!std::isfinite(radius) || radius < 0.0) {
    throw InvalidInput("l1_ball_project: radius must be finite and non-negative");
  }
  require_finite(v, "l1_ball_project");
  if (v.empty()) return {};
  if (radius == 0.0) return std::vector<T>(v.size(), T{0});

  const SortedCut cut = cut_from_top(v, radius, options, counter);
  if (cut.exhausted) return {v.begin(), v.end()};
  return restore(cut.decrease, cut.sorted.permutation, v, options, counter);
}

template <std::floating_point T>
std::vector<T> linf_prox_row_serial(std::span<const T> v, ProxStepSize step) {
  require_finite(v, "linf_prox_row_serial");
  const double budget = step.value();
  const std::size_t n = v.size();
  if (n == 0 || budget == 0.0) return {v.begin(), v.end()};

  std::vector<double> a(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = std::abs(static_cast<double>(v[i]));
    total += a[i];
  }
  if (budget >= total) return std::vector<T>(n, T{0});

  // Find the threshold theta of the l1-ball projection of |v| with radius
  // `budget` by randomized pivoting; every kept magnitude is then min(|v|, theta).
  std::vector<std::size_t> candidates(n);
  for (std::size_t i = 0; i < n; ++i) candidates[i] = i;
  std::vector<std::size_t> greater;
  std::vector<std::size_t> lesser;
  std::minstd_rand rng(0x5eed);
  double kept_sum = 0.0;
  std::size_t kept_count = 0;
  while (!candidates.empty()) {
    const std::size_t pick = candidates[rng() % candidates.size()];
    const double pivot = a[pick];
    greater.clear();
    lesser.clear();
    double greater_sum = 0.0;
    for (std::size_t i : candidates) {
      if (a[i] >= pivot) {
        greater.push_back(i);
        greater_sum += a[i];
      } else {
        lesser.push_back(i);
      }
    }
    const double sum = kept_sum + greater_sum;
    const auto count = kept_count + greater.size();
    if (sum - static_cast<double>(count) * pivot < budget) {
      kept_sum = sum;
      kept_count = count;
      candidates.swap(lesser);
    } else {
      greater.erase(std::find(greater.begin(), greater.end(), pick));
      candidates.swap(greater);
    }
  }
  const double theta = (kept_sum - budget) / static_cast<double>(kept_count);

  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double magnitude = std::min(a[i], theta);
    out[i] = magnitude <= 0.0 ? T{0} : static_cast<T>(std::signbit(v[i]) ? -magnitude : magnitude);
  }
  return out;
}

template <std::floating_point T>
std::vector<T> l21_prox_row(std::span<const T> v, ProxStepSize step) {
  require_finite(v, "l21_prox_row");
  double sq = 0.0;
  for (T x : v) sq += static_cast<double>(x) * static_cast<double>(x);
  const double norm = std::sqrt(sq);
  const double budget = step.value();
  if (norm <= budget) return std::vector<T>(v.size(), T{0});
  const double scale = 1.0 - budget / norm;
  std::vector<T> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<T>(static_cast<double>(v[i]) * scale);
  return out;
}

template <std::floating_point T>
void prox_step_in_place(BasicTensor<T>& w, const RegularizerKind& reg, ProxStepSize step,
                        const scan::ScanOptions& options) {
  require_rank2(w, "prox_step_matrix");
  if (step.value() == 0.0) return;
  const scan::ScanOptions row_options{1, options.serial_threshold};
  auto run_rows = [&](std::size_t b, std::size_t e) {
    for (std::size_t r = b; r < e; ++r) {
      auto row = w.row(r);
      std::span<const T> in(row.data(), row.size());
      std::vector<T> out = reg.norm == Norm::L21 ? l21_prox_row(in, step) : linf_prox_row(in, step, row_options);
      std::copy(out.begin(), out.end(), row.begin());
    }
  };
  if (options.workers > 1 && w.rows() > 1) {
    shared_pool(options.workers).run(w.rows(), run_rows);
  } else {
    run_rows(0, w.rows());
  }
}

template <std::floating_point T>
BasicTensor<T> prox_step_matrix(const BasicTensor<T>& w, const RegularizerKind& reg, ProxStepSize step,
                                const scan::ScanOptions& options) {
  BasicTensor<T> out = w;
  prox_step_in_place(out, reg, step, options);
  return out;
}

template <std::floating_point T>
double regularizer_value(const BasicTensor<T>& w, const RegularizerKind& reg) {
  require_rank2(w, "regularizer_value");
  if (!w.all_finite()) throw InvalidInput("regularizer_value: non-finite entry");
  double total = 0.0;
  for (std::size_t r = 0; r < w.rows(); ++r) {
    double acc = 0.0;
    for (T x : w.row(r)) {
      const double a = std::abs(static_cast<double>(x));
      acc = reg.norm == Norm::L21 ? acc + a * a : std::max(acc, a);
    }
    total += reg.norm == Norm::L21 ? std::sqrt(acc) : acc;
  }
  return total;
}

#define AUTOSIZE_INSTANTIATE_PROX(T)                                                                  \
  template std::vector<T> linf_prox_row<T>(std::span<const T>, ProxStepSize, const scan::ScanOptions&, \
                                           scan::PassCounter*);                                       \
  template std::vector<T> linf_prox_row_serial<T>(std::span<const T>, ProxStepSize);                  \
  template std::vector<T> l1_ball_project<T>(std::span<const T>, double, const scan::ScanOptions&,     \
                                             scan::PassCounter*);                                     \
  template std::vector<T> l21_prox_row<T>(std::span<const T>, ProxStepSize);                          \
  template BasicTensor<T> prox_step_matrix<T>(const BasicTensor<T>&, const RegularizerKind&,          \
                                              ProxStepSize, const scan::ScanOptions&);                \
  template void prox_step_in_place<T>(BasicTensor<T>&, const RegularizerKind&, ProxStepSize,          \
                                      const scan::ScanOptions&);                                      \
  template double regularizer_value<T>(const BasicTensor<T>&, const RegularizerKind&);

AUTOSIZE_INSTANTIATE_PROX(float)
AUTOSIZE_INSTANTIATE_PROX(double)
#undef AUTOSIZE_INSTANTIATE_PROX

}  // namespace autosize::prox
