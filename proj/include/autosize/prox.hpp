// SPDX-License-Identifier: Apache-2.0
//
// Proximal operators for the group regularizers used by auto-sizing.
//
//   l2,1:  R(W) = sum_i ||W_i||_2
//   linf,1: R(W) = sum_i max_j |W_ij|
//
// Each stored rank-2 parameter is treated as a set of row groups. A prox step
// with budget eta*lambda replaces every row v by
//   argmin_v' 1/(2 eta) ||v - v'||^2 + lambda * r(v').
#pragma once

#include <concepts>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "autosize/scan.hpp"
#include "autosize/tensor.hpp"

namespace autosize::prox {

enum class Norm { L21, LInf1 };

std::string to_string(Norm norm);
/// Accepts "l21" / "linf1" (case-insensitive). Throws InvalidInput otherwise.
Norm parse_norm(std::string_view text);

/// Which group norm and how strongly it is weighted.
struct RegularizerKind {
  Norm norm = Norm::L21;
  double lambda = 0.0;

  RegularizerKind() = default;
  RegularizerKind(Norm n, double l);
};

/// The composite eta * lambda; units of parameter magnitude.
class ProxStepSize {
 public:
  ProxStepSize() = default;
  explicit ProxStepSize(double eta_lambda);
  static ProxStepSize from(double learning_rate, double lambda) {
    return ProxStepSize(learning_rate * lambda);
  }
  double value() const { return eta_lambda_; }

 private:
  double eta_lambda_ = 0.0;
};

/// Sort-and-scan l-infinity prox: the largest magnitudes are cut down until the
/// total decrease equals min(eta*lambda, ||v||_1). Signs and order are kept.
template <std::floating_point T>
std::vector<T> linf_prox_row(std::span<const T> v, ProxStepSize step,
                             const scan::ScanOptions& options = {},
                             scan::PassCounter* counter = nullptr);

/// Randomized-pivot selection variant, expected O(n). Used as a reference.
template <std::floating_point T>
std::vector<T> linf_prox_row_serial(std::span<const T> v, ProxStepSize step);

/// Euclidean projection onto the l1 ball of the given radius, read off the
/// same sorted cut that drives linf_prox_row.
template <std::floating_point T>
std::vector<T> l1_ball_project(std::span<const T> v, double radius,
                               const scan::ScanOptions& options = {},
                               scan::PassCounter* counter = nullptr);

/// Group soft threshold. Rows with ||v||_2 <= eta*lambda become exact zeros.
template <std::floating_point T>
std::vector<T> l21_prox_row(std::span<const T> v, ProxStepSize step);

/// Row-wise prox of a rank-2 tensor. `options.workers` threads split the rows.
template <std::floating_point T>
BasicTensor<T> prox_step_matrix(const BasicTensor<T>& w, const RegularizerKind& reg,
                                ProxStepSize step, const scan::ScanOptions& options = {});

/// In-place form used by the trainer.
template <std::floating_point T>
void prox_step_in_place(BasicTensor<T>& w, const RegularizerKind& reg, ProxStepSize step,
                        const scan::ScanOptions& options = {});

/// The l2,1 or linf,1 norm of w (not multiplied by lambda).
template <std::floating_point T>
double regularizer_value(const BasicTensor<T>& w, const RegularizerKind& reg);

// Vector convenience overloads.
template <std::floating_point T>
std::vector<T> linf_prox_row(const std::vector<T>& v, ProxStepSize step,
                             const scan::ScanOptions& options = {},
                             scan::PassCounter* counter = nullptr) {
  return linf_prox_row(std::span<const T>(v), step, options, counter);
}
template <std::floating_point T>
std::vector<T> linf_prox_row_serial(const std::vector<T>& v, ProxStepSize step) {
  return linf_prox_row_serial(std::span<const T>(v), step);
}
template <std::floating_point T>
std::vector<T> l1_ball_project(const std::vector<T>& v, double radius,
                               const scan::ScanOptions& options = {},
                               scan::PassCounter* counter = nullptr) {
  return l1_ball_project(std::span<const T>(v), radius, options, counter);
}
template <std::floating_point T>
std::vector<T> l21_prox_row(const std::vector<T>& v, ProxStepSize step) {
  return l21_prox_row(std::span<const T>(v), step);
}

}  // namespace autosize::prox
