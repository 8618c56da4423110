#pragma once

#include <functional>
#include <span>

#include "attribex/common.hpp"

namespace attribex {

struct LinearModel {
  Vector w;
  double b = 0.0;
  double c = 1.0;
  double train_loss = 0.0;  // sum of hinge losses on the training set
  double objective = 0.0;   // 0.5 ||w||^2 + c * train_loss
  double duality_gap = 0.0;
  int iterations = 0;
  bool converged = false;
  bool degenerate = false;

  double margin(const Eigen::Ref<const Vector>& x) const { return w.dot(x) + b; }
};

struct SvmOptions {
  double c = 1.0;
  // Stop once (primal - dual) <= tol * primal.
  double tol = 1e-6;
  long max_iter = 0;  // 0 = 200 * examples + 100000
};

// Supplies kernel row i (x_i . x_j for all j) of the training set.
using KernelRowFn = std::function<void(std::size_t i, std::span<double> out)>;

/// Minimizes 0.5 ||w||^2 + c * sum_i max(0, 1 - y_i (w . x_i + b)) with an
/// unregularized bias, by SMO on the dual with maximal-violating-pair
/// selection. The bias is the midpoint of the exact primal minimizer in b for
/// the final w. Labels are +1 / -1.
LinearModel train_linear_svm(const Matrix& x, std::span<const int> y, const SvmOptions& options,
                             const KernelRowFn& kernel_row = {});
LinearModel train_linear_svm(const Matrix& positives, const Matrix& negatives, double c);

double svm_objective(const Vector& w, double b, const Matrix& x, std::span<const int> y, double c);
double hinge_loss(const Vector& w, double b, const Matrix& x, std::span<const int> y);

// argmin_b of the hinge sum for fixed scores s_i = w . x_i (midpoint of the
// flat optimal interval).
double optimal_bias(std::span<const double> scores, std::span<const int> y);

}  // namespace attribex
