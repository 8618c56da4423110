#include "attribex/svm.hpp"

#include <algorithm>
#include <limits>
#include <vector>

#include <fmt/format.h>

#include "attribex/kernels.hpp"

namespace attribex {

namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_problem(const Matrix& x, std::span<const int> y, double c) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) {
    throw Error(ErrorKind::kDimensionMismatch, fmt::format("{} examples but {} labels", x.rows(), y.size()));
  }
  if (!(c > 0.0)) throw Error(ErrorKind::kInvalidArgument, "SVM c must be > 0");
  std::size_t pos = 0;
  for (int label : y) {
    if (label != 1 && label != -1) throw Error(ErrorKind::kInvalidArgument, "SVM labels must be +1 or -1");
    pos += label == 1 ? 1 : 0;
  }
  if (pos == 0 || pos == y.size()) throw Error(ErrorKind::kEmptyClass, "SVM needs both positive and negative examples");
}

bool all_rows_identical(const Matrix& x) {
  for (Eigen::Index i = 1; i < x.rows(); ++i) {
    if (x.row(i) != x.row(0)) return false;
  }
  return true;
}

}  // namespace

double hinge_loss(const Vector& w, double b, const Matrix& x, std::span<const int> y) {
  double loss = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    loss += std::max(0.0, 1.0 - y[static_cast<std::size_t>(i)] * (x.row(i).dot(w) + b));
  }
  return loss;
}

double svm_objective(const Vector& w, double b, const Matrix& x, std::span<const int> y, double c) {
  return 0.5 * w.squaredNorm() + c * hinge_loss(w, b, x, y);
}

double optimal_bias(std::span<const double> scores, std::span<const int> y) {
  if (scores.size() != y.size()) throw Error(ErrorKind::kDimensionMismatch, "optimal_bias: size mismatch");
  std::vector<double> breakpoints;
  breakpoints.reserve(scores.size());
  std::size_t positives = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (y[i] == 1) {
      breakpoints.push_back(1.0 - scores[i]);
      ++positives;
    } else {
      breakpoints.push_back(-1.0 - scores[i]);
    }
  }
  if (positives == 0 || positives == scores.size()) {
    throw Error(ErrorKind::kEmptyClass, "optimal_bias needs both classes");
  }
  // The hinge sum has slope -positives + (breakpoints passed), so it is flat
  // between the positives-th and (positives+1)-th smallest breakpoints.
  std::sort(breakpoints.begin(), breakpoints.end());
  return 0.5 * (breakpoints[positives - 1] + breakpoints[positives]);
}

LinearModel train_linear_svm(const Matrix& x, std::span<const int> y, const SvmOptions& options,
                             const KernelRowFn& kernel_row) {
  check_problem(x, y, options.c);
  const auto m = static_cast<std::size_t>(x.rows());
  const double c = options.c;

  LinearModel model;
  model.c = c;
  if (all_rows_identical(x)) {
    model.w = Vector::Zero(x.cols());
    std::vector<double> zeros(m, 0.0);
    model.b = optimal_bias(zeros, y);
    model.train_loss = hinge_loss(model.w, model.b, x, y);
    model.objective = c * model.train_loss;
    model.degenerate = true;
    model.converged = true;
    return model;
  }

  KernelRowFn row_fn = kernel_row;
  Matrix gram;
  if (!row_fn) {
    if (m <= 3000) {
      kernels::omp::gram(x, gram);
      row_fn = [&gram](std::size_t i, std::span<double> out) {
        const auto r = gram.row(static_cast<Eigen::Index>(i));
        std::copy(r.data(), r.data() + r.size(), out.begin());
      };
    } else {
      row_fn = [&x](std::size_t i, std::span<double> out) {
        for (Eigen::Index j = 0; j < x.rows(); ++j) out[static_cast<std::size_t>(j)] = x.row(static_cast<Eigen::Index>(i)).dot(x.row(j));
      };
    }
  }

  std::vector<double> diag(m);
  for (std::size_t i = 0; i < m; ++i) diag[i] = x.row(static_cast<Eigen::Index>(i)).squaredNorm();
  std::vector<double> alpha(m, 0.0);
  std::vector<double> grad(m, -1.0);
  std::vector<double> ki(m);
  std::vector<double> kj(m);
  std::vector<double> scores(m);

  const long max_iter = options.max_iter > 0 ? options.max_iter : 200L * static_cast<long>(m) + 100000L;
  const long check_every = std::max<long>(static_cast<long>(m), 50);

  auto upper = [&](std::size_t t) { return alpha[t] >= c; };
  auto lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

  // Builds w from alpha, refits b exactly, and returns the duality gap.
  auto finish = [&]() {
    model.w = Vector::Zero(x.cols());
    double alpha_sum = 0.0;
    for (std::size_t t = 0; t < m; ++t) {
      if (alpha[t] != 0.0) model.w += (alpha[t] * y[t]) * x.row(static_cast<Eigen::Index>(t)).transpose();
      alpha_sum += alpha[t];
    }
    for (std::size_t t = 0; t < m; ++t) scores[t] = x.row(static_cast<Eigen::Index>(t)).dot(model.w);
    model.b = optimal_bias(scores, y);
    model.train_loss = 0.0;
    for (std::size_t t = 0; t < m; ++t) model.train_loss += std::max(0.0, 1.0 - y[t] * (scores[t] + model.b));
    const double wnorm2 = model.w.squaredNorm();
    model.objective = 0.5 * wnorm2 + c * model.train_loss;
    const double dual = alpha_sum - 0.5 * wnorm2;
    model.duality_gap = model.objective - dual;
    return model.duality_gap;
  };

  long iter = 0;
  for (; iter < max_iter; ++iter) {
    // Maximal violating pair with second-order choice of j.
    double gmax = -kInf;
    std::size_t i = m;
    for (std::size_t t = 0; t < m; ++t) {
      if (y[t] == 1) {
        if (!upper(t) && -grad[t] >= gmax) {
          gmax = -grad[t];
          i = t;
        }
      } else if (!lower(t) && grad[t] >= gmax) {
        gmax = grad[t];
        i = t;
      }
    }
    if (i == m) break;
    row_fn(i, ki);

    double gmax2 = -kInf;
    double best = kInf;
    std::size_t j = m;
    for (std::size_t t = 0; t < m; ++t) {
      double grad_diff;
      if (y[t] == 1) {
        if (lower(t)) continue;
        gmax2 = std::max(gmax2, grad[t]);
        grad_diff = gmax + grad[t];
      } else {
        if (upper(t)) continue;
        gmax2 = std::max(gmax2, -grad[t]);
        grad_diff = gmax - grad[t];
      }
      if (grad_diff > 0.0) {
        const double quad = diag[i] + diag[t] - 2.0 * ki[t];
        const double obj = -(grad_diff * grad_diff) / (quad > 0.0 ? quad : kTau);
        if (obj <= best) {
          best = obj;
          j = t;
        }
      }
    }
    const bool optimal = gmax + gmax2 < 1e-12 || j == m;
    if (optimal || (iter > 0 && iter % check_every == 0)) {
      const double gap = finish();
      if (gap <= options.tol * std::max(std::abs(model.objective), 1e-12)) {
        model.converged = true;
        break;
      }
      if (optimal) {
        // No violating pair left: alpha is optimal to working precision.
        model.converged = gap <= 1e-9 * std::max(1.0, std::abs(model.objective));
        break;
      }
    }
    row_fn(j, kj);

    const double ai_old = alpha[i];
    const double aj_old = alpha[j];
    const double quad = std::max(diag[i] + diag[j] - 2.0 * ki[j], kTau);
    if (y[i] != y[j]) {
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0;
        alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = sum;
      }
    }

    const double di = (alpha[i] - ai_old) * y[i];
    const double dj = (alpha[j] - aj_old) * y[j];
    for (std::size_t t = 0; t < m; ++t) grad[t] += y[t] * (ki[t] * di + kj[t] * dj);
  }
  if (!model.converged) {
    const double gap = finish();
    model.converged = gap <= options.tol * std::max(std::abs(model.objective), 1e-12);
  }
  model.iterations = static_cast<int>(iter);
  return model;
}

LinearModel train_linear_svm(const Matrix& positives, const Matrix& negatives, double c) {
  if (positives.rows() == 0 || negatives.rows() == 0) {
    throw Error(ErrorKind::kEmptyClass, "SVM needs both positive and negative examples");
  }
  if (positives.cols() != negatives.cols()) {
    throw Error(ErrorKind::kDimensionMismatch, "positive and negative features differ in dimension");
  }
  Matrix x(positives.rows() + negatives.rows(), positives.cols());
  x << positives, negatives;
  std::vector<int> y(static_cast<std::size_t>(x.rows()), -1);
  std::fill(y.begin(), y.begin() + positives.rows(), 1);
  SvmOptions o;
  o.c = c;
  return train_linear_svm(x, y, o);
}

}  // namespace attribex
