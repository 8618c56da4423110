#include "attribex/attrdesign.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace attribex {

AttributeMatrix AttributeMatrix::prefix(std::size_t count) const {
  if (count > k()) throw Error(ErrorKind::kInvalidArgument, fmt::format("prefix {} exceeds k = {}", count, k()));
  AttributeMatrix out;
  out.a = a.leftCols(static_cast<Eigen::Index>(count));
  out.lambda = lambda;
  out.gamma = gamma;
  out.columns.assign(columns.begin(), columns.begin() + static_cast<std::ptrdiff_t>(count));
  return out;
}

Vector binarize(const Vector& v, bool* used_median_fallback) {
  const Eigen::Index n = v.size();
  if (n < 2) throw Error(ErrorKind::kInvalidArgument, "binarize needs at least 2 components");
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));

  Vector out(n);
  Eigen::Index positives = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    out(i) = v(i) >= 0.0 ? scale : -scale;
    positives += v(i) >= 0.0 ? 1 : 0;
  }
  if (used_median_fallback != nullptr) *used_median_fallback = false;
  if (positives > 0 && positives < n) return out;

  if (used_median_fallback != nullptr) *used_median_fallback = true;
  std::vector<double> sorted(v.data(), v.data() + n);
  std::sort(sorted.begin(), sorted.end());
  const auto mid = static_cast<std::size_t>(n / 2);
  const double median = n % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  positives = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    out(i) = v(i) > median ? scale : -scale;
    positives += v(i) > median ? 1 : 0;
  }
  if (positives > 0) return out;

  // Every value equals the median: split by rank, lower index first.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return v(a) > v(b); });
  out.setConstant(-scale);
  for (Eigen::Index t = 0; t < (n + 1) / 2; ++t) out(order[static_cast<std::size_t>(t)]) = scale;
  return out;
}

std::size_t max_attributes(std::size_t n) { return 4 * n; }

AttributeMatrix design_attributes(const SimilarityGraph& graph, const DesignOptions& options) {
  const std::size_t n = graph.n();
  if (n < 2 || graph.p.rows() != graph.p.cols() || static_cast<std::size_t>(graph.p.rows()) != n) {
    throw Error(ErrorKind::kInvalidArgument, "design_attributes needs an n x n design matrix with n >= 2");
  }
  if (options.k < 1) throw Error(ErrorKind::kInvalidArgument, "k must be >= 1");
  if (!(options.gamma >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "gamma must be >= 0");
  std::size_t k = options.k;
  if (k > max_attributes(n)) {
    spdlog::warn("k = {} exceeds 4n = {} for {} training instances; clipping", k, max_attributes(n), n);
    k = max_attributes(n);
  }

  AttributeMatrix out;
  out.lambda = graph.lambda;
  out.gamma = options.gamma;
  out.a.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  out.columns.reserve(k);

  Matrix r = graph.p;
  const double g = 2.0 * options.gamma;
  for (std::size_t t = 0; t < k; ++t) {
    const EigenResult eig = top_eigenvector(r, options.eigen);
    if (!eig.converged) {
      if (options.strict) {
        throw Error(ErrorKind::kNoConvergence,
                    fmt::format("eigen-solver did not converge for attribute column {} (residual {:.3e})", t,
                                eig.residual));
      }
      spdlog::warn("attribute column {}: eigen-solver stopped at residual {:.3e}", t, eig.residual);
    }
    ColumnDiagnostics diag;
    diag.converged = eig.converged;
    diag.restarted = eig.restarted;
    diag.iterations = eig.iterations;
    diag.eigenvalue = eig.value;
    diag.residual = eig.residual;
    const Vector col = binarize(eig.vector, &diag.median_fallback);
    out.a.col(static_cast<Eigen::Index>(t)) = col;
    out.columns.push_back(diag);

    // R <- P - 2 gamma A A^T, one rank-1 term per column. a_i a_j is exactly
    // symmetric, so R stays exactly symmetric.
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
      for (Eigen::Index j = 0; j < r.cols(); ++j) r(i, j) -= g * (col(i) * col(j));
    }
  }
  return out;
}

ObjectiveReport objective_components(const Matrix& a, const Matrix& s, double lambda, double gamma) {
  const Eigen::Index n = a.rows();
  if (s.rows() != n || s.cols() != n) {
    throw Error(ErrorKind::kDimensionMismatch,
                fmt::format("A has {} rows but S is {}x{}", n, s.rows(), s.cols()));
  }
  ObjectiveReport r;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (a.row(i) - a.row(j)).squaredNorm();
      r.f1 += d;
      r.f2 -= 0.5 * (s(i, j) + s(j, i)) * d;
    }
  }
  const Matrix gram = a.transpose() * a;
  r.f3 = -(gram - Matrix::Identity(a.cols(), a.cols())).squaredNorm();
  r.total = r.f1 + lambda * r.f2 + gamma * r.f3;
  return r;
}

double trace_objective(const Matrix& a, const Matrix& p) {
  if (p.rows() != a.rows() || p.cols() != a.rows()) {
    throw Error(ErrorKind::kDimensionMismatch, "trace_objective: shape mismatch");
  }
  double t = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j) t += a.col(j).dot(p * a.col(j));
  return t;
}

double mean_abs_column_correlation(const Matrix& a) {
  const Eigen::Index k = a.cols();
  if (k < 2) return 0.0;
  Matrix centered = a.rowwise() - a.colwise().mean();
  Vector norms(k);
  for (Eigen::Index j = 0; j < k; ++j) norms(j) = centered.col(j).norm();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i + 1; j < k; ++j) {
      const double denom = norms(i) * norms(j);
      if (denom > 0.0) sum += std::abs(centered.col(i).dot(centered.col(j)) / denom);
    }
  }
  return sum / (0.5 * static_cast<double>(k) * static_cast<double>(k - 1));
}

nlohmann::json attribute_sidecar(const AttributeMatrix& a, std::uint64_t seed) {
  nlohmann::json j;
  j["n"] = a.n();
  j["k"] = a.k();
  j["lambda"] = a.lambda;
  j["gamma"] = a.gamma;
  j["seed"] = seed;
  auto cols = nlohmann::json::array();
  for (const auto& c : a.columns) {
    cols.push_back({{"converged", c.converged},
                    {"restarted", c.restarted},
                    {"median_fallback", c.median_fallback},
                    {"iterations", c.iterations},
                    {"eigenvalue", c.eigenvalue},
                    {"residual", c.residual}});
  }
  j["columns"] = std::move(cols);
  return j;
}

}  // namespace attribex
