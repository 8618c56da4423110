#include "attribex/graph.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "attribex/kernels.hpp"

namespace attribex {

const char* to_string(EdgeWeighting w) { return w == EdgeWeighting::kBinary ? "binary" : "weighted"; }

EdgeWeighting parse_edge_weighting(const std::string& text) {
  if (text == "weighted") return EdgeWeighting::kWeighted;
  if (text == "binary") return EdgeWeighting::kBinary;
  throw Error(ErrorKind::kConfig, fmt::format("unknown edge weighting '{}'", text));
}

double asymmetry(const Matrix& m) {
  if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) row += std::abs(m(i, j) - m(j, i));
    worst = std::max(worst, row);
  }
  return worst;
}

Matrix instance_similarity(const FeatureDataset& dataset) {
  const auto& groups = dataset.images_by_instance();
  for (std::size_t a = 0; a < groups.size(); ++a) {
    if (groups[a].empty()) {
      throw Error(ErrorKind::kInvalidArgument,
                  fmt::format("instance '{}' has no images", dataset.instance_ids()[a]));
    }
  }
  Matrix unit = dataset.features();
  for (Eigen::Index i = 0; i < unit.rows(); ++i) {
    const double norm = unit.row(i).norm();
    if (norm > 0.0) unit.row(i) /= norm;
  }
  Matrix gram;
  kernels::omp::gram(unit, gram);
  Matrix sim;
  kernels::omp::group_mean(gram, groups, sim);
  return sim;
}

Matrix mutual_knn_sparsify(const Matrix& sim, int k, EdgeWeighting weighting) {
  const Eigen::Index n = sim.rows();
  if (sim.cols() != n) throw Error(ErrorKind::kDimensionMismatch, "similarity matrix must be square");
  if (k < 1 || k > n - 1) {
    throw Error(ErrorKind::kInvalidArgument, fmt::format("k = {} out of range [1, {}]", k, n - 1));
  }
  if (asymmetry(sim) > 1e-8) throw Error(ErrorKind::kNotSymmetric, "similarity matrix is not symmetric");

  // neighbor(i, j) marks j among i's k largest off-diagonal entries.
  std::vector<std::vector<bool>> neighbor(static_cast<std::size_t>(n),
                                          std::vector<bool>(static_cast<std::size_t>(n), false));
  std::vector<Eigen::Index> order;
  for (Eigen::Index i = 0; i < n; ++i) {
    order.clear();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) order.push_back(j);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return sim(i, a) > sim(i, b); });
    for (int t = 0; t < k; ++t) {
      neighbor[static_cast<std::size_t>(i)][static_cast<std::size_t>(order[static_cast<std::size_t>(t)])] = true;
    }
  }

  Matrix out = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (neighbor[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] &&
          neighbor[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]) {
        const double w = weighting == EdgeWeighting::kBinary ? 1.0 : std::max(0.0, sim(i, j));
        out(i, j) = w;
        out(j, i) = w;
      }
    }
  }
  return out;
}

Matrix laplacian(const Matrix& s) {
  if (s.rows() != s.cols()) throw Error(ErrorKind::kDimensionMismatch, "laplacian: matrix must be square");
  if (asymmetry(s) > 1e-9) throw Error(ErrorKind::kNotSymmetric, "laplacian: input is not symmetric");
  if (s.size() > 0 && s.minCoeff() < 0.0) {
    throw Error(ErrorKind::kInvalidArgument, "laplacian: input has negative weights");
  }
  Matrix l = -s;
  for (Eigen::Index i = 0; i < s.rows(); ++i) l(i, i) += s.row(i).sum();
  return l;
}

Matrix build_p(std::size_t n, const Matrix& laplacian, double lambda) {
  const auto size = static_cast<Eigen::Index>(n);
  if (laplacian.rows() != size || laplacian.cols() != size) {
    throw Error(ErrorKind::kDimensionMismatch,
                fmt::format("laplacian is {}x{}, expected {}x{}", laplacian.rows(), laplacian.cols(), n, n));
  }
  if (!(lambda >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "lambda must be >= 0");
  Matrix p = Matrix::Constant(size, size, -1.0);
  p.diagonal().array() = static_cast<double>(n) - 1.0;
  if (lambda != 0.0) p -= lambda * laplacian;
  return p;
}

SimilarityGraph build_graph(const FeatureDataset& dataset, int k_nn, double lambda, EdgeWeighting weighting) {
  const std::size_t n = dataset.n_instances();
  if (n < 2) throw Error(ErrorKind::kInvalidArgument, "graph needs at least 2 instances");
  if (k_nn < 1) throw Error(ErrorKind::kInvalidArgument, "k_nn must be >= 1");
  int k = k_nn;
  if (static_cast<std::size_t>(k) > n - 1) {
    k = static_cast<int>(n - 1);
    spdlog::warn("k_nn = {} exceeds n - 1 = {} training instances; using {}", k_nn, n - 1, k);
  }
  SimilarityGraph g;
  g.k_nn = k;
  g.lambda = lambda;
  g.s = mutual_knn_sparsify(instance_similarity(dataset), k, weighting);
  g.laplacian = laplacian(g.s);
  g.p = build_p(n, g.laplacian, lambda);
  return g;
}

}  // namespace attribex
