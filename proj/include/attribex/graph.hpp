#pragma once

#include <cstddef>

#include "attribex/common.hpp"
#include "attribex/dataset.hpp"

namespace attribex {

enum class EdgeWeighting { kWeighted, kBinary };

const char* to_string(EdgeWeighting w);
EdgeWeighting parse_edge_weighting(const std::string& text);

/// Instance-level proximity graph and the design matrix derived from it.
struct SimilarityGraph {
  Matrix s;          // sparsified proximity, symmetric, zero diagonal
  Matrix laplacian;  // D - s
  Matrix p;          // Q - lambda * laplacian
  int k_nn = 0;      // effective k after clipping to n - 1
  double lambda = 0.0;

  std::size_t n() const { return static_cast<std::size_t>(s.rows()); }
};

// Mean pairwise cosine similarity between the images of every two instances.
Matrix instance_similarity(const FeatureDataset& dataset);

// Keeps (i, j) iff each is among the other's k largest off-diagonal entries.
// Ties between equal similarities go to the lower index. Negative retained
// similarities are clamped to 0.
Matrix mutual_knn_sparsify(const Matrix& sim, int k, EdgeWeighting weighting = EdgeWeighting::kWeighted);

Matrix laplacian(const Matrix& s);

// Q - lambda * L with Q = n I - 1 1^T.
Matrix build_p(std::size_t n, const Matrix& laplacian, double lambda);

SimilarityGraph build_graph(const FeatureDataset& dataset, int k_nn, double lambda,
                            EdgeWeighting weighting = EdgeWeighting::kWeighted);

// max_i sum_j |m(i,j) - m(j,i)|
double asymmetry(const Matrix& m);

}  // namespace attribex
