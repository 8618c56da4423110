#pragma once

#include <cstddef>
#include <vector>

#include "json.hpp"

#include "attribex/common.hpp"
#include "attribex/eigensolver.hpp"
#include "attribex/graph.hpp"

namespace attribex {

struct ColumnDiagnostics {
  bool converged = false;
  bool restarted = false;
  bool median_fallback = false;
  int iterations = 0;
  double eigenvalue = 0.0;
  double residual = 0.0;
};

/// Instance-attribute mapping: n rows (training instances) by k binarized,
/// unit-norm columns with entries +-1/sqrt(n).
struct AttributeMatrix {
  Matrix a;
  double lambda = 0.0;
  double gamma = 0.0;
  std::vector<ColumnDiagnostics> columns;

  std::size_t n() const { return static_cast<std::size_t>(a.rows()); }
  std::size_t k() const { return static_cast<std::size_t>(a.cols()); }
  // First `count` columns; designs are prefix-consistent in k.
  AttributeMatrix prefix(std::size_t count) const;
};

// sign(v_i) with sign(0) = +1, scaled to 1/sqrt(n). A constant-sign result
// falls back to a median split. Throws for n < 2.
Vector binarize(const Vector& v, bool* used_median_fallback = nullptr);

struct DesignOptions {
  std::size_t k = 1000;
  double gamma = 7.0;
  EigenOptions eigen;
  // Throw on eigen-solver non-convergence instead of recording it.
  bool strict = false;
};

// Largest k accepted before clipping (4n).
std::size_t max_attributes(std::size_t n);

AttributeMatrix design_attributes(const SimilarityGraph& graph, const DesignOptions& options);

struct ObjectiveReport {
  double f1 = 0.0;
  double f2 = 0.0;
  double f3 = 0.0;
  double total = 0.0;
};

// f1 and f2 sum over unordered instance pairs, so f1 + lambda f2 = Tr(A^T P A).
ObjectiveReport objective_components(const Matrix& a, const Matrix& s, double lambda, double gamma);
double trace_objective(const Matrix& a, const Matrix& p);

// Mean |Pearson correlation| over all column pairs; 0 for fewer than 2 columns.
double mean_abs_column_correlation(const Matrix& a);

nlohmann::json attribute_sidecar(const AttributeMatrix& a, std::uint64_t seed);

}  // namespace attribex
