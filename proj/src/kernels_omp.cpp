#include "attribex/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

#include <omp.h>
#include <fmt/format.h>

#include "kernels_detail.hpp"

namespace attribex::kernels {

namespace omp {

using detail::dot;

void gram(const Matrix& x, Matrix& out) {
  const Eigen::Index n = x.rows();
  const auto d = static_cast<std::size_t>(x.cols());
  out.resize(n, n);
#pragma omp parallel for schedule(dynamic, 8)
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) out(i, j) = dot(x.row(i).data(), x.row(j).data(), d);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) out(i, j) = out(j, i);
  }
}

void symv(const Matrix& m, const Vector& v, Vector& y) {
  if (m.cols() != v.size()) throw Error(ErrorKind::kDimensionMismatch, "symv: shape mismatch");
  y.resize(m.rows());
  const auto n = static_cast<std::size_t>(m.cols());
  // Small operators stay serial; thread startup dominates below this size.
#pragma omp parallel for schedule(static) if (m.rows() * m.cols() > 65536)
  for (Eigen::Index i = 0; i < m.rows(); ++i) y(i) = dot(m.row(i).data(), v.data(), n);
}

void affine_rows(const Matrix& x, const Matrix& w, const Vector& b, Matrix& out) {
  if (x.cols() != w.cols() || w.rows() != b.size()) {
    throw Error(ErrorKind::kDimensionMismatch,
                fmt::format("affine_rows: x is {}x{}, w is {}x{}, b has {}", x.rows(), x.cols(), w.rows(),
                            w.cols(), b.size()));
  }
  out.resize(x.rows(), w.rows());
  const auto d = static_cast<std::size_t>(x.cols());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.rows(); ++j) out(i, j) = dot(x.row(i).data(), w.row(j).data(), d) + b(j);
  }
}

void cosine_scores(const Vector& q, const Matrix& g, Vector& out) {
  if (g.cols() != q.size()) throw Error(ErrorKind::kDimensionMismatch, "cosine_scores: dimension mismatch");
  const auto d = static_cast<std::size_t>(q.size());
  const double qn = std::sqrt(dot(q.data(), q.data(), d));
  out.resize(g.rows());
#pragma omp parallel for schedule(static) if (g.rows() * g.cols() > 65536)
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    const double gn = std::sqrt(dot(g.row(i).data(), g.row(i).data(), d));
    out(i) = (qn == 0.0 || gn == 0.0) ? 0.0 : dot(q.data(), g.row(i).data(), d) / (qn * gn);
  }
}

void group_mean(const Matrix& gram, const Groups& groups, Matrix& out) {
  const auto n = static_cast<Eigen::Index>(groups.size());
  out = Matrix::Zero(n, n);
#pragma omp parallel for schedule(dynamic, 4)
  for (Eigen::Index a = 0; a < n; ++a) {
    const auto& ga = groups[static_cast<std::size_t>(a)];
    for (Eigen::Index b = a + 1; b < n; ++b) {
      const auto& gb = groups[static_cast<std::size_t>(b)];
      double s = 0.0;
      for (auto i : ga) {
        for (auto j : gb) s += gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
      out(a, b) = s / static_cast<double>(ga.size() * gb.size());
    }
  }
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < a; ++b) out(a, b) = out(b, a);
  }
}

}  // namespace omp

namespace {
int g_default_threads = 0;
}

void set_thread_limit(int n) {
  if (g_default_threads == 0) g_default_threads = omp_get_max_threads();
  omp_set_num_threads(n > 0 ? n : g_default_threads);
}

void apply_thread_env() {
  const char* env = std::getenv("ATTRIBEX_THREADS");
  if (env == nullptr) return;
  try {
    const int n = std::stoi(env);
    if (n > 0) set_thread_limit(n);
  } catch (const std::exception&) {
    throw Error(ErrorKind::kConfig, fmt::format("ATTRIBEX_THREADS='{}' is not an integer", env));
  }
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace attribex::kernels
