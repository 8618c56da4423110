#include "attribex/kernels.hpp"

#include <cmath>

#include <fmt/format.h>

#include "kernels_detail.hpp"

namespace attribex::kernels::serial {

using detail::dot;

void gram(const Matrix& x, Matrix& out) {
  const Eigen::Index n = x.rows();
  const auto d = static_cast<std::size_t>(x.cols());
  out.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const double v = dot(x.row(i).data(), x.row(j).data(), d);
      out(i, j) = v;
      out(j, i) = v;
    }
  }
}

void symv(const Matrix& m, const Vector& v, Vector& y) {
  if (m.cols() != v.size()) throw Error(ErrorKind::kDimensionMismatch, "symv: shape mismatch");
  y.resize(m.rows());
  const auto n = static_cast<std::size_t>(m.cols());
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
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.rows(); ++j) out(i, j) = dot(x.row(i).data(), w.row(j).data(), d) + b(j);
  }
}

void cosine_scores(const Vector& q, const Matrix& g, Vector& out) {
  if (g.cols() != q.size()) throw Error(ErrorKind::kDimensionMismatch, "cosine_scores: dimension mismatch");
  const auto d = static_cast<std::size_t>(q.size());
  const double qn = std::sqrt(dot(q.data(), q.data(), d));
  out.resize(g.rows());
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    const double gn = std::sqrt(dot(g.row(i).data(), g.row(i).data(), d));
    out(i) = (qn == 0.0 || gn == 0.0) ? 0.0 : dot(q.data(), g.row(i).data(), d) / (qn * gn);
  }
}

void group_mean(const Matrix& gram, const Groups& groups, Matrix& out) {
  const auto n = static_cast<Eigen::Index>(groups.size());
  out = Matrix::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    const auto& ga = groups[static_cast<std::size_t>(a)];
    for (Eigen::Index b = a + 1; b < n; ++b) {
      const auto& gb = groups[static_cast<std::size_t>(b)];
      double s = 0.0;
      for (auto i : ga) {
        for (auto j : gb) s += gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
      const double v = s / static_cast<double>(ga.size() * gb.size());
      out(a, b) = v;
      out(b, a) = v;
    }
  }
}

}  // namespace attribex::kernels::serial
