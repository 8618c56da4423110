#include "attribex/eigensolver.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include <fmt/format.h>

#include "attribex/graph.hpp"
#include "attribex/kernels.hpp"

namespace attribex {

void canonical_sign(Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > 1e-12) {
      if (v(i) < 0.0) v = -v;
      return;
    }
  }
}

void jacobi_eigen(const Matrix& m, Vector& values, Matrix& vectors) {
  const Eigen::Index n = m.rows();
  Matrix a = m;
  Matrix v = Matrix::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    double diag = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      diag += a(i, i) * a(i, i);
      for (Eigen::Index j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    }
    if (off == 0.0 || off <= 1e-32 * (diag + off)) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return a(x, x) < a(y, y); });
  values.resize(n);
  vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    values(k) = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    vectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }
}

namespace {

struct Attempt {
  Vector v;
  double mu = 0.0;
  double residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

// Negated Gershgorin lower bound, so m + shift * I has no negative eigenvalue.
double gershgorin_shift(const Matrix& m) {
  double shift = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double radius = m.row(i).cwiseAbs().sum() - std::abs(m(i, i));
    shift = std::max(shift, radius - m(i, i));
  }
  return shift;
}

Vector fixed_start(Eigen::Index n) {
  Vector x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = 1.0 + static_cast<double>(i + 1) / static_cast<double>(n);
  return x.normalized();
}

Vector random_start(Eigen::Index n) {
  Rng rng(0x5eedf00dULL);
  Vector x(n);
  for (auto& e : x) e = rng.normal();
  return x.normalized();
}

bool small_enough(double residual, double mu, double tol) { return residual <= tol * std::max(1.0, std::abs(mu)); }

Attempt power_attempt(const Matrix& m, double shift, Vector x, double tol, int max_iter) {
  Attempt best;
  Vector y;
  for (int it = 1; it <= max_iter; ++it) {
    kernels::omp::symv(m, x, y);
    const double mu = x.dot(y);
    const double r = (y - mu * x).norm();
    if (r < best.residual) {
      best.v = x;
      best.mu = mu;
      best.residual = r;
    }
    best.iterations = it;
    if (small_enough(r, mu, tol)) {
      best.v = x;
      best.mu = mu;
      best.residual = r;
      best.converged = true;
      return best;
    }
    y += shift * x;
    const double norm = y.norm();
    if (norm == 0.0) break;  // x in the null space of m + shift I: nothing larger exists along x
    x = y / norm;
  }
  return best;
}

// One window: Krylov basis from x (full reorthogonalization), then the top
// Ritz pair of the projected matrix becomes the next x.
Attempt krylov_attempt(const Matrix& m, double shift, Vector x, double tol, int max_iter, int window) {
  const Eigen::Index n = m.rows();
  const Eigen::Index w = std::min<Eigen::Index>(std::max(window, 2), n);
  Attempt best;
  int matvecs = 0;
  std::vector<Vector> basis;
  std::vector<Vector> images;
  while (matvecs < max_iter) {
    basis.assign(1, x);
    images.assign(1, Vector());
    kernels::omp::symv(m, x, images[0]);
    ++matvecs;

    while (static_cast<Eigen::Index>(basis.size()) < w && matvecs < max_iter) {
      Vector q = images.back() + shift * basis.back();
      const double before = q.norm();
      for (int pass = 0; pass < 2; ++pass) {
        for (const auto& b : basis) q -= b.dot(q) * b;
      }
      const double norm = q.norm();
      if (norm <= 1e-10 * std::max(before, 1e-300)) break;  // invariant subspace reached
      basis.push_back(q / norm);
      images.emplace_back();
      kernels::omp::symv(m, basis.back(), images.back());
      ++matvecs;
    }

    const auto b = static_cast<Eigen::Index>(basis.size());
    Matrix h(b, b);
    for (Eigen::Index i = 0; i < b; ++i) {
      for (Eigen::Index j = i; j < b; ++j) {
        const double v = 0.5 * (basis[static_cast<std::size_t>(i)].dot(images[static_cast<std::size_t>(j)]) +
                                basis[static_cast<std::size_t>(j)].dot(images[static_cast<std::size_t>(i)]));
        h(i, j) = v;
        h(j, i) = v;
      }
    }
    Vector theta;
    Matrix y;
    jacobi_eigen(h, theta, y);
    const Vector coef = y.col(b - 1);

    Vector ritz = Vector::Zero(n);
    Vector image = Vector::Zero(n);
    for (Eigen::Index j = 0; j < b; ++j) {
      ritz += coef(j) * basis[static_cast<std::size_t>(j)];
      image += coef(j) * images[static_cast<std::size_t>(j)];
    }
    const double norm = ritz.norm();
    ritz /= norm;
    image /= norm;
    const double mu = ritz.dot(image);
    const double r = (image - mu * ritz).norm();
    best.iterations = matvecs;
    if (r < best.residual) {
      best.v = ritz;
      best.mu = mu;
      best.residual = r;
    }
    if (small_enough(r, mu, tol)) {
      best.converged = true;
      return best;
    }
    x = ritz;
  }
  return best;
}

}  // namespace

EigenResult top_eigenvector(const Matrix& m, const EigenOptions& options) {
  const Eigen::Index n = m.rows();
  if (n == 0 || m.cols() != n) {
    throw Error(ErrorKind::kDimensionMismatch, fmt::format("top_eigenvector needs a square matrix, got {}x{}", n, m.cols()));
  }
  if (asymmetry(m) > 1e-8) throw Error(ErrorKind::kNotSymmetric, "top_eigenvector: matrix is not symmetric");
  if (options.tol <= 0.0 || options.max_iter < 1) {
    throw Error(ErrorKind::kInvalidArgument, "top_eigenvector: tol must be > 0 and max_iter >= 1");
  }

  EigenResult out;
  if (n == 1) {
    out.vector = Vector::Ones(1);
    out.value = m(0, 0);
    out.converged = true;
    return out;
  }

  const double shift = gershgorin_shift(m);
  auto run = [&](Vector start) {
    return options.method == EigenMethod::kPower
               ? power_attempt(m, shift, std::move(start), options.tol, options.max_iter)
               : krylov_attempt(m, shift, std::move(start), options.tol, options.max_iter, options.window);
  };

  Attempt a = run(fixed_start(n));
  int total = a.iterations;
  if (!a.converged) {
    Attempt b = run(random_start(n));
    total += b.iterations;
    out.restarted = true;
    if (b.converged || b.residual < a.residual) a = std::move(b);
  }
  out.vector = std::move(a.v);
  canonical_sign(out.vector);
  out.value = a.mu;
  out.residual = a.residual;
  out.converged = a.converged;
  out.iterations = total;
  return out;
}

EigenResult top_eigenvector(const Matrix& m, double tol, int max_iter) {
  EigenOptions o;
  o.tol = tol;
  o.max_iter = max_iter;
  return top_eigenvector(m, o);
}

}  // namespace attribex
