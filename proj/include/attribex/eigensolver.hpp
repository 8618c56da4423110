#pragma once

#include "attribex/common.hpp"

namespace attribex {

enum class EigenMethod {
  // Shifted power iteration with a Rayleigh-Ritz step over each window of
  // iterates (explicitly restarted Lanczos). Default.
  kKrylov,
  // Plain shifted power iteration.
  kPower,
};

struct EigenOptions {
  double tol = 1e-8;
  int max_iter = 5000;  // matrix-vector products per attempt
  EigenMethod method = EigenMethod::kKrylov;
  int window = 20;  // Krylov vectors per restart
};

struct EigenResult {
  Vector vector;  // unit norm, first nonzero component positive
  double value = 0.0;
  bool converged = false;
  bool restarted = false;
  int iterations = 0;
  double residual = 0.0;  // ||m v - value v||
};

/// Eigenvector of a symmetric matrix for its algebraically largest eigenvalue.
///
/// The matrix is shifted by the Gershgorin lower bound so every eigenvalue of
/// the iterated operator is nonnegative and the dominant one is the algebraic
/// maximum. Iteration starts from a fixed vector (ones plus a ramp), so ties
/// inside a degenerate top eigenspace resolve the same way on every run.
/// Convergence means ||m v - mu v|| <= tol * max(1, |mu|). If the first
/// attempt stalls the solver restarts once from a seeded random vector; the
/// best iterate is returned with `converged == false` if that also fails.
///
/// Throws Error(kNotSymmetric) when the infinity norm of m - m^T exceeds 1e-8.
EigenResult top_eigenvector(const Matrix& m, const EigenOptions& options = {});
EigenResult top_eigenvector(const Matrix& m, double tol, int max_iter);

// Cyclic Jacobi on a small dense symmetric matrix. Eigenvalues ascending,
// eigenvectors in the matching columns.
void jacobi_eigen(const Matrix& m, Vector& values, Matrix& vectors);

// Flips v so its first component with |v_i| > 1e-12 is positive.
void canonical_sign(Vector& v);

}  // namespace attribex
