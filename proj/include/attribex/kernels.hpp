#pragma once

#include <cstddef>
#include <vector>

#include "attribex/common.hpp"

// Data-parallel inner loops. Every kernel has a serial reference in
// `kernels::serial` and an OpenMP version in `kernels::omp`. Parallel loops
// split over output entries only and keep the serial summation order inside
// each entry, so both versions give bit-identical results for any thread count.
namespace attribex::kernels {

using Groups = std::vector<std::vector<std::size_t>>;

namespace serial {

// out = x * x^T
void gram(const Matrix& x, Matrix& out);
// y = m * v
void symv(const Matrix& m, const Vector& v, Vector& y);
// out(i, j) = x.row(i) . w.row(j) + b(j)
void affine_rows(const Matrix& x, const Matrix& w, const Vector& b, Matrix& out);
// out(i) = cos(q, g.row(i)); zero rows or a zero query score 0
void cosine_scores(const Vector& q, const Matrix& g, Vector& out);
// out(a, b) = mean of gram(i, j) over i in groups[a], j in groups[b]; diagonal 0
void group_mean(const Matrix& gram, const Groups& groups, Matrix& out);

}  // namespace serial

namespace omp {

void gram(const Matrix& x, Matrix& out);
void symv(const Matrix& m, const Vector& v, Vector& y);
void affine_rows(const Matrix& x, const Matrix& w, const Vector& b, Matrix& out);
void cosine_scores(const Vector& q, const Matrix& g, Vector& out);
void group_mean(const Matrix& gram, const Groups& groups, Matrix& out);

}  // namespace omp

// Caps OpenMP parallelism; n <= 0 restores the runtime default.
void set_thread_limit(int n);
// Applies ATTRIBEX_THREADS when set to a positive integer.
void apply_thread_env();
int max_threads();

}  // namespace attribex::kernels
