// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include "attribex/common.hpp"
#include "attribex/kernels.hpp"

namespace {

using attribex::Matrix;
using attribex::Vector;

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  attribex::Rng rng(seed);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

template <void (*Gram)(const Matrix&, Matrix&)>
void BM_Gram(benchmark::State& state) {
  const Matrix x = random_matrix(state.range(0), 128, 1);
  Matrix out;
  for (auto _ : state) {
    Gram(x, out);
    benchmark::DoNotOptimize(out.data());
  }
}

template <void (*Symv)(const Matrix&, const Vector&, Vector&)>
void BM_Symv(benchmark::State& state) {
  Matrix m = random_matrix(state.range(0), state.range(0), 2);
  m = (m + m.transpose()).eval();
  const Vector v = Vector::Ones(state.range(0));
  Vector y;
  for (auto _ : state) {
    Symv(m, v, y);
    benchmark::DoNotOptimize(y.data());
  }
}

template <void (*Affine)(const Matrix&, const Matrix&, const Vector&, Matrix&)>
void BM_Affine(benchmark::State& state) {
  const Matrix x = random_matrix(state.range(0), 128, 3);
  const Matrix w = random_matrix(256, 128, 4);
  const Vector b = Vector::Zero(256);
  Matrix out;
  for (auto _ : state) {
    Affine(x, w, b, out);
    benchmark::DoNotOptimize(out.data());
  }
}

template <void (*Cosine)(const Vector&, const Matrix&, Vector&)>
void BM_Cosine(benchmark::State& state) {
  const Matrix g = random_matrix(state.range(0), 128, 5);
  const Vector q = g.row(0).transpose();
  Vector out;
  for (auto _ : state) {
    Cosine(q, g, out);
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(BM_Gram<attribex::kernels::serial::gram>)->Name("gram/serial")->Arg(256)->Arg(1024);
BENCHMARK(BM_Gram<attribex::kernels::omp::gram>)->Name("gram/omp")->Arg(256)->Arg(1024);
BENCHMARK(BM_Symv<attribex::kernels::serial::symv>)->Name("symv/serial")->Arg(160)->Arg(1200);
BENCHMARK(BM_Symv<attribex::kernels::omp::symv>)->Name("symv/omp")->Arg(160)->Arg(1200);
BENCHMARK(BM_Affine<attribex::kernels::serial::affine_rows>)->Name("affine_rows/serial")->Arg(512);
BENCHMARK(BM_Affine<attribex::kernels::omp::affine_rows>)->Name("affine_rows/omp")->Arg(512);
BENCHMARK(BM_Cosine<attribex::kernels::serial::cosine_scores>)->Name("cosine_scores/serial")->Arg(100000);
BENCHMARK(BM_Cosine<attribex::kernels::omp::cosine_scores>)->Name("cosine_scores/omp")->Arg(100000);

BENCHMARK_MAIN();
