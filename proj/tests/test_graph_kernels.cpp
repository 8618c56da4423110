#include <cstdlib>

#include <gtest/gtest.h>
#include <omp.h>

#include "attribex/graph.hpp"
#include "attribex/kernels.hpp"
#include "oracles.hpp"

using namespace attribex;

namespace {

FeatureDataset one_image_each(const Matrix& x) {
  std::vector<ImageRecord> recs;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    recs.push_back({"img" + std::to_string(i), "inst" + std::to_string(i), "c", Split::kTrain});
  }
  return FeatureDataset(recs, x);
}

Matrix random_rows(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  }
  return m;
}

}  // namespace

TEST(Kernels, SerialAndOmpBitIdentical) {
  Rng rng(21);
  for (int threads : {1, 2, 4}) {
    kernels::set_thread_limit(threads);
    for (Eigen::Index n : {1, 7, 64, 300}) {
      const Matrix x = random_rows(rng, n, 33);
      Matrix g1, g2;
      kernels::serial::gram(x, g1);
      kernels::omp::gram(x, g2);
      EXPECT_EQ(g1, g2);

      const Vector v = random_rows(rng, n, 1).col(0);
      Vector y1, y2;
      kernels::serial::symv(g1, v, y1);
      kernels::omp::symv(g1, v, y2);
      EXPECT_EQ(y1, y2);

      const Matrix w = random_rows(rng, 9, 33);
      const Vector b = random_rows(rng, 9, 1).col(0);
      Matrix a1, a2;
      kernels::serial::affine_rows(x, w, b, a1);
      kernels::omp::affine_rows(x, w, b, a2);
      EXPECT_EQ(a1, a2);

      const Vector q = x.row(0).transpose();
      Vector c1, c2;
      kernels::serial::cosine_scores(q, x, c1);
      kernels::omp::cosine_scores(q, x, c2);
      EXPECT_EQ(c1, c2);

      kernels::Groups groups;
      for (Eigen::Index i = 0; i < n; i += 3) {
        groups.push_back({});
        for (Eigen::Index j = i; j < std::min(n, i + 3); ++j) groups.back().push_back(static_cast<std::size_t>(j));
      }
      Matrix m1, m2;
      kernels::serial::group_mean(g1, groups, m1);
      kernels::omp::group_mean(g1, groups, m2);
      EXPECT_EQ(m1, m2);
    }
  }
  kernels::set_thread_limit(0);
}

TEST(Kernels, LargeCosineCrossesParallelThreshold) {
  Rng rng(22);
  kernels::set_thread_limit(3);
  const Matrix g = random_rows(rng, 5000, 20);
  const Vector q = g.row(17).transpose();
  Vector c1, c2;
  kernels::serial::cosine_scores(q, g, c1);
  kernels::omp::cosine_scores(q, g, c2);
  EXPECT_EQ(c1, c2);
  EXPECT_NEAR(c1(17), 1.0, 1e-15);
  kernels::set_thread_limit(0);
}

TEST(Kernels, ThreadEnv) {
  setenv("ATTRIBEX_THREADS", "2", 1);
  kernels::apply_thread_env();
  EXPECT_EQ(kernels::max_threads(), 2);
  setenv("ATTRIBEX_THREADS", "many", 1);
  EXPECT_THROW(kernels::apply_thread_env(), Error);
  unsetenv("ATTRIBEX_THREADS");
  kernels::set_thread_limit(0);
}

TEST(Graph, InstanceSimilarityExamples) {
  Matrix x(2, 2);
  x << 1, 0, 0, 1;
  EXPECT_EQ(instance_similarity(one_image_each(x))(0, 1), 0.0);
  x << 1, 0, 1, 0;
  EXPECT_NEAR(instance_similarity(one_image_each(x))(0, 1), 1.0, 1e-15);

  Matrix y(3, 2);
  y << 1, 0, 0.6, 0.8, 0, 1;
  std::vector<ImageRecord> recs = {{"a1", "A", "c", Split::kTrain},
                                   {"a2", "A", "c", Split::kTrain},
                                   {"b1", "B", "c", Split::kTrain}};
  const Matrix s = instance_similarity(FeatureDataset(recs, y));
  EXPECT_NEAR(s(0, 1), (0.0 + 0.8) / 2.0, 1e-15);
  EXPECT_EQ(s(0, 0), 0.0);
}

TEST(Graph, MutualKnnExamples) {
  Matrix s(3, 3);
  s << 0, 0.9, 0.5, 0.9, 0, 0.4, 0.5, 0.4, 0;
  const Matrix k1 = mutual_knn_sparsify(s, 1);
  EXPECT_EQ(k1(0, 1), 0.9);
  EXPECT_EQ(k1(1, 0), 0.9);
  EXPECT_EQ(k1(0, 2), 0.0);
  EXPECT_EQ(k1(1, 2), 0.0);
  EXPECT_EQ(mutual_knn_sparsify(s, 2), s);
  EXPECT_EQ(mutual_knn_sparsify(s, 1, EdgeWeighting::kBinary)(0, 1), 1.0);

  // 2's nearest is 0 but 0's nearest is 1: the (0, 2) edge is not mutual.
  Matrix t(3, 3);
  t << 0, 0.9, 0.8, 0.9, 0, 0.1, 0.8, 0.1, 0;
  const Matrix kt = mutual_knn_sparsify(t, 1);
  EXPECT_EQ(kt(0, 2), 0.0);
  EXPECT_EQ(kt(2, 0), 0.0);
  EXPECT_THROW(mutual_knn_sparsify(t, 0), Error);
  EXPECT_THROW(mutual_knn_sparsify(t, 3), Error);
}

TEST(Graph, MutualKnnProperties) {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 4 + trial;
    Matrix s = oracle::random_symmetric(rng, n).cwiseAbs();
    s.diagonal().setZero();
    const int k = 1 + trial % 3;
    const Matrix m = mutual_knn_sparsify(s, k);
    EXPECT_EQ(m, m.transpose());
    for (Eigen::Index i = 0; i < n; ++i) {
      EXPECT_LE((m.row(i).array() != 0.0).count(), k);
      EXPECT_EQ(m(i, i), 0.0);
      for (Eigen::Index j = 0; j < n; ++j) EXPECT_LE(m(i, j), s(i, j));
    }
  }
}

TEST(Graph, NegativeRetainedEdgesClampToZero) {
  Matrix s(2, 2);
  s << 0, -0.3, -0.3, 0;
  const Matrix m = mutual_knn_sparsify(s, 1);
  EXPECT_EQ(m(0, 1), 0.0);
}

TEST(Graph, LaplacianExamplesAndProperties) {
  Matrix s(2, 2);
  s << 0, 1, 1, 0;
  Matrix expect(2, 2);
  expect << 1, -1, -1, 1;
  EXPECT_EQ(laplacian(s), expect);
  EXPECT_EQ(laplacian(Matrix::Zero(3, 3)), Matrix::Zero(3, 3));

  Rng rng(24);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix r = oracle::random_symmetric(rng, 5).cwiseAbs();
    r.diagonal().setZero();
    const Matrix l = laplacian(r);
    for (Eigen::Index i = 0; i < 5; ++i) EXPECT_NEAR(l.row(i).sum(), 0.0, 1e-12);
    EXPECT_GE(oracle::min_eigenvalue(l), -1e-8);
    for (int probe = 0; probe < 20; ++probe) {
      Vector x(5);
      for (Eigen::Index i = 0; i < 5; ++i) x(i) = rng.normal();
      EXPECT_GE(x.dot(l * x), -1e-8);
    }
  }
  Matrix bad(2, 2);
  bad << 0, 1, 0.5, 0;
  EXPECT_THROW(laplacian(bad), Error);
}

TEST(Graph, BuildPExamples) {
  Matrix p = build_p(3, Matrix::Zero(3, 3), 0.0);
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) EXPECT_EQ(p(i, j), i == j ? 2.0 : -1.0);
  }
  Matrix l(2, 2);
  l << 1, -1, -1, 1;
  Matrix expect(2, 2);
  expect << -1, 1, 1, -1;
  EXPECT_EQ(build_p(2, l, 2.0), expect);

  Rng rng(25);
  Matrix r = oracle::random_symmetric(rng, 6).cwiseAbs();
  r.diagonal().setZero();
  EXPECT_EQ(build_p(6, laplacian(r), 0.0), build_p(6, Matrix::Zero(6, 6), 0.0));
  const Matrix q = build_p(6, laplacian(r), 1.7);
  EXPECT_EQ(q, q.transpose());
  for (Eigen::Index i = 0; i < 6; ++i) EXPECT_NEAR(q.row(i).sum(), 0.0, 1e-9);
}

TEST(Graph, BuildGraphClipsK) {
  const FeatureDataset ds = generate_synthetic(8, 2, 6, 0.3, 5);
  const SimilarityGraph g = build_graph(ds, 60, 2.0);
  EXPECT_EQ(g.k_nn, 7);
  EXPECT_EQ(g.n(), 8u);
  EXPECT_EQ(asymmetry(g.p), 0.0);
}
