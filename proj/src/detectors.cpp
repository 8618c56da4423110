#include "attribex/detectors.hpp"

#include <exception>
#include <mutex>

#include <fmt/format.h>

#include "attribex/kernels.hpp"

namespace attribex {

Matrix DetectorBank::to_matrix() const {
  Matrix m(static_cast<Eigen::Index>(detectors.size()), static_cast<Eigen::Index>(feature_dim + 1));
  for (std::size_t j = 0; j < detectors.size(); ++j) {
    const auto r = static_cast<Eigen::Index>(j);
    m.row(r).head(static_cast<Eigen::Index>(feature_dim)) = detectors[j].w.transpose();
    m(r, static_cast<Eigen::Index>(feature_dim)) = detectors[j].b;
  }
  return m;
}

DetectorBank DetectorBank::prefix(std::size_t count) const {
  if (count > detectors.size()) {
    throw Error(ErrorKind::kInvalidArgument, fmt::format("prefix {} exceeds bank size {}", count, detectors.size()));
  }
  DetectorBank out;
  out.feature_dim = feature_dim;
  out.detectors.assign(detectors.begin(), detectors.begin() + static_cast<std::ptrdiff_t>(count));
  out.positive_counts.assign(positive_counts.begin(), positive_counts.begin() + static_cast<std::ptrdiff_t>(count));
  return out;
}

DetectorBank train_attribute_detectors(const FeatureDataset& train, const AttributeMatrix& a,
                                       const SvmOptions& options) {
  if (train.n_instances() != a.n()) {
    throw Error(ErrorKind::kDimensionMismatch,
                fmt::format("dataset has {} instances but the attribute matrix has {} rows", train.n_instances(),
                            a.n()));
  }
  const std::size_t m = train.n_images();
  const std::size_t k = a.k();
  const Matrix& x = train.features();

  Matrix gram;
  kernels::omp::gram(x, gram);
  const KernelRowFn row_fn = [&gram](std::size_t i, std::span<double> out) {
    const auto r = gram.row(static_cast<Eigen::Index>(i));
    std::copy(r.data(), r.data() + r.size(), out.begin());
  };

  DetectorBank bank;
  bank.feature_dim = train.dim();
  bank.detectors.resize(k);
  bank.positive_counts.resize(k);
  std::exception_ptr failure;
  std::mutex failure_mutex;

#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t j = 0; j < k; ++j) {
    try {
      std::vector<int> y(m);
      std::size_t positives = 0;
      for (std::size_t img = 0; img < m; ++img) {
        const bool pos = a.a(static_cast<Eigen::Index>(train.instance_of(img)), static_cast<Eigen::Index>(j)) > 0.0;
        y[img] = pos ? 1 : -1;
        positives += pos ? 1 : 0;
      }
      if (positives == 0 || positives == m) {
        throw Error(ErrorKind::kEmptyClass, fmt::format("attribute {} has no {} images", j,
                                                        positives == 0 ? "positive" : "negative"));
      }
      bank.detectors[j] = train_linear_svm(x, y, options, row_fn);
      bank.positive_counts[j] = positives;
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return bank;
}

LinearModel train_category_classifier(const Matrix& positives, const Matrix& negatives,
                                      const SvmOptions& options) {
  if (positives.rows() == 0 || negatives.rows() == 0) {
    throw Error(ErrorKind::kEmptyClass, "category classifier needs positive and negative examples");
  }
  if (positives.cols() != negatives.cols()) {
    throw Error(ErrorKind::kDimensionMismatch, "positive and negative features differ in dimension");
  }
  Matrix x(positives.rows() + negatives.rows(), positives.cols());
  x << positives, negatives;
  std::vector<int> y(static_cast<std::size_t>(x.rows()), -1);
  std::fill(y.begin(), y.begin() + positives.rows(), 1);
  return train_linear_svm(x, y, options);
}

AttributeEmbedding embed(const DetectorBank& bank, const Vector& feature, std::string image_id) {
  if (static_cast<std::size_t>(feature.size()) != bank.feature_dim) {
    throw Error(ErrorKind::kDimensionMismatch,
                fmt::format("feature has dim {}, detectors expect {}", feature.size(), bank.feature_dim));
  }
  AttributeEmbedding e;
  e.image_id = std::move(image_id);
  e.scores.resize(static_cast<Eigen::Index>(bank.attribute_count()));
  for (std::size_t j = 0; j < bank.attribute_count(); ++j) {
    e.scores(static_cast<Eigen::Index>(j)) = bank.detectors[j].margin(feature);
  }
  return e;
}

Matrix embed_rows(const DetectorBank& bank, const Matrix& features) {
  if (static_cast<std::size_t>(features.cols()) != bank.feature_dim) {
    throw Error(ErrorKind::kDimensionMismatch,
                fmt::format("features have dim {}, detectors expect {}", features.cols(), bank.feature_dim));
  }
  const auto k = static_cast<Eigen::Index>(bank.attribute_count());
  Matrix w(k, static_cast<Eigen::Index>(bank.feature_dim));
  Vector b(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    w.row(j) = bank.detectors[static_cast<std::size_t>(j)].w.transpose();
    b(j) = bank.detectors[static_cast<std::size_t>(j)].b;
  }
  Matrix out;
  kernels::omp::affine_rows(features, w, b, out);
  return out;
}

nlohmann::json model_to_json(const LinearModel& m) {
  nlohmann::json j;
  j["w"] = std::vector<double>(m.w.data(), m.w.data() + m.w.size());
  j["b"] = m.b;
  j["c"] = m.c;
  j["train_loss"] = m.train_loss;
  j["objective"] = m.objective;
  j["duality_gap"] = m.duality_gap;
  j["iterations"] = m.iterations;
  j["converged"] = m.converged;
  j["degenerate"] = m.degenerate;
  return j;
}

LinearModel model_from_json(const nlohmann::json& j) {
  try {
    LinearModel m;
    const auto w = j.at("w").get<std::vector<double>>();
    m.w = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
    m.b = j.at("b").get<double>();
    m.c = j.at("c").get<double>();
    m.train_loss = j.value("train_loss", 0.0);
    m.objective = j.value("objective", 0.0);
    m.duality_gap = j.value("duality_gap", 0.0);
    m.iterations = j.value("iterations", 0);
    m.converged = j.value("converged", true);
    m.degenerate = j.value("degenerate", false);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, fmt::format("linear model JSON: {}", e.what()));
  }
}

nlohmann::json bank_sidecar(const DetectorBank& bank) {
  nlohmann::json j;
  j["feature_dim"] = bank.feature_dim;
  j["attribute_count"] = bank.attribute_count();
  auto dets = nlohmann::json::array();
  for (std::size_t i = 0; i < bank.detectors.size(); ++i) {
    const auto& d = bank.detectors[i];
    dets.push_back({{"c", d.c},
                    {"train_loss", d.train_loss},
                    {"objective", d.objective},
                    {"duality_gap", d.duality_gap},
                    {"iterations", d.iterations},
                    {"converged", d.converged},
                    {"degenerate", d.degenerate},
                    {"positives", i < bank.positive_counts.size() ? bank.positive_counts[i] : 0}});
  }
  j["detectors"] = std::move(dets);
  return j;
}

DetectorBank bank_from_matrix(const Matrix& stacked, const nlohmann::json& sidecar) {
  try {
    DetectorBank bank;
    bank.feature_dim = sidecar.at("feature_dim").get<std::size_t>();
    const auto& dets = sidecar.at("detectors");
    if (static_cast<std::size_t>(stacked.cols()) != bank.feature_dim + 1 ||
        static_cast<std::size_t>(stacked.rows()) != dets.size()) {
      throw Error(ErrorKind::kRowMismatch,
                  fmt::format("detector matrix is {}x{} but sidecar describes {} detectors of dim {}", stacked.rows(),
                              stacked.cols(), dets.size(), bank.feature_dim));
    }
    const auto dim = static_cast<Eigen::Index>(bank.feature_dim);
    for (std::size_t i = 0; i < dets.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      LinearModel m;
      m.w = stacked.row(r).head(dim).transpose();
      m.b = stacked(r, dim);
      m.c = dets[i].at("c").get<double>();
      m.train_loss = dets[i].at("train_loss").get<double>();
      m.objective = dets[i].value("objective", 0.0);
      m.duality_gap = dets[i].value("duality_gap", 0.0);
      m.iterations = dets[i].value("iterations", 0);
      m.converged = dets[i].value("converged", true);
      m.degenerate = dets[i].value("degenerate", false);
      bank.detectors.push_back(std::move(m));
      bank.positive_counts.push_back(dets[i].value("positives", std::size_t{0}));
    }
    return bank;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, fmt::format("detector sidecar: {}", e.what()));
  }
}

}  // namespace attribex
