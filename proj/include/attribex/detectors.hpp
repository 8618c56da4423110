#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"

#include "attribex/attrdesign.hpp"
#include "attribex/dataset.hpp"
#include "attribex/svm.hpp"

namespace attribex {

struct DetectorBank {
  std::vector<LinearModel> detectors;
  std::vector<std::size_t> positive_counts;
  std::size_t feature_dim = 0;

  std::size_t attribute_count() const { return detectors.size(); }
  // Stacked [w | b] rows.
  Matrix to_matrix() const;
  DetectorBank prefix(std::size_t count) const;
};

struct AttributeEmbedding {
  std::string image_id;
  Vector scores;
};

// Detector j: positives are the images of instances with a(i, j) > 0, all
// other images are negatives. Dataset instances align with the rows of a.
// Detectors train in parallel and share one Gram matrix.
DetectorBank train_attribute_detectors(const FeatureDataset& train, const AttributeMatrix& a,
                                       const SvmOptions& options);

LinearModel train_category_classifier(const Matrix& positives, const Matrix& negatives,
                                      const SvmOptions& options);

AttributeEmbedding embed(const DetectorBank& bank, const Vector& feature,
                         std::string image_id = {});
// Row i = raw margins of every detector on features.row(i).
Matrix embed_rows(const DetectorBank& bank, const Matrix& features);

DetectorBank bank_from_matrix(const Matrix& stacked, const nlohmann::json& sidecar);
nlohmann::json bank_sidecar(const DetectorBank& bank);
nlohmann::json model_to_json(const LinearModel& m);
LinearModel model_from_json(const nlohmann::json& j);

}  // namespace attribex
