#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "attribex/common.hpp"

namespace attribex {

enum class Split { kTrain, kGallery, kProbe, kDistractor };

const char* to_string(Split split);
Split parse_split(const std::string& text);

struct ImageRecord {
  std::string image_id;
  std::string instance_id;
  std::string category_id;
  Split split = Split::kTrain;
};

/// Images with labels and a feature matrix whose rows align with `images()`.
///
/// Instances are indexed in order of first appearance, which makes every
/// derived per-instance structure (similarity graph, attribute matrix rows)
/// deterministic for a given file.
class FeatureDataset {
 public:
  FeatureDataset() = default;
  // Validates: row count, finiteness, unique image ids.
  FeatureDataset(std::vector<ImageRecord> images, Matrix features);

  std::size_t n_images() const { return images_.size(); }
  std::size_t n_instances() const { return instance_ids_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(features_.cols()); }

  const std::vector<ImageRecord>& images() const { return images_; }
  const ImageRecord& image(std::size_t i) const { return images_[i]; }
  const Matrix& features() const { return features_; }
  auto feature(std::size_t i) const { return features_.row(static_cast<Eigen::Index>(i)); }

  const std::vector<std::string>& instance_ids() const { return instance_ids_; }
  // Instance index (into instance_ids()) of image i.
  std::size_t instance_of(std::size_t i) const { return image_instance_[i]; }
  // Image row indices grouped by instance, in instance order.
  const std::vector<std::vector<std::size_t>>& images_by_instance() const { return groups_; }

  FeatureDataset subset(const std::vector<std::size_t>& rows) const;
  FeatureDataset with_features(Matrix features) const;

 private:
  std::vector<ImageRecord> images_;
  Matrix features_;
  std::vector<std::string> instance_ids_;
  std::vector<std::size_t> image_instance_;
  std::vector<std::vector<std::size_t>> groups_;
};

// Corpus directory: meta.jsonl + features.bin.
FeatureDataset load_features(const std::filesystem::path& dir);
void save_features(const FeatureDataset& dataset, const std::filesystem::path& dir);

Vector l2_normalize(const Vector& v);
Vector power_normalize(const Vector& v, double alpha);
// Power normalization (skipped when alpha == 1) followed by l2, row by row.
Matrix normalize_rows(const Matrix& features, double alpha);

inline constexpr double kEigenvalueFloor = 1e-10;

struct Projector {
  Vector mean;        // d
  Matrix basis;       // target_dim x d, orthonormal rows
  Vector eigenvalues;  // target_dim, descending
  bool whiten = false;

  std::size_t input_dim() const { return static_cast<std::size_t>(basis.cols()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(basis.rows()); }
};

Projector fit_pca_whitener(const Matrix& features, std::size_t target_dim, bool whiten);
Vector apply_projector(const Projector& p, const Vector& v);
Matrix apply_projector(const Projector& p, const Matrix& rows);

nlohmann::json projector_to_json(const Projector& p);
Projector projector_from_json(const nlohmann::json& j);

// Partitions instances (not images); the first half gets ceil(n/2) instances.
std::pair<FeatureDataset, FeatureDataset> split_half(const FeatureDataset& dataset,
                                                     std::uint64_t seed);

struct SyntheticOptions {
  std::size_t n_instances = 40;
  std::size_t views_per_instance = 8;
  std::size_t dim = 64;
  double view_noise = 0.5;
  std::uint64_t seed = 1;
  // Latent factors shared by all prototypes of the category.
  std::size_t latent_factors = 6;
  // Idiosyncratic part of each prototype, relative to the shared part.
  double instance_residual = 0.35;
  // Isotropic per-image noise, relative to the view shift.
  double image_noise = 1.5;
  // Instances with index >= n_train get probe/gallery labels instead of train.
  // Defaults to all instances being training instances.
  std::optional<std::size_t> n_train;
  // Extra "other category" images: half labeled train (negatives for the
  // category classifier), half labeled distractor.
  std::size_t n_distractors = 0;
  std::string category = "cat0";
};

FeatureDataset generate_synthetic(const SyntheticOptions& options);
FeatureDataset generate_synthetic(std::size_t n_instances, std::size_t views_per_instance,
                                  std::size_t dim, double view_noise, std::uint64_t seed);

}  // namespace attribex
