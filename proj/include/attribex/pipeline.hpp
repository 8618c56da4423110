#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "attribex/attrdesign.hpp"
#include "attribex/dataset.hpp"
#include "attribex/detectors.hpp"
#include "attribex/eval.hpp"
#include "attribex/graph.hpp"
#include "attribex/retrieval.hpp"

namespace attribex {

enum class Protocol {
  // Every image with split probe is a query against gallery + distractor images.
  kProbeGallery,
  // Every non-distractor image queries all other images.
  kAllVsAll,
};

const char* to_string(Protocol p);
Protocol parse_protocol(const std::string& text);

struct PipelineConfig {
  double lambda = 2.0;
  double gamma = 7.0;
  std::size_t k = 1000;
  int k_nn = 60;
  double c = 1.0;
  double svm_tol = 1e-6;
  std::size_t pca_dim = 0;  // 0 disables PCA
  bool whiten = false;
  double power_alpha = 1.0;
  EdgeWeighting edge_weighting = EdgeWeighting::kWeighted;
  AttrMetric attr_metric = AttrMetric::kCosine;
  ScoreNormalization normalization = ScoreNormalization::kMinMax;
  bool use_deep = false;
  bool use_class = false;
  double eig_tol = 1e-8;
  int eig_max_iter = 5000;
  bool strict_convergence = false;
  Protocol protocol = Protocol::kAllVsAll;
  bool multi_shot = false;
  std::size_t max_rank = 20;
  std::uint64_t base_seed = 42;
  // Category whose instances define the attributes; empty uses every
  // non-distractor training image.
  std::string target_category;
};

nlohmann::json config_to_json(const PipelineConfig& c);

struct TrainedModel {
  double power_alpha = 1.0;
  std::optional<Projector> projector;
  SimilarityGraph graph;
  AttributeMatrix attributes;
  DetectorBank bank;
  std::optional<LinearModel> category;
  std::vector<std::string> instance_ids;
};

// Power + l2 normalization, then the projector (and l2 again) when present.
Matrix preprocess(const Matrix& raw, double power_alpha, const std::optional<Projector>& projector);

// Training images of the target category, and the other-category training
// images that serve as category-classifier negatives.
std::vector<std::size_t> attribute_training_rows(const FeatureDataset& ds, const PipelineConfig& config);
std::vector<std::size_t> category_negative_rows(const FeatureDataset& ds, const PipelineConfig& config);

// Images that shape the attribute design: non-distractor images of the target
// category (every category when none is set).
FeatureDataset design_set(const FeatureDataset& train, const PipelineConfig& config);
std::optional<Projector> fit_projector(const Matrix& raw_train, const PipelineConfig& config);
DesignOptions design_options(const PipelineConfig& config);
SvmOptions svm_options(const PipelineConfig& config);

// Every image not labeled train: the held-out evaluation pool.
std::vector<std::size_t> evaluation_rows(const FeatureDataset& ds);

/// Fits the projector (training features only), builds the graph, designs the
/// attributes and trains the detector bank. `negatives` (already raw features)
/// trains the category classifier when config.use_class is set.
TrainedModel train_model(const FeatureDataset& train, const PipelineConfig& config,
                         const Matrix* category_negatives = nullptr);

struct QuerySet {
  std::vector<std::size_t> queries;  // row indices into the evaluated dataset
  std::vector<std::size_t> gallery;
  GroundTruth gt;
};

QuerySet build_queries(const FeatureDataset& ds, Protocol protocol, bool multi_shot);

// Ranks every query against the gallery (minus the query itself). Attribute
// embeddings, deep features and class scores are row-aligned with the dataset;
// class_scores may be empty.
std::vector<RankedResult> rank_queries(const FeatureDataset& ds, const QuerySet& qs,
                                       const Matrix& attr_embeddings, const Matrix& deep_features,
                                       const Vector& class_scores, const PipelineConfig& config);

// Cosine ranking on preprocessed raw features only.
std::vector<RankedResult> rank_raw(const FeatureDataset& ds, const QuerySet& qs,
                                   const Matrix& deep_features);

EvalReport evaluate(const std::vector<RankedResult>& results, const GroundTruth& gt,
                    std::size_t max_rank);

struct EmbeddedSet {
  Matrix deep;      // preprocessed features
  Matrix attr;      // attribute embeddings (all k columns)
  Vector category;  // category-classifier margins; empty without a classifier
};

EmbeddedSet embed_dataset(const TrainedModel& model, const FeatureDataset& ds);

// Ranks and evaluates using only the first k attribute columns.
EvalReport evaluate_prefix(const FeatureDataset& ds, const QuerySet& qs, const EmbeddedSet& e, std::size_t k,
                           const PipelineConfig& config);

// For each repeat r: split_half(seed = base_seed + r), train on the first half,
// evaluate on the second. Reported map/cmc are means over repeats.
EvalReport repeated_splits_eval(const FeatureDataset& dataset, std::size_t n_repeats,
                                const PipelineConfig& config);

struct SweepCell {
  double lambda = 0.0;
  double gamma = 0.0;
  std::size_t k = 0;
  bool failed = false;
  std::string error;
  double map = 0.0;
  std::vector<double> cmc;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<std::string> warnings;
};

/// Trains and evaluates every (lambda, gamma, k) cell on the dataset's own
/// train / test labels. Attributes are prefix-consistent in k, so one design
/// per (lambda, gamma) at the largest k serves every k.
SweepResult parameter_sweep(const FeatureDataset& dataset, std::vector<double> lambdas,
                            std::vector<double> gammas, std::vector<std::size_t> ks,
                            const PipelineConfig& config);

// Columns: lambda, gamma, k, repeat, metric, value.
void write_sweep_csv(std::ostream& out, const SweepResult& sweep);
nlohmann::json sweep_to_json(const SweepResult& sweep);

}  // namespace attribex
