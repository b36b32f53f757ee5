#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace fdd {

/// Patch features are stored row-major so the on-disk layout (row-major
/// binary32) maps directly onto memory.
using MatrixXfRowMajor =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One slide's exported MIL state: per-patch embeddings and attention scores,
/// the model's slide-level outputs, and (optionally) the label.
///
/// Values are stored exactly as exported (binary32); all downstream
/// arithmetic happens at binary64 precision.
struct PatchBag {
  std::string slide_id;
  std::optional<int> label;       ///< 0 or 1; absent for unlabeled slides
  MatrixXfRowMajor patch_features;  ///< N x J
  Eigen::VectorXf attention;        ///< N, raw scores (only ordering is used)
  std::array<double, 2> softmax{0.0, 0.0};
  std::optional<Eigen::VectorXf> penultimate;  ///< P
  std::optional<std::vector<std::array<double, 2>>> ensemble_softmax;  ///< E rows

  Eigen::Index num_patches() const { return patch_features.rows(); }
};

/// A named collection of slides scored by one model. Immutable after
/// construction; safe for unrestricted concurrent reads.
struct Dataset {
  std::string dataset_id;
  std::string model_id;
  int feature_dim = 0;                 ///< J
  std::optional<int> penultimate_dim;  ///< P, when any bag carries penultimate
  std::optional<int> ensemble_size;    ///< E, when any bag carries ensemble rows
  std::vector<PatchBag> bags;

  std::size_t size() const { return bags.size(); }
};

enum class Selector {
  PositiveEvidence,  ///< K patches with the highest attention
  NegativeEvidence,  ///< K patches with the lowest attention
  CombinedEvidence,  ///< K/2 highest plus K/2 lowest
  Random,            ///< K patches sampled without replacement
  MeanPatch,         ///< attention-agnostic mean over all patches
  Penultimate,       ///< the stored penultimate-layer vector
};

enum class Aggregation { Mean, Concat };

/// Describes how a slide is turned into one descriptor vector. k, aggregation
/// and seed are ignored by the selectors that do not use them.
struct FeatureConfig {
  Selector selector = Selector::PositiveEvidence;
  int k = 64;
  Aggregation aggregation = Aggregation::Mean;
  std::uint64_t seed = 0;  ///< random selector only

  bool operator==(const FeatureConfig&) const = default;
};

/// True for the four attention-based selectors.
bool uses_evidence(Selector s);

/// Slide-level descriptors for one dataset under one configuration.
/// Row order is dataset order. J' = J (mean aggregation, mean_patch),
/// K*J (concat) or P (penultimate).
struct FeatureMatrix {
  std::string dataset_id;
  std::string model_id;
  FeatureConfig config;
  Eigen::MatrixXd rows;  ///< W x J'
  std::vector<std::string> slide_ids;
};

/// Mean and covariance fit to a FeatureMatrix. Covariance is symmetric by
/// construction and uses the unbiased (W-1) estimator.
struct GaussianSummary {
  std::string dataset_id;
  std::string model_id;
  FeatureConfig config;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  std::int64_t sample_count = 0;
};

enum class Measure { Fdd, Rs, DocSoftmax, DocEntropy, DeEntropy };

/// One shift-measure evaluation between a reference and a target dataset.
/// value == |signed_value| for the confidence measures; for fdd and rs the
/// two coincide and are >= 0.
struct ShiftMeasureResult {
  Measure measure = Measure::Fdd;
  double value = 0.0;
  double signed_value = 0.0;
  std::optional<FeatureConfig> config;  ///< set for feature-based measures
  std::string reference_id;
  std::string target_id;
  std::string model_id;
};

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;
};

/// One (model, reference, target) triple with its shift value and the
/// observed performance change. mcc_drop is mcc_ref - mcc_target exactly.
struct EvaluationRecord {
  std::string model_id;
  std::string reference_id;
  std::string target_id;
  ShiftMeasureResult measure;
  double mcc_ref = 0.0;
  double mcc_target = 0.0;
  double mcc_drop = 0.0;
  double auc_ref = 0.0;
  double auc_target = 0.0;
};

// Names used by the CLI, manifests and CSV output.
std::string to_string(Selector s);
std::string to_string(Aggregation a);
std::string to_string(Measure m);
Selector parse_selector(const std::string& name);
Aggregation parse_aggregation(const std::string& name);
Measure parse_measure(const std::string& name);

/// Compact one-line echo, e.g. "selector=positive_evidence k=64 agg=mean seed=0".
std::string describe(const FeatureConfig& config);

}  // namespace fdd
