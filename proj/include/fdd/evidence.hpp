#pragma once

#include <vector>

#include "fdd/types.hpp"

namespace fdd {

/// Patch indices chosen by an evidence selector, in selection order:
/// descending attention for positive evidence, ascending for negative,
/// top-then-bottom for combined, sampled order for random. Ties in attention
/// are broken towards the lower patch index. K is clamped to the bag size;
/// for combined evidence with a clamped odd K', the top half gets the extra
/// row. The random selector draws without replacement from a SplitMix64
/// stream seeded by mix(config.seed, fnv1a64(slide_id)).
std::vector<int> select_evidence_indices(const PatchBag& bag,
                                         const FeatureConfig& config);

/// The selected patch feature rows (binary64), K' x J, in selection order.
Eigen::MatrixXd select_evidence(const PatchBag& bag, const FeatureConfig& config);

/// Mean: componentwise average over rows (length J). Concat: rows joined in
/// selection order (length rows*J).
Eigen::VectorXd aggregate(const Eigen::MatrixXd& evidence, Aggregation mode);

/// One descriptor row per bag, in dataset order. Concat mode pads clamped
/// bags by repeating the last selected row so every slide has K*J columns.
FeatureMatrix build_feature_matrix(const Dataset& d, const FeatureConfig& config);

}  // namespace fdd
