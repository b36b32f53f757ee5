#pragma once

#include <vector>

#include "fdd/types.hpp"

namespace fdd {

/// Shannon entropy of a two-class distribution in nats, with 0*ln(0) = 0.
double entropy(const std::array<double, 2>& p);

/// Difference of Confidence on max-softmax scores:
/// signed_value = mean reference confidence - mean target confidence.
ShiftMeasureResult doc_softmax(const Dataset& ref, const Dataset& tgt);

/// Difference of Confidence on predictive entropy:
/// signed_value = mean target entropy - mean reference entropy
/// (shift raises entropy).
ShiftMeasureResult doc_entropy(const Dataset& ref, const Dataset& tgt);

/// Deep-Ensemble entropy: per bag the ensemble softmax rows are averaged
/// componentwise before taking the entropy; signed as doc_entropy.
ShiftMeasureResult de_entropy(const Dataset& ref, const Dataset& tgt);

/// 1-D Wasserstein-1 between empirical distributions: both empirical
/// quantile functions are evaluated on the uniform grid of max(|a|,|b|)
/// midpoints with inverse-CDF step interpolation and the absolute
/// differences averaged. For equal sizes this is mean |a_(i) - b_(i)| over
/// sorted order.
double wasserstein1(std::vector<double> a, std::vector<double> b);

/// Representation Shift: per-column Wasserstein-1 between the two feature
/// matrices, averaged over the J' columns.
ShiftMeasureResult representation_shift(const Dataset& ref, const Dataset& tgt,
                                        const FeatureConfig& config);

}  // namespace fdd
