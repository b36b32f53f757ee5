#pragma once

#include <map>
#include <vector>

#include "fdd/types.hpp"

namespace fdd {

/// Matthews correlation coefficient. Returns 0 when any denominator factor
/// is zero (the standard convention).
double mcc(const ConfusionCounts& c);

/// Mann-Whitney ROC-AUC: the fraction of (positive, negative) pairs with
/// score_pos > score_neg, ties counting one half. Requires both classes.
double roc_auc(const std::vector<int>& labels, const std::vector<double>& scores);

/// The threshold t maximizing the MCC of the rule (score >= t -> class 1),
/// searched over midpoints of consecutive distinct sorted scores plus
/// sentinels one below the minimum and one above the maximum. MCC ties break
/// towards the smallest threshold.
double select_threshold(const std::vector<int>& labels,
                        const std::vector<double>& scores);

/// Sample Pearson correlation. Errors on fewer than two points or a
/// constant input vector.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

struct MeasureEvaluation {
  std::map<std::string, double> per_model_r;
  double mean_r = 0.0;
  double std_r = 0.0;  ///< population standard deviation over models
};

/// Per model, the Pearson correlation between measure value and MCC drop
/// across its (reference, target) pairs; mean and population std over
/// models. Errors name any model with fewer than two records or constant
/// values.
MeasureEvaluation evaluate_measure(const std::vector<EvaluationRecord>& records);

/// Pooled variant: one correlation over all records regardless of model.
double pooled_pearson(const std::vector<EvaluationRecord>& records);

// Dataset-level helpers (unlabeled slides are excluded).
ConfusionCounts confusion_at_threshold(const Dataset& d, double threshold);
double dataset_mcc(const Dataset& d, double threshold);
double dataset_auc(const Dataset& d);
std::pair<std::vector<int>, std::vector<double>> labeled_scores(const Dataset& d);

}  // namespace fdd
