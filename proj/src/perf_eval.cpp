#include "fdd/perf_eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>

#include "fdd/error.hpp"
#include "fdd/numeric.hpp"

namespace fdd {

namespace {

void check_binary_labels(const std::vector<int>& labels,
                         const std::vector<double>& scores, const char* who) {
  if (labels.size() != scores.size())
    throw Error(std::string(who) + ": labels and scores differ in length");
  if (labels.empty()) throw Error(std::string(who) + ": empty input");
  bool has_pos = false;
  bool has_neg = false;
  for (const int label : labels) {
    if (label == 1)
      has_pos = true;
    else if (label == 0)
      has_neg = true;
    else
      throw Error(std::string(who) + ": labels must be 0 or 1");
  }
  if (!has_pos || !has_neg)
    throw Error(std::string(who) + ": need both classes present");
}

}  // namespace

double mcc(const ConfusionCounts& c) {
  const auto tp = static_cast<double>(c.tp);
  const auto fp = static_cast<double>(c.fp);
  const auto tn = static_cast<double>(c.tn);
  const auto fn = static_cast<double>(c.fn);
  const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (denom == 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(denom);
}

double roc_auc(const std::vector<int>& labels, const std::vector<double>& scores) {
  check_binary_labels(labels, scores, "roc_auc");
  const std::size_t n = labels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Average ranks over tied scores, then the Mann-Whitney identity.
  double positive_rank_sum = 0.0;
  std::size_t num_pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        positive_rank_sum += avg_rank;
        ++num_pos;
      }
    }
    i = j;
  }
  const auto num_neg = static_cast<double>(n - num_pos);
  const auto pos = static_cast<double>(num_pos);
  return (positive_rank_sum - pos * (pos + 1.0) / 2.0) / (pos * num_neg);
}

double select_threshold(const std::vector<int>& labels,
                        const std::vector<double>& scores) {
  check_binary_labels(labels, scores, "select_threshold");
  const std::size_t n = labels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  ConfusionCounts counts;  // predictions at a threshold below every score
  for (const int label : labels)
    (label == 1 ? counts.tp : counts.fp) += 1;

  double best_threshold = scores[order[0]] - 1.0;  // below-min sentinel
  double best_mcc = mcc(counts);

  std::size_t i = 0;
  while (i < n) {
    // Raising the threshold past this tie group flips it to predicted 0.
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        --counts.tp;
        ++counts.fn;
      } else {
        --counts.fp;
        ++counts.tn;
      }
    }
    const double candidate =
        j < n ? 0.5 * (scores[order[i]] + scores[order[j]])  // midpoint
              : scores[order[n - 1]] + 1.0;                  // above-max sentinel
    const double value = mcc(counts);
    if (value > best_mcc) {  // strict: ties keep the smaller threshold
      best_mcc = value;
      best_threshold = candidate;
    }
    i = j;
  }
  return best_threshold;
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw Error("pearson: length mismatch");
  if (xs.size() < 2) throw Error("pearson: need at least 2 points");
  const auto n = xs.size();
  const double mean_x = pairwise_sum(xs) / static_cast<double>(n);
  const double mean_y = pairwise_sum(ys) / static_cast<double>(n);
  std::vector<double> xy(n), xx(n), yy(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mean_x;
    const double dy = ys[i] - mean_y;
    xy[i] = dx * dy;
    xx[i] = dx * dx;
    yy[i] = dy * dy;
  }
  const double var_x = pairwise_sum(xx);
  const double var_y = pairwise_sum(yy);
  if (var_x == 0.0 || var_y == 0.0)
    throw Error("pearson: constant input vector, correlation undefined");
  return pairwise_sum(xy) / std::sqrt(var_x * var_y);
}

MeasureEvaluation evaluate_measure(const std::vector<EvaluationRecord>& records) {
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> grouped;
  for (const auto& record : records) {
    auto& [values, drops] = grouped[record.model_id];
    values.push_back(record.measure.value);
    drops.push_back(record.mcc_drop);
  }
  if (grouped.empty()) throw Error("evaluate_measure: no records");

  MeasureEvaluation result;
  for (const auto& [model_id, series] : grouped) {
    const auto& [values, drops] = series;
    if (values.size() < 2)
      throw Error("evaluate_measure: model '" + model_id +
                  "' has fewer than 2 records");
    try {
      result.per_model_r[model_id] = pearson(values, drops);
    } catch (const Error& e) {
      throw Error("evaluate_measure: model '" + model_id + "': " + e.what());
    }
  }
  std::vector<double> rs;
  rs.reserve(result.per_model_r.size());
  for (const auto& [_, r] : result.per_model_r) rs.push_back(r);
  result.mean_r = pairwise_sum(rs) / static_cast<double>(rs.size());
  std::vector<double> sq(rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i) {
    const double d = rs[i] - result.mean_r;
    sq[i] = d * d;
  }
  result.std_r = std::sqrt(pairwise_sum(sq) / static_cast<double>(rs.size()));
  return result;
}

double pooled_pearson(const std::vector<EvaluationRecord>& records) {
  std::vector<double> values, drops;
  values.reserve(records.size());
  drops.reserve(records.size());
  for (const auto& record : records) {
    values.push_back(record.measure.value);
    drops.push_back(record.mcc_drop);
  }
  return pearson(values, drops);
}

std::pair<std::vector<int>, std::vector<double>> labeled_scores(const Dataset& d) {
  std::vector<int> labels;
  std::vector<double> scores;
  for (const auto& bag : d.bags) {
    if (!bag.label) continue;  // unlabeled slides carry no performance signal
    labels.push_back(*bag.label);
    scores.push_back(bag.softmax[1]);
  }
  if (labels.empty())
    throw Error("dataset '" + d.dataset_id + "' has no labeled slides");
  return {std::move(labels), std::move(scores)};
}

ConfusionCounts confusion_at_threshold(const Dataset& d, double threshold) {
  const auto [labels, scores] = labeled_scores(d);
  ConfusionCounts counts;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == 1)
      (predicted ? counts.tp : counts.fn) += 1;
    else
      (predicted ? counts.fp : counts.tn) += 1;
  }
  return counts;
}

double dataset_mcc(const Dataset& d, double threshold) {
  return mcc(confusion_at_threshold(d, threshold));
}

double dataset_auc(const Dataset& d) {
  const auto [labels, scores] = labeled_scores(d);
  return roc_auc(labels, scores);
}

}  // namespace fdd
