#include "fdd/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <span>

#include "fdd/error.hpp"
#include "fdd/evidence.hpp"
#include "fdd/numeric.hpp"
#include "fdd/parallel.hpp"

namespace fdd {

namespace {

double mean_of(std::span<const double> values) {
  return pairwise_sum(values) / static_cast<double>(values.size());
}

/// Mean over bags of fn(bag); errors on an empty dataset.
template <typename Fn>
double bag_mean(const Dataset& d, Fn&& fn) {
  if (d.bags.empty()) throw Error("empty dataset '" + d.dataset_id + "'");
  std::vector<double> values(d.bags.size());
  for (std::size_t i = 0; i < d.bags.size(); ++i) values[i] = fn(d.bags[i]);
  return mean_of(values);
}

ShiftMeasureResult make_result(Measure measure, double signed_value,
                               const Dataset& ref, const Dataset& tgt) {
  ShiftMeasureResult r;
  r.measure = measure;
  r.signed_value = signed_value;
  r.value = std::abs(signed_value);
  r.reference_id = ref.dataset_id;
  r.target_id = tgt.dataset_id;
  r.model_id = ref.model_id;
  return r;
}

}  // namespace

double entropy(const std::array<double, 2>& p) {
  for (const double v : p)
    if (v < 0.0) throw Error("entropy: negative probability");
  if (std::abs(p[0] + p[1] - 1.0) > 1e-5)
    throw Error("entropy: probabilities sum to " + std::to_string(p[0] + p[1]));
  double h = 0.0;
  for (const double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

ShiftMeasureResult doc_softmax(const Dataset& ref, const Dataset& tgt) {
  const auto confidence = [](const PatchBag& bag) {
    return std::max(bag.softmax[0], bag.softmax[1]);
  };
  const double diff = bag_mean(ref, confidence) - bag_mean(tgt, confidence);
  return make_result(Measure::DocSoftmax, diff, ref, tgt);
}

ShiftMeasureResult doc_entropy(const Dataset& ref, const Dataset& tgt) {
  const auto bag_entropy = [](const PatchBag& bag) { return entropy(bag.softmax); };
  const double diff = bag_mean(tgt, bag_entropy) - bag_mean(ref, bag_entropy);
  return make_result(Measure::DocEntropy, diff, ref, tgt);
}

ShiftMeasureResult de_entropy(const Dataset& ref, const Dataset& tgt) {
  for (const Dataset* d : {&ref, &tgt}) {
    if (!d->ensemble_size || *d->ensemble_size < 2)
      throw Error("de_entropy: dataset '" + d->dataset_id +
                  "' has no ensemble outputs (need E >= 2)");
    for (const auto& bag : d->bags)
      if (!bag.ensemble_softmax ||
          static_cast<int>(bag.ensemble_softmax->size()) != *d->ensemble_size)
        throw Error("de_entropy: slide '" + bag.slide_id +
                    "': missing or ragged ensemble outputs");
  }
  const auto ensemble_entropy = [](const PatchBag& bag) {
    std::array<double, 2> mean{0.0, 0.0};
    for (const auto& row : *bag.ensemble_softmax) {
      mean[0] += row[0];
      mean[1] += row[1];
    }
    const auto e = static_cast<double>(bag.ensemble_softmax->size());
    mean[0] /= e;
    mean[1] /= e;
    return entropy(mean);
  };
  const double diff = bag_mean(tgt, ensemble_entropy) - bag_mean(ref, ensemble_entropy);
  return make_result(Measure::DeEntropy, diff, ref, tgt);
}

double wasserstein1(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw Error("wasserstein1: empty input");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::size_t grid = std::max(a.size(), b.size());
  // Right-continuous step quantiles evaluated at midpoints (i + 0.5)/grid.
  const auto quantile = [](const std::vector<double>& sorted, double q) {
    const auto pos = static_cast<std::size_t>(q * static_cast<double>(sorted.size()));
    return sorted[std::min(pos, sorted.size() - 1)];
  };
  std::vector<double> diffs(grid);
  for (std::size_t i = 0; i < grid; ++i) {
    const double q = (static_cast<double>(i) + 0.5) / static_cast<double>(grid);
    diffs[i] = std::abs(quantile(a, q) - quantile(b, q));
  }
  return mean_of(diffs);
}

ShiftMeasureResult representation_shift(const Dataset& ref, const Dataset& tgt,
                                        const FeatureConfig& config) {
  const FeatureMatrix fa = build_feature_matrix(ref, config);
  const FeatureMatrix fb = build_feature_matrix(tgt, config);
  if (fa.rows.cols() != fb.rows.cols())
    throw Error("representation_shift: descriptor dimension mismatch (" +
                std::to_string(fa.rows.cols()) + " vs " +
                std::to_string(fb.rows.cols()) + ")");
  const auto jp = static_cast<std::size_t>(fa.rows.cols());
  std::vector<double> per_column(jp);
  parallel_for_index(jp, [&](std::size_t c) {
    const auto col = static_cast<Eigen::Index>(c);
    std::vector<double> col_a(fa.rows.col(col).data(),
                              fa.rows.col(col).data() + fa.rows.rows());
    std::vector<double> col_b(fb.rows.col(col).data(),
                              fb.rows.col(col).data() + fb.rows.rows());
    per_column[c] = wasserstein1(std::move(col_a), std::move(col_b));
  });
  auto result = make_result(Measure::Rs, mean_of(per_column), ref, tgt);
  result.config = config;
  return result;
}

}  // namespace fdd
