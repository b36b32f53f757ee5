#include "fdd/evidence.hpp"

#include <algorithm>
#include <numeric>
#include <span>
#include <unordered_set>

#include "fdd/error.hpp"
#include "fdd/numeric.hpp"
#include "fdd/parallel.hpp"
#include "fdd/rng.hpp"

namespace fdd {

namespace {

constexpr int kMaxK = 1'000'000;

void check_evidence_config(const FeatureConfig& config) {
  if (!uses_evidence(config.selector))
    throw Error("selector '" + to_string(config.selector) +
                "' is not an evidence selector");
  if (config.k < 1 || config.k > kMaxK)
    throw Error("K must be in [1, " + std::to_string(kMaxK) + "], got " +
                std::to_string(config.k));
  if (config.selector == Selector::CombinedEvidence && config.k % 2 != 0)
    throw Error("combined_evidence requires an even K, got " +
                std::to_string(config.k));
}

// stable_sort keeps the lower patch index first on attention ties.
std::vector<int> order_by_attention(const Eigen::VectorXf& att, bool descending) {
  std::vector<int> idx(static_cast<std::size_t>(att.size()));
  std::iota(idx.begin(), idx.end(), 0);
  if (descending)
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return att[a] > att[b]; });
  else
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return att[a] < att[b]; });
  return idx;
}

std::vector<int> sample_without_replacement(int n, int count, std::uint64_t stream_seed) {
  rng::SplitMix64 gen(stream_seed);
  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  // Partial Fisher-Yates; the first `count` entries are the sample, in order.
  for (int i = 0; i < count; ++i) {
    const auto j = i + static_cast<int>(gen.next_below(static_cast<std::uint64_t>(n - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(count));
  return pool;
}

}  // namespace

std::vector<int> select_evidence_indices(const PatchBag& bag,
                                         const FeatureConfig& config) {
  check_evidence_config(config);
  const int n = static_cast<int>(bag.num_patches());
  if (n < 1) throw Error("slide '" + bag.slide_id + "': bag has no patches");
  const int kp = std::min(config.k, n);

  switch (config.selector) {
    case Selector::PositiveEvidence: {
      auto order = order_by_attention(bag.attention, /*descending=*/true);
      order.resize(static_cast<std::size_t>(kp));
      return order;
    }
    case Selector::NegativeEvidence: {
      auto order = order_by_attention(bag.attention, /*descending=*/false);
      order.resize(static_cast<std::size_t>(kp));
      return order;
    }
    case Selector::CombinedEvidence: {
      // Top gets the extra row when the clamped K' is odd.
      const int top_count = (kp + 1) / 2;
      const int bottom_count = kp / 2;
      const auto descending = order_by_attention(bag.attention, true);
      const auto ascending = order_by_attention(bag.attention, false);
      std::vector<int> selected(descending.begin(), descending.begin() + top_count);
      std::unordered_set<int> taken(selected.begin(), selected.end());
      // Under attention ties the two orders can collide on the same patch;
      // skipping keeps the selection a set of distinct patches.
      for (int i = 0; i < n && static_cast<int>(selected.size()) < top_count + bottom_count; ++i) {
        const int candidate = ascending[static_cast<std::size_t>(i)];
        if (!taken.contains(candidate)) selected.push_back(candidate);
      }
      return selected;
    }
    case Selector::Random:
      return sample_without_replacement(
          n, kp, rng::mix(config.seed, rng::fnv1a64(bag.slide_id)));
    default:
      throw Error("unreachable selector");
  }
}

Eigen::MatrixXd select_evidence(const PatchBag& bag, const FeatureConfig& config) {
  const auto indices = select_evidence_indices(bag, config);
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(indices.size()),
                       bag.patch_features.cols());
  for (std::size_t r = 0; r < indices.size(); ++r)
    rows.row(static_cast<Eigen::Index>(r)) =
        bag.patch_features.row(indices[r]).cast<double>();
  return rows;
}

Eigen::VectorXd aggregate(const Eigen::MatrixXd& evidence, Aggregation mode) {
  const Eigen::Index rows = evidence.rows();
  const Eigen::Index cols = evidence.cols();
  if (rows == 0) throw Error("aggregate: empty evidence matrix");
  if (mode == Aggregation::Mean) {
    Eigen::VectorXd out(cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Eigen::VectorXd column = evidence.col(c);
      out[c] = pairwise_sum(std::span<const double>(
                   column.data(), static_cast<std::size_t>(rows))) /
               static_cast<double>(rows);
    }
    return out;
  }
  Eigen::VectorXd out(rows * cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    out.segment(r * cols, cols) = evidence.row(r);
  return out;
}

FeatureMatrix build_feature_matrix(const Dataset& d, const FeatureConfig& config) {
  const auto w = static_cast<Eigen::Index>(d.bags.size());
  Eigen::Index jp = 0;
  switch (config.selector) {
    case Selector::MeanPatch:
      jp = d.feature_dim;
      break;
    case Selector::Penultimate: {
      if (!d.penultimate_dim)
        throw Error("dataset '" + d.dataset_id + "' carries no penultimate features");
      for (const auto& bag : d.bags)
        if (!bag.penultimate)
          throw Error("slide '" + bag.slide_id + "': missing penultimate features");
      jp = *d.penultimate_dim;
      break;
    }
    default:
      check_evidence_config(config);
      jp = config.aggregation == Aggregation::Concat
               ? static_cast<Eigen::Index>(config.k) * d.feature_dim
               : static_cast<Eigen::Index>(d.feature_dim);
      break;
  }

  FeatureMatrix fm;
  fm.dataset_id = d.dataset_id;
  fm.model_id = d.model_id;
  fm.config = config;
  fm.rows.resize(w, jp);
  fm.slide_ids.resize(d.bags.size());

  parallel_for_index(d.bags.size(), [&](std::size_t i) {
    const PatchBag& bag = d.bags[i];
    fm.slide_ids[i] = bag.slide_id;
    const auto row = static_cast<Eigen::Index>(i);
    switch (config.selector) {
      case Selector::MeanPatch:
        fm.rows.row(row) =
            aggregate(bag.patch_features.cast<double>(), Aggregation::Mean);
        break;
      case Selector::Penultimate:
        fm.rows.row(row) = bag.penultimate->cast<double>();
        break;
      default: {
        Eigen::MatrixXd evidence = select_evidence(bag, config);
        if (config.aggregation == Aggregation::Concat &&
            evidence.rows() < config.k) {
          // Clamped bag: repeat the last selected row up to K so every
          // slide shares K*J columns.
          const Eigen::Index have = evidence.rows();
          evidence.conservativeResize(config.k, Eigen::NoChange);
          for (Eigen::Index r = have; r < config.k; ++r)
            evidence.row(r) = evidence.row(have - 1);
        }
        fm.rows.row(row) = aggregate(evidence, config.aggregation);
        break;
      }
    }
  });
  if (!fm.rows.allFinite())
    throw Error("dataset '" + d.dataset_id + "': non-finite descriptor value");
  return fm;
}

}  // namespace fdd
