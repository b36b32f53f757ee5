#include "fdd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>

#include "fdd/error.hpp"
#include "fdd/measures.hpp"
#include "fdd/parallel.hpp"
#include "fdd/perf_eval.hpp"
#include "fdd/rng.hpp"

namespace fdd::synth {

namespace {

using rng::fnv1a64;
using rng::mix;
using rng::SplitMix64;

constexpr int kTopPatches = 4;  // patches the scorer pools over
constexpr double kScorerWeight = 4.0;
constexpr double kScorerBias = 1.5;

void check_config(const SynthConfig& cfg) {
  if (cfg.num_slides < 2) throw Error("synth: num_slides must be >= 2");
  if (cfg.patches_min < 1 || cfg.patches_max < cfg.patches_min)
    throw Error("synth: invalid patches_per_slide range");
  if (cfg.feature_dim < 1) throw Error("synth: feature_dim must be >= 1");
  if (cfg.evidence_dims.empty())
    throw Error("synth: evidence_dims must be non-empty");
  for (const int dim : cfg.evidence_dims)
    if (dim < 0 || dim >= cfg.feature_dim)
      throw Error("synth: evidence dim " + std::to_string(dim) +
                  " outside [0, " + std::to_string(cfg.feature_dim) + ")");
  for (const double p : {cfg.label_noise, cfg.tumor_fraction, cfg.evidence_fraction})
    if (p < 0.0 || p > 1.0) throw Error("synth: probabilities must be in [0,1]");
  if (cfg.shift_level < 0.0) throw Error("synth: shift_level must be >= 0");
  if (cfg.covariance_scale <= 0.0) throw Error("synth: covariance_scale must be > 0");
  if (cfg.ensemble_size < 1) throw Error("synth: ensemble_size must be >= 1");
  if (cfg.model_index < 0) throw Error("synth: model_index must be >= 0");
}

/// Unit shift direction. The evidence dims carry a fixed half of the squared
/// mass (folded positive), so a translation of magnitude L moves every
/// patch's evidence activation by a comparable amount and the scorer
/// genuinely degrades as L grows; the other half spreads over the remaining
/// dims so the displacement is not axis-aligned.
Eigen::VectorXd shift_direction(const SynthConfig& cfg) {
  SplitMix64 gen(mix(cfg.seed, fnv1a64("shift-direction")));
  Eigen::VectorXd u(cfg.feature_dim);
  for (int j = 0; j < cfg.feature_dim; ++j) u[j] = gen.next_gaussian();
  std::vector<char> is_evidence(static_cast<std::size_t>(cfg.feature_dim), 0);
  for (const int j : cfg.evidence_dims) is_evidence[static_cast<std::size_t>(j)] = 1;
  double evidence_norm = 0.0;
  double rest_norm = 0.0;
  for (int j = 0; j < cfg.feature_dim; ++j) {
    if (is_evidence[static_cast<std::size_t>(j)]) {
      u[j] = std::abs(u[j]);
      evidence_norm += u[j] * u[j];
    } else {
      rest_norm += u[j] * u[j];
    }
  }
  const bool has_rest = rest_norm > 0.0;
  const double evidence_mass = has_rest ? 0.7 : 1.0;
  for (int j = 0; j < cfg.feature_dim; ++j) {
    if (is_evidence[static_cast<std::size_t>(j)])
      u[j] *= std::sqrt(evidence_mass / evidence_norm);
    else
      u[j] *= std::sqrt((1.0 - evidence_mass) / rest_norm);
  }
  return u;
}

/// One logistic scorer over a weighted mean of the top-attention evidence
/// activations. Model variants reweight the evidence dims (not just the
/// logistic scale), so different models respond differently to the same
/// displacement, as cross-validation folds do.
struct Scorer {
  double weight;
  double bias;
  Eigen::VectorXd dim_weights;  // one per evidence dim, positive, mean ~1

  double statistic(const Eigen::VectorXd& top_dim_means) const {
    return dim_weights.dot(top_dim_means) / dim_weights.sum();
  }

  std::array<double, 2> softmax(double statistic) const {
    const double p1 = 1.0 / (1.0 + std::exp(-weight * (statistic - bias)));
    return {1.0 - p1, p1};
  }
};

/// Member 0 of the ensemble is the model itself; members > 0 jitter it.
Scorer make_scorer(const SynthConfig& cfg, int member) {
  Scorer s{kScorerWeight, kScorerBias,
           Eigen::VectorXd::Ones(static_cast<Eigen::Index>(cfg.evidence_dims.size()))};
  SplitMix64 model_gen(mix(mix(cfg.seed, fnv1a64("model")),
                           static_cast<std::uint64_t>(cfg.model_index)));
  s.weight *= 1.0 + 0.1 * (2.0 * model_gen.next_unit() - 1.0);
  s.bias += 0.15 * (2.0 * model_gen.next_unit() - 1.0);
  for (Eigen::Index j = 0; j < s.dim_weights.size(); ++j)
    s.dim_weights[j] = std::max(0.2, 1.0 + 0.3 * model_gen.next_gaussian());
  if (member > 0) {
    SplitMix64 member_gen(mix(mix(cfg.seed, fnv1a64("ensemble")),
                              (static_cast<std::uint64_t>(cfg.model_index) << 16) +
                                  static_cast<std::uint64_t>(member)));
    s.weight *= 1.0 + 0.05 * (2.0 * member_gen.next_unit() - 1.0);
    s.bias += 0.08 * (2.0 * member_gen.next_unit() - 1.0);
    for (Eigen::Index j = 0; j < s.dim_weights.size(); ++j)
      s.dim_weights[j] =
          std::max(0.2, s.dim_weights[j] * (1.0 + 0.1 * member_gen.next_gaussian()));
  }
  return s;
}

std::string default_dataset_id(const SynthConfig& cfg) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "synth-seed%llu-shift%g",
                static_cast<unsigned long long>(cfg.seed), cfg.shift_level);
  return buf;
}

}  // namespace

Dataset generate_dataset(const SynthConfig& cfg) {
  check_config(cfg);
  const Eigen::VectorXd direction = shift_direction(cfg);
  const auto num_evidence_dims = static_cast<double>(cfg.evidence_dims.size());
  const auto penultimate_dim = static_cast<int>(cfg.evidence_dims.size()) + 2;

  std::vector<Scorer> scorers;
  scorers.reserve(static_cast<std::size_t>(cfg.ensemble_size));
  for (int e = 0; e < cfg.ensemble_size; ++e)
    scorers.push_back(make_scorer(cfg, e));

  Dataset d;
  d.dataset_id = cfg.dataset_id.empty() ? default_dataset_id(cfg) : cfg.dataset_id;
  d.model_id = "synth-model-" + std::to_string(cfg.model_index);
  d.feature_dim = cfg.feature_dim;
  d.penultimate_dim = penultimate_dim;
  d.ensemble_size = cfg.ensemble_size;
  d.bags.resize(static_cast<std::size_t>(cfg.num_slides));

  parallel_for_index(static_cast<std::size_t>(cfg.num_slides), [&](std::size_t i) {
    SplitMix64 gen(mix(mix(cfg.seed, fnv1a64("slide")), i));
    PatchBag bag;
    char sid[16];
    std::snprintf(sid, sizeof sid, "s%05zu", i);
    bag.slide_id = sid;

    const bool tumor = gen.next_unit() < cfg.tumor_fraction;
    const int num_patches =
        cfg.patches_min +
        static_cast<int>(gen.next_below(
            static_cast<std::uint64_t>(cfg.patches_max - cfg.patches_min + 1)));

    Eigen::MatrixXd features(num_patches, cfg.feature_dim);
    for (int p = 0; p < num_patches; ++p)
      for (int j = 0; j < cfg.feature_dim; ++j)
        features(p, j) = gen.next_gaussian();

    if (tumor) {
      const int num_evidence = std::max(
          1, static_cast<int>(std::lround(cfg.evidence_fraction * num_patches)));
      // Partial Fisher-Yates over patch indices.
      std::vector<int> pool(static_cast<std::size_t>(num_patches));
      std::iota(pool.begin(), pool.end(), 0);
      for (int e = 0; e < num_evidence; ++e) {
        const auto j = e + static_cast<int>(gen.next_below(
                               static_cast<std::uint64_t>(num_patches - e)));
        std::swap(pool[static_cast<std::size_t>(e)], pool[static_cast<std::size_t>(j)]);
      }
      for (int e = 0; e < num_evidence; ++e)
        for (const int dim : cfg.evidence_dims)
          features(pool[static_cast<std::size_t>(e)], dim) += cfg.evidence_gain;
    }

    if (cfg.covariance_scale != 1.0) features *= cfg.covariance_scale;
    if (cfg.shift_level > 0.0)
      features.rowwise() += cfg.shift_level * direction.transpose();

    // Labels belong to the slide content and are shared across model variants.
    const bool flip = gen.next_unit() < cfg.label_noise;
    bag.label = (tumor != flip) ? 1 : 0;

    // Storage is binary32; everything the model "sees" reads back from the
    // stored values so a written-out dataset scores identically.
    bag.patch_features = features.cast<float>();

    Eigen::VectorXd evidence_mean(num_patches);
    for (int p = 0; p < num_patches; ++p) {
      double m = 0.0;
      for (const int dim : cfg.evidence_dims)
        m += static_cast<double>(bag.patch_features(p, dim));
      evidence_mean[p] = m / num_evidence_dims;
    }
    // Attention is a model output: its noise stream is keyed by the model
    // variant so each variant attends slightly differently to the same slide.
    SplitMix64 attention_gen(mix(mix(cfg.seed, fnv1a64("attention")),
                                 mix(static_cast<std::uint64_t>(cfg.model_index), i)));
    bag.attention.resize(num_patches);
    for (int p = 0; p < num_patches; ++p)
      bag.attention[p] = static_cast<float>(
          evidence_mean[p] + cfg.attention_noise * attention_gen.next_gaussian());

    // Per-evidence-dim mean over the top-attention patches feeds the scorers.
    std::vector<int> order(static_cast<std::size_t>(num_patches));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return bag.attention[a] > bag.attention[b];
    });
    const int top = std::min(kTopPatches, num_patches);
    Eigen::VectorXd top_dim_means =
        Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cfg.evidence_dims.size()));
    for (int t = 0; t < top; ++t) {
      const int p = order[static_cast<std::size_t>(t)];
      for (std::size_t dim_index = 0; dim_index < cfg.evidence_dims.size(); ++dim_index)
        top_dim_means[static_cast<Eigen::Index>(dim_index)] +=
            static_cast<double>(bag.patch_features(p, cfg.evidence_dims[dim_index]));
    }
    top_dim_means /= top;

    const double statistic = scorers[0].statistic(top_dim_means);
    bag.softmax = scorers[0].softmax(statistic);
    std::vector<std::array<double, 2>> ensemble;
    ensemble.reserve(scorers.size());
    for (const Scorer& scorer : scorers)
      ensemble.push_back(scorer.softmax(scorer.statistic(top_dim_means)));
    bag.ensemble_softmax = std::move(ensemble);

    Eigen::VectorXf penultimate(penultimate_dim);
    for (Eigen::Index dim_index = 0; dim_index < top_dim_means.size(); ++dim_index)
      penultimate[dim_index] = static_cast<float>(top_dim_means[dim_index]);
    penultimate[penultimate_dim - 2] = static_cast<float>(statistic);
    penultimate[penultimate_dim - 1] = static_cast<float>(bag.softmax[1]);
    bag.penultimate = std::move(penultimate);

    d.bags[i] = std::move(bag);
  });
  return d;
}

std::vector<EvaluationRecord> run_benchmark(int num_models,
                                            const std::vector<double>& shift_grid,
                                            const SynthConfig& base_cfg,
                                            Measure measure,
                                            const FeatureConfig& fconfig) {
  if (num_models < 2) throw Error("run_benchmark: need >= 2 models");
  if (shift_grid.size() < 3) throw Error("run_benchmark: need a grid of >= 3 levels");

  // Slide content is keyed by the level value, so equal levels share an
  // identical dataset and the reference is exactly grid[0].
  const auto level_cfg = [&](int model, double level, std::uint64_t content_key,
                             const std::string& id) {
    SynthConfig cfg = base_cfg;
    cfg.model_index = model;
    cfg.shift_level = level;
    cfg.seed = mix(base_cfg.seed, content_key);
    cfg.dataset_id = id;
    return cfg;
  };
  const auto level_key = [](double level) {
    std::uint64_t bits;
    static_assert(sizeof bits == sizeof level);
    std::memcpy(&bits, &level, sizeof bits);
    return mix(fnv1a64("shift-level"), bits);
  };
  const auto level_id = [](double level) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "shift-%g", level);
    return std::string(buf);
  };

  std::vector<EvaluationRecord> records;
  for (int model = 0; model < num_models; ++model) {
    const SynthConfig val_cfg =
        level_cfg(model, shift_grid[0], fnv1a64("validation"), "validation");
    const Dataset validation = generate_dataset(val_cfg);
    const auto [val_labels, val_scores] = labeled_scores(validation);
    const double threshold = select_threshold(val_labels, val_scores);

    const Dataset reference = generate_dataset(
        level_cfg(model, shift_grid[0], level_key(shift_grid[0]), level_id(shift_grid[0])));
    const double mcc_ref = dataset_mcc(reference, threshold);
    const double auc_ref = dataset_auc(reference);

    for (std::size_t li = 1; li < shift_grid.size(); ++li) {
      const double level = shift_grid[li];
      const Dataset target = generate_dataset(
          level_cfg(model, level, level_key(level), level_id(level)));
      EvaluationRecord record;
      record.model_id = reference.model_id;
      record.reference_id = reference.dataset_id;
      record.target_id = target.dataset_id;
      record.measure = compute_measure(measure, reference, target, fconfig);
      record.mcc_ref = mcc_ref;
      record.mcc_target = dataset_mcc(target, threshold);
      record.mcc_drop = record.mcc_ref - record.mcc_target;
      record.auc_ref = auc_ref;
      record.auc_target = dataset_auc(target);
      records.push_back(std::move(record));
    }
  }
  return records;
}

}  // namespace fdd::synth
