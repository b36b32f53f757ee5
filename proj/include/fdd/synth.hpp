#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fdd/types.hpp"

namespace fdd::synth {

/// Controls the synthetic MIL dataset generator. Slide content (features,
/// attention, labels) is a function of (seed, shift_level & friends) only;
/// model outputs additionally depend on model_index, so the same slides can
/// be scored by several model variants, as in a CV-fold setup.
struct SynthConfig {
  std::uint64_t seed = 0;
  int num_slides = 200;
  int patches_min = 80;  ///< patches per slide drawn uniformly from this range
  int patches_max = 160;
  int feature_dim = 64;                      ///< J
  std::vector<int> evidence_dims = {0, 1, 2, 3, 4, 5, 6, 7};
  double shift_level = 0.0;    ///< magnitude of the global mean translation
  double covariance_scale = 1.0;  ///< optional feature scaling (1 = off)
  double label_noise = 0.02;
  double tumor_fraction = 0.5;
  int ensemble_size = 5;  ///< E; member 0 is the model itself
  int model_index = 0;    ///< scorer variant

  // Shape of the planted signal.
  double evidence_fraction = 0.2;  ///< evidence patches per positive slide
  double evidence_gain = 1.6;      ///< mean shift on evidence dims
  double attention_noise = 0.25;

  std::string dataset_id;  ///< derived from seed/shift when empty
};

/// Fully deterministic: the same config yields a bit-identical dataset.
/// Positive slides plant mean-shifted evidence patches; attention is a
/// monotone function of each patch's evidence-dim mean plus noise; softmax
/// comes from a fixed logistic scorer over the top-attention patches, so
/// performance degrades as the feature translation grows. Penultimate
/// features and an E-member ensemble are always emitted.
Dataset generate_dataset(const SynthConfig& cfg);

/// The shift-versus-performance protocol at desk scale: for each of
/// `num_models` scorer variants and each non-reference grid level, one
/// EvaluationRecord of `measure` against the grid[0] reference. Thresholds
/// come from a per-model validation dataset at the reference level.
std::vector<EvaluationRecord> run_benchmark(int num_models,
                                            const std::vector<double>& shift_grid,
                                            const SynthConfig& base_cfg,
                                            Measure measure,
                                            const FeatureConfig& fconfig);

}  // namespace fdd::synth
