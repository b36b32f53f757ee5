#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdd/synth.hpp"
#include "fdd/types.hpp"

namespace fdd::cli {

/// Global flags shared by every subcommand.
struct CommonOptions {
  std::optional<std::filesystem::path> out;
  unsigned threads = 1;
  std::uint64_t seed = 0;
};

struct SummarizeOptions {
  std::filesystem::path manifest;
  FeatureConfig config;
};

struct MeasureOptions {
  std::filesystem::path reference;  ///< dataset manifest or gaussian summary
  std::filesystem::path target;     ///< dataset manifest
  Measure measure = Measure::Fdd;
  FeatureConfig config;
  double ridge = 0.0;
  bool config_flags_set = false;  ///< any of --selector/--k/--agg given
};

struct SweepOptions {
  std::filesystem::path reference;
  std::filesystem::path target;
  Measure measure = Measure::Fdd;  ///< fdd or rs only
  std::vector<Selector> selectors = {Selector::PositiveEvidence};
  Aggregation aggregation = Aggregation::Mean;
  std::uint64_t seed = 0;
  std::vector<int> k_list = {1, 2, 4, 8, 16, 32, 64, 128};
  double ridge = 0.0;
};

struct EvaluateOptions {
  std::filesystem::path grid_spec;
  bool pooled = false;
};

struct ValidateOptions {
  std::filesystem::path manifest;
};

// Each command returns its run report; errors raise fdd::Error. When
// common.out is set the report (without timing) and any data files are
// written there. The report handed back includes timing.
nlohmann::json cmd_summarize(const SummarizeOptions& opt, const CommonOptions& common);
nlohmann::json cmd_measure(const MeasureOptions& opt, const CommonOptions& common);
nlohmann::json cmd_sweep_k(const SweepOptions& opt, const CommonOptions& common);
nlohmann::json cmd_evaluate(const EvaluateOptions& opt, const CommonOptions& common);
nlohmann::json cmd_synth(const synth::SynthConfig& cfg, const CommonOptions& common);
nlohmann::json cmd_validate(const ValidateOptions& opt, const CommonOptions& common);

nlohmann::json config_to_json(const FeatureConfig& config);
FeatureConfig config_from_json(const nlohmann::json& node);

}  // namespace fdd::cli
