#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fdd/cli_commands.hpp"
#include "fdd/error.hpp"
#include "fdd/version.hpp"

namespace {

using fdd::cli::CommonOptions;

// Shared feature-config flags. Returns the option pointers so callers can
// tell whether a flag was given explicitly.
struct ConfigFlags {
  std::string selector = "positive_evidence";
  int k = 64;
  std::string aggregation = "mean";

  CLI::Option* selector_opt = nullptr;
  CLI::Option* k_opt = nullptr;
  CLI::Option* agg_opt = nullptr;

  void attach(CLI::App* cmd) {
    selector_opt = cmd->add_option("--selector", selector,
                                   "positive_evidence, negative_evidence, "
                                   "combined_evidence, random, mean_patch or penultimate");
    k_opt = cmd->add_option("--k", k, "evidence patches per slide");
    agg_opt = cmd->add_option("--agg", aggregation, "mean or concat");
  }

  fdd::FeatureConfig to_config(std::uint64_t seed) const {
    fdd::FeatureConfig config;
    config.selector = fdd::parse_selector(selector);
    config.k = k;
    config.aggregation = fdd::parse_aggregation(aggregation);
    config.seed = seed;
    return config;
  }

  bool any_set() const {
    return selector_opt->count() > 0 || k_opt->count() > 0 || agg_opt->count() > 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fréchet Domain Distance toolkit: quantifies domain shift for "
               "attention-based MIL models from exported feature bags"};
  app.set_version_flag("--version", fdd::kVersion);
  app.require_subcommand(1);

  CommonOptions common;
  std::string out_dir;
  auto* out_opt = app.add_option("--out", out_dir, "output directory")->group("Global");
  app.add_option("--threads", common.threads, "max worker threads")->group("Global");
  app.add_option("--seed", common.seed,
                 "seed for the random selector / synthetic generator")
      ->group("Global");

  // summarize
  auto* summarize = app.add_subcommand(
      "summarize", "fit and store a Gaussian summary of a dataset's descriptors");
  std::string summarize_manifest;
  summarize->add_option("manifest", summarize_manifest, "dataset manifest")->required();
  ConfigFlags summarize_config;
  summarize_config.attach(summarize);

  // measure
  auto* measure = app.add_subcommand(
      "measure", "one shift measure between a reference and a target dataset");
  fdd::cli::MeasureOptions measure_opt;
  std::string measure_ref, measure_tgt, measure_name = "fdd";
  measure->add_option("reference", measure_ref, "dataset manifest or gaussian summary")
      ->required();
  measure->add_option("target", measure_tgt, "dataset manifest")->required();
  measure->add_option("--measure", measure_name,
                      "fdd, rs, doc-softmax, doc-entropy or de-entropy");
  ConfigFlags measure_config;
  measure_config.attach(measure);
  measure->add_option("--ridge", measure_opt.ridge,
                      "diagonal covariance regularization (fdd only)");

  // sweep-k
  auto* sweep = app.add_subcommand("sweep-k", "fdd or rs across a list of K values");
  fdd::cli::SweepOptions sweep_opt;
  std::string sweep_ref, sweep_tgt, sweep_measure = "fdd", sweep_agg = "mean";
  std::vector<std::string> sweep_selectors;
  sweep->add_option("reference", sweep_ref, "dataset manifest")->required();
  sweep->add_option("target", sweep_tgt, "dataset manifest")->required();
  sweep->add_option("--measure", sweep_measure, "fdd or rs");
  sweep->add_option("--selector", sweep_selectors,
                    "evidence selector (repeatable)");
  sweep->add_option("--agg", sweep_agg, "mean or concat");
  sweep->add_option("--k-list", sweep_opt.k_list, "K values (default 1..128 powers of 2)");
  sweep->add_option("--ridge", sweep_opt.ridge, "diagonal covariance regularization");

  // evaluate
  auto* evaluate = app.add_subcommand(
      "evaluate", "full correlation protocol over a grid of models and datasets");
  fdd::cli::EvaluateOptions evaluate_opt;
  std::string grid_spec;
  evaluate->add_option("grid", grid_spec, "grid spec (JSON)")->required();
  evaluate->add_flag("--pooled", evaluate_opt.pooled,
                     "also report the pooled correlation over all records");

  // synth
  auto* synth = app.add_subcommand("synth",
                                   "generate a synthetic MIL dataset with controllable shift");
  fdd::synth::SynthConfig synth_cfg;
  synth->add_option("--slides", synth_cfg.num_slides, "number of slides");
  synth->add_option("--patches-min", synth_cfg.patches_min, "min patches per slide");
  synth->add_option("--patches-max", synth_cfg.patches_max, "max patches per slide");
  synth->add_option("--dim", synth_cfg.feature_dim, "feature dimension J");
  synth->add_option("--evidence-dims", synth_cfg.evidence_dims,
                    "dimensions carrying class signal");
  synth->add_option("--shift", synth_cfg.shift_level, "mean-shift magnitude");
  synth->add_option("--cov-scale", synth_cfg.covariance_scale,
                    "feature scale factor (covariance shift)");
  synth->add_option("--label-noise", synth_cfg.label_noise, "label flip probability");
  synth->add_option("--tumor-fraction", synth_cfg.tumor_fraction,
                    "probability of a positive slide");
  synth->add_option("--ensemble", synth_cfg.ensemble_size, "ensemble size E");
  synth->add_option("--model-index", synth_cfg.model_index, "scorer variant");
  synth->add_option("--dataset-id", synth_cfg.dataset_id, "dataset id override");

  // validate
  auto* validate = app.add_subcommand("validate", "check a manifest and its binaries");
  std::string validate_manifest;
  validate->add_option("manifest", validate_manifest, "dataset manifest")->required();

  CLI11_PARSE(app, argc, argv);
  if (out_opt->count() > 0) common.out = out_dir;

  try {
    nlohmann::json report;
    bool ok = true;
    if (summarize->parsed()) {
      fdd::cli::SummarizeOptions opt;
      opt.manifest = summarize_manifest;
      opt.config = summarize_config.to_config(common.seed);
      report = fdd::cli::cmd_summarize(opt, common);
    } else if (measure->parsed()) {
      measure_opt.reference = measure_ref;
      measure_opt.target = measure_tgt;
      measure_opt.measure = fdd::parse_measure(measure_name);
      measure_opt.config = measure_config.to_config(common.seed);
      measure_opt.config_flags_set = measure_config.any_set();
      report = fdd::cli::cmd_measure(measure_opt, common);
    } else if (sweep->parsed()) {
      sweep_opt.reference = sweep_ref;
      sweep_opt.target = sweep_tgt;
      sweep_opt.measure = fdd::parse_measure(sweep_measure);
      sweep_opt.aggregation = fdd::parse_aggregation(sweep_agg);
      sweep_opt.seed = common.seed;
      if (!sweep_selectors.empty()) {
        sweep_opt.selectors.clear();
        for (const auto& name : sweep_selectors)
          sweep_opt.selectors.push_back(fdd::parse_selector(name));
      }
      report = fdd::cli::cmd_sweep_k(sweep_opt, common);
    } else if (evaluate->parsed()) {
      evaluate_opt.grid_spec = grid_spec;
      report = fdd::cli::cmd_evaluate(evaluate_opt, common);
    } else if (synth->parsed()) {
      synth_cfg.seed = common.seed;
      report = fdd::cli::cmd_synth(synth_cfg, common);
    } else if (validate->parsed()) {
      fdd::cli::ValidateOptions opt;
      opt.manifest = validate_manifest;
      report = fdd::cli::cmd_validate(opt, common);
      ok = report["ok"].get<bool>();
      for (const auto& v : report["violations"])
        std::cerr << "violation: "
                  << fdd::format_violation({v["slide_id"].get<std::string>(),
                                            v["field"].get<std::string>(),
                                            v["message"].get<std::string>()})
                  << '\n';
    }
    std::cout << report.dump(2) << '\n';
    return ok ? 0 : 1;
  } catch (const fdd::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
}
