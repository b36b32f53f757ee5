#include "fdd/cli_commands.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fdd/baselines.hpp"
#include "fdd/error.hpp"
#include "fdd/evidence.hpp"
#include "fdd/feature_store.hpp"
#include "fdd/measures.hpp"
#include "fdd/parallel.hpp"
#include "fdd/perf_eval.hpp"
#include "fdd/shift_stats.hpp"
#include "fdd/version.hpp"

namespace fdd::cli {

namespace {

using nlohmann::json;

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (const char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

json report_skeleton(const std::string& command) {
  json report;
  report["command"] = command;
  report["tool_version"] = kVersion;
  return report;
}

/// Written reports carry no timing so identical inputs give identical bytes.
void write_report_file(const json& report, const std::filesystem::path& dir) {
  json stripped = report;
  stripped.erase("timing");
  std::filesystem::create_directories(dir);
  const auto path = dir / "report.json";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << stripped.dump(2) << '\n';
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << content;
}

bool is_summary_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error("'" + path.string() + "' is not valid JSON: " + e.what());
  }
  return doc.contains("kind") && doc["kind"] == "gaussian_summary";
}

json measure_result_to_json(const ShiftMeasureResult& r) {
  json node;
  node["measure"] = to_string(r.measure);
  node["value"] = r.value;
  node["signed_value"] = r.signed_value;
  node["reference_id"] = r.reference_id;
  node["target_id"] = r.target_id;
  node["model_id"] = r.model_id;
  if (r.config) node["config"] = config_to_json(*r.config);
  return node;
}

std::string records_to_csv(const std::vector<EvaluationRecord>& records) {
  std::ostringstream out;
  out << "model_id,reference_id,target_id,measure,config,value,signed_value,"
         "mcc_ref,mcc_target,mcc_drop,auc_ref,auc_target\n";
  for (const auto& r : records) {
    out << csv_escape(r.model_id) << ',' << csv_escape(r.reference_id) << ','
        << csv_escape(r.target_id) << ',' << to_string(r.measure.measure) << ','
        << csv_escape(r.measure.config ? describe(*r.measure.config) : "-") << ','
        << format_double(r.measure.value) << ','
        << format_double(r.measure.signed_value) << ','
        << format_double(r.mcc_ref) << ',' << format_double(r.mcc_target) << ','
        << format_double(r.mcc_drop) << ',' << format_double(r.auc_ref) << ','
        << format_double(r.auc_target) << '\n';
  }
  return out.str();
}

}  // namespace

json config_to_json(const FeatureConfig& config) {
  json node;
  node["selector"] = to_string(config.selector);
  node["k"] = config.k;
  node["aggregation"] = to_string(config.aggregation);
  node["seed"] = config.seed;
  return node;
}

FeatureConfig config_from_json(const json& node) {
  FeatureConfig config;
  if (node.contains("selector"))
    config.selector = parse_selector(node.at("selector").get<std::string>());
  if (node.contains("k")) config.k = node.at("k").get<int>();
  if (node.contains("aggregation"))
    config.aggregation = parse_aggregation(node.at("aggregation").get<std::string>());
  if (node.contains("seed")) config.seed = node.at("seed").get<std::uint64_t>();
  return config;
}

json cmd_summarize(const SummarizeOptions& opt, const CommonOptions& common) {
  Stopwatch watch;
  set_max_threads(common.threads);
  const Dataset dataset = load_manifest(opt.manifest);
  const GaussianSummary summary =
      gaussian_fit(build_feature_matrix(dataset, opt.config));

  json report = report_skeleton("summarize");
  report["inputs"] = {{"manifest", opt.manifest.string()}};
  report["config"] = config_to_json(opt.config);
  report["results"] = {{{"dataset_id", summary.dataset_id},
                        {"model_id", summary.model_id},
                        {"dim", summary.mean.size()},
                        {"sample_count", summary.sample_count}}};
  if (common.out) {
    const auto manifest_path = write_summary(summary, *common.out, "summary");
    report["results"][0]["summary"] = manifest_path.string();
    write_report_file(report, *common.out);
  }
  report["timing"] = {{"duration_seconds", watch.seconds()}};
  return report;
}

json cmd_measure(const MeasureOptions& opt, const CommonOptions& common) {
  Stopwatch watch;
  set_max_threads(common.threads);
  const Dataset target = load_manifest(opt.target);

  ShiftMeasureResult result;
  if (is_summary_file(opt.reference)) {
    if (opt.measure != Measure::Fdd)
      throw Error("a precomputed reference summary only supports --measure fdd");
    const GaussianSummary reference = load_summary(opt.reference);
    if (opt.config_flags_set && !(opt.config == reference.config))
      throw Error("feature-config flags conflict with the reference summary (" +
                  describe(reference.config) + ")");
    GaussianSummary target_summary =
        gaussian_fit(build_feature_matrix(target, reference.config));
    GaussianSummary ref_summary = reference;
    if (opt.ridge > 0.0) {
      ref_summary.covariance.diagonal().array() += opt.ridge;
      target_summary.covariance.diagonal().array() += opt.ridge;
    }
    result.measure = Measure::Fdd;
    result.value = frechet_distance(ref_summary, target_summary);
    result.signed_value = result.value;
    result.config = reference.config;
    result.reference_id = reference.dataset_id;
    result.target_id = target.dataset_id;
    result.model_id = reference.model_id;
  } else {
    const Dataset reference = load_manifest(opt.reference);
    result = compute_measure(opt.measure, reference, target, opt.config, opt.ridge);
  }

  json report = report_skeleton("measure");
  report["inputs"] = {{"reference", opt.reference.string()},
                      {"target", opt.target.string()}};
  report["config"] = result.config ? config_to_json(*result.config)
                                   : config_to_json(opt.config);
  report["config"]["ridge"] = opt.ridge;
  report["config"]["measure"] = to_string(opt.measure);
  report["results"] = {measure_result_to_json(result)};
  if (common.out) write_report_file(report, *common.out);
  report["timing"] = {{"duration_seconds", watch.seconds()}};
  return report;
}

json cmd_sweep_k(const SweepOptions& opt, const CommonOptions& common) {
  Stopwatch watch;
  set_max_threads(common.threads);
  if (opt.measure != Measure::Fdd && opt.measure != Measure::Rs)
    throw Error("sweep-k supports --measure fdd or rs");
  if (opt.k_list.empty()) throw Error("sweep-k: empty K list");
  for (const Selector s : opt.selectors)
    if (!uses_evidence(s))
      throw Error("sweep-k sweeps evidence selectors; '" + to_string(s) +
                  "' does not take a K");

  const Dataset reference = load_manifest(opt.reference);
  const Dataset target = load_manifest(opt.target);

  json rows = json::array();
  std::ostringstream csv;
  csv << "measure,selector,aggregation,k,value\n";
  for (const Selector selector : opt.selectors) {
    for (const int k : opt.k_list) {
      FeatureConfig config;
      config.selector = selector;
      config.k = k;
      config.aggregation = opt.aggregation;
      config.seed = opt.seed;
      const ShiftMeasureResult result =
          compute_measure(opt.measure, reference, target, config, opt.ridge);
      rows.push_back({{"selector", to_string(selector)},
                      {"k", k},
                      {"value", result.value}});
      csv << to_string(opt.measure) << ',' << to_string(selector) << ','
          << to_string(opt.aggregation) << ',' << k << ','
          << format_double(result.value) << '\n';
    }
  }

  json report = report_skeleton("sweep-k");
  report["inputs"] = {{"reference", opt.reference.string()},
                      {"target", opt.target.string()}};
  report["config"] = {{"measure", to_string(opt.measure)},
                      {"aggregation", to_string(opt.aggregation)},
                      {"seed", opt.seed},
                      {"ridge", opt.ridge},
                      {"k_list", opt.k_list}};
  report["results"] = rows;
  if (common.out) {
    write_text_file(*common.out / "sweep.csv", csv.str());
    write_report_file(report, *common.out);
  }
  report["timing"] = {{"duration_seconds", watch.seconds()}};
  return report;
}

json cmd_evaluate(const EvaluateOptions& opt, const CommonOptions& common) {
  Stopwatch watch;
  set_max_threads(common.threads);
  std::ifstream in(opt.grid_spec);
  if (!in) throw Error("cannot open grid spec '" + opt.grid_spec.string() + "'");
  json grid;
  try {
    in >> grid;
  } catch (const json::exception& e) {
    throw Error("grid spec '" + opt.grid_spec.string() + "' is not valid JSON: " +
                e.what());
  }
  const auto base_dir = opt.grid_spec.parent_path();

  if (!grid.contains("reference") || !grid["reference"].is_string())
    throw Error("grid spec: missing reference dataset id");
  const auto reference_id = grid["reference"].get<std::string>();
  if (!grid.contains("measures") || !grid["measures"].is_array() ||
      grid["measures"].empty())
    throw Error("grid spec: missing measures list");
  std::vector<Measure> measures;
  for (const auto& m : grid["measures"]) measures.push_back(parse_measure(m.get<std::string>()));
  FeatureConfig config;
  if (grid.contains("config")) config = config_from_json(grid["config"]);
  const double ridge = grid.value("ridge", 0.0);
  if (!grid.contains("models") || !grid["models"].is_array() || grid["models"].empty())
    throw Error("grid spec: missing models list");

  std::vector<EvaluationRecord> records;
  for (const auto& model_node : grid["models"]) {
    if (!model_node.contains("model_id"))
      throw Error("grid spec: model entry missing model_id");
    const auto model_id = model_node["model_id"].get<std::string>();
    if (!model_node.contains("validation"))
      throw Error("grid spec: model '" + model_id +
                  "' is missing its validation manifest");
    if (!model_node.contains("datasets") || !model_node["datasets"].is_object())
      throw Error("grid spec: model '" + model_id + "' is missing its dataset map");

    const Dataset validation =
        load_manifest(base_dir / model_node["validation"].get<std::string>());
    const auto [val_labels, val_scores] = labeled_scores(validation);
    const double threshold = select_threshold(val_labels, val_scores);

    const auto& dataset_paths = model_node["datasets"];
    if (!dataset_paths.contains(reference_id))
      throw Error("grid spec: model '" + model_id +
                  "' has no manifest for reference '" + reference_id + "'");
    const Dataset reference =
        load_manifest(base_dir / dataset_paths[reference_id].get<std::string>());
    const double mcc_ref = dataset_mcc(reference, threshold);
    const double auc_ref = dataset_auc(reference);

    std::vector<std::string> target_ids;
    if (grid.contains("targets")) {
      for (const auto& t : grid["targets"]) target_ids.push_back(t.get<std::string>());
    } else {
      for (const auto& [id, _] : dataset_paths.items())
        if (id != reference_id) target_ids.push_back(id);
    }
    if (target_ids.empty())
      throw Error("grid spec: no target datasets for model '" + model_id + "'");

    for (const auto& target_id : target_ids) {
      if (!dataset_paths.contains(target_id))
        throw Error("grid spec: model '" + model_id +
                    "' has no manifest for target '" + target_id + "'");
      const Dataset target =
          load_manifest(base_dir / dataset_paths[target_id].get<std::string>());
      const double mcc_target = dataset_mcc(target, threshold);
      const double auc_target = dataset_auc(target);
      for (const Measure measure : measures) {
        EvaluationRecord record;
        record.model_id = model_id;
        record.reference_id = reference.dataset_id;
        record.target_id = target.dataset_id;
        record.measure = compute_measure(measure, reference, target, config, ridge);
        record.measure.model_id = model_id;
        record.mcc_ref = mcc_ref;
        record.mcc_target = mcc_target;
        record.mcc_drop = mcc_ref - mcc_target;
        record.auc_ref = auc_ref;
        record.auc_target = auc_target;
        records.push_back(std::move(record));
      }
    }
  }

  // One summary block per measure.
  json summaries = json::array();
  for (const Measure measure : measures) {
    std::vector<EvaluationRecord> subset;
    for (const auto& record : records)
      if (record.measure.measure == measure) subset.push_back(record);
    const MeasureEvaluation evaluation = evaluate_measure(subset);
    json block;
    block["measure"] = to_string(measure);
    block["per_model_r"] = evaluation.per_model_r;
    block["mean_r"] = evaluation.mean_r;
    block["std_r"] = evaluation.std_r;
    if (opt.pooled) block["pooled_r"] = pooled_pearson(subset);
    summaries.push_back(std::move(block));
  }

  json report = report_skeleton("evaluate");
  report["inputs"] = {{"grid_spec", opt.grid_spec.string()}};
  report["config"] = config_to_json(config);
  report["config"]["ridge"] = ridge;
  report["config"]["reference"] = reference_id;
  report["results"] = summaries;
  report["record_count"] = records.size();
  if (common.out) {
    write_text_file(*common.out / "records.csv", records_to_csv(records));
    write_text_file(*common.out / "summary.json", json(summaries).dump(2) + "\n");
    write_report_file(report, *common.out);
  }
  report["timing"] = {{"duration_seconds", watch.seconds()}};
  return report;
}

json cmd_synth(const synth::SynthConfig& cfg, const CommonOptions& common) {
  Stopwatch watch;
  set_max_threads(common.threads);
  if (!common.out) throw Error("synth requires --out DIR");
  const Dataset dataset = synth::generate_dataset(cfg);
  const auto manifest_path = write_dataset(dataset, *common.out);

  json report = report_skeleton("synth");
  report["config"] = {{"seed", cfg.seed},
                      {"num_slides", cfg.num_slides},
                      {"patches_min", cfg.patches_min},
                      {"patches_max", cfg.patches_max},
                      {"feature_dim", cfg.feature_dim},
                      {"evidence_dims", cfg.evidence_dims},
                      {"shift_level", cfg.shift_level},
                      {"covariance_scale", cfg.covariance_scale},
                      {"label_noise", cfg.label_noise},
                      {"tumor_fraction", cfg.tumor_fraction},
                      {"ensemble_size", cfg.ensemble_size},
                      {"model_index", cfg.model_index},
                      {"evidence_fraction", cfg.evidence_fraction},
                      {"evidence_gain", cfg.evidence_gain},
                      {"attention_noise", cfg.attention_noise}};
  report["results"] = {{{"manifest", manifest_path.string()},
                        {"dataset_id", dataset.dataset_id},
                        {"model_id", dataset.model_id},
                        {"slides", dataset.bags.size()}}};
  write_report_file(report, *common.out);
  report["timing"] = {{"duration_seconds", watch.seconds()}};
  return report;
}

json cmd_validate(const ValidateOptions& opt, const CommonOptions& common) {
  Stopwatch watch;
  set_max_threads(common.threads);
  const auto violations = inspect_manifest(opt.manifest);

  json report = report_skeleton("validate");
  report["inputs"] = {{"manifest", opt.manifest.string()}};
  json list = json::array();
  for (const auto& v : violations)
    list.push_back({{"slide_id", v.slide_id},
                    {"field", v.field},
                    {"message", v.message}});
  report["violations"] = list;
  report["ok"] = violations.empty();
  if (common.out) write_report_file(report, *common.out);
  report["timing"] = {{"duration_seconds", watch.seconds()}};
  return report;
}

}  // namespace fdd::cli
