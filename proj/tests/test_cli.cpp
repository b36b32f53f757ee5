#include <doctest.h>

#include <fstream>
#include <sstream>

#include "fdd/cli_commands.hpp"
#include "fdd/error.hpp"
#include "fdd/feature_store.hpp"
#include "fdd/synth.hpp"
#include "test_support.hpp"

using namespace fdd;
using namespace fdd::cli;

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

/// Writes a small synthetic dataset and returns its manifest path.
std::filesystem::path synth_to_disk(const std::filesystem::path& dir,
                                    std::uint64_t seed, double shift,
                                    const std::string& id, int model_index = 0,
                                    int slides = 40) {
  synth::SynthConfig cfg;
  cfg.seed = seed;
  cfg.num_slides = slides;
  cfg.patches_min = 30;
  cfg.patches_max = 50;
  cfg.feature_dim = 8;
  cfg.evidence_dims = {0, 1};
  cfg.shift_level = shift;
  cfg.model_index = model_index;
  cfg.dataset_id = id;
  return write_dataset(synth::generate_dataset(cfg), dir);
}

FeatureConfig small_config() {
  FeatureConfig config;
  config.selector = Selector::PositiveEvidence;
  config.k = 4;
  return config;
}

}  // namespace

TEST_CASE("cmd_summarize writes a reloadable, byte-stable sidecar") {
  const auto dir = support::scratch_dir("cli-summarize");
  const auto manifest = synth_to_disk(dir / "data", 5, 0.0, "ds");

  SummarizeOptions opt;
  opt.manifest = manifest;
  opt.config = small_config();
  CommonOptions common;
  common.out = dir / "out";

  const auto report = cmd_summarize(opt, common);
  CHECK(report.at("results").at(0).at("dim").get<int>() == 8);
  const auto summary_path = dir / "out" / "summary.json";
  REQUIRE(std::filesystem::exists(summary_path));
  const std::string first_manifest = slurp(summary_path);
  const std::string first_mean = slurp(dir / "out" / "summary.mean.bin");
  const std::string first_report = slurp(dir / "out" / "report.json");

  cmd_summarize(opt, common);  // rerun
  CHECK(slurp(summary_path) == first_manifest);
  CHECK(slurp(dir / "out" / "summary.mean.bin") == first_mean);
  CHECK(slurp(dir / "out" / "report.json") == first_report);
  std::filesystem::remove_all(dir);
}

TEST_CASE("cmd_summarize rejects a single-slide dataset") {
  const auto dir = support::scratch_dir("cli-single");
  Dataset d;
  d.dataset_id = "one";
  d.model_id = "m";
  d.feature_dim = 1;
  d.bags.push_back(support::make_bag("only", {{1.f}}, {0.5f}));
  const auto manifest = write_dataset(d, dir);

  SummarizeOptions opt;
  opt.manifest = manifest;
  opt.config = small_config();
  CHECK_THROWS_WITH_AS(cmd_summarize(opt, CommonOptions{}),
                       doctest::Contains("need >= 2 slides"), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("cmd_measure fdd on identical manifests is zero") {
  const auto dir = support::scratch_dir("cli-measure-zero");
  const auto manifest = synth_to_disk(dir / "data", 5, 0.0, "ds");
  MeasureOptions opt;
  opt.reference = manifest;
  opt.target = manifest;
  opt.measure = Measure::Fdd;
  opt.config = small_config();
  const auto report = cmd_measure(opt, CommonOptions{});
  CHECK(report.at("results").at(0).at("value").get<double>() <= 1e-9);
  std::filesystem::remove_all(dir);
}

TEST_CASE("cmd_measure doc-softmax reproduces the hand example") {
  const auto dir = support::scratch_dir("cli-doc");
  Dataset ref;
  ref.dataset_id = "ref";
  ref.model_id = "m";
  ref.feature_dim = 1;
  ref.bags.push_back(support::make_bag("a", {{0.f}}, {0.f}, {0.1, 0.9}));
  ref.bags.push_back(support::make_bag("b", {{0.f}}, {0.f}, {0.7, 0.3}));
  Dataset tgt = ref;
  tgt.dataset_id = "tgt";
  tgt.bags[0].softmax = {0.6, 0.4};
  tgt.bags[1].softmax = {0.4, 0.6};
  const auto ref_manifest = write_dataset(ref, dir / "ref");
  const auto tgt_manifest = write_dataset(tgt, dir / "tgt");

  MeasureOptions opt;
  opt.reference = ref_manifest;
  opt.target = tgt_manifest;
  opt.measure = Measure::DocSoftmax;
  const auto report = cmd_measure(opt, CommonOptions{});
  CHECK(report.at("results").at(0).at("signed_value").get<double>() ==
        doctest::Approx(0.2).epsilon(1e-12));
  std::filesystem::remove_all(dir);
}

TEST_CASE("cmd_measure rejects mismatched feature dimensions") {
  const auto dir = support::scratch_dir("cli-mismatch");
  const auto a = synth_to_disk(dir / "a", 5, 0.0, "a");
  synth::SynthConfig other;
  other.seed = 5;
  other.num_slides = 30;
  other.patches_min = 20;
  other.patches_max = 30;
  other.feature_dim = 4;  // different J
  other.evidence_dims = {0};
  other.dataset_id = "b";
  const auto b = write_dataset(synth::generate_dataset(other), dir / "b");

  MeasureOptions opt;
  opt.reference = a;
  opt.target = b;
  opt.measure = Measure::Fdd;
  opt.config = small_config();
  CHECK_THROWS_AS(cmd_measure(opt, CommonOptions{}), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("a precomputed summary reproduces the manifest route bit-for-bit") {
  const auto dir = support::scratch_dir("cli-summary-ref");
  const auto ref_manifest = synth_to_disk(dir / "ref", 5, 0.0, "ref");
  const auto tgt_manifest = synth_to_disk(dir / "tgt", 6, 1.0, "tgt");

  SummarizeOptions sopt;
  sopt.manifest = ref_manifest;
  sopt.config = small_config();
  CommonOptions sout;
  sout.out = dir / "summary";
  cmd_summarize(sopt, sout);

  MeasureOptions from_manifest;
  from_manifest.reference = ref_manifest;
  from_manifest.target = tgt_manifest;
  from_manifest.measure = Measure::Fdd;
  from_manifest.config = small_config();
  const double direct =
      cmd_measure(from_manifest, CommonOptions{}).at("results").at(0).at("value");

  MeasureOptions from_summary = from_manifest;
  from_summary.reference = dir / "summary" / "summary.json";
  const double via_summary =
      cmd_measure(from_summary, CommonOptions{}).at("results").at(0).at("value");
  CHECK(direct == via_summary);

  // Conflicting explicit flags are rejected.
  MeasureOptions conflicting = from_summary;
  conflicting.config.k = 2;
  conflicting.config_flags_set = true;
  CHECK_THROWS_AS(cmd_measure(conflicting, CommonOptions{}), Error);

  // Non-fdd measures need a full dataset reference.
  MeasureOptions wrong_measure = from_summary;
  wrong_measure.measure = Measure::Rs;
  CHECK_THROWS_AS(cmd_measure(wrong_measure, CommonOptions{}), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("cmd_sweep_k") {
  const auto dir = support::scratch_dir("cli-sweep");
  const auto ref_manifest = synth_to_disk(dir / "ref", 5, 0.0, "ref");
  const auto tgt_manifest = synth_to_disk(dir / "tgt", 6, 1.5, "tgt");

  SweepOptions opt;
  opt.reference = ref_manifest;
  opt.target = tgt_manifest;
  opt.measure = Measure::Fdd;
  opt.k_list = {1, 4, 8};

  SUBCASE("identical datasets give all zeros") {
    SweepOptions same = opt;
    same.target = ref_manifest;
    const auto report = cmd_sweep_k(same, CommonOptions{});
    for (const auto& row : report.at("results"))
      CHECK(row.at("value").get<double>() <= 1e-9);
  }
  SUBCASE("shifted pair gives positive values; K=4 row matches cmd_measure") {
    CommonOptions common;
    common.out = dir / "out";
    const auto report = cmd_sweep_k(opt, common);
    REQUIRE(report.at("results").size() == 3);
    for (const auto& row : report.at("results"))
      CHECK(row.at("value").get<double>() > 0.0);

    MeasureOptions mopt;
    mopt.reference = ref_manifest;
    mopt.target = tgt_manifest;
    mopt.measure = Measure::Fdd;
    mopt.config = small_config();  // k = 4
    const double measured =
        cmd_measure(mopt, CommonOptions{}).at("results").at(0).at("value");
    CHECK(report.at("results").at(1).at("value").get<double>() == measured);

    const std::string csv = slurp(dir / "out" / "sweep.csv");
    CHECK(csv.find("measure,selector,aggregation,k,value") == 0);
  }
  SUBCASE("non-evidence selectors and measures are rejected") {
    SweepOptions bad = opt;
    bad.selectors = {Selector::MeanPatch};
    CHECK_THROWS_AS(cmd_sweep_k(bad, CommonOptions{}), Error);
    bad = opt;
    bad.measure = Measure::DocSoftmax;
    CHECK_THROWS_AS(cmd_sweep_k(bad, CommonOptions{}), Error);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("cmd_evaluate runs the full protocol from a grid spec") {
  const auto dir = support::scratch_dir("cli-evaluate");
  // 2 models x (validation + 3 levels); content shared across models.
  nlohmann::json models = nlohmann::json::array();
  for (int model = 0; model < 2; ++model) {
    const std::string prefix = "m" + std::to_string(model);
    synth_to_disk(dir / prefix / "val", rng::mix(31, 9999), 0.0, "validation", model);
    synth_to_disk(dir / prefix / "level0", rng::mix(31, 0), 0.0, "level0", model);
    synth_to_disk(dir / prefix / "level1", rng::mix(31, 1), 1.0, "level1", model);
    synth_to_disk(dir / prefix / "level2", rng::mix(31, 2), 2.5, "level2", model);
    models.push_back({{"model_id", prefix},
                      {"validation", prefix + "/val/manifest.json"},
                      {"datasets",
                       {{"level0", prefix + "/level0/manifest.json"},
                        {"level1", prefix + "/level1/manifest.json"},
                        {"level2", prefix + "/level2/manifest.json"}}}});
  }
  nlohmann::json grid;
  grid["reference"] = "level0";
  grid["measures"] = {"fdd", "doc-softmax"};
  grid["config"] = {{"selector", "positive_evidence"}, {"k", 4}, {"aggregation", "mean"}};
  grid["models"] = models;
  const auto grid_path = dir / "grid.json";
  {
    std::ofstream out(grid_path);
    out << grid.dump(2);
  }

  EvaluateOptions opt;
  opt.grid_spec = grid_path;
  opt.pooled = true;
  CommonOptions common;
  common.out = dir / "out";
  const auto report = cmd_evaluate(opt, common);

  // Two summary blocks (one per measure), each with per-model correlations.
  REQUIRE(report.at("results").size() == 2);
  CHECK(report.at("results").at(0).at("measure") == "fdd");
  CHECK(report.at("results").at(0).at("per_model_r").size() == 2);
  CHECK(report.at("results").at(0).contains("pooled_r"));
  CHECK(report.at("record_count").get<int>() == 8);  // 2 models x 2 targets x 2 measures

  const std::string csv = slurp(dir / "out" / "records.csv");
  CHECK(csv.find("model_id,reference_id,target_id,measure,config,") == 0);
  CHECK(csv.find("doc-softmax") != std::string::npos);
  CHECK(csv.find("fdd") != std::string::npos);
  REQUIRE(std::filesystem::exists(dir / "out" / "summary.json"));

  SUBCASE("a model without a validation manifest is an error") {
    grid["models"][0].erase("validation");
    {
      std::ofstream out(grid_path);
      out << grid.dump(2);
    }
    CHECK_THROWS_WITH_AS(cmd_evaluate(opt, common),
                         doctest::Contains("validation"), Error);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("cmd_validate reports violations without throwing") {
  const auto dir = support::scratch_dir("cli-validate");
  const auto manifest = synth_to_disk(dir / "data", 5, 0.0, "ds", 0, 10);
  ValidateOptions opt;
  opt.manifest = manifest;
  auto report = cmd_validate(opt, CommonOptions{});
  CHECK(report.at("ok").get<bool>());
  CHECK(report.at("violations").empty());

  // Break a binary file.
  std::filesystem::remove(dir / "data" / "bag00003.features.bin");
  report = cmd_validate(opt, CommonOptions{});
  CHECK(!report.at("ok").get<bool>());
  CHECK(!report.at("violations").empty());
  CHECK(report.at("violations").at(0).at("slide_id") == "s00003");
  std::filesystem::remove_all(dir);
}

TEST_CASE("report files are byte-identical across reruns") {
  const auto dir = support::scratch_dir("cli-idempotent");
  const auto ref_manifest = synth_to_disk(dir / "ref", 5, 0.0, "ref");
  const auto tgt_manifest = synth_to_disk(dir / "tgt", 6, 1.0, "tgt");
  MeasureOptions opt;
  opt.reference = ref_manifest;
  opt.target = tgt_manifest;
  opt.measure = Measure::Rs;
  opt.config = small_config();
  CommonOptions common;
  common.out = dir / "out";
  cmd_measure(opt, common);
  const std::string first = slurp(dir / "out" / "report.json");
  cmd_measure(opt, common);
  CHECK(slurp(dir / "out" / "report.json") == first);
  CHECK(first.find("timing") == std::string::npos);
  std::filesystem::remove_all(dir);
}
