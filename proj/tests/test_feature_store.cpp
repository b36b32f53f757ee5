#include <doctest.h>

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "fdd/error.hpp"
#include "fdd/feature_store.hpp"
#include "test_support.hpp"

using namespace fdd;

namespace {

using support::identical_datasets;

/// Dataset exercising every optional field: penultimate, ensembles, an
/// unlabeled bag, and awkward float values.
Dataset full_dataset() {
  Dataset d = support::random_dataset(2718, 4, 2, 6, 3, "full");
  d.penultimate_dim = 2;
  d.ensemble_size = 2;
  for (std::size_t i = 0; i < d.bags.size(); ++i) {
    Eigen::VectorXf p(2);
    p << static_cast<float>(i) * 0.25f, -1.5f;
    d.bags[i].penultimate = p;
    d.bags[i].ensemble_softmax = {{{0.25, 0.75}, {0.875, 0.125}}};
  }
  d.bags[1].label.reset();
  d.bags[0].patch_features(0, 0) = 1.00000011920928955e-7f;  // non-round value
  return d;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  nlohmann::json doc;
  in >> doc;
  return doc;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path, std::ios::trunc);
  out << doc.dump(2);
}

}  // namespace

TEST_CASE("write/load round-trip is bit-exact and deterministic") {
  const Dataset original = full_dataset();
  const auto dir = support::scratch_dir("roundtrip");
  const auto manifest = write_dataset(original, dir);

  const Dataset loaded = load_manifest(manifest);
  CHECK(identical_datasets(original, loaded));

  const Dataset again = load_manifest(manifest);
  CHECK(identical_datasets(loaded, again));

  CHECK(validate_dataset(loaded).empty());
  CHECK(inspect_manifest(manifest).empty());
  std::filesystem::remove_all(dir);
}

TEST_CASE("well-formed two-slide manifest loads") {
  Dataset d;
  d.dataset_id = "tiny";
  d.model_id = "m";
  d.feature_dim = 4;
  for (int i = 0; i < 2; ++i)
    d.bags.push_back(support::make_bag(
        "slide-" + std::to_string(i),
        {{1, 2, 3, 4}, {5, 6, 7, 8}, {9, 10, 11, 12}}, {0.1f, 0.2f, 0.3f},
        {0.25, 0.75}, i));
  const auto dir = support::scratch_dir("tiny");
  const Dataset loaded = load_manifest(write_dataset(d, dir));
  CHECK(loaded.size() == 2);
  CHECK(loaded.feature_dim == 4);
  CHECK(loaded.bags[0].num_patches() == 3);
  std::filesystem::remove_all(dir);
}

TEST_CASE("byte-count mismatch names the slide and field") {
  const Dataset d = full_dataset();
  const auto dir = support::scratch_dir("bytecount");
  const auto manifest = write_dataset(d, dir);
  // Declare one more patch than the binary holds.
  auto doc = read_json(manifest);
  doc["wsis"][0]["num_patches"] = doc["wsis"][0]["num_patches"].get<int>() + 1;
  write_json(manifest, doc);

  CHECK_THROWS_WITH_AS(load_manifest(manifest),
                       doctest::Contains("byte-count mismatch"), Error);
  CHECK_THROWS_WITH_AS(load_manifest(manifest),
                       doctest::Contains(d.bags[0].slide_id.c_str()), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("unnormalized softmax is rejected") {
  const Dataset d = full_dataset();
  const auto dir = support::scratch_dir("softmax");
  const auto manifest = write_dataset(d, dir);
  auto doc = read_json(manifest);
  doc["wsis"][1]["softmax"] = {0.6, 0.6};
  write_json(manifest, doc);
  CHECK_THROWS_WITH_AS(load_manifest(manifest),
                       doctest::Contains("softmax not normalized"), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("missing binary file is reported") {
  const Dataset d = full_dataset();
  const auto dir = support::scratch_dir("missing");
  const auto manifest = write_dataset(d, dir);
  std::filesystem::remove(dir / "bag00002.features.bin");
  CHECK_THROWS_WITH_AS(load_manifest(manifest), doctest::Contains("missing file"),
                       Error);
  const auto violations = inspect_manifest(manifest);
  REQUIRE(!violations.empty());
  CHECK(violations[0].slide_id == d.bags[2].slide_id);
  std::filesystem::remove_all(dir);
}

TEST_CASE("non-finite values are rejected") {
  const Dataset d = full_dataset();
  const auto dir = support::scratch_dir("nan");
  const auto manifest = write_dataset(d, dir);
  // Poison one float in the attention file.
  const auto path = dir / "bag00000.attention.bin";
  std::fstream bin(path, std::ios::binary | std::ios::in | std::ios::out);
  const float nan_value = std::nanf("");
  bin.write(reinterpret_cast<const char*>(&nan_value), 4);
  bin.close();
  CHECK_THROWS_WITH_AS(load_manifest(manifest), doctest::Contains("non-finite"),
                       Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("single-slide datasets are rejected") {
  Dataset d;
  d.dataset_id = "one";
  d.model_id = "m";
  d.feature_dim = 1;
  d.bags.push_back(support::make_bag("only", {{1.f}}, {0.5f}));
  const auto dir = support::scratch_dir("single");
  const auto manifest = write_dataset(d, dir);
  CHECK_THROWS_WITH_AS(load_manifest(manifest), doctest::Contains("need >= 2 slides"),
                       Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("ragged ensemble rows are rejected at load") {
  const Dataset d = full_dataset();
  const auto dir = support::scratch_dir("ensemble");
  const auto manifest = write_dataset(d, dir);
  auto doc = read_json(manifest);
  doc["wsis"][0]["ensemble_softmax"] = {{1.0, 0.0}};  // E declared as 2
  write_json(manifest, doc);
  CHECK_THROWS_WITH_AS(load_manifest(manifest),
                       doctest::Contains("ensemble_size"), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("validate_dataset reports in-memory violations") {
  Dataset d;
  d.dataset_id = "mem";
  d.model_id = "m";
  d.feature_dim = 2;
  d.bags.push_back(support::make_bag("good", {{1.f, 2.f}}, {0.5f}));
  d.bags.push_back(support::make_bag("good2", {{1.f, 2.f}}, {0.5f}));
  CHECK(validate_dataset(d).empty());

  SUBCASE("attention length mismatch") {
    d.bags[0].attention.resize(2);
    d.bags[0].attention << 0.5f, 0.5f;
    const auto violations = validate_dataset(d);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].slide_id == "good");
    CHECK(violations[0].field == "attention");
  }
  SUBCASE("NaN in patch features") {
    d.bags[1].patch_features(0, 1) = std::nanf("");
    const auto violations = validate_dataset(d);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].slide_id == "good2");
    CHECK(violations[0].field == "features");
  }
  SUBCASE("bad label value") {
    d.bags[0].label = 2;
    const auto violations = validate_dataset(d);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].field == "label");
  }
  SUBCASE("too few slides") {
    d.bags.pop_back();
    const auto violations = validate_dataset(d);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].message.find("need >= 2 slides") != std::string::npos);
  }
}
