#include "fdd/feature_store.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fdd/parallel.hpp"

static_assert(std::endian::native == std::endian::little,
              "on-disk format is little-endian binary32; big-endian hosts are unsupported");
static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

namespace fdd {

namespace {

using nlohmann::json;

constexpr double kSoftmaxTolerance = 1e-5;

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest '" + path.string() + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error("manifest '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return doc;
}

/// Reads exactly expected_values binary32 values; returns false (with a
/// violation) on a missing file or a byte-count mismatch.
bool read_binary32(const std::filesystem::path& path, std::size_t expected_values,
                   float* out, const std::string& slide_id,
                   const std::string& field, std::vector<Violation>& violations) {
  std::error_code ec;
  const auto actual = std::filesystem::file_size(path, ec);
  if (ec) {
    violations.push_back({slide_id, field, "missing file '" + path.string() + "'"});
    return false;
  }
  const std::uintmax_t expected_bytes = 4ull * expected_values;
  if (actual != expected_bytes) {
    violations.push_back({slide_id, field,
                          "byte-count mismatch in '" + path.string() + "': expected " +
                              std::to_string(expected_bytes) + " bytes, found " +
                              std::to_string(actual)});
    return false;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in.read(reinterpret_cast<char*>(out),
               static_cast<std::streamsize>(expected_bytes))) {
    violations.push_back({slide_id, field, "failed to read '" + path.string() + "'"});
    return false;
  }
  return true;
}

bool check_softmax_row(const std::array<double, 2>& p, const std::string& slide_id,
                       const std::string& field, std::vector<Violation>& violations) {
  for (const double v : p) {
    if (!std::isfinite(v)) {
      violations.push_back({slide_id, field, "non-finite probability"});
      return false;
    }
    if (v < 0.0 || v > 1.0) {
      violations.push_back({slide_id, field, "probability outside [0,1]"});
      return false;
    }
  }
  if (std::abs(p[0] + p[1] - 1.0) > kSoftmaxTolerance) {
    std::ostringstream msg;
    msg << "softmax not normalized (sum = " << (p[0] + p[1]) << ")";
    violations.push_back({slide_id, field, msg.str()});
    return false;
  }
  return true;
}

std::optional<std::array<double, 2>> parse_pair(const json& node) {
  if (!node.is_array() || node.size() != 2 || !node[0].is_number() ||
      !node[1].is_number())
    return std::nullopt;
  return std::array<double, 2>{node[0].get<double>(), node[1].get<double>()};
}

struct SlideSpec {
  std::string id;
  std::optional<int> label;
  std::int64_t num_patches = 0;
  std::filesystem::path features;
  std::filesystem::path attention;
  std::array<double, 2> softmax{0.0, 0.0};
  std::optional<std::filesystem::path> penultimate;
  std::optional<std::vector<std::array<double, 2>>> ensemble_softmax;
  bool usable = false;  // structural fields parsed
};

/// Parses one wsi entry; collects violations for anything malformed.
SlideSpec parse_slide(const json& node, std::size_t index,
                      const std::filesystem::path& base_dir,
                      std::vector<Violation>& violations) {
  SlideSpec spec;
  spec.id = node.contains("id") && node["id"].is_string()
                ? node["id"].get<std::string>()
                : "#" + std::to_string(index);
  if (!node.contains("id") || !node["id"].is_string()) {
    violations.push_back({spec.id, "id", "missing or non-string id"});
    return spec;
  }
  if (node.contains("label")) {
    if (!node["label"].is_number_integer() ||
        (node["label"].get<int>() != 0 && node["label"].get<int>() != 1)) {
      violations.push_back({spec.id, "label", "label must be 0 or 1"});
      return spec;
    }
    spec.label = node["label"].get<int>();
  }
  if (!node.contains("num_patches") || !node["num_patches"].is_number_integer() ||
      node["num_patches"].get<std::int64_t>() < 1) {
    violations.push_back({spec.id, "num_patches", "num_patches must be an integer >= 1"});
    return spec;
  }
  spec.num_patches = node["num_patches"].get<std::int64_t>();
  for (const char* field : {"features", "attention"}) {
    if (!node.contains(field) || !node[field].is_string()) {
      violations.push_back({spec.id, field, "missing path"});
      return spec;
    }
  }
  spec.features = base_dir / node["features"].get<std::string>();
  spec.attention = base_dir / node["attention"].get<std::string>();
  if (!node.contains("softmax")) {
    violations.push_back({spec.id, "softmax", "missing softmax"});
    return spec;
  }
  const auto pair = parse_pair(node["softmax"]);
  if (!pair) {
    violations.push_back({spec.id, "softmax", "softmax must be a pair of numbers"});
    return spec;
  }
  spec.softmax = *pair;
  if (node.contains("penultimate")) {
    if (!node["penultimate"].is_string()) {
      violations.push_back({spec.id, "penultimate", "penultimate must be a path"});
      return spec;
    }
    spec.penultimate = base_dir / node["penultimate"].get<std::string>();
  }
  if (node.contains("ensemble_softmax")) {
    if (!node["ensemble_softmax"].is_array() || node["ensemble_softmax"].empty()) {
      violations.push_back({spec.id, "ensemble_softmax", "must be a non-empty list of pairs"});
      return spec;
    }
    std::vector<std::array<double, 2>> rows;
    for (const auto& row : node["ensemble_softmax"]) {
      const auto parsed = parse_pair(row);
      if (!parsed) {
        violations.push_back({spec.id, "ensemble_softmax", "each row must be a pair of numbers"});
        return spec;
      }
      rows.push_back(*parsed);
    }
    spec.ensemble_softmax = std::move(rows);
  }
  spec.usable = true;
  return spec;
}

/// Core loader shared by load_manifest and inspect_manifest.
Dataset load_impl(const std::filesystem::path& manifest_path,
                  std::vector<Violation>& violations) {
  const json doc = read_json_file(manifest_path);
  const auto base_dir = manifest_path.parent_path();

  Dataset d;
  for (const char* field : {"dataset_id", "model_id"}) {
    if (!doc.contains(field) || !doc[field].is_string()) {
      violations.push_back({"", field, "missing or non-string"});
      return d;
    }
  }
  d.dataset_id = doc["dataset_id"].get<std::string>();
  d.model_id = doc["model_id"].get<std::string>();
  if (!doc.contains("feature_dim") || !doc["feature_dim"].is_number_integer() ||
      doc["feature_dim"].get<int>() < 1) {
    violations.push_back({"", "feature_dim", "must be an integer >= 1"});
    return d;
  }
  d.feature_dim = doc["feature_dim"].get<int>();
  if (doc.contains("penultimate_dim")) {
    if (!doc["penultimate_dim"].is_number_integer() ||
        doc["penultimate_dim"].get<int>() < 1) {
      violations.push_back({"", "penultimate_dim", "must be an integer >= 1"});
      return d;
    }
    d.penultimate_dim = doc["penultimate_dim"].get<int>();
  }
  if (doc.contains("ensemble_size")) {
    if (!doc["ensemble_size"].is_number_integer() ||
        doc["ensemble_size"].get<int>() < 1) {
      violations.push_back({"", "ensemble_size", "must be an integer >= 1"});
      return d;
    }
    d.ensemble_size = doc["ensemble_size"].get<int>();
  }
  if (!doc.contains("wsis") || !doc["wsis"].is_array()) {
    violations.push_back({"", "wsis", "missing wsi list"});
    return d;
  }

  std::vector<SlideSpec> specs;
  for (std::size_t i = 0; i < doc["wsis"].size(); ++i)
    specs.push_back(parse_slide(doc["wsis"][i], i, base_dir, violations));

  d.bags.resize(specs.size());
  std::vector<std::vector<Violation>> bag_violations(specs.size());
  std::vector<char> loaded(specs.size(), 0);
  parallel_for_index(specs.size(), [&](std::size_t i) {
    const SlideSpec& spec = specs[i];
    if (!spec.usable) return;
    auto& local = bag_violations[i];
    PatchBag bag;
    bag.slide_id = spec.id;
    bag.label = spec.label;
    bag.softmax = spec.softmax;

    const auto n = static_cast<Eigen::Index>(spec.num_patches);
    const auto j = static_cast<Eigen::Index>(d.feature_dim);
    bag.patch_features.resize(n, j);
    bag.attention.resize(n);
    bool ok = read_binary32(spec.features,
                            static_cast<std::size_t>(spec.num_patches) * d.feature_dim,
                            bag.patch_features.data(), spec.id, "features", local);
    ok &= read_binary32(spec.attention, static_cast<std::size_t>(spec.num_patches),
                        bag.attention.data(), spec.id, "attention", local);
    if (spec.penultimate) {
      if (!d.penultimate_dim) {
        local.push_back({spec.id, "penultimate",
                         "slide has penultimate features but the manifest declares no penultimate_dim"});
        ok = false;
      } else {
        Eigen::VectorXf p(*d.penultimate_dim);
        if (read_binary32(*spec.penultimate, static_cast<std::size_t>(*d.penultimate_dim),
                          p.data(), spec.id, "penultimate", local))
          bag.penultimate = std::move(p);
        else
          ok = false;
      }
    }
    if (spec.ensemble_softmax) {
      if (!d.ensemble_size) {
        local.push_back({spec.id, "ensemble_softmax",
                         "slide has ensemble outputs but the manifest declares no ensemble_size"});
        ok = false;
      } else {
        bag.ensemble_softmax = spec.ensemble_softmax;
      }
    }
    if (ok) {
      d.bags[i] = std::move(bag);
      loaded[i] = 1;
    }
  });
  for (auto& local : bag_violations)
    violations.insert(violations.end(), local.begin(), local.end());

  // Drop bags that failed structurally so value checks do not read garbage.
  if (!violations.empty()) {
    std::vector<PatchBag> kept;
    for (std::size_t i = 0; i < d.bags.size(); ++i)
      if (loaded[i]) kept.push_back(std::move(d.bags[i]));
    d.bags = std::move(kept);
  }

  const auto value_violations = validate_dataset(d);
  violations.insert(violations.end(), value_violations.begin(), value_violations.end());
  return d;
}

void append_finite_check(const float* data, std::size_t n, const std::string& slide_id,
                         const std::string& field, std::vector<Violation>& violations) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(data[i])) {
      violations.push_back({slide_id, field,
                            "non-finite value at index " + std::to_string(i)});
      return;
    }
  }
}

void write_binary32(const std::filesystem::path& path, const float* data,
                    std::size_t n) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(4 * n));
  if (!out) throw Error("short write to '" + path.string() + "'");
}

}  // namespace

std::vector<Violation> validate_dataset(const Dataset& d) {
  std::vector<Violation> violations;
  if (d.feature_dim < 1)
    violations.push_back({"", "feature_dim", "must be >= 1"});
  if (d.bags.size() < 2)
    violations.push_back({"", "wsis",
                          "dataset has " + std::to_string(d.bags.size()) +
                              " slide(s); need >= 2 slides"});
  for (const auto& bag : d.bags) {
    if (bag.num_patches() < 1)
      violations.push_back({bag.slide_id, "features", "bag has no patches"});
    if (bag.patch_features.cols() != d.feature_dim)
      violations.push_back({bag.slide_id, "features",
                            "feature dim " + std::to_string(bag.patch_features.cols()) +
                                " != dataset feature_dim " + std::to_string(d.feature_dim)});
    if (bag.attention.size() != bag.num_patches())
      violations.push_back({bag.slide_id, "attention",
                            "attention length " + std::to_string(bag.attention.size()) +
                                " != num_patches " + std::to_string(bag.num_patches())});
    append_finite_check(bag.patch_features.data(),
                        static_cast<std::size_t>(bag.patch_features.size()),
                        bag.slide_id, "features", violations);
    append_finite_check(bag.attention.data(),
                        static_cast<std::size_t>(bag.attention.size()),
                        bag.slide_id, "attention", violations);
    check_softmax_row(bag.softmax, bag.slide_id, "softmax", violations);
    if (bag.label && *bag.label != 0 && *bag.label != 1)
      violations.push_back({bag.slide_id, "label", "label must be 0 or 1"});
    if (bag.penultimate) {
      if (!d.penultimate_dim)
        violations.push_back({bag.slide_id, "penultimate",
                              "penultimate present but dataset declares no penultimate_dim"});
      else if (bag.penultimate->size() != *d.penultimate_dim)
        violations.push_back({bag.slide_id, "penultimate",
                              "length " + std::to_string(bag.penultimate->size()) +
                                  " != penultimate_dim " + std::to_string(*d.penultimate_dim)});
      append_finite_check(bag.penultimate->data(),
                          static_cast<std::size_t>(bag.penultimate->size()),
                          bag.slide_id, "penultimate", violations);
    }
    if (bag.ensemble_softmax) {
      if (!d.ensemble_size) {
        violations.push_back({bag.slide_id, "ensemble_softmax",
                              "ensemble outputs present but dataset declares no ensemble_size"});
      } else if (static_cast<int>(bag.ensemble_softmax->size()) != *d.ensemble_size) {
        violations.push_back({bag.slide_id, "ensemble_softmax",
                              std::to_string(bag.ensemble_softmax->size()) +
                                  " rows != ensemble_size " + std::to_string(*d.ensemble_size)});
      } else {
        for (const auto& row : *bag.ensemble_softmax)
          if (!check_softmax_row(row, bag.slide_id, "ensemble_softmax", violations)) break;
      }
    }
  }
  return violations;
}

Dataset load_manifest(const std::filesystem::path& manifest_path) {
  std::vector<Violation> violations;
  Dataset d = load_impl(manifest_path, violations);
  if (!violations.empty()) {
    std::string msg = "invalid dataset '" + manifest_path.string() + "':";
    for (const auto& v : violations) msg += "\n  " + format_violation(v);
    throw Error(msg);
  }
  return d;
}

std::vector<Violation> inspect_manifest(const std::filesystem::path& manifest_path) {
  std::vector<Violation> violations;
  load_impl(manifest_path, violations);
  return violations;
}

std::filesystem::path write_dataset(const Dataset& d,
                                    const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json doc;
  doc["dataset_id"] = d.dataset_id;
  doc["model_id"] = d.model_id;
  doc["feature_dim"] = d.feature_dim;
  if (d.penultimate_dim) doc["penultimate_dim"] = *d.penultimate_dim;
  if (d.ensemble_size) doc["ensemble_size"] = *d.ensemble_size;
  nlohmann::json wsis = nlohmann::json::array();
  for (std::size_t i = 0; i < d.bags.size(); ++i) {
    const PatchBag& bag = d.bags[i];
    char stem[32];
    std::snprintf(stem, sizeof stem, "bag%05zu", i);
    nlohmann::json entry;
    entry["id"] = bag.slide_id;
    if (bag.label) entry["label"] = *bag.label;
    entry["num_patches"] = static_cast<std::int64_t>(bag.num_patches());
    entry["features"] = std::string(stem) + ".features.bin";
    entry["attention"] = std::string(stem) + ".attention.bin";
    entry["softmax"] = bag.softmax;
    write_binary32(dir / entry["features"].get<std::string>(), bag.patch_features.data(),
                   static_cast<std::size_t>(bag.patch_features.size()));
    write_binary32(dir / entry["attention"].get<std::string>(), bag.attention.data(),
                   static_cast<std::size_t>(bag.attention.size()));
    if (bag.penultimate) {
      entry["penultimate"] = std::string(stem) + ".penultimate.bin";
      write_binary32(dir / entry["penultimate"].get<std::string>(), bag.penultimate->data(),
                     static_cast<std::size_t>(bag.penultimate->size()));
    }
    if (bag.ensemble_softmax) entry["ensemble_softmax"] = *bag.ensemble_softmax;
    wsis.push_back(std::move(entry));
  }
  doc["wsis"] = std::move(wsis);

  const auto manifest_path = dir / "manifest.json";
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw Error("cannot write '" + manifest_path.string() + "'");
  out << doc.dump(2) << '\n';
  return manifest_path;
}

}  // namespace fdd
