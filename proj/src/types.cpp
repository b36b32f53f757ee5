#include "fdd/types.hpp"

#include <sstream>

#include "fdd/error.hpp"

namespace fdd {

bool uses_evidence(Selector s) {
  switch (s) {
    case Selector::PositiveEvidence:
    case Selector::NegativeEvidence:
    case Selector::CombinedEvidence:
    case Selector::Random:
      return true;
    case Selector::MeanPatch:
    case Selector::Penultimate:
      return false;
  }
  return false;
}

std::string to_string(Selector s) {
  switch (s) {
    case Selector::PositiveEvidence: return "positive_evidence";
    case Selector::NegativeEvidence: return "negative_evidence";
    case Selector::CombinedEvidence: return "combined_evidence";
    case Selector::Random: return "random";
    case Selector::MeanPatch: return "mean_patch";
    case Selector::Penultimate: return "penultimate";
  }
  return "?";
}

std::string to_string(Aggregation a) {
  return a == Aggregation::Mean ? "mean" : "concat";
}

std::string to_string(Measure m) {
  switch (m) {
    case Measure::Fdd: return "fdd";
    case Measure::Rs: return "rs";
    case Measure::DocSoftmax: return "doc-softmax";
    case Measure::DocEntropy: return "doc-entropy";
    case Measure::DeEntropy: return "de-entropy";
  }
  return "?";
}

Selector parse_selector(const std::string& name) {
  if (name == "positive_evidence" || name == "positive")
    return Selector::PositiveEvidence;
  if (name == "negative_evidence" || name == "negative")
    return Selector::NegativeEvidence;
  if (name == "combined_evidence" || name == "combined")
    return Selector::CombinedEvidence;
  if (name == "random") return Selector::Random;
  if (name == "mean_patch") return Selector::MeanPatch;
  if (name == "penultimate") return Selector::Penultimate;
  throw Error("unknown selector '" + name +
              "' (expected positive_evidence, negative_evidence, "
              "combined_evidence, random, mean_patch or penultimate)");
}

Aggregation parse_aggregation(const std::string& name) {
  if (name == "mean") return Aggregation::Mean;
  if (name == "concat") return Aggregation::Concat;
  throw Error("unknown aggregation '" + name + "' (expected mean or concat)");
}

Measure parse_measure(const std::string& name) {
  if (name == "fdd") return Measure::Fdd;
  if (name == "rs") return Measure::Rs;
  if (name == "doc-softmax") return Measure::DocSoftmax;
  if (name == "doc-entropy") return Measure::DocEntropy;
  if (name == "de-entropy") return Measure::DeEntropy;
  throw Error("unknown measure '" + name +
              "' (expected fdd, rs, doc-softmax, doc-entropy or de-entropy)");
}

std::string describe(const FeatureConfig& config) {
  std::ostringstream out;
  out << "selector=" << to_string(config.selector);
  if (uses_evidence(config.selector)) {
    out << " k=" << config.k << " agg=" << to_string(config.aggregation);
    if (config.selector == Selector::Random) out << " seed=" << config.seed;
  }
  return out.str();
}

std::string format_violation(const Violation& v) {
  std::string out;
  if (!v.slide_id.empty()) out += "slide '" + v.slide_id + "': ";
  if (!v.field.empty()) out += v.field + ": ";
  out += v.message;
  return out;
}

}  // namespace fdd
