#pragma once

#include <stdexcept>
#include <string>

namespace fdd {

/// Every library failure surfaces as fdd::Error. Messages name the offending
/// slide, file or field whenever one exists.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// One invariant violation found in a dataset; slide_id is empty for
/// dataset-level problems.
struct Violation {
  std::string slide_id;
  std::string field;
  std::string message;
};

std::string format_violation(const Violation& v);

}  // namespace fdd
