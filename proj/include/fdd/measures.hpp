#pragma once

#include "fdd/types.hpp"

namespace fdd {

/// Dispatches to the named shift measure. `config` and `ridge` apply to the
/// feature-based measures (fdd, rs) and are ignored by the confidence-based
/// ones.
ShiftMeasureResult compute_measure(Measure measure, const Dataset& ref,
                                   const Dataset& tgt, const FeatureConfig& config,
                                   double ridge = 0.0);

}  // namespace fdd
