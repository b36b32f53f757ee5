#include "fdd/measures.hpp"

#include "fdd/baselines.hpp"
#include "fdd/error.hpp"
#include "fdd/shift_stats.hpp"

namespace fdd {

ShiftMeasureResult compute_measure(Measure measure, const Dataset& ref,
                                   const Dataset& tgt, const FeatureConfig& config,
                                   double ridge) {
  switch (measure) {
    case Measure::Fdd: {
      ShiftMeasureResult r;
      r.measure = Measure::Fdd;
      r.value = fdd(ref, tgt, config, ridge);
      r.signed_value = r.value;
      r.config = config;
      r.reference_id = ref.dataset_id;
      r.target_id = tgt.dataset_id;
      r.model_id = ref.model_id;
      return r;
    }
    case Measure::Rs:
      return representation_shift(ref, tgt, config);
    case Measure::DocSoftmax:
      return doc_softmax(ref, tgt);
    case Measure::DocEntropy:
      return doc_entropy(ref, tgt);
    case Measure::DeEntropy:
      return de_entropy(ref, tgt);
  }
  throw Error("unknown measure");
}

}  // namespace fdd
