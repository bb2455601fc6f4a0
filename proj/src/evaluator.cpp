#include "pipeboost/evaluator.hpp"

#include <algorithm>
#include <limits>

#include "pipeboost/error.hpp"

namespace pipeboost {

double Evaluator::score(const Workload& workload, const Mapping& mapping) const {
  const auto values = components(workload, mapping);
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

EstimatorEvaluator::EstimatorEvaluator(const Estimator& estimator,
                                       const DeviceProfile& profile,
                                       const EmbeddingTensor& embedding)
    : estimator_(estimator), profile_(profile), embedding_(embedding) {
  if (!estimator.trained()) {
    throw Error(Errc::NotTrained, "estimator evaluator needs a trained estimator");
  }
  if (!(estimator.net().input_dims() == embedding.dims())) {
    throw Error(Errc::DimensionMismatch,
                "estimator input dims do not match the profile embedding");
  }
}

std::vector<double> EstimatorEvaluator::components(const Workload& workload,
                                                   const Mapping& mapping) const {
  const auto p = predict_throughput(estimator_, workload, mapping, profile_, embedding_);
  return {p.begin(), p.end()};
}

SimulatorEvaluator::SimulatorEvaluator(const DeviceProfile& profile)
    : profile_(profile), costs_(profile) {}

double SimulatorEvaluator::throughput_bound(const Workload& workload) const {
  double sum = 0.0;
  for (std::size_t m : workload.models()) {
    double slowest = 0.0;
    for (std::size_t l = 0; l < profile_.models[m].layer_count(); ++l) {
      double cheapest = std::numeric_limits<double>::infinity();
      for (std::size_t u = 0; u < profile_.unit_count(); ++u) {
        cheapest = std::min(cheapest, costs_(m, l, static_cast<UnitId>(u)));
      }
      slowest = std::max(slowest, cheapest);
    }
    sum += 1000.0 / slowest;
  }
  return sum / static_cast<double>(workload.size());
}

std::vector<double> SimulatorEvaluator::components(const Workload& workload,
                                                   const Mapping& mapping) const {
  const auto report = simulate(workload, mapping, profile_, costs_);
  return {std::clamp(report.avg_throughput / throughput_bound(workload), 0.0, 1.0)};
}

}  // namespace pipeboost
