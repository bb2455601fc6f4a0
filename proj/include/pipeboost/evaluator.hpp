#pragma once

#include <vector>

#include "pipeboost/embedding.hpp"
#include "pipeboost/estimator.hpp"
#include "pipeboost/simulator.hpp"

namespace pipeboost {

/// Scores complete mappings of a workload. components() returns values in
/// [0, 1]; score() is their mean. Implementations are immutable and safe to
/// query from several threads.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual std::vector<double> components(const Workload& workload,
                                         const Mapping& mapping) const = 0;
  double score(const Workload& workload, const Mapping& mapping) const;
};

/// The trained estimator: three clamped per-unit predictions.
/// Holds references; the estimator, profile and embedding must outlive it.
class EstimatorEvaluator final : public Evaluator {
 public:
  EstimatorEvaluator(const Estimator& estimator, const DeviceProfile& profile,
                     const EmbeddingTensor& embedding);
  std::vector<double> components(const Workload& workload,
                                 const Mapping& mapping) const override;

 private:
  const Estimator& estimator_;
  const DeviceProfile& profile_;
  const EmbeddingTensor& embedding_;
};

/// The simulator as evaluator: a single component T / T_bound, where
/// T_bound averages 1000 / (max over layers of the cheapest unit cost),
/// an upper bound on every model's rate.
class SimulatorEvaluator final : public Evaluator {
 public:
  explicit SimulatorEvaluator(const DeviceProfile& profile);
  std::vector<double> components(const Workload& workload,
                                 const Mapping& mapping) const override;

  double throughput_bound(const Workload& workload) const;

 private:
  const DeviceProfile& profile_;
  CostTable costs_;
};

}  // namespace pipeboost
