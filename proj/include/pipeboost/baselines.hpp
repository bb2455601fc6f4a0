#pragma once

// Comparison schedulers: everything on the GPU, a MOSAIC-style linear
// latency model with per-model contention-free partitioning, a genetic
// algorithm with a stage-merging repair pass, and best-of-n random.

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "pipeboost/evaluator.hpp"
#include "pipeboost/simulator.hpp"

namespace pipeboost {

Mapping gpu_only(const Workload& workload, const DeviceProfile& profile);

/// Per-unit least-squares fit of layer cost on (in_elems, out_elems, macs, 1).
class LinRegModel {
 public:
  using Weights = std::array<double, 4>;

  LinRegModel() = default;
  static LinRegModel fit(const DeviceProfile& profile);

  bool fitted() const { return !weights_.empty(); }
  const std::vector<Weights>& weights() const { return weights_; }
  double predict(const LayerFeatures& features, UnitId unit) const;

 private:
  std::vector<Weights> weights_;
};

/// For each model alone, the <= stage_limit assignment minimizing the
/// predicted bottleneck: the largest per-unit sum of predicted stage
/// times (transfer penalty included). Ties: lexicographically smallest.
Mapping mosaic_schedule(const Workload& workload, const DeviceProfile& profile,
                        const LinRegModel& linreg, std::size_t stage_limit = 3);

struct GaConfig {
  std::size_t population = 50;
  std::size_t generations = 100;
  double mutation_rate = 0.1;  // per gene
  std::size_t tournament = 3;
  std::size_t elitism = 2;
  std::size_t stage_limit = 3;
  std::uint64_t seed = 0;
  // Optional seed individuals; the rest of the population is random.
  std::vector<Mapping> initial_population;
};

using LayerCostFn = std::function<double(std::size_t layer, UnitId unit)>;

/// While the assignment has more than stage_limit stages, reassigns the
/// cheapest stage (first on ties) to the unit of its cheaper neighbour
/// (left on ties).
void merge_stages(std::vector<UnitId>& assignment, const LayerCostFn& cost,
                  std::size_t stage_limit);

Mapping ga_schedule(const Workload& workload, const DeviceProfile& profile,
                    const Evaluator& evaluator, const GaConfig& config = {});

/// Best of n random mappings by simulated T (first on ties).
Mapping random_best(const Workload& workload, const DeviceProfile& profile, std::size_t n,
                    std::size_t max_stages, std::uint64_t seed);

}  // namespace pipeboost
