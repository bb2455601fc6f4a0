#pragma once

// Ground-truth throughput model for a workload mapped onto the device:
// pipeline bottleneck per model plus uniform contention scaling across
// shared units. Also the mapping combinatorics and the exhaustive oracle.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "pipeboost/workload.hpp"

namespace pipeboost {

/// One unit id per layer, one sequence per workload model (workload order).
struct Mapping {
  std::vector<std::vector<UnitId>> assignments;

  bool operator==(const Mapping&) const = default;
  auto operator<=>(const Mapping&) const = default;
};

struct Stage {
  std::size_t model_index = 0;  // position in the workload
  UnitId unit = 0;
  std::size_t first_layer = 0;
  std::size_t last_layer = 0;  // inclusive
  double cost_ms = 0.0;
};

struct ThroughputReport {
  std::vector<double> per_dnn_inf_s;
  std::vector<double> per_unit_inf_s;
  double avg_throughput = 0.0;
  std::vector<double> unit_utilization;
  double theta = 1.0;
};

/// Number of maximal runs of equal unit ids.
std::size_t stage_count(std::span<const UnitId> assignment);

/// Throws Errc::InvalidMapping on length / unit-range mismatch.
void validate(const Mapping& mapping, const Workload& workload,
              const DeviceProfile& profile);

/// Additionally requires every model to have at most `stage_limit` stages.
bool within_stage_limit(const Mapping& mapping, std::size_t stage_limit);

std::vector<std::vector<Stage>> stages_of(const Mapping& mapping,
                                          const DeviceProfile& profile,
                                          const Workload& workload);

ThroughputReport simulate(const Workload& workload, const Mapping& mapping,
                          const DeviceProfile& profile);

/// Same as simulate() but reuses a precomputed cost table; used by search
/// loops that score many mappings of one profile.
ThroughputReport simulate(const Workload& workload, const Mapping& mapping,
                          const DeviceProfile& profile, const CostTable& costs);

/// Exact C(n, k); throws Errc::Overflow when it does not fit 64 bits.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

/// Number of unit sequences of length n_layers over n_units with at most
/// max_stages runs: sum_{s=1}^{S} C(n-1, s-1) * u * (u-1)^(s-1).
std::uint64_t count_assignments(std::uint64_t n_layers, std::uint64_t n_units,
                                std::uint64_t max_stages);

/// All such sequences in lexicographic order.
std::vector<std::vector<UnitId>> enumerate_assignments(std::size_t n_layers,
                                                       std::size_t n_units,
                                                       std::size_t max_stages);

inline constexpr std::uint64_t kDefaultExhaustiveCap = 10'000'000;

/// Best mapping by simulated T over all mappings with <= max_stages stages
/// per model. Ties go to the lexicographically smallest assignment vector.
std::pair<Mapping, ThroughputReport> exhaustive_best(
    const Workload& workload, const DeviceProfile& profile,
    std::size_t max_stages, std::uint64_t cap = kDefaultExhaustiveCap);

/// Samples, per model, a stage count in [1, max_stages], the cut points and
/// a unit sequence with adjacent units distinct.
Mapping random_mapping(const Workload& workload, const DeviceProfile& profile,
                       std::size_t max_stages, std::uint64_t seed);

class Rng;
/// Single-model variant drawing from an existing stream.
std::vector<UnitId> random_assignment(std::size_t n_layers, std::size_t n_units,
                                      std::size_t max_stages, Rng& rng);

}  // namespace pipeboost
