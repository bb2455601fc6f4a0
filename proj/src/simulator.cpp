#include "pipeboost/simulator.hpp"

#include <algorithm>
#include <limits>

#include "pipeboost/error.hpp"
#include "pipeboost/rng.hpp"

namespace pipeboost {

__extension__ using uint128 = unsigned __int128;

std::size_t stage_count(std::span<const UnitId> assignment) {
  if (assignment.empty()) return 0;
  std::size_t runs = 1;
  for (std::size_t i = 1; i < assignment.size(); ++i) {
    if (assignment[i] != assignment[i - 1]) ++runs;
  }
  return runs;
}

void validate(const Mapping& mapping, const Workload& workload,
              const DeviceProfile& profile) {
  if (mapping.assignments.size() != workload.size()) {
    throw Error(Errc::InvalidMapping,
                "mapping has " + std::to_string(mapping.assignments.size()) +
                    " assignment rows for a workload of " +
                    std::to_string(workload.size()) + " models");
  }
  const auto n_units = static_cast<UnitId>(profile.unit_count());
  for (std::size_t i = 0; i < workload.size(); ++i) {
    const auto& model = profile.models.at(workload[i]);
    const auto& row = mapping.assignments[i];
    if (row.size() != model.layer_count()) {
      throw Error(Errc::InvalidMapping,
                  "assignment for '" + model.name + "' has " +
                      std::to_string(row.size()) + " entries, model has " +
                      std::to_string(model.layer_count()) + " layers");
    }
    for (UnitId u : row) {
      if (u < 0 || u >= n_units) {
        throw Error(Errc::InvalidMapping, "assignment for '" + model.name +
                                              "' uses unknown unit " +
                                              std::to_string(u));
      }
    }
  }
}

bool within_stage_limit(const Mapping& mapping, std::size_t stage_limit) {
  return std::all_of(mapping.assignments.begin(), mapping.assignments.end(),
                     [&](const auto& row) { return stage_count(row) <= stage_limit; });
}

namespace {

std::vector<std::vector<Stage>> build_stages(const Mapping& mapping,
                                             const Workload& workload,
                                             const CostTable& costs) {
  std::vector<std::vector<Stage>> out(workload.size());
  for (std::size_t i = 0; i < workload.size(); ++i) {
    const auto& row = mapping.assignments[i];
    auto& stages = out[i];
    for (std::size_t l = 0; l < row.size(); ++l) {
      if (stages.empty() || stages.back().unit != row[l]) {
        stages.push_back(Stage{i, row[l], l, l, 0.0});
      }
      stages.back().last_layer = l;
      stages.back().cost_ms += costs(workload[i], l, row[l]);
    }
  }
  return out;
}

}  // namespace

std::vector<std::vector<Stage>> stages_of(const Mapping& mapping,
                                          const DeviceProfile& profile,
                                          const Workload& workload) {
  validate(mapping, workload, profile);
  return build_stages(mapping, workload, CostTable(profile));
}

ThroughputReport simulate(const Workload& workload, const Mapping& mapping,
                          const DeviceProfile& profile) {
  return simulate(workload, mapping, profile, CostTable(profile));
}

ThroughputReport simulate(const Workload& workload, const Mapping& mapping,
                          const DeviceProfile& profile, const CostTable& costs) {
  if (workload.empty()) {
    throw Error(Errc::InvalidArgument, "simulate: empty workload");
  }
  validate(mapping, workload, profile);
  const auto stages = build_stages(mapping, workload, costs);
  const std::size_t n_units = profile.unit_count();
  const std::size_t n_models = workload.size();

  std::vector<double> rate(n_models);
  std::vector<double> raw_load(n_units, 0.0);
  std::vector<std::vector<bool>> touches(n_models, std::vector<bool>(n_units, false));
  for (std::size_t m = 0; m < n_models; ++m) {
    // Effective stage time carries the transfer penalty on every
    // non-first stage.
    std::vector<double> effective(stages[m].size());
    double bottleneck = 0.0;
    for (std::size_t s = 0; s < stages[m].size(); ++s) {
      effective[s] = stages[m][s].cost_ms + (s > 0 ? profile.transfer_ms : 0.0);
      bottleneck = std::max(bottleneck, effective[s]);
    }
    rate[m] = 1000.0 / bottleneck;
    for (std::size_t s = 0; s < stages[m].size(); ++s) {
      const auto u = static_cast<std::size_t>(stages[m][s].unit);
      raw_load[u] += rate[m] * effective[s] / 1000.0;
      touches[m][u] = true;
    }
  }

  const double peak = *std::max_element(raw_load.begin(), raw_load.end());
  ThroughputReport report;
  report.theta = peak > 1.0 ? 1.0 / peak : 1.0;
  report.per_dnn_inf_s.resize(n_models);
  report.per_unit_inf_s.assign(n_units, 0.0);
  report.unit_utilization.resize(n_units);
  double sum = 0.0;
  for (std::size_t m = 0; m < n_models; ++m) {
    const double x = report.theta * rate[m];
    report.per_dnn_inf_s[m] = x;
    sum += x;
    for (std::size_t u = 0; u < n_units; ++u) {
      if (touches[m][u]) report.per_unit_inf_s[u] += x;
    }
  }
  for (std::size_t u = 0; u < n_units; ++u) {
    report.unit_utilization[u] = report.theta * raw_load[u];
  }
  report.avg_throughput = sum / static_cast<double>(n_models);
  return report;
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  uint128 result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    // result holds C(n-k+i-1, i-1); the division below is exact.
    result = result * (n - k + i) / i;
    if (result > std::numeric_limits<std::uint64_t>::max()) {
      throw Error(Errc::Overflow, "binomial(" + std::to_string(n) + ", " +
                                      std::to_string(k) + ") exceeds 64 bits");
    }
  }
  return static_cast<std::uint64_t>(result);
}

std::uint64_t count_assignments(std::uint64_t n_layers, std::uint64_t n_units,
                                std::uint64_t max_stages) {
  if (n_layers < 1 || n_units < 1 || max_stages < 1) {
    throw Error(Errc::InvalidArgument, "count_assignments: arguments must be >= 1");
  }
  const auto overflow = [] {
    return Error(Errc::Overflow, "count_assignments exceeds 64 bits");
  };
  std::uint64_t total = 0;
  std::uint64_t unit_choices = n_units;  // u * (u-1)^(s-1)
  const std::uint64_t top = std::min(max_stages, n_layers);
  for (std::uint64_t s = 1; s <= top; ++s) {
    if (s > 1 && __builtin_mul_overflow(unit_choices, n_units - 1, &unit_choices)) {
      throw overflow();
    }
    std::uint64_t term = 0;
    if (__builtin_mul_overflow(binomial(n_layers - 1, s - 1), unit_choices, &term) ||
        __builtin_add_overflow(total, term, &total)) {
      throw overflow();
    }
  }
  return total;
}

namespace {

void enumerate_into(std::vector<UnitId>& prefix, std::size_t stages,
                    std::size_t n_layers, std::size_t n_units,
                    std::size_t max_stages,
                    std::vector<std::vector<UnitId>>& out) {
  if (prefix.size() == n_layers) {
    out.push_back(prefix);
    return;
  }
  for (std::size_t u = 0; u < n_units; ++u) {
    const auto unit = static_cast<UnitId>(u);
    const std::size_t next =
        prefix.empty() ? 1 : stages + (prefix.back() != unit ? 1 : 0);
    if (next > max_stages) continue;
    prefix.push_back(unit);
    enumerate_into(prefix, next, n_layers, n_units, max_stages, out);
    prefix.pop_back();
  }
}

}  // namespace

std::vector<std::vector<UnitId>> enumerate_assignments(std::size_t n_layers,
                                                       std::size_t n_units,
                                                       std::size_t max_stages) {
  std::vector<std::vector<UnitId>> out;
  std::vector<UnitId> prefix;
  prefix.reserve(n_layers);
  enumerate_into(prefix, 0, n_layers, n_units, max_stages, out);
  return out;
}

std::pair<Mapping, ThroughputReport> exhaustive_best(const Workload& workload,
                                                     const DeviceProfile& profile,
                                                     std::size_t max_stages,
                                                     std::uint64_t cap) {
  if (workload.empty()) {
    throw Error(Errc::InvalidArgument, "exhaustive_best: empty workload");
  }
  if (max_stages < 1) {
    throw Error(Errc::InvalidArgument, "exhaustive_best: max_stages must be >= 1");
  }
  validate(workload, profile);

  std::uint64_t total = 1;
  for (std::size_t m : workload.models()) {
    const std::uint64_t per_model = count_assignments(
        profile.models[m].layer_count(), profile.unit_count(), max_stages);
    if (__builtin_mul_overflow(total, per_model, &total) || total > cap) {
      throw Error(Errc::TooLarge, "exhaustive_best: enumeration exceeds cap of " +
                                      std::to_string(cap) + " mappings");
    }
  }

  std::vector<std::vector<std::vector<UnitId>>> choices;
  for (std::size_t m : workload.models()) {
    choices.push_back(enumerate_assignments(profile.models[m].layer_count(),
                                            profile.unit_count(), max_stages));
  }

  const CostTable costs(profile);
  std::vector<std::size_t> odometer(workload.size(), 0);
  Mapping candidate;
  candidate.assignments.resize(workload.size());
  Mapping best;
  ThroughputReport best_report;
  bool have_best = false;
  while (true) {
    for (std::size_t i = 0; i < workload.size(); ++i) {
      candidate.assignments[i] = choices[i][odometer[i]];
    }
    auto report = simulate(workload, candidate, profile, costs);
    // Enumeration runs in lexicographic order, so strict improvement keeps
    // the smallest assignment among ties.
    if (!have_best || report.avg_throughput > best_report.avg_throughput) {
      best = candidate;
      best_report = std::move(report);
      have_best = true;
    }
    std::size_t pos = workload.size();
    while (pos > 0) {
      --pos;
      if (++odometer[pos] < choices[pos].size()) break;
      odometer[pos] = 0;
      if (pos == 0) return {best, best_report};
    }
  }
}

std::vector<UnitId> random_assignment(std::size_t n_layers, std::size_t n_units,
                                      std::size_t max_stages, Rng& rng) {
  if (n_layers < 1 || n_units < 1 || max_stages < 1) {
    throw Error(Errc::InvalidArgument, "random_assignment: arguments must be >= 1");
  }
  std::size_t top = std::min(max_stages, n_layers);
  if (n_units == 1) top = 1;
  const auto stages = static_cast<std::size_t>(rng.between(1, static_cast<std::int64_t>(top)));

  // Choose stages-1 distinct cut positions out of 1..n_layers-1.
  std::vector<std::size_t> positions(n_layers - 1);
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i + 1;
  for (std::size_t i = 0; i + 1 < stages; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(positions.size() - i));
    std::swap(positions[i], positions[j]);
  }
  std::vector<std::size_t> cuts(positions.begin(),
                                positions.begin() + static_cast<std::ptrdiff_t>(stages - 1));
  std::sort(cuts.begin(), cuts.end());

  std::vector<UnitId> units(stages);
  units[0] = static_cast<UnitId>(rng.below(n_units));
  for (std::size_t s = 1; s < stages; ++s) {
    auto pick = static_cast<UnitId>(rng.below(n_units - 1));
    if (pick >= units[s - 1]) ++pick;
    units[s] = pick;
  }

  std::vector<UnitId> out(n_layers);
  std::size_t stage = 0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    if (stage + 1 < stages && l == cuts[stage]) ++stage;
    out[l] = units[stage];
  }
  return out;
}

Mapping random_mapping(const Workload& workload, const DeviceProfile& profile,
                       std::size_t max_stages, std::uint64_t seed) {
  if (max_stages < 1) {
    throw Error(Errc::InvalidArgument, "random_mapping: max_stages must be >= 1");
  }
  validate(workload, profile);
  Rng rng(seed);
  Mapping mapping;
  for (std::size_t m : workload.models()) {
    mapping.assignments.push_back(random_assignment(
        profile.models[m].layer_count(), profile.unit_count(), max_stages, rng));
  }
  return mapping;
}

}  // namespace pipeboost
