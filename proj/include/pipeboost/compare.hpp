#pragma once

// Benchmark harness: runs several schedulers over a list of mixes and
// scores every resulting mapping with the simulator.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "pipeboost/baselines.hpp"
#include "pipeboost/estimator.hpp"
#include "pipeboost/mcts.hpp"

namespace pipeboost {

enum class Method { Gpu, RandomBest, Mosaic, Ga, Mcts };

const char* to_string(Method method);
/// Throws InvalidArgument listing the valid names.
Method method_from_string(const std::string& name);
std::string valid_method_names();

struct CompareRow {
  std::size_t mix_id = 0;  // 1-based
  Method method = Method::Gpu;
  double avg_throughput = 0.0;
  double normalized = 0.0;  // relative to gpu_only on the same mix
  double decision_ms = 0.0;
  Mapping mapping;
};

struct CompareReport {
  std::vector<CompareRow> rows;

  /// Header `mix_id,method,avg_throughput,normalized,decision_ms`.
  std::string to_csv() const;
  nlohmann::json to_json() const;
};

struct CompareOptions {
  std::vector<Method> methods{Method::Gpu, Method::Mosaic, Method::Ga, Method::Mcts};
  std::size_t random_n = 200;
  std::size_t stage_limit = 3;
  MctsConfig mcts;
  GaConfig ga;
  bool ga_uses_simulator = false;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  // Needed by ga (unless ga_uses_simulator) and mcts.
  const Estimator* estimator = nullptr;
};

/// Rows ordered by (mix_id, method order in options) regardless of jobs.
CompareReport run_compare(const DeviceProfile& profile, const std::vector<Workload>& mixes,
                          const CompareOptions& options);

/// `count` mixes of `mix_size` distinct models, mix i from stream derive(seed, i).
std::vector<Workload> random_mixes(const DeviceProfile& profile, std::size_t count,
                                   std::size_t mix_size, std::uint64_t seed);

}  // namespace pipeboost
