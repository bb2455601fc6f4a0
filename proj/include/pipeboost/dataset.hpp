#pragma once

// Training data for the estimator: random mixes with random mappings,
// labelled by the simulator's per-unit throughput, plus the two-step
// target preprocessing (z-score, then min-max to [0, 1]).

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pipeboost/embedding.hpp"
#include "pipeboost/nn.hpp"
#include "pipeboost/simulator.hpp"

namespace pipeboost {

struct Sample {
  Workload workload;
  Mapping mapping;
  EmbeddingTensor input;  // masked embedding
  Prediction target_raw{};
  Prediction target{};
};

struct DatasetConfig {
  std::size_t count = 500;
  std::size_t min_mix = 1;
  std::size_t max_mix = 5;
};

/// Sample i is drawn from its own stream Rng::derive(seed, i).
std::vector<Sample> generate_dataset(const DeviceProfile& profile, std::uint64_t seed,
                                     const DatasetConfig& config = {});

/// Fitted preprocessing statistics. min/max are extremes of the z-scores.
struct TargetStats {
  Prediction mean{};
  Prediction std{1.0, 1.0, 1.0};
  Prediction min{};
  Prediction max{};

  Prediction transform(const Prediction& raw) const;
  Prediction inverse(const Prediction& normalized) const;

  bool operator==(const TargetStats&) const = default;
};

/// Fits statistics on the first `train_count` samples and rewrites
/// `target` of every sample (validation samples use training statistics).
TargetStats preprocess_targets(std::span<Sample> samples, std::size_t train_count);

/// Dataset file: profile-relative JSON (model names, assignments, raw
/// targets); inputs are rebuilt from the profile on load.
void save_dataset(const DeviceProfile& profile, std::span<const Sample> samples,
                  const std::filesystem::path& path);
std::vector<Sample> load_dataset(const DeviceProfile& profile,
                                 const std::filesystem::path& path);

}  // namespace pipeboost
