#include "pipeboost/dataset.hpp"

#include <cmath>

#include "pipeboost/error.hpp"
#include "pipeboost/io.hpp"
#include "pipeboost/rng.hpp"

namespace pipeboost {

namespace {

Prediction unit_rates(const ThroughputReport& report) {
  Prediction out{};
  for (std::size_t u = 0; u < 3 && u < report.per_unit_inf_s.size(); ++u) {
    out[u] = report.per_unit_inf_s[u];
  }
  return out;
}

Sample make_sample(const DeviceProfile& profile, const CostTable& costs,
                   const EmbeddingTensor& embedding, Workload workload, Mapping mapping) {
  Sample s;
  s.input = masked_input(embedding, build_mask(workload, mapping, profile));
  s.target_raw = unit_rates(simulate(workload, mapping, profile, costs));
  s.workload = std::move(workload);
  s.mapping = std::move(mapping);
  return s;
}

}  // namespace

std::vector<Sample> generate_dataset(const DeviceProfile& profile, std::uint64_t seed,
                                     const DatasetConfig& config) {
  if (profile.unit_count() != 3) {
    throw Error(Errc::InvalidArgument, "generate_dataset: the estimator needs exactly 3 units");
  }
  if (config.min_mix < 1 || config.max_mix < config.min_mix ||
      config.max_mix > kMaxMixSize) {
    throw Error(Errc::InvalidArgument, "generate_dataset: invalid mix range");
  }
  if (profile.model_count() < config.max_mix) {
    throw Error(Errc::InvalidArgument,
                "generate_dataset: profile has " + std::to_string(profile.model_count()) +
                    " models, mixes need up to " + std::to_string(config.max_mix));
  }
  const CostTable costs(profile);
  const EmbeddingTensor embedding = build_embedding(profile);
  std::vector<Sample> samples;
  samples.reserve(config.count);
  for (std::size_t i = 0; i < config.count; ++i) {
    Rng rng(Rng::derive(seed, i));
    const auto mix = static_cast<std::size_t>(rng.between(
        static_cast<std::int64_t>(config.min_mix), static_cast<std::int64_t>(config.max_mix)));
    std::vector<std::size_t> pool(profile.model_count());
    for (std::size_t m = 0; m < pool.size(); ++m) pool[m] = m;
    rng.shuffle(pool);
    pool.resize(mix);
    Workload workload(pool);
    Mapping mapping;
    for (std::size_t m : workload.models()) {
      mapping.assignments.push_back(random_assignment(
          profile.models[m].layer_count(), profile.unit_count(), profile.unit_count(), rng));
    }
    samples.push_back(make_sample(profile, costs, embedding, std::move(workload),
                                  std::move(mapping)));
  }
  return samples;
}

Prediction TargetStats::transform(const Prediction& raw) const {
  Prediction out{};
  for (std::size_t k = 0; k < 3; ++k) {
    const double z = (raw[k] - mean[k]) / std[k];
    const double range = max[k] - min[k];
    out[k] = range > 0.0 ? (z - min[k]) / range : 0.0;
  }
  return out;
}

Prediction TargetStats::inverse(const Prediction& normalized) const {
  Prediction out{};
  for (std::size_t k = 0; k < 3; ++k) {
    const double z = normalized[k] * (max[k] - min[k]) + min[k];
    out[k] = z * std[k] + mean[k];
  }
  return out;
}

TargetStats preprocess_targets(std::span<Sample> samples, std::size_t train_count) {
  if (train_count < 2 || train_count > samples.size()) {
    throw Error(Errc::InvalidArgument, "preprocess_targets: need at least 2 training samples");
  }
  TargetStats stats;
  const auto n = static_cast<double>(train_count);
  for (std::size_t k = 0; k < 3; ++k) {
    double sum = 0.0;
    for (std::size_t i = 0; i < train_count; ++i) sum += samples[i].target_raw[k];
    stats.mean[k] = sum / n;
    double sq = 0.0;
    for (std::size_t i = 0; i < train_count; ++i) {
      const double d = samples[i].target_raw[k] - stats.mean[k];
      sq += d * d;
    }
    const double sd = std::sqrt(sq / n);
    stats.std[k] = sd > 0.0 ? sd : 1.0;
    for (std::size_t i = 0; i < train_count; ++i) {
      const double z = (samples[i].target_raw[k] - stats.mean[k]) / stats.std[k];
      if (i == 0 || z < stats.min[k]) stats.min[k] = z;
      if (i == 0 || z > stats.max[k]) stats.max[k] = z;
    }
  }
  for (auto& s : samples) s.target = stats.transform(s.target_raw);
  return stats;
}

void save_dataset(const DeviceProfile& profile, std::span<const Sample> samples,
                  const std::filesystem::path& path) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : samples) {
    rows.push_back({{"workload", model_names(profile, s.workload)},
                    {"assignments", s.mapping.assignments},
                    {"target_raw", s.target_raw}});
  }
  write_json({{"samples", rows}}, path);
}

std::vector<Sample> load_dataset(const DeviceProfile& profile,
                                 const std::filesystem::path& path) {
  const auto j = read_json(path);
  if (!j.is_object() || !j.contains("samples") || !j.at("samples").is_array()) {
    throw Error(Errc::Io, "'" + path.string() + "' is not a dataset file");
  }
  const CostTable costs(profile);
  const EmbeddingTensor embedding = build_embedding(profile);
  std::vector<Sample> samples;
  for (const auto& row : j.at("samples")) {
    nlohmann::json mapping_json = {{"workload", row.at("workload")},
                                   {"assignments", row.at("assignments")}};
    auto [workload, mapping] = mapping_from_json(profile, mapping_json);
    samples.push_back(make_sample(profile, costs, embedding, std::move(workload),
                                  std::move(mapping)));
  }
  return samples;
}

}  // namespace pipeboost
