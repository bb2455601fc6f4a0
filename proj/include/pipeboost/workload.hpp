#pragma once

// Device profiles: compute units, per-kernel timings for every layer of
// every model, and the synthetic generator that stands in for on-board
// benchmarking.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pipeboost {

using UnitId = int;

enum class UnitKind { Gpu, BigCpu, LittleCpu };

const char* to_string(UnitKind kind);
UnitKind unit_kind_from_string(const std::string& s);

struct ComputeUnit {
  UnitId id = 0;
  std::string name;
  UnitKind kind = UnitKind::Gpu;

  bool operator==(const ComputeUnit&) const = default;
};

struct KernelProfile {
  std::string name;
  std::map<UnitId, double> time_ms;

  bool operator==(const KernelProfile&) const = default;
};

enum class OpKind { Conv, Depthwise, FullyConnected, Pool, Elementwise };

const char* to_string(OpKind kind);
OpKind op_kind_from_string(const std::string& s);

struct LayerFeatures {
  OpKind op_kind = OpKind::Conv;
  std::int64_t in_elems = 1;
  std::int64_t out_elems = 1;
  std::int64_t macs = 1;

  bool operator==(const LayerFeatures&) const = default;
};

struct LayerSpec {
  std::string name;
  std::vector<KernelProfile> kernels;
  LayerFeatures features;

  bool operator==(const LayerSpec&) const = default;
};

struct DnnModel {
  std::string name;
  std::vector<LayerSpec> layers;

  std::size_t layer_count() const { return layers.size(); }
  bool operator==(const DnnModel&) const = default;
};

struct DeviceProfile {
  std::vector<ComputeUnit> units;
  std::vector<DnnModel> models;
  double transfer_ms = 0.5;

  std::size_t unit_count() const { return units.size(); }
  std::size_t model_count() const { return models.size(); }
  /// Widest model; the padding width of the embedding tensor.
  std::size_t max_layers() const;
  /// Index of the model with this name, if any.
  std::optional<std::size_t> find_model(const std::string& name) const;
  /// Id of the (first) Gpu unit, if any.
  std::optional<UnitId> gpu_unit() const;

  bool operator==(const DeviceProfile&) const = default;
};

/// Throws Errc::ProfileCorrupt describing the first violated invariant.
void validate(const DeviceProfile& profile);

/// Sum of the layer's kernel times on `unit`.
double layer_cost(const LayerSpec& layer, UnitId unit);

/// Cost table [model][layer][unit], precomputed once per profile.
class CostTable {
 public:
  explicit CostTable(const DeviceProfile& profile);

  double operator()(std::size_t model, std::size_t layer, UnitId unit) const {
    return costs_[model][layer][static_cast<std::size_t>(unit)];
  }
  std::size_t unit_count() const { return unit_count_; }
  double max_cost() const { return max_cost_; }

 private:
  std::size_t unit_count_;
  std::vector<std::vector<std::vector<double>>> costs_;
  double max_cost_ = 0.0;
};

/// An ordered mix of distinct profile models.
class Workload {
 public:
  Workload() = default;
  explicit Workload(std::vector<std::size_t> model_indices);

  const std::vector<std::size_t>& models() const { return models_; }
  std::size_t size() const { return models_.size(); }
  bool empty() const { return models_.empty(); }
  std::size_t operator[](std::size_t i) const { return models_[i]; }

  bool operator==(const Workload&) const = default;

 private:
  std::vector<std::size_t> models_;
};

inline constexpr std::size_t kMaxMixSize = 5;

/// Checks distinctness, range and the 1..5 size bound against a profile.
void validate(const Workload& workload, const DeviceProfile& profile);

/// Builds a workload from model names; throws InvalidArgument on unknown
/// or duplicate names.
Workload workload_from_names(const DeviceProfile& profile,
                             std::span<const std::string> names);

std::vector<std::string> model_names(const DeviceProfile& profile,
                                     const Workload& workload);

struct GeneratorConfig {
  // Cost multipliers for the Gpu, BigCpu and LittleCpu units.
  std::array<double, 3> unit_factors{1.0, 3.0, 8.0};
  std::size_t min_layers = 5;
  std::size_t max_layers = 30;
  double min_base_ms = 0.2;
  double max_base_ms = 4.0;
  // Per-layer, per-unit affinity multiplier range. [1, 1] disables jitter.
  double jitter_lo = 0.7;
  double jitter_hi = 1.3;
  std::size_t min_kernels = 1;
  std::size_t max_kernels = 4;
  double transfer_ms = 0.5;
};

DeviceProfile generate_profile(std::size_t num_models, std::uint64_t seed,
                               const GeneratorConfig& config = {});

}  // namespace pipeboost
