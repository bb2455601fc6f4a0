#include "pipeboost/workload.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "pipeboost/error.hpp"
#include "pipeboost/rng.hpp"

namespace pipeboost {

namespace {

[[noreturn]] void corrupt(const std::string& msg) {
  throw Error(Errc::ProfileCorrupt, msg);
}

}  // namespace

const char* to_string(UnitKind kind) {
  switch (kind) {
    case UnitKind::Gpu: return "gpu";
    case UnitKind::BigCpu: return "big";
    case UnitKind::LittleCpu: return "little";
  }
  return "?";
}

UnitKind unit_kind_from_string(const std::string& s) {
  if (s == "gpu") return UnitKind::Gpu;
  if (s == "big") return UnitKind::BigCpu;
  if (s == "little") return UnitKind::LittleCpu;
  corrupt("unknown unit kind '" + s + "'");
}

const char* to_string(OpKind kind) {
  switch (kind) {
    case OpKind::Conv: return "conv";
    case OpKind::Depthwise: return "depthwise";
    case OpKind::FullyConnected: return "fc";
    case OpKind::Pool: return "pool";
    case OpKind::Elementwise: return "eltwise";
  }
  return "?";
}

OpKind op_kind_from_string(const std::string& s) {
  if (s == "conv") return OpKind::Conv;
  if (s == "depthwise") return OpKind::Depthwise;
  if (s == "fc") return OpKind::FullyConnected;
  if (s == "pool") return OpKind::Pool;
  if (s == "eltwise") return OpKind::Elementwise;
  corrupt("unknown op kind '" + s + "'");
}

std::size_t DeviceProfile::max_layers() const {
  std::size_t widest = 0;
  for (const auto& m : models) widest = std::max(widest, m.layer_count());
  return widest;
}

std::optional<std::size_t> DeviceProfile::find_model(
    const std::string& name) const {
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (models[i].name == name) return i;
  }
  return std::nullopt;
}

std::optional<UnitId> DeviceProfile::gpu_unit() const {
  for (const auto& u : units) {
    if (u.kind == UnitKind::Gpu) return u.id;
  }
  return std::nullopt;
}

void validate(const DeviceProfile& profile) {
  if (profile.units.empty()) corrupt("profile has no compute units");
  for (std::size_t i = 0; i < profile.units.size(); ++i) {
    if (profile.units[i].id != static_cast<UnitId>(i)) {
      corrupt("unit ids must be contiguous from 0; found id " +
              std::to_string(profile.units[i].id) + " at position " +
              std::to_string(i));
    }
  }
  if (!(profile.transfer_ms >= 0.0) || !std::isfinite(profile.transfer_ms)) {
    corrupt("transfer_ms must be a finite non-negative number");
  }
  if (profile.models.empty()) corrupt("profile has no models");

  std::set<std::string> names;
  for (const auto& model : profile.models) {
    if (!names.insert(model.name).second) {
      corrupt("duplicate model name '" + model.name + "'");
    }
    if (model.layers.empty()) corrupt("model '" + model.name + "' has no layers");
    for (const auto& layer : model.layers) {
      const std::string where = model.name + "/" + layer.name;
      if (layer.kernels.empty()) corrupt("layer " + where + " has no kernels");
      const auto& f = layer.features;
      if (f.in_elems < 1 || f.out_elems < 1 || f.macs < 1) {
        corrupt("layer " + where + " has a feature count < 1");
      }
      for (const auto& kernel : layer.kernels) {
        if (kernel.time_ms.size() != profile.units.size()) {
          corrupt("kernel " + where + "/" + kernel.name +
                  " must have exactly one time per unit");
        }
        for (const auto& unit : profile.units) {
          auto it = kernel.time_ms.find(unit.id);
          if (it == kernel.time_ms.end()) {
            corrupt("kernel " + where + "/" + kernel.name +
                    " has no time for unit " + std::to_string(unit.id));
          }
          if (!(it->second > 0.0) || !std::isfinite(it->second)) {
            corrupt("kernel " + where + "/" + kernel.name +
                    " has a non-positive time");
          }
        }
      }
    }
  }
}

double layer_cost(const LayerSpec& layer, UnitId unit) {
  double total = 0.0;
  for (const auto& kernel : layer.kernels) {
    auto it = kernel.time_ms.find(unit);
    if (it == kernel.time_ms.end()) {
      throw Error(Errc::ProfileCorrupt, "kernel '" + kernel.name + "' of layer '" +
                                            layer.name + "' has no time for unit " +
                                            std::to_string(unit));
    }
    total += it->second;
  }
  return total;
}

CostTable::CostTable(const DeviceProfile& profile)
    : unit_count_(profile.unit_count()) {
  costs_.reserve(profile.models.size());
  for (const auto& model : profile.models) {
    auto& rows = costs_.emplace_back();
    rows.reserve(model.layers.size());
    for (const auto& layer : model.layers) {
      auto& cell = rows.emplace_back(unit_count_);
      for (std::size_t u = 0; u < unit_count_; ++u) {
        cell[u] = layer_cost(layer, static_cast<UnitId>(u));
        max_cost_ = std::max(max_cost_, cell[u]);
      }
    }
  }
}

Workload::Workload(std::vector<std::size_t> model_indices)
    : models_(std::move(model_indices)) {
  std::set<std::size_t> seen(models_.begin(), models_.end());
  if (seen.size() != models_.size()) {
    throw Error(Errc::InvalidArgument, "workload models must be distinct");
  }
}

void validate(const Workload& workload, const DeviceProfile& profile) {
  if (workload.size() > kMaxMixSize) {
    throw Error(Errc::InvalidArgument,
                "workload has " + std::to_string(workload.size()) +
                    " models; at most " + std::to_string(kMaxMixSize) +
                    " are supported");
  }
  for (std::size_t m : workload.models()) {
    if (m >= profile.model_count()) {
      throw Error(Errc::InvalidArgument,
                  "workload model index " + std::to_string(m) + " out of range");
    }
  }
}

Workload workload_from_names(const DeviceProfile& profile,
                             std::span<const std::string> names) {
  std::vector<std::size_t> indices;
  for (const auto& name : names) {
    auto idx = profile.find_model(name);
    if (!idx) throw Error(Errc::InvalidArgument, "unknown model '" + name + "'");
    indices.push_back(*idx);
  }
  Workload w(std::move(indices));
  validate(w, profile);
  return w;
}

std::vector<std::string> model_names(const DeviceProfile& profile,
                                     const Workload& workload) {
  std::vector<std::string> names;
  for (std::size_t m : workload.models()) names.push_back(profile.models.at(m).name);
  return names;
}

DeviceProfile generate_profile(std::size_t num_models, std::uint64_t seed,
                               const GeneratorConfig& config) {
  if (num_models == 0) {
    throw Error(Errc::InvalidArgument, "generate_profile: num_models must be >= 1");
  }
  if (config.min_layers < 1 || config.max_layers < config.min_layers ||
      config.min_kernels < 1 || config.max_kernels < config.min_kernels ||
      !(config.min_base_ms > 0.0) || config.max_base_ms < config.min_base_ms ||
      !(config.jitter_lo > 0.0) || config.jitter_hi < config.jitter_lo) {
    throw Error(Errc::InvalidArgument, "generate_profile: inconsistent config");
  }
  for (double f : config.unit_factors) {
    if (!(f > 0.0)) throw Error(Errc::InvalidArgument, "unit factors must be > 0");
  }

  Rng rng(seed);
  DeviceProfile profile;
  profile.transfer_ms = config.transfer_ms;
  profile.units = {{0, "gpu", UnitKind::Gpu},
                   {1, "big", UnitKind::BigCpu},
                   {2, "little", UnitKind::LittleCpu}};
  constexpr std::array kOps{OpKind::Conv, OpKind::Depthwise, OpKind::FullyConnected,
                            OpKind::Pool, OpKind::Elementwise};

  for (std::size_t m = 0; m < num_models; ++m) {
    DnnModel model;
    std::ostringstream name;
    name << "dnn" << (m < 10 ? "0" : "") << m;
    model.name = name.str();
    const auto n_layers = static_cast<std::size_t>(rng.between(
        static_cast<std::int64_t>(config.min_layers),
        static_cast<std::int64_t>(config.max_layers)));
    for (std::size_t l = 0; l < n_layers; ++l) {
      LayerSpec layer;
      layer.name = "L" + std::to_string(l);
      const double base = rng.uniform(config.min_base_ms, config.max_base_ms);
      std::array<double, 3> jitter{};
      for (auto& j : jitter) j = rng.uniform(config.jitter_lo, config.jitter_hi);

      const auto n_kernels = static_cast<std::size_t>(rng.between(
          static_cast<std::int64_t>(config.min_kernels),
          static_cast<std::int64_t>(config.max_kernels)));
      std::vector<double> weights(n_kernels);
      double weight_sum = 0.0;
      for (auto& w : weights) {
        w = rng.uniform(0.5, 1.5);
        weight_sum += w;
      }
      for (std::size_t k = 0; k < n_kernels; ++k) {
        KernelProfile kernel;
        kernel.name = "k" + std::to_string(k);
        for (std::size_t u = 0; u < 3; ++u) {
          kernel.time_ms[static_cast<UnitId>(u)] =
              base * (weights[k] / weight_sum) * config.unit_factors[u] * jitter[u];
        }
        layer.kernels.push_back(std::move(kernel));
      }

      // Features track the base cost loosely so a linear model over them
      // can recover the unit speed factors but not the per-layer affinity.
      layer.features.op_kind = kOps[rng.below(kOps.size())];
      layer.features.macs = std::max<std::int64_t>(
          1, static_cast<std::int64_t>(std::llround(base * 5.0e7 * rng.uniform(0.8, 1.2))));
      layer.features.in_elems = rng.between(1 << 10, 1 << 20);
      layer.features.out_elems = rng.between(1 << 10, 1 << 20);
      model.layers.push_back(std::move(layer));
    }
    profile.models.push_back(std::move(model));
  }
  validate(profile);
  return profile;
}

}  // namespace pipeboost
