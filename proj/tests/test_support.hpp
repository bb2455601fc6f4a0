#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <filesystem>
#include <string>
#include <vector>

#include "pipeboost/dataset.hpp"
#include "pipeboost/embedding.hpp"
#include "pipeboost/estimator.hpp"
#include "pipeboost/workload.hpp"

namespace pipeboost::testing {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(PIPEBOOST_FIXTURE_DIR) / name;
}

/// Per-layer (gpu, big, little) costs of one model.
using LayerCosts = std::vector<std::array<double, 3>>;

/// Profile with one kernel per layer carrying exactly the given costs.
inline DeviceProfile make_profile(const std::vector<LayerCosts>& models,
                                  double transfer_ms = 0.5) {
  DeviceProfile p;
  p.transfer_ms = transfer_ms;
  p.units = {{0, "gpu", UnitKind::Gpu}, {1, "big", UnitKind::BigCpu},
             {2, "little", UnitKind::LittleCpu}};
  for (std::size_t m = 0; m < models.size(); ++m) {
    DnnModel model;
    model.name = "m" + std::to_string(m);
    for (std::size_t l = 0; l < models[m].size(); ++l) {
      LayerSpec layer;
      layer.name = "l" + std::to_string(l);
      KernelProfile k;
      k.name = "k";
      for (int u = 0; u < 3; ++u) k.time_ms[u] = models[m][l][static_cast<std::size_t>(u)];
      layer.kernels.push_back(k);
      layer.features = {OpKind::Conv, 100 + static_cast<std::int64_t>(l),
                        200 + static_cast<std::int64_t>(m), 1000};
      model.layers.push_back(layer);
    }
    p.models.push_back(model);
  }
  return p;
}

/// Saturating fixture: eleven seed-42 models where the CPU clusters carry
/// enough capacity that spreading a GPU-bound mix can pay off.
inline DeviceProfile saturating_profile() {
  GeneratorConfig cfg;
  cfg.unit_factors = {1.0, 1.5, 3.0};
  return generate_profile(11, 42, cfg);
}

/// The standard pipeline: 500 samples (seed 7), 400/100 split, 100 epochs (seed 42).
inline Estimator train_standard(const DeviceProfile& profile, TrainHistory* history = nullptr) {
  auto samples = generate_dataset(profile, 7);
  const auto stats = preprocess_targets(samples, 400);
  Estimator estimator(build_embedding(profile).dims());
  TrainConfig cfg;
  cfg.seed = 42;
  estimator.net().init(cfg.seed);
  auto h = train(estimator, samples, stats, cfg);
  if (history) *history = std::move(h);
  return estimator;
}

inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j);
    i = j + 1;
  }
  return r;
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace pipeboost::testing
