#pragma once

// Trained throughput estimator: network + target statistics, the L1/Adam
// training loop and the weight file format.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pipeboost/dataset.hpp"
#include "pipeboost/nn.hpp"

namespace pipeboost {

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  std::size_t train_count = 400;  // the remainder of the dataset validates
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;

  /// CSV with header `epoch,train_l1,val_l1`, epochs numbered from 1.
  std::string to_csv() const;
};

class Estimator {
 public:
  explicit Estimator(TensorDims input_dims) : net_(input_dims) {}
  Estimator(EstimatorNet net, TargetStats stats)
      : net_(std::move(net)), stats_(stats), trained_(true) {}

  const EstimatorNet& net() const { return net_; }
  EstimatorNet& net() { return net_; }
  const TargetStats& stats() const { return stats_; }
  bool trained() const { return trained_; }

  void set_trained(const TargetStats& stats) {
    stats_ = stats;
    trained_ = true;
  }

  /// Weights file: "EST1", u32 version, u64 parameter count, the
  /// parameters as f64, then mean/std/min/max (12 x f64). All little-endian.
  void save(const std::filesystem::path& path) const;
  static Estimator load(const std::filesystem::path& path, TensorDims input_dims);

 private:
  EstimatorNet net_;
  TargetStats stats_;
  bool trained_ = false;
};

/// Mini-batch Adam on L1 loss over the preprocessed `samples`
/// (first config.train_count train, the rest validate). Samples must
/// already carry preprocessed targets; `stats` is attached to the result.
TrainHistory train(Estimator& estimator, std::span<const Sample> samples,
                   const TargetStats& stats, const TrainConfig& config);

/// Mean L1 of the net over `samples` against their preprocessed targets.
double evaluate_l1(const EstimatorNet& net, std::span<const Sample> samples);

/// Normalized per-unit throughput for a mapping, clamped to [0, 1].
Prediction predict_throughput(const Estimator& estimator, const Workload& workload,
                              const Mapping& mapping, const DeviceProfile& profile,
                              const EmbeddingTensor& embedding);

}  // namespace pipeboost
