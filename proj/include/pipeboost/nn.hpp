#pragma once

// The throughput estimator network: a small residual CNN with GELU
// activations, hand-written forward and backward passes in double
// precision.
//
//   conv A   3 -> 8,  3x3, GELU
//   conv B   8 -> 16, 3x3, GELU, 2x2 max-pool
//   res R1   16 -> 16 (conv, GELU, conv, +skip, GELU)
//   conv C   16 -> 24, 3x3, GELU, 2x2 max-pool
//   res R2   24 -> 24
//   global average pool, linear 24 -> 3 (no output activation)
//
// Pools are skipped when either spatial dim is < 2.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "pipeboost/embedding.hpp"

namespace pipeboost {

double gelu(double x);
double gelu_derivative(double x);

/// C x H x W activation buffer.
struct FeatureMap {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  void reset(std::size_t c, std::size_t h, std::size_t w) {
    channels = c;
    height = h;
    width = w;
    values.assign(c * h * w, 0.0);
  }
  std::size_t plane() const { return height * width; }
};

using Prediction = std::array<double, 3>;

class EstimatorNet {
 public:
  static constexpr std::size_t kOutputs = 3;
  static constexpr std::size_t kParameterCount = 20'003;

  /// Weights are zero until init() or a parameter load.
  explicit EstimatorNet(TensorDims input_dims);

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias.
  void init(std::uint64_t seed);

  const TensorDims& input_dims() const { return input_dims_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  /// Per-block parameter counts: conv A, conv B, R1, conv C, R2, linear.
  static std::array<std::size_t, 6> block_parameter_counts();

  /// Intermediate activations of one forward pass, kept for backward().
  struct Trace {
    FeatureMap input, a1, h1, a2, h2, p2, c1, g1, c2, s1, r1;
    FeatureMap a3, h3, p3, d1, q1, d2, s2, r2;
    std::vector<std::uint32_t> pool2_argmax, pool3_argmax;
    std::array<double, 24> pooled{};
    Prediction output{};
  };

  Prediction forward(const EmbeddingTensor& input) const;
  Prediction forward(const EmbeddingTensor& input, Trace& trace) const;

  /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
  void backward(Trace& trace, const Prediction& grad_output,
                std::span<double> grad) const;

 private:
  struct Conv {
    std::size_t in = 0, out = 0;
    std::size_t weight = 0;  // offset of [out][in][3][3] weights
    std::size_t bias = 0;    // offset of [out] biases
  };

  void conv_forward(const Conv& conv, const FeatureMap& in, FeatureMap& out) const;
  void conv_backward(const Conv& conv, const FeatureMap& in, const FeatureMap& grad_out,
                     FeatureMap* grad_in, std::span<double> grad) const;

  TensorDims input_dims_;
  Conv conv_a_, conv_b_, r1a_, r1b_, conv_c_, r2a_, r2b_;
  std::size_t linear_weight_ = 0, linear_bias_ = 0;
  std::vector<double> params_;
};

/// Mean absolute error over all components.
double l1_loss(std::span<const Prediction> predictions, std::span<const Prediction> targets);

/// Mean L1 loss over a batch and its gradient (accumulated into `grad`,
/// which must be zeroed by the caller).
double l1_loss_and_gradient(const EstimatorNet& net,
                            std::span<const EmbeddingTensor* const> inputs,
                            std::span<const Prediction> targets, std::span<double> grad);

}  // namespace pipeboost
