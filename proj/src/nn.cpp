#include "pipeboost/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pipeboost/error.hpp"
#include "pipeboost/rng.hpp"

namespace pipeboost {

namespace {

constexpr double kGeluScale = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluCubic = 0.044715;

void gelu_map(const FeatureMap& pre, FeatureMap& post) {
  post.reset(pre.channels, pre.height, pre.width);
  for (std::size_t i = 0; i < pre.values.size(); ++i) post.values[i] = gelu(pre.values[i]);
}

// grad (w.r.t. post) -> grad w.r.t. pre, in place.
void gelu_back(const FeatureMap& pre, FeatureMap& grad) {
  for (std::size_t i = 0; i < pre.values.size(); ++i) {
    grad.values[i] *= gelu_derivative(pre.values[i]);
  }
}

bool poolable(const FeatureMap& m) { return m.height >= 2 && m.width >= 2; }

void maxpool(const FeatureMap& in, FeatureMap& out, std::vector<std::uint32_t>& argmax) {
  if (!poolable(in)) {
    out = in;
    argmax.clear();
    return;
  }
  const std::size_t oh = in.height / 2, ow = in.width / 2;
  out.reset(in.channels, oh, ow);
  argmax.assign(out.values.size(), 0);
  for (std::size_t c = 0; c < in.channels; ++c) {
    const double* src = in.values.data() + c * in.plane();
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        std::size_t best = (2 * y) * in.width + 2 * x;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (2 * y + dy) * in.width + 2 * x + dx;
            if (src[idx] > src[best]) best = idx;
          }
        }
        const std::size_t o = c * out.plane() + y * ow + x;
        out.values[o] = src[best];
        argmax[o] = static_cast<std::uint32_t>(c * in.plane() + best);
      }
    }
  }
}

void maxpool_back(const FeatureMap& in, const FeatureMap& grad_out,
                  const std::vector<std::uint32_t>& argmax, FeatureMap& grad_in) {
  if (argmax.empty()) {
    grad_in = grad_out;
    return;
  }
  grad_in.reset(in.channels, in.height, in.width);
  for (std::size_t o = 0; o < grad_out.values.size(); ++o) {
    grad_in.values[argmax[o]] += grad_out.values[o];
  }
}

void add_into(FeatureMap& dst, const FeatureMap& src) {
  for (std::size_t i = 0; i < dst.values.size(); ++i) dst.values[i] += src.values[i];
}

}  // namespace

double gelu(double x) {
  const double u = kGeluScale * (x + kGeluCubic * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_derivative(double x) {
  const double u = kGeluScale * (x + kGeluCubic * x * x * x);
  const double t = std::tanh(u);
  const double du = kGeluScale * (1.0 + 3.0 * kGeluCubic * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

EstimatorNet::EstimatorNet(TensorDims input_dims) : input_dims_(input_dims) {
  if (input_dims.units != 3 || input_dims.rows == 0 || input_dims.cols == 0) {
    throw Error(Errc::DimensionMismatch, "estimator input must be 3 x rows x cols");
  }
  std::size_t offset = 0;
  auto conv = [&](std::size_t in, std::size_t out) {
    Conv c{in, out, offset, offset + out * in * 9};
    offset = c.bias + out;
    return c;
  };
  conv_a_ = conv(3, 8);
  conv_b_ = conv(8, 16);
  r1a_ = conv(16, 16);
  r1b_ = conv(16, 16);
  conv_c_ = conv(16, 24);
  r2a_ = conv(24, 24);
  r2b_ = conv(24, 24);
  linear_weight_ = offset;
  linear_bias_ = offset + kOutputs * 24;
  offset = linear_bias_ + kOutputs;
  if (offset != kParameterCount) {
    throw Error(Errc::InvalidArgument, "estimator parameter layout mismatch");
  }
  params_.assign(offset, 0.0);
}

std::array<std::size_t, 6> EstimatorNet::block_parameter_counts() {
  auto conv = [](std::size_t in, std::size_t out) { return in * out * 9 + out; };
  return {conv(3, 8),
          conv(8, 16),
          2 * conv(16, 16),
          conv(16, 24),
          2 * conv(24, 24),
          24 * kOutputs + kOutputs};
}

void EstimatorNet::init(std::uint64_t seed) {
  Rng rng(seed);
  auto fill = [&](std::size_t begin, std::size_t count, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < count; ++i) params_[begin + i] = rng.uniform(-bound, bound);
  };
  for (const Conv* c : {&conv_a_, &conv_b_, &r1a_, &r1b_, &conv_c_, &r2a_, &r2b_}) {
    fill(c->weight, c->out * c->in * 9, c->in * 9);
    fill(c->bias, c->out, c->in * 9);
  }
  fill(linear_weight_, kOutputs * 24, 24);
  fill(linear_bias_, kOutputs, 24);
}

void EstimatorNet::conv_forward(const Conv& conv, const FeatureMap& in,
                                FeatureMap& out) const {
  const std::size_t h = in.height, w = in.width, plane = in.plane();
  out.reset(conv.out, h, w);
  for (std::size_t oc = 0; oc < conv.out; ++oc) {
    double* dst = out.values.data() + oc * plane;
    std::fill(dst, dst + plane, params_[conv.bias + oc]);
    for (std::size_t ic = 0; ic < conv.in; ++ic) {
      const double* src = in.values.data() + ic * plane;
      const double* kernel = params_.data() + conv.weight + (oc * conv.in + ic) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const std::size_t y0 = dy < 0 ? 1 : 0;
        const std::size_t y1 = dy > 0 ? h - 1 : h;
        for (int kx = 0; kx < 3; ++kx) {
          const int dx = kx - 1;
          const double wgt = kernel[ky * 3 + kx];
          const std::size_t x0 = dx < 0 ? 1 : 0;
          const std::size_t x1 = dx > 0 ? w - 1 : w;
          for (std::size_t y = y0; y < y1; ++y) {
            double* o = dst + y * w;
            const double* s = src + (y + dy) * w;
            for (std::size_t x = x0; x < x1; ++x) o[x] += wgt * s[x + dx];
          }
        }
      }
    }
  }
}

void EstimatorNet::conv_backward(const Conv& conv, const FeatureMap& in,
                                 const FeatureMap& grad_out, FeatureMap* grad_in,
                                 std::span<double> grad) const {
  const std::size_t h = in.height, w = in.width, plane = in.plane();
  if (grad_in) grad_in->reset(conv.in, h, w);
  for (std::size_t oc = 0; oc < conv.out; ++oc) {
    const double* go = grad_out.values.data() + oc * plane;
    double bias_grad = 0.0;
    for (std::size_t i = 0; i < plane; ++i) bias_grad += go[i];
    grad[conv.bias + oc] += bias_grad;
    for (std::size_t ic = 0; ic < conv.in; ++ic) {
      const double* src = in.values.data() + ic * plane;
      double* gi = grad_in ? grad_in->values.data() + ic * plane : nullptr;
      const std::size_t k = conv.weight + (oc * conv.in + ic) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const std::size_t y0 = dy < 0 ? 1 : 0;
        const std::size_t y1 = dy > 0 ? h - 1 : h;
        for (int kx = 0; kx < 3; ++kx) {
          const int dx = kx - 1;
          const double wgt = params_[k + ky * 3 + kx];
          const std::size_t x0 = dx < 0 ? 1 : 0;
          const std::size_t x1 = dx > 0 ? w - 1 : w;
          double acc = 0.0;
          for (std::size_t y = y0; y < y1; ++y) {
            const double* g = go + y * w;
            const double* s = src + (y + dy) * w;
            for (std::size_t x = x0; x < x1; ++x) acc += g[x] * s[x + dx];
            if (gi) {
              double* t = gi + (y + dy) * w;
              for (std::size_t x = x0; x < x1; ++x) t[x + dx] += wgt * g[x];
            }
          }
          grad[k + ky * 3 + kx] += acc;
        }
      }
    }
  }
}

Prediction EstimatorNet::forward(const EmbeddingTensor& input) const {
  Trace trace;
  return forward(input, trace);
}

Prediction EstimatorNet::forward(const EmbeddingTensor& input, Trace& t) const {
  if (!(input.dims() == input_dims_)) {
    throw Error(Errc::DimensionMismatch,
                "estimator input dims " + std::to_string(input.dims().units) + "x" +
                    std::to_string(input.dims().rows) + "x" +
                    std::to_string(input.dims().cols) + " do not match the network's " +
                    std::to_string(input_dims_.units) + "x" +
                    std::to_string(input_dims_.rows) + "x" +
                    std::to_string(input_dims_.cols));
  }
  t.input.channels = input_dims_.units;
  t.input.height = input_dims_.rows;
  t.input.width = input_dims_.cols;
  t.input.values = input.data();

  conv_forward(conv_a_, t.input, t.a1);
  gelu_map(t.a1, t.h1);
  conv_forward(conv_b_, t.h1, t.a2);
  gelu_map(t.a2, t.h2);
  maxpool(t.h2, t.p2, t.pool2_argmax);

  conv_forward(r1a_, t.p2, t.c1);
  gelu_map(t.c1, t.g1);
  conv_forward(r1b_, t.g1, t.c2);
  t.s1 = t.c2;
  add_into(t.s1, t.p2);
  gelu_map(t.s1, t.r1);

  conv_forward(conv_c_, t.r1, t.a3);
  gelu_map(t.a3, t.h3);
  maxpool(t.h3, t.p3, t.pool3_argmax);

  conv_forward(r2a_, t.p3, t.d1);
  gelu_map(t.d1, t.q1);
  conv_forward(r2b_, t.q1, t.d2);
  t.s2 = t.d2;
  add_into(t.s2, t.p3);
  gelu_map(t.s2, t.r2);

  const std::size_t plane = t.r2.plane();
  for (std::size_t c = 0; c < 24; ++c) {
    const double* src = t.r2.values.data() + c * plane;
    double sum = 0.0;
    for (std::size_t i = 0; i < plane; ++i) sum += src[i];
    t.pooled[c] = sum / static_cast<double>(plane);
  }
  for (std::size_t k = 0; k < kOutputs; ++k) {
    double acc = params_[linear_bias_ + k];
    for (std::size_t c = 0; c < 24; ++c) acc += params_[linear_weight_ + k * 24 + c] * t.pooled[c];
    t.output[k] = acc;
  }
  return t.output;
}

void EstimatorNet::backward(Trace& t, const Prediction& grad_output,
                            std::span<double> grad) const {
  if (grad.size() != params_.size()) {
    throw Error(Errc::DimensionMismatch, "gradient buffer has the wrong size");
  }
  std::array<double, 24> grad_pooled{};
  for (std::size_t k = 0; k < kOutputs; ++k) {
    grad[linear_bias_ + k] += grad_output[k];
    for (std::size_t c = 0; c < 24; ++c) {
      grad[linear_weight_ + k * 24 + c] += grad_output[k] * t.pooled[c];
      grad_pooled[c] += grad_output[k] * params_[linear_weight_ + k * 24 + c];
    }
  }

  // Residual block R2.
  FeatureMap g_s2;
  g_s2.reset(t.r2.channels, t.r2.height, t.r2.width);
  const std::size_t plane = t.r2.plane();
  for (std::size_t c = 0; c < 24; ++c) {
    const double v = grad_pooled[c] / static_cast<double>(plane);
    std::fill_n(g_s2.values.begin() + static_cast<std::ptrdiff_t>(c * plane), plane, v);
  }
  gelu_back(t.s2, g_s2);
  FeatureMap g_q1, g_p3;
  conv_backward(r2b_, t.q1, g_s2, &g_q1, grad);
  gelu_back(t.d1, g_q1);
  conv_backward(r2a_, t.p3, g_q1, &g_p3, grad);
  add_into(g_p3, g_s2);

  // Conv C and its pool.
  FeatureMap g_h3, g_r1;
  maxpool_back(t.h3, g_p3, t.pool3_argmax, g_h3);
  gelu_back(t.a3, g_h3);
  conv_backward(conv_c_, t.r1, g_h3, &g_r1, grad);

  // Residual block R1.
  gelu_back(t.s1, g_r1);
  FeatureMap g_g1, g_p2;
  conv_backward(r1b_, t.g1, g_r1, &g_g1, grad);
  gelu_back(t.c1, g_g1);
  conv_backward(r1a_, t.p2, g_g1, &g_p2, grad);
  add_into(g_p2, g_r1);

  // Conv B with pool, conv A. The input gradient is not needed.
  FeatureMap g_h2, g_h1;
  maxpool_back(t.h2, g_p2, t.pool2_argmax, g_h2);
  gelu_back(t.a2, g_h2);
  conv_backward(conv_b_, t.h1, g_h2, &g_h1, grad);
  gelu_back(t.a1, g_h1);
  conv_backward(conv_a_, t.input, g_h1, nullptr, grad);
}

double l1_loss(std::span<const Prediction> predictions, std::span<const Prediction> targets) {
  if (predictions.size() != targets.size() || predictions.empty()) {
    throw Error(Errc::InvalidArgument, "l1_loss: size mismatch or empty batch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    for (std::size_t k = 0; k < 3; ++k) sum += std::abs(predictions[i][k] - targets[i][k]);
  }
  return sum / static_cast<double>(3 * predictions.size());
}

double l1_loss_and_gradient(const EstimatorNet& net,
                            std::span<const EmbeddingTensor* const> inputs,
                            std::span<const Prediction> targets, std::span<double> grad) {
  if (inputs.size() != targets.size() || inputs.empty()) {
    throw Error(Errc::InvalidArgument, "l1_loss_and_gradient: size mismatch or empty batch");
  }
  const double scale = 1.0 / static_cast<double>(3 * inputs.size());
  double sum = 0.0;
  EstimatorNet::Trace trace;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Prediction out = net.forward(*inputs[i], trace);
    Prediction g{};
    for (std::size_t k = 0; k < 3; ++k) {
      const double d = out[k] - targets[i][k];
      sum += std::abs(d);
      g[k] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) * scale;
    }
    net.backward(trace, g, grad);
  }
  return sum * scale;
}

}  // namespace pipeboost
