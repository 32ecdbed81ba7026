#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "rtgan/nn/ops.hpp"

namespace rtgan {

using nn::Index;
using nn::Shape;
using nn::Tensor;
using nn::Var;

struct GeneratorConfig {
  int base_width = 64;
  int n_res_blocks = 9;
  int in_channels = 9;  // (x_prev, x_cur, y_prev), three RGB frames
  int out_channels = 3;

  void validate() const;
};

struct FrameDiscriminatorConfig {
  int base_width = 64;
  int n_layers = 3;
  int in_channels = 6;  // input frame concatenated with an output frame

  void validate() const;
};

struct TemporalDiscriminatorConfig {
  int base_width = 64;
  int n_layers = 3;
  int in_channels = 3;
  int temporal_depth = 3;

  void validate() const;
};

struct ModelConfig {
  GeneratorConfig generator;
  FrameDiscriminatorConfig frame_disc;
  TemporalDiscriminatorConfig temporal_disc;
};

template <typename Scalar>
struct Parameter {
  std::string name;
  Var<Scalar> var;
};

template <typename Scalar>
using ParameterList = std::vector<Parameter<Scalar>>;

template <typename Scalar>
Index count_parameters(const ParameterList<Scalar>& params) {
  Index n = 0;
  for (const auto& p : params) n += p.var.value().size();
  return n;
}

template <typename Scalar>
void set_requires_grad(ParameterList<Scalar>& params, bool on) {
  for (auto& p : params) p.var.set_requires_grad(on);
}

template <typename Scalar>
void zero_grad(ParameterList<Scalar>& params) {
  for (auto& p : params) p.var.zero_grad();
}

// FNV-1a over the raw parameter bytes, in registration order.
template <typename Scalar>
std::uint64_t parameter_checksum(const ParameterList<Scalar>& params) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : params) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p.var.value().ptr());
    const std::size_t n = static_cast<std::size_t>(p.var.value().size()) * sizeof(Scalar);
    for (std::size_t i = 0; i < n; ++i) h = (h ^ bytes[i]) * 1099511628211ULL;
  }
  return h;
}

namespace detail {

// Weights ~ N(0, 0.02), biases zero. Draws in double so every Scalar sees the same values.
template <typename Scalar>
class LayerFactory {
 public:
  LayerFactory(ParameterList<Scalar>& params, std::uint64_t seed) : params_(params), rng_(seed) {}

  std::pair<Var<Scalar>, Var<Scalar>> conv(const std::string& name, Shape weight_shape, Index bias_size) {
    std::normal_distribution<double> normal(0.0, 0.02);
    Tensor<Scalar> w(std::move(weight_shape));
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<Scalar>(normal(rng_));
    Var<Scalar> wv(std::move(w), true);
    Var<Scalar> bv(Tensor<Scalar>::zeros({bias_size}), true);
    params_.push_back({name + ".weight", wv});
    params_.push_back({name + ".bias", bv});
    return {wv, bv};
  }

 private:
  ParameterList<Scalar>& params_;
  std::mt19937_64 rng_;
};

template <typename Scalar>
struct ConvLayer {
  Var<Scalar> weight, bias;
};

}  // namespace detail

// ResNet encoder/decoder: 7x7 stem, two stride-2 downsamples, residual blocks, two stride-2
// transposed upsamples, 7x7 head with tanh. Instance norm and reflection padding throughout.
template <typename Scalar>
class Generator {
 public:
  explicit Generator(GeneratorConfig cfg = {}, std::uint64_t seed = 0) : cfg_(cfg) {
    cfg_.validate();
    detail::LayerFactory<Scalar> make(params_, seed);
    const Index w = cfg_.base_width;
    auto assign = [](detail::ConvLayer<Scalar>& layer, auto wb) { std::tie(layer.weight, layer.bias) = wb; };
    assign(stem_, make.conv("g.stem", {w, cfg_.in_channels, 7, 7}, w));
    assign(down_[0], make.conv("g.down1", {2 * w, w, 3, 3}, 2 * w));
    assign(down_[1], make.conv("g.down2", {4 * w, 2 * w, 3, 3}, 4 * w));
    blocks_.resize(cfg_.n_res_blocks);
    for (int i = 0; i < cfg_.n_res_blocks; ++i) {
      const std::string name = "g.res" + std::to_string(i);
      assign(blocks_[i][0], make.conv(name + ".conv1", {4 * w, 4 * w, 3, 3}, 4 * w));
      assign(blocks_[i][1], make.conv(name + ".conv2", {4 * w, 4 * w, 3, 3}, 4 * w));
    }
    // Transposed-conv weights are (Cin, Cout, k, k).
    assign(up_[0], make.conv("g.up1", {4 * w, 2 * w, 3, 3}, 2 * w));
    assign(up_[1], make.conv("g.up2", {2 * w, w, 3, 3}, w));
    assign(head_, make.conv("g.head", {cfg_.out_channels, w, 7, 7}, cfg_.out_channels));
  }

  const GeneratorConfig& config() const { return cfg_; }
  ParameterList<Scalar>& parameters() { return params_; }
  const ParameterList<Scalar>& parameters() const { return params_; }

  // x: (B, in_channels, H, W) with H, W divisible by 4 -> (B, out_channels, H, W) in [-1, 1].
  Var<Scalar> forward(const Var<Scalar>& x) const {
    using namespace nn;
    if (x.value().rank() != 4 || x.dim(1) != cfg_.in_channels || x.dim(2) % 4 != 0 || x.dim(3) % 4 != 0) {
      throw ContractError("generator input must be (B," + std::to_string(cfg_.in_channels) +
                          ",H,W) with H,W divisible by 4, got " + shape_string(x.shape()));
    }
    auto h = relu(instance_norm(conv2d(reflection_pad2d(x, 3), stem_.weight, stem_.bias)));
    for (const auto& d : down_) h = relu(instance_norm(conv2d(h, d.weight, d.bias, {2, 1})));
    for (const auto& blk : blocks_) {
      auto r = relu(instance_norm(conv2d(reflection_pad2d(h, 1), blk[0].weight, blk[0].bias)));
      r = instance_norm(conv2d(reflection_pad2d(r, 1), blk[1].weight, blk[1].bias));
      h = add(h, r);
    }
    for (const auto& u : up_) h = relu(instance_norm(conv_transpose2d(h, u.weight, u.bias, {2, 1, 1})));
    return nn::tanh(conv2d(reflection_pad2d(h, 3), head_.weight, head_.bias));
  }

  // Channel order is fixed: previous input, current input, previous output.
  Var<Scalar> operator()(const Var<Scalar>& x_prev, const Var<Scalar>& x_cur, const Var<Scalar>& y_prev) const {
    if (x_prev.shape() != x_cur.shape() || y_prev.shape() != x_cur.shape()) {
      throw ContractError("generator frames differ in shape: " + nn::shape_string(x_prev.shape()) + ", " +
                          nn::shape_string(x_cur.shape()) + ", " + nn::shape_string(y_prev.shape()));
    }
    return forward(nn::concat_channels<Scalar>({x_prev, x_cur, y_prev}));
  }

 private:
  GeneratorConfig cfg_;
  ParameterList<Scalar> params_;
  detail::ConvLayer<Scalar> stem_, head_;
  std::array<detail::ConvLayer<Scalar>, 2> down_, up_;
  std::vector<std::array<detail::ConvLayer<Scalar>, 2>> blocks_;
};

// Widths for an n-layer PatchGAN: w, 2w, 4w, ... capped at 8w, then 1 logit channel.
inline std::vector<Index> patchgan_widths(int base_width, int n_layers) {
  std::vector<Index> widths{base_width};
  for (int n = 1; n <= n_layers; ++n) widths.push_back(static_cast<Index>(base_width) * std::min(1 << n, 8));
  widths.push_back(1);
  return widths;
}

// 2D PatchGAN over (input, output) pairs: (B,6,H,W) -> (B,1,h,w) raw logits.
template <typename Scalar>
class FrameDiscriminator {
 public:
  explicit FrameDiscriminator(FrameDiscriminatorConfig cfg = {}, std::uint64_t seed = 0) : cfg_(cfg) {
    cfg_.validate();
    detail::LayerFactory<Scalar> make(params_, seed);
    const auto widths = patchgan_widths(cfg_.base_width, cfg_.n_layers);
    Index in = cfg_.in_channels;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      detail::ConvLayer<Scalar> layer;
      std::tie(layer.weight, layer.bias) = make.conv("df.conv" + std::to_string(i), {widths[i], in, 4, 4}, widths[i]);
      layers_.push_back(layer);
      in = widths[i];
    }
  }

  const FrameDiscriminatorConfig& config() const { return cfg_; }
  ParameterList<Scalar>& parameters() { return params_; }
  const ParameterList<Scalar>& parameters() const { return params_; }

  Var<Scalar> forward(const Var<Scalar>& pair) const {
    using namespace nn;
    if (pair.value().rank() != 4 || pair.dim(1) != cfg_.in_channels) {
      throw ContractError("frame discriminator expects (B," + std::to_string(cfg_.in_channels) + ",H,W), got " +
                          shape_string(pair.shape()));
    }
    const std::size_t last = layers_.size() - 1;
    Var<Scalar> h = pair;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const Index stride = i < static_cast<std::size_t>(cfg_.n_layers) ? 2 : 1;
      h = conv2d(h, layers_[i].weight, layers_[i].bias, {stride, 1});
      if (i == last) break;
      if (i > 0) h = instance_norm(h);
      h = leaky_relu(h, Scalar(0.2));
    }
    return h;
  }

  Var<Scalar> operator()(const Var<Scalar>& input, const Var<Scalar>& output) const {
    return forward(nn::concat_channels<Scalar>({input, output}));
  }

 private:
  FrameDiscriminatorConfig cfg_;
  ParameterList<Scalar> params_;
  std::vector<detail::ConvLayer<Scalar>> layers_;
};

// 3D PatchGAN over three stacked frames: (B,3,3,H,W) -> (B,1,3,h,w) raw logits. Kernels are
// 4x4x4 with depth stride 1 and depth padding (1 front, 2 back), so depth stays 3 at every layer.
template <typename Scalar>
class TemporalDiscriminator {
 public:
  explicit TemporalDiscriminator(TemporalDiscriminatorConfig cfg = {}, std::uint64_t seed = 0) : cfg_(cfg) {
    cfg_.validate();
    detail::LayerFactory<Scalar> make(params_, seed);
    const auto widths = patchgan_widths(cfg_.base_width, cfg_.n_layers);
    Index in = cfg_.in_channels;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      detail::ConvLayer<Scalar> layer;
      std::tie(layer.weight, layer.bias) =
          make.conv("dt.conv" + std::to_string(i), {widths[i], in, 4, 4, 4}, widths[i]);
      layers_.push_back(layer);
      in = widths[i];
    }
  }

  const TemporalDiscriminatorConfig& config() const { return cfg_; }
  ParameterList<Scalar>& parameters() { return params_; }
  const ParameterList<Scalar>& parameters() const { return params_; }

  Var<Scalar> forward(const Var<Scalar>& stack) const {
    using namespace nn;
    if (stack.value().rank() != 5 || stack.dim(1) != cfg_.in_channels || stack.dim(2) != cfg_.temporal_depth) {
      throw ContractError("temporal discriminator expects (B," + std::to_string(cfg_.in_channels) + "," +
                          std::to_string(cfg_.temporal_depth) + ",H,W), got " + shape_string(stack.shape()));
    }
    const std::size_t last = layers_.size() - 1;
    Var<Scalar> h = stack;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      Conv3dOptions opt;
      opt.stride = i < static_cast<std::size_t>(cfg_.n_layers) ? 2 : 1;
      opt.pad_front = 1;
      opt.pad_back = 2;
      opt.padding = 1;
      h = conv3d(h, layers_[i].weight, layers_[i].bias, opt);
      if (i == last) break;
      if (i > 0) h = instance_norm(h);
      h = leaky_relu(h, Scalar(0.2));
    }
    return h;
  }

  // Frames in temporal order, each (B,3,H,W).
  Var<Scalar> operator()(const Var<Scalar>& f0, const Var<Scalar>& f1, const Var<Scalar>& f2) const {
    return forward(nn::stack_depth<Scalar>({f0, f1, f2}));
  }

 private:
  TemporalDiscriminatorConfig cfg_;
  ParameterList<Scalar> params_;
  std::vector<detail::ConvLayer<Scalar>> layers_;
};

template <typename Scalar>
struct ModelBundle {
  explicit ModelBundle(const ModelConfig& cfg = {}, std::uint64_t seed = 0)
      : config(cfg),
        generator(cfg.generator, seed * 3 + 1),
        frame_disc(cfg.frame_disc, seed * 3 + 2),
        temporal_disc(cfg.temporal_disc, seed * 3 + 3) {}

  ModelConfig config;
  Generator<Scalar> generator;
  FrameDiscriminator<Scalar> frame_disc;
  TemporalDiscriminator<Scalar> temporal_disc;

  Index total_params() const {
    return count_parameters(generator.parameters()) + count_parameters(frame_disc.parameters()) +
           count_parameters(temporal_disc.parameters());
  }
};

struct ParameterCount {
  std::string name;
  Index count = 0;
};

// Per-network counts followed by a "total" row.
template <typename Scalar>
std::vector<ParameterCount> parameter_table(const ModelBundle<Scalar>& bundle) {
  std::vector<ParameterCount> rows{
      {"generator", count_parameters(bundle.generator.parameters())},
      {"temporal_discriminator", count_parameters(bundle.temporal_disc.parameters())},
      {"frame_discriminator", count_parameters(bundle.frame_disc.parameters())},
  };
  rows.push_back({"total", bundle.total_params()});
  return rows;
}

}  // namespace rtgan
