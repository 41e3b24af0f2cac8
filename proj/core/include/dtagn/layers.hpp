#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "dtagn/error.hpp"
#include "dtagn/netspec.hpp"
#include "dtagn/rng.hpp"
#include "dtagn/tensor.hpp"

namespace dtagn {

enum class LayerKind {
  TemporalConv,
  FullyConnected,
  ReLU,
  MaxPool,
  LocalContrastNorm,
  Dropout,
  Softmax,
};

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::TemporalConv: return "TemporalConv";
    case LayerKind::FullyConnected: return "FullyConnected";
    case LayerKind::ReLU: return "ReLU";
    case LayerKind::MaxPool: return "MaxPool";
    case LayerKind::LocalContrastNorm: return "LocalContrastNorm";
    case LayerKind::Dropout: return "Dropout";
    case LayerKind::Softmax: return "Softmax";
  }
  return "?";
}

template <class T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  virtual std::string describe() const = 0;

  // Caches whatever backward() needs. `rng` is only consumed by dropout in
  // training mode.
  virtual Tensor<T> forward(const Tensor<T>& input, bool training, Rng* rng) = 0;
  // Returns the input gradient and fills parameter gradients, if any.
  virtual Tensor<T> backward(const Tensor<T>& upstream) = 0;

  virtual std::vector<Tensor<T>*> parameters() { return {}; }
  virtual std::vector<Tensor<T>*> gradients() { return {}; }
};

// Convolution over a short stack of frames (or feature maps) without weight
// sharing along the stack axis: each input slice t has its own filter slice,
// and the per-slice responses are summed into one map per filter.
//
//   out[f,x,y] = sigma( sum_t sum_r sum_s in[t, x+r-pad, y+s-pad] * w[f,t,r,s] + b[f] )
//
// sigma is ReLU when the layer is built with fused_relu, identity otherwise.
template <class T>
class TemporalConvLayer final : public Layer<T> {
 public:
  TemporalConvLayer(std::size_t filters, std::size_t in_channels, std::size_t kernel,
                    bool fused_relu, ConvPadding padding)
      : weights_({filters, in_channels, kernel, kernel}),
        bias_({filters}),
        weight_grad_({filters, in_channels, kernel, kernel}),
        bias_grad_({filters}),
        fused_relu_(fused_relu),
        padding_(padding) {}

  LayerKind kind() const override { return LayerKind::TemporalConv; }

  std::string describe() const override {
    return "TemporalConv(filters=" + std::to_string(weights_.extent(0)) +
           ", frames=" + std::to_string(weights_.extent(1)) +
           ", kernel=" + std::to_string(weights_.extent(2)) +
           (fused_relu_ ? ", relu" : "") + ")";
  }

  Tensor<T>& weights() { return weights_; }
  const Tensor<T>& weights() const { return weights_; }
  Tensor<T>& bias() { return bias_; }
  const Tensor<T>& bias() const { return bias_; }
  bool fused_relu() const { return fused_relu_; }

  std::vector<Tensor<T>*> parameters() override { return {&weights_, &bias_}; }
  std::vector<Tensor<T>*> gradients() override { return {&weight_grad_, &bias_grad_}; }

  Tensor<T> forward(const Tensor<T>& input, bool, Rng*) override {
    const std::size_t filters = weights_.extent(0);
    const std::size_t channels = weights_.extent(1);
    const std::size_t kernel = weights_.extent(2);
    if (input.rank() != 3) {
      throw ValidationError("temporal conv expects a frames x H x W input, got " +
                            shape_string(input.shape()));
    }
    if (input.extent(0) != channels) {
      throw ValidationError("temporal conv configured for " + std::to_string(channels) +
                            " input frames, got " + std::to_string(input.extent(0)));
    }
    const std::size_t in_h = input.extent(1);
    const std::size_t in_w = input.extent(2);
    const std::size_t pad = padding_ == ConvPadding::Same ? (kernel - 1) / 2 : 0;
    std::size_t out_h, out_w;
    if (padding_ == ConvPadding::Same) {
      out_h = in_h;
      out_w = in_w;
    } else {
      if (in_h < kernel || in_w < kernel) {
        throw ValidationError("conv kernel " + std::to_string(kernel) +
                              " larger than input " + shape_string(input.shape()));
      }
      out_h = in_h - kernel + 1;
      out_w = in_w - kernel + 1;
    }

    input_ = input;
    pre_act_ = Tensor<T>({filters, out_h, out_w});
    has_cache_ = true;

    for (std::size_t f = 0; f < filters; ++f) {
      const T b = bias_[f];
      for (std::size_t oy = 0; oy < out_h; ++oy) {
        for (std::size_t ox = 0; ox < out_w; ++ox) {
          T acc = b;
          for (std::size_t c = 0; c < channels; ++c) {
            for (std::size_t r = 0; r < kernel; ++r) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + r) -
                                        static_cast<std::ptrdiff_t>(pad);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in_h)) continue;
              for (std::size_t s = 0; s < kernel; ++s) {
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + s) -
                                          static_cast<std::ptrdiff_t>(pad);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in_w)) continue;
                acc += input.at3(c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) *
                       weights_.at4(f, c, r, s);
              }
            }
          }
          pre_act_.at3(f, oy, ox) = acc;
        }
      }
    }

    if (!fused_relu_) return pre_act_;
    Tensor<T> out(pre_act_.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(T{}, pre_act_[i]);
    return out;
  }

  Tensor<T> backward(const Tensor<T>& upstream) override {
    if (!has_cache_) {
      throw ValidationError("temporal conv backward called without a cached forward pass");
    }
    if (!upstream.same_shape(pre_act_)) {
      throw ValidationError("temporal conv upstream gradient shape " +
                            shape_string(upstream.shape()) + " does not match output " +
                            shape_string(pre_act_.shape()));
    }
    const std::size_t filters = weights_.extent(0);
    const std::size_t channels = weights_.extent(1);
    const std::size_t kernel = weights_.extent(2);
    const std::size_t in_h = input_.extent(1);
    const std::size_t in_w = input_.extent(2);
    const std::size_t out_h = pre_act_.extent(1);
    const std::size_t out_w = pre_act_.extent(2);
    const std::size_t pad = padding_ == ConvPadding::Same ? (kernel - 1) / 2 : 0;

    Tensor<T> g = upstream;
    if (fused_relu_) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (pre_act_[i] <= T{}) g[i] = T{};
      }
    }

    weight_grad_.fill(T{});
    bias_grad_.fill(T{});
    Tensor<T> input_grad(input_.shape());

    for (std::size_t f = 0; f < filters; ++f) {
      T bacc = T{};
      for (std::size_t oy = 0; oy < out_h; ++oy) {
        for (std::size_t ox = 0; ox < out_w; ++ox) {
          const T gv = g.at3(f, oy, ox);
          if (gv == T{}) continue;
          bacc += gv;
          for (std::size_t c = 0; c < channels; ++c) {
            for (std::size_t r = 0; r < kernel; ++r) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + r) -
                                        static_cast<std::ptrdiff_t>(pad);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in_h)) continue;
              for (std::size_t s = 0; s < kernel; ++s) {
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + s) -
                                          static_cast<std::ptrdiff_t>(pad);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in_w)) continue;
                const std::size_t uy = static_cast<std::size_t>(iy);
                const std::size_t ux = static_cast<std::size_t>(ix);
                weight_grad_.at4(f, c, r, s) += gv * input_.at3(c, uy, ux);
                input_grad.at3(c, uy, ux) += gv * weights_.at4(f, c, r, s);
              }
            }
          }
        }
      }
      bias_grad_[f] = bacc;
    }
    return input_grad;
  }

 private:
  Tensor<T> weights_;  // filters x frames x kernel x kernel
  Tensor<T> bias_;     // filters
  Tensor<T> weight_grad_;
  Tensor<T> bias_grad_;
  bool fused_relu_;
  ConvPadding padding_;

  Tensor<T> input_;
  Tensor<T> pre_act_;
  bool has_cache_ = false;
};

template <class T>
class FullyConnectedLayer final : public Layer<T> {
 public:
  FullyConnectedLayer(std::size_t in_dim, std::size_t out_dim, bool fused_relu)
      : weights_({out_dim, in_dim}),
        bias_({out_dim}),
        weight_grad_({out_dim, in_dim}),
        bias_grad_({out_dim}),
        fused_relu_(fused_relu) {}

  LayerKind kind() const override { return LayerKind::FullyConnected; }

  std::string describe() const override {
    return "FullyConnected(" + std::to_string(weights_.extent(1)) + " -> " +
           std::to_string(weights_.extent(0)) + (fused_relu_ ? ", relu" : "") + ")";
  }

  Tensor<T>& weights() { return weights_; }
  const Tensor<T>& weights() const { return weights_; }
  Tensor<T>& bias() { return bias_; }
  const Tensor<T>& bias() const { return bias_; }
  bool fused_relu() const { return fused_relu_; }

  std::vector<Tensor<T>*> parameters() override { return {&weights_, &bias_}; }
  std::vector<Tensor<T>*> gradients() override { return {&weight_grad_, &bias_grad_}; }

  // Inputs of any rank are flattened row-major; the input gradient is
  // reshaped back.
  Tensor<T> forward(const Tensor<T>& input, bool, Rng*) override {
    const std::size_t in_dim = weights_.extent(1);
    const std::size_t out_dim = weights_.extent(0);
    if (input.size() != in_dim) {
      throw ValidationError("fully connected layer expects " + std::to_string(in_dim) +
                            " inputs, got " + shape_string(input.shape()));
    }
    input_ = input;
    has_cache_ = true;
    pre_act_ = Tensor<T>({out_dim});
    for (std::size_t i = 0; i < out_dim; ++i) {
      T acc = bias_[i];
      const T* row = weights_.data() + i * in_dim;
      const T* x = input.data();
      for (std::size_t j = 0; j < in_dim; ++j) acc += row[j] * x[j];
      pre_act_[i] = acc;
    }
    if (!fused_relu_) return pre_act_;
    Tensor<T> out({out_dim});
    for (std::size_t i = 0; i < out_dim; ++i) out[i] = std::max(T{}, pre_act_[i]);
    return out;
  }

  Tensor<T> backward(const Tensor<T>& upstream) override {
    if (!has_cache_) {
      throw ValidationError("fully connected backward called without a cached forward pass");
    }
    const std::size_t in_dim = weights_.extent(1);
    const std::size_t out_dim = weights_.extent(0);
    if (upstream.size() != out_dim) {
      throw ValidationError("fully connected upstream gradient shape " +
                            shape_string(upstream.shape()) + " does not match output size " +
                            std::to_string(out_dim));
    }
    Tensor<T> g = upstream;
    if (fused_relu_) {
      for (std::size_t i = 0; i < out_dim; ++i) {
        if (pre_act_[i] <= T{}) g[i] = T{};
      }
    }
    Tensor<T> input_grad(input_.shape());
    for (std::size_t i = 0; i < out_dim; ++i) {
      const T gv = g[i];
      bias_grad_[i] = gv;
      T* wrow = weight_grad_.data() + i * in_dim;
      const T* w = weights_.data() + i * in_dim;
      const T* x = input_.data();
      T* ig = input_grad.data();
      for (std::size_t j = 0; j < in_dim; ++j) {
        wrow[j] = gv * x[j];
        ig[j] += gv * w[j];
      }
    }
    return input_grad;
  }

 private:
  Tensor<T> weights_;  // out x in
  Tensor<T> bias_;
  Tensor<T> weight_grad_;
  Tensor<T> bias_grad_;
  bool fused_relu_;

  Tensor<T> input_;
  Tensor<T> pre_act_;
  bool has_cache_ = false;
};

template <class T>
class ReluLayer final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::ReLU; }
  std::string describe() const override { return "ReLU"; }

  Tensor<T> forward(const Tensor<T>& input, bool, Rng*) override {
    input_ = input;
    has_cache_ = true;
    Tensor<T> out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = std::max(T{}, input[i]);
    return out;
  }

  Tensor<T> backward(const Tensor<T>& upstream) override {
    if (!has_cache_ || !upstream.same_shape(input_)) {
      throw ValidationError("relu backward shape mismatch");
    }
    Tensor<T> grad(input_.shape());
    for (std::size_t i = 0; i < input_.size(); ++i) {
      grad[i] = input_[i] > T{} ? upstream[i] : T{};
    }
    return grad;
  }

 private:
  Tensor<T> input_;
  bool has_cache_ = false;
};

// Non-overlapping max pooling, window w x w with stride w. Odd remainders at
// the bottom/right edges are dropped. Ties route the gradient to the smallest
// flat input index.
template <class T>
class MaxPoolLayer final : public Layer<T> {
 public:
  explicit MaxPoolLayer(std::size_t window) : window_(window) {
    if (window_ == 0) throw ValidationError("pool window must be >= 1");
  }

  LayerKind kind() const override { return LayerKind::MaxPool; }
  std::string describe() const override { return "MaxPool(" + std::to_string(window_) + ")"; }

  Tensor<T> forward(const Tensor<T>& input, bool, Rng*) override {
    if (input.rank() != 3) {
      throw ValidationError("max pool expects a maps x H x W input, got " +
                            shape_string(input.shape()));
    }
    const std::size_t maps = input.extent(0);
    const std::size_t in_h = input.extent(1);
    const std::size_t in_w = input.extent(2);
    const std::size_t out_h = in_h / window_;
    const std::size_t out_w = in_w / window_;
    if (out_h == 0 || out_w == 0) {
      throw ValidationError("pool window " + std::to_string(window_) + " larger than input " +
                            shape_string(input.shape()));
    }
    in_shape_ = input.shape();
    Tensor<T> out({maps, out_h, out_w});
    argmax_.assign(out.size(), 0);
    std::size_t oi = 0;
    for (std::size_t c = 0; c < maps; ++c) {
      for (std::size_t oy = 0; oy < out_h; ++oy) {
        for (std::size_t ox = 0; ox < out_w; ++ox, ++oi) {
          T best{};
          std::size_t best_flat = 0;
          bool first = true;
          for (std::size_t r = 0; r < window_; ++r) {
            for (std::size_t s = 0; s < window_; ++s) {
              const std::size_t iy = oy * window_ + r;
              const std::size_t ix = ox * window_ + s;
              const std::size_t flat = (c * in_h + iy) * in_w + ix;
              const T v = input[flat];
              if (first || v > best) {
                best = v;
                best_flat = flat;
                first = false;
              }
            }
          }
          out[oi] = best;
          argmax_[oi] = best_flat;
        }
      }
    }
    return out;
  }

  Tensor<T> backward(const Tensor<T>& upstream) override {
    if (argmax_.size() != upstream.size()) {
      throw ValidationError("max pool backward called without a matching forward pass");
    }
    Tensor<T> grad(in_shape_);
    for (std::size_t i = 0; i < upstream.size(); ++i) {
      grad[argmax_[i]] += upstream[i];
    }
    return grad;
  }

 private:
  std::size_t window_;
  std::vector<std::size_t> in_shape_;
  std::vector<std::size_t> argmax_;
};

// Subtractive then divisive normalization, per feature map, over a square
// window clipped at the borders:
//
//   v(p) = f(p) - mean_{W(p)} f
//   out(p) = v(p) / max(c, sqrt(mean_{W(p)} v^2))
template <class T>
class LocalContrastNormLayer final : public Layer<T> {
 public:
  explicit LocalContrastNormLayer(std::size_t window, T floor = T(1))
      : window_(window), floor_(floor) {
    if (window_ % 2 == 0) {
      throw ValidationError("contrast normalization window must be odd, got " +
                            std::to_string(window_));
    }
    if (!(floor_ > T{})) {
      throw ValidationError("contrast normalization floor must be > 0");
    }
  }

  LayerKind kind() const override { return LayerKind::LocalContrastNorm; }
  std::string describe() const override {
    return "LocalContrastNorm(" + std::to_string(window_) + ")";
  }

  Tensor<T> forward(const Tensor<T>& input, bool, Rng*) override {
    if (input.rank() != 3) {
      throw ValidationError("contrast normalization expects a maps x H x W input, got " +
                            shape_string(input.shape()));
    }
    const std::size_t maps = input.extent(0);
    const std::size_t h = input.extent(1);
    const std::size_t w = input.extent(2);
    const std::ptrdiff_t radius = static_cast<std::ptrdiff_t>(window_ / 2);

    v_ = Tensor<T>(input.shape());
    denom_ = Tensor<T>(input.shape());
    std_ = Tensor<T>(input.shape());
    has_cache_ = true;

    Tensor<T> out(input.shape());
    for (std::size_t c = 0; c < maps; ++c) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          T sum = T{};
          std::size_t count = 0;
          for_window(y, x, h, w, radius, [&](std::size_t iy, std::size_t ix) {
            sum += input.at3(c, iy, ix);
            ++count;
          });
          v_.at3(c, y, x) = input.at3(c, y, x) - sum / static_cast<T>(count);
        }
      }
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          T sq = T{};
          std::size_t count = 0;
          for_window(y, x, h, w, radius, [&](std::size_t iy, std::size_t ix) {
            const T v = v_.at3(c, iy, ix);
            sq += v * v;
            ++count;
          });
          const T sd = std::sqrt(sq / static_cast<T>(count));
          const T d = std::max(floor_, sd);
          std_.at3(c, y, x) = sd;
          denom_.at3(c, y, x) = d;
          out.at3(c, y, x) = v_.at3(c, y, x) / d;
        }
      }
    }
    return out;
  }

  Tensor<T> backward(const Tensor<T>& upstream) override {
    if (!has_cache_ || !upstream.same_shape(v_)) {
      throw ValidationError("contrast normalization backward shape mismatch");
    }
    const std::size_t maps = v_.extent(0);
    const std::size_t h = v_.extent(1);
    const std::size_t w = v_.extent(2);
    const std::ptrdiff_t radius = static_cast<std::ptrdiff_t>(window_ / 2);

    Tensor<T> dv(v_.shape());
    // Direct path out = v / d, plus the path through the divisive std where
    // it exceeds the floor.
    for (std::size_t c = 0; c < maps; ++c) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          const T g = upstream.at3(c, y, x);
          const T d = denom_.at3(c, y, x);
          dv.at3(c, y, x) += g / d;
          const T sd = std_.at3(c, y, x);
          if (sd > floor_) {
            std::size_t count = 0;
            for_window(y, x, h, w, radius, [&](std::size_t, std::size_t) { ++count; });
            const T scale = -g * v_.at3(c, y, x) / (sd * sd * sd * static_cast<T>(count));
            for_window(y, x, h, w, radius, [&](std::size_t iy, std::size_t ix) {
              dv.at3(c, iy, ix) += scale * v_.at3(c, iy, ix);
            });
          }
        }
      }
    }

    // v = f - window mean of f
    Tensor<T> grad(v_.shape());
    for (std::size_t c = 0; c < maps; ++c) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          const T g = dv.at3(c, y, x);
          grad.at3(c, y, x) += g;
          std::size_t count = 0;
          for_window(y, x, h, w, radius, [&](std::size_t, std::size_t) { ++count; });
          const T share = g / static_cast<T>(count);
          for_window(y, x, h, w, radius, [&](std::size_t iy, std::size_t ix) {
            grad.at3(c, iy, ix) -= share;
          });
        }
      }
    }
    return grad;
  }

 private:
  template <class F>
  static void for_window(std::size_t y, std::size_t x, std::size_t h, std::size_t w,
                         std::ptrdiff_t radius, F&& fn) {
    const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y);
    const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x);
    for (std::ptrdiff_t dy = -radius; dy <= radius; ++dy) {
      const std::ptrdiff_t iy = yy + dy;
      if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
      for (std::ptrdiff_t dx = -radius; dx <= radius; ++dx) {
        const std::ptrdiff_t ix = xx + dx;
        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
        fn(static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
      }
    }
  }

  std::size_t window_;
  T floor_;

  Tensor<T> v_;
  Tensor<T> std_;
  Tensor<T> denom_;
  bool has_cache_ = false;
};

// Inverted dropout: survivors are scaled by 1/(1-p) at training time, so
// inference is the identity.
template <class T>
class DropoutLayer final : public Layer<T> {
 public:
  explicit DropoutLayer(double rate) : rate_(rate) {
    if (!(rate_ >= 0.0 && rate_ < 1.0)) {
      throw ValidationError("dropout rate must be in [0, 1), got " + std::to_string(rate_));
    }
  }

  LayerKind kind() const override { return LayerKind::Dropout; }
  std::string describe() const override { return "Dropout(" + std::to_string(rate_) + ")"; }

  double rate() const { return rate_; }

  Tensor<T> forward(const Tensor<T>& input, bool training, Rng* rng) override {
    if (!training || rate_ == 0.0) {
      identity_ = true;
      size_ = input.size();
      return input;
    }
    if (rng == nullptr) {
      throw ValidationError("dropout in training mode requires an rng");
    }
    identity_ = false;
    size_ = input.size();
    mask_.resize(input.size());
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate_));
    Tensor<T> out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) {
      mask_[i] = rng->uniform01() < rate_ ? T{} : keep_scale;
      out[i] = input[i] * mask_[i];
    }
    return out;
  }

  Tensor<T> backward(const Tensor<T>& upstream) override {
    if (upstream.size() != size_) {
      throw ValidationError("dropout backward called without a matching forward pass");
    }
    if (identity_) return upstream;
    Tensor<T> grad(upstream.shape());
    for (std::size_t i = 0; i < upstream.size(); ++i) grad[i] = upstream[i] * mask_[i];
    return grad;
  }

 private:
  double rate_;
  std::vector<T> mask_;
  bool identity_ = true;
  std::size_t size_ = 0;
};

// Terminal softmax with max-subtraction. Training goes through
// softmax_xent() on the logits instead of this layer's backward.
template <class T>
class SoftmaxLayer final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::Softmax; }
  std::string describe() const override { return "Softmax"; }

  Tensor<T> forward(const Tensor<T>& input, bool, Rng*) override {
    Tensor<T> out(input.shape());
    T max = input[0];
    for (std::size_t i = 1; i < input.size(); ++i) max = std::max(max, input[i]);
    T sum = T{};
    for (std::size_t i = 0; i < input.size(); ++i) {
      out[i] = std::exp(input[i] - max);
      sum += out[i];
    }
    for (std::size_t i = 0; i < input.size(); ++i) out[i] /= sum;
    probs_ = out;
    has_cache_ = true;
    return out;
  }

  Tensor<T> backward(const Tensor<T>& upstream) override {
    if (!has_cache_ || !upstream.same_shape(probs_)) {
      throw ValidationError("softmax backward shape mismatch");
    }
    T dot = T{};
    for (std::size_t i = 0; i < probs_.size(); ++i) dot += upstream[i] * probs_[i];
    Tensor<T> grad(probs_.shape());
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      grad[i] = probs_[i] * (upstream[i] - dot);
    }
    return grad;
  }

 private:
  Tensor<T> probs_;
  bool has_cache_ = false;
};

template <class T>
struct SoftmaxXent {
  Tensor<T> probabilities;
  T loss;
  Tensor<T> logit_grad;  // probabilities - one_hot(label)
};

// Cross-entropy over a softmax, evaluated in log space so extreme logits do
// not overflow.
template <class T>
SoftmaxXent<T> softmax_xent(const Tensor<T>& logits, std::size_t label) {
  if (logits.rank() != 1 || logits.size() < 2) {
    throw ValidationError("softmax needs a vector of at least 2 logits, got " +
                          shape_string(logits.shape()));
  }
  if (label >= logits.size()) {
    throw ValidationError("label " + std::to_string(label) + " out of range for " +
                          std::to_string(logits.size()) + " classes");
  }
  T max = logits[0];
  for (std::size_t i = 1; i < logits.size(); ++i) max = std::max(max, logits[i]);
  T sum = T{};
  Tensor<T> probs(logits.shape());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - max);
    sum += probs[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i) probs[i] /= sum;

  SoftmaxXent<T> result;
  result.loss = std::log(sum) + max - logits[label];
  result.logit_grad = probs;
  result.logit_grad[label] -= T(1);
  result.probabilities = std::move(probs);
  return result;
}

}  // namespace dtagn
