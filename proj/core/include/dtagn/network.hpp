#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dtagn/layers.hpp"
#include "dtagn/netspec.hpp"

namespace dtagn {

// A linear layer stack built from a ModelSpec. Runtime layers include
// training-only dropout wrappers and the terminal softmax; "architecture
// layers" are the tokens of the architecture string, with the classifier
// covering both its weight layer and the softmax.
template <class T>
class Network {
 public:
  explicit Network(ModelSpec spec) : spec_(std::move(spec)) {}

  const ModelSpec& spec() const { return spec_; }
  std::size_t class_count() const { return spec_.class_count; }

  void add_layer(std::unique_ptr<Layer<T>> layer, int arch_index) {
    layers_.push_back(std::move(layer));
    arch_index_.push_back(arch_index);
  }

  std::size_t layer_count() const { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_[i]; }
  const Layer<T>& layer(std::size_t i) const { return *layers_[i]; }
  int arch_index_of(std::size_t i) const { return arch_index_[i]; }

  std::size_t arch_layer_count() const { return spec_.layers.size(); }

  // Runtime index of the first runtime layer belonging to an architecture
  // layer; -1 when absent.
  int runtime_index_of_arch(int arch) const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (arch_index_[i] == arch) return static_cast<int>(i);
    }
    return -1;
  }

  std::vector<Tensor<T>*> parameters() {
    std::vector<Tensor<T>*> out;
    for (auto& l : layers_) {
      for (Tensor<T>* p : l->parameters()) out.push_back(p);
    }
    return out;
  }

  std::vector<Tensor<T>*> gradients() {
    std::vector<Tensor<T>*> out;
    for (auto& l : layers_) {
      for (Tensor<T>* g : l->gradients()) out.push_back(g);
    }
    return out;
  }

  // Full pass including the terminal softmax; returns class probabilities.
  Tensor<T> forward(const Tensor<T>& input, bool training = false, Rng* rng = nullptr) {
    Tensor<T> cur = input;
    for (auto& l : layers_) cur = l->forward(cur, training, rng);
    return cur;
  }

  // Stops before the terminal softmax; training pairs this with softmax_xent.
  Tensor<T> forward_logits(const Tensor<T>& input, bool training = false, Rng* rng = nullptr) {
    Tensor<T> cur = input;
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
      cur = layers_[i]->forward(cur, training, rng);
    }
    return cur;
  }

  // Backward from the logit gradient through everything below the softmax.
  Tensor<T> backward_from_logits(const Tensor<T>& logit_grad) {
    Tensor<T> cur = logit_grad;
    for (std::size_t i = layers_.size() - 1; i-- > 0;) {
      cur = layers_[i]->backward(cur);
    }
    return cur;
  }

  // Inference output of the given architecture layer (dropout is identity).
  Tensor<T> forward_arch_layer(const Tensor<T>& input, int arch) {
    if (arch < 0 || arch >= static_cast<int>(spec_.layers.size())) {
      throw ValidationError("layer index " + std::to_string(arch) + " out of range; " +
                            describe_arch_layers());
    }
    Tensor<T> cur = input;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (arch_index_[i] >= 0 && arch_index_[i] > arch) break;
      cur = layers_[i]->forward(cur, false, nullptr);
    }
    return cur;
  }

  std::string describe_arch_layers() const {
    std::string out = "valid layers:";
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
      out += " " + std::to_string(i) + "=" + layer_spec_name(spec_.layers[i]);
    }
    return out;
  }

 private:
  ModelSpec spec_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  std::vector<int> arch_index_;
};

// Builds the runtime stack for a spec. Conv layers and hidden fully connected
// layers carry fused ReLU; the classifier does not. When dropout rates are
// given they must cover the input plus each hidden fully connected layer, in
// order. Weights are drawn from N(0, init_stddev), biases start at zero;
// init_stddev == 0 skips the rng entirely.
template <class T>
Network<T> build_network(const ModelSpec& spec, const std::vector<double>& dropout_rates,
                         Rng* rng, double init_stddev = 0.01) {
  std::size_t hidden_fc = 0;
  for (const LayerSpec& l : spec.layers) {
    if (l.kind == LayerSpec::Kind::FullyConnected) ++hidden_fc;
  }
  if (!dropout_rates.empty() && dropout_rates.size() != hidden_fc + 1) {
    throw ValidationError("dropout rates must cover the input and each of the " +
                          std::to_string(hidden_fc) + " hidden fully connected layers, got " +
                          std::to_string(dropout_rates.size()) + " rates");
  }
  if (init_stddev > 0 && rng == nullptr) {
    throw ValidationError("weight initialization requires an rng");
  }

  auto init = [&](Tensor<T>& w) {
    if (init_stddev <= 0) return;
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = static_cast<T>(rng->normal(0.0, init_stddev));
    }
  };

  Network<T> net(spec);
  std::size_t next_rate = 0;
  if (!dropout_rates.empty()) {
    net.add_layer(std::make_unique<DropoutLayer<T>>(dropout_rates[next_rate++]), -1);
  }
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const int arch = static_cast<int>(i);
    switch (l.kind) {
      case LayerSpec::Kind::Conv: {
        auto conv = std::make_unique<TemporalConvLayer<T>>(l.filters, l.in_channels, l.kernel,
                                                           /*fused_relu=*/true, spec.padding);
        init(conv->weights());
        net.add_layer(std::move(conv), arch);
        break;
      }
      case LayerSpec::Kind::Lcn:
        net.add_layer(std::make_unique<LocalContrastNormLayer<T>>(l.window), arch);
        break;
      case LayerSpec::Kind::Pool:
        net.add_layer(std::make_unique<MaxPoolLayer<T>>(l.window), arch);
        break;
      case LayerSpec::Kind::FullyConnected: {
        auto fc = std::make_unique<FullyConnectedLayer<T>>(l.in_dim, l.out_dim,
                                                           /*fused_relu=*/true);
        init(fc->weights());
        net.add_layer(std::move(fc), arch);
        if (!dropout_rates.empty()) {
          net.add_layer(std::make_unique<DropoutLayer<T>>(dropout_rates[next_rate++]), -1);
        }
        break;
      }
      case LayerSpec::Kind::Classifier: {
        auto fc = std::make_unique<FullyConnectedLayer<T>>(l.in_dim, l.out_dim,
                                                           /*fused_relu=*/false);
        init(fc->weights());
        net.add_layer(std::move(fc), arch);
        net.add_layer(std::make_unique<SoftmaxLayer<T>>(), arch);
        break;
      }
    }
  }
  return net;
}

}  // namespace dtagn
