#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dtagn/error.hpp"

namespace dtagn {

enum class ConvPadding { Same, Valid };

// One architecture layer as written in the architecture string. Dropout is
// training configuration and never appears here.
struct LayerSpec {
  enum class Kind { FullyConnected, Conv, Lcn, Pool, Classifier };

  Kind kind = Kind::FullyConnected;

  // Conv
  std::size_t kernel = 0;
  std::size_t filters = 0;
  std::size_t in_channels = 0;

  // FullyConnected / Classifier
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  bool relu = false;

  // Lcn / Pool
  std::size_t window = 0;

  // Spatial extents after this layer (image networks, before flattening).
  std::size_t maps = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t parameter_count() const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Parsed architecture description.
//
// Grammar, tokens separated by '-':
//   input:       D{n}  (n-dimensional vector)  |  I{s}  (s x s image sequence)
//   hidden:      FC{m} | C({k},{f}) | L{w} | P{w}
//   classifier:  S{c} | bare integer c   (must be the last token)
//
// Image-network conv layers take the input frame count as input channels for
// the first conv and the previous filter count afterwards.
struct ModelSpec {
  enum class InputKind { Vector, Image };

  InputKind input_kind = InputKind::Vector;
  std::size_t input_dim = 0;    // vector networks
  std::size_t image_size = 0;   // image networks, square frames
  std::size_t frame_count = 1;  // image networks, frames per input
  ConvPadding padding = ConvPadding::Same;

  std::vector<LayerSpec> layers;  // classifier last
  std::size_t class_count = 0;

  std::size_t parameter_count() const;
  std::size_t weight_layer_count() const;
  // Flattened dimension fed into the first fully connected layer, or the raw
  // input dimension for vector networks.
  std::size_t flat_input_dim() const;
  std::string render() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

ModelSpec parse_arch(const std::string& text, std::size_t frame_count,
                     ConvPadding padding = ConvPadding::Same);

std::string layer_spec_name(const LayerSpec& layer);

}  // namespace dtagn
