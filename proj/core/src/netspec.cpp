#include "dtagn/netspec.hpp"

#include <cctype>
#include <sstream>

namespace dtagn {

namespace {

std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (c == '-') {
      tokens.push_back(current);
      current.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      current.push_back(c);
    }
  }
  tokens.push_back(current);
  return tokens;
}

[[noreturn]] void token_error(std::size_t index, const std::string& token, const std::string& why) {
  throw ValidationError("architecture token " + std::to_string(index + 1) + " (\"" + token +
                        "\"): " + why);
}

bool all_digits(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

std::size_t parse_count(std::size_t index, const std::string& token, const std::string& digits) {
  if (!all_digits(digits)) token_error(index, token, "expected a positive integer");
  unsigned long long v = 0;
  for (char c : digits) {
    v = v * 10 + static_cast<unsigned>(c - '0');
    if (v > 1000000000ull) token_error(index, token, "value out of range");
  }
  if (v == 0) token_error(index, token, "value must be >= 1");
  return static_cast<std::size_t>(v);
}

}  // namespace

std::size_t LayerSpec::parameter_count() const {
  switch (kind) {
    case Kind::Conv:
      return filters * in_channels * kernel * kernel + filters;
    case Kind::FullyConnected:
    case Kind::Classifier:
      return in_dim * out_dim + out_dim;
    case Kind::Lcn:
    case Kind::Pool:
      return 0;
  }
  return 0;
}

std::size_t ModelSpec::parameter_count() const {
  std::size_t n = 0;
  for (const LayerSpec& layer : layers) n += layer.parameter_count();
  return n;
}

std::size_t ModelSpec::weight_layer_count() const {
  std::size_t n = 0;
  for (const LayerSpec& layer : layers) {
    if (layer.parameter_count() > 0) ++n;
  }
  return n;
}

std::size_t ModelSpec::flat_input_dim() const {
  if (input_kind == InputKind::Vector) return input_dim;
  return frame_count * image_size * image_size;
}

std::string ModelSpec::render() const {
  std::ostringstream os;
  if (input_kind == InputKind::Vector) {
    os << 'D' << input_dim;
  } else {
    os << 'I' << image_size;
  }
  for (const LayerSpec& layer : layers) {
    os << '-';
    switch (layer.kind) {
      case LayerSpec::Kind::FullyConnected:
        os << "FC" << layer.out_dim;
        break;
      case LayerSpec::Kind::Conv:
        os << "C(" << layer.kernel << ',' << layer.filters << ')';
        break;
      case LayerSpec::Kind::Lcn:
        os << 'L' << layer.window;
        break;
      case LayerSpec::Kind::Pool:
        os << 'P' << layer.window;
        break;
      case LayerSpec::Kind::Classifier:
        os << 'S' << layer.out_dim;
        break;
    }
  }
  return os.str();
}

std::string layer_spec_name(const LayerSpec& layer) {
  switch (layer.kind) {
    case LayerSpec::Kind::FullyConnected:
      return "FC" + std::to_string(layer.out_dim);
    case LayerSpec::Kind::Conv:
      return "C(" + std::to_string(layer.kernel) + "," + std::to_string(layer.filters) + ")";
    case LayerSpec::Kind::Lcn:
      return "L" + std::to_string(layer.window);
    case LayerSpec::Kind::Pool:
      return "P" + std::to_string(layer.window);
    case LayerSpec::Kind::Classifier:
      return "S" + std::to_string(layer.out_dim);
  }
  return "?";
}

ModelSpec parse_arch(const std::string& text, std::size_t frame_count, ConvPadding padding) {
  const std::vector<std::string> tokens = split_tokens(text);
  if (tokens.size() < 2) {
    throw ValidationError("architecture needs at least an input token and a classifier: \"" +
                          text + "\"");
  }
  if (frame_count == 0) {
    throw ValidationError("frame count must be >= 1");
  }

  ModelSpec spec;
  spec.padding = padding;

  const std::string& head = tokens[0];
  if (head.size() >= 2 && head[0] == 'D') {
    spec.input_kind = ModelSpec::InputKind::Vector;
    spec.input_dim = parse_count(0, head, head.substr(1));
    spec.frame_count = 1;
  } else if (head.size() >= 2 && head[0] == 'I') {
    spec.input_kind = ModelSpec::InputKind::Image;
    spec.image_size = parse_count(0, head, head.substr(1));
    spec.frame_count = frame_count;
  } else {
    token_error(0, head, "input must be D{n} or I{s}");
  }

  const bool image_net = spec.input_kind == ModelSpec::InputKind::Image;
  std::size_t maps = image_net ? frame_count : 0;
  std::size_t height = spec.image_size;
  std::size_t width = spec.image_size;
  bool flattened = !image_net;
  std::size_t cur_dim = image_net ? 0 : spec.input_dim;

  auto flat_dim = [&]() -> std::size_t {
    if (!flattened) {
      cur_dim = maps * height * width;
      flattened = true;
    }
    return cur_dim;
  };

  for (std::size_t i = 1; i < tokens.size(); ++i) {
    const std::string& tok = tokens[i];
    const bool last = i + 1 == tokens.size();

    if (tok.empty()) token_error(i, tok, "empty token");

    LayerSpec layer;
    if (tok.rfind("FC", 0) == 0) {
      layer.kind = LayerSpec::Kind::FullyConnected;
      layer.out_dim = parse_count(i, tok, tok.substr(2));
      layer.in_dim = flat_dim();
      layer.relu = true;
      cur_dim = layer.out_dim;
    } else if (tok[0] == 'C' && tok.size() > 1 && tok[1] == '(') {
      if (tok.back() != ')') token_error(i, tok, "expected C({k},{f})");
      const std::string inner = tok.substr(2, tok.size() - 3);
      const std::size_t comma = inner.find(',');
      if (comma == std::string::npos) token_error(i, tok, "expected C({k},{f})");
      if (!image_net) token_error(i, tok, "conv layer requires image input");
      if (flattened) token_error(i, tok, "conv layer after fully connected layer");
      layer.kind = LayerSpec::Kind::Conv;
      layer.kernel = parse_count(i, tok, inner.substr(0, comma));
      layer.filters = parse_count(i, tok, inner.substr(comma + 1));
      layer.in_channels = maps;
      if (padding == ConvPadding::Valid) {
        if (height < layer.kernel || width < layer.kernel) {
          token_error(i, tok, "kernel larger than input under valid padding");
        }
        height = height - layer.kernel + 1;
        width = width - layer.kernel + 1;
      }
      maps = layer.filters;
    } else if (tok[0] == 'L') {
      if (!image_net) token_error(i, tok, "contrast normalization requires image input");
      if (flattened) token_error(i, tok, "contrast normalization after fully connected layer");
      layer.kind = LayerSpec::Kind::Lcn;
      layer.window = parse_count(i, tok, tok.substr(1));
      if (layer.window % 2 == 0) token_error(i, tok, "normalization window must be odd");
    } else if (tok[0] == 'P') {
      if (!image_net) token_error(i, tok, "pooling requires image input");
      if (flattened) token_error(i, tok, "pooling after fully connected layer");
      layer.kind = LayerSpec::Kind::Pool;
      layer.window = parse_count(i, tok, tok.substr(1));
      height = height / layer.window;
      width = width / layer.window;
      if (height == 0 || width == 0) {
        token_error(i, tok, "pooling reduces spatial extent below 1");
      }
    } else if (tok[0] == 'S' || all_digits(tok)) {
      if (!last) token_error(i, tok, "classifier must be the last token");
      layer.kind = LayerSpec::Kind::Classifier;
      layer.out_dim = parse_count(i, tok, tok[0] == 'S' ? tok.substr(1) : tok);
      if (layer.out_dim < 2) token_error(i, tok, "classifier needs at least 2 classes");
      layer.in_dim = flat_dim();
      cur_dim = layer.out_dim;
      spec.class_count = layer.out_dim;
    } else {
      token_error(i, tok, "unknown token");
    }

    layer.maps = maps;
    layer.height = height;
    layer.width = width;
    spec.layers.push_back(layer);
  }

  if (spec.layers.empty() || spec.layers.back().kind != LayerSpec::Kind::Classifier) {
    throw ValidationError("architecture \"" + text +
                          "\": missing terminal classifier (S{c} or bare class count)");
  }
  return spec;
}

}  // namespace dtagn
