#pragma once

#include <cstddef>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dtagn/error.hpp"

namespace dtagn {

inline std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// Dense row-major N-d array of real values. Instantiated with float for
// training builds and double where the gradient checks run.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    data_.assign(checked_size(shape_), T{});
  }

  Tensor(std::vector<std::size_t> shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_size(shape_) != data_.size()) {
      throw ValidationError("tensor data length " + std::to_string(data_.size()) +
                            " does not match shape " + shape_string(shape_));
    }
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_[axis]; }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](std::size_t flat) { return data_[flat]; }
  const T& operator[](std::size_t flat) const { return data_[flat]; }

  // Unchecked rank-specific accessors for hot loops.
  T& at2(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const T& at2(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

  T& at3(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const T& at3(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  T& at4(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  const T& at4(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  // Checked multi-index access; row-major.
  std::size_t flat_index(const std::vector<std::size_t>& index) const {
    if (index.size() != shape_.size()) {
      throw ValidationError("index rank " + std::to_string(index.size()) +
                            " does not match tensor rank " + std::to_string(shape_.size()));
    }
    std::size_t flat = 0;
    for (std::size_t axis = 0; axis < shape_.size(); ++axis) {
      if (index[axis] >= shape_[axis]) {
        throw ValidationError("index out of range on axis " + std::to_string(axis) +
                              " for shape " + shape_string(shape_));
      }
      flat = flat * shape_[axis] + index[axis];
    }
    return flat;
  }

  void set(const std::vector<std::size_t>& index, T value) { data_[flat_index(index)] = value; }
  T get(const std::vector<std::size_t>& index) const { return data_[flat_index(index)]; }

  void fill(T value) { data_.assign(data_.size(), value); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static std::size_t checked_size(const std::vector<std::size_t>& shape) {
    if (shape.empty()) {
      throw ValidationError("tensor shape must have at least one extent");
    }
    std::size_t n = 1;
    for (std::size_t e : shape) {
      if (e == 0) {
        throw ValidationError("tensor extents must be >= 1, got " + shape_string(shape));
      }
      n *= e;
    }
    return n;
  }

  std::vector<std::size_t> shape_;
  std::vector<T> data_;
};

enum class EwOp { Add, Sub, Mul };

template <class T>
Tensor<T> elementwise(EwOp op, const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) {
    throw ValidationError("elementwise shape mismatch: " + shape_string(a.shape()) + " vs " +
                          shape_string(b.shape()));
  }
  Tensor<T> out(a.shape());
  const T* pa = a.data();
  const T* pb = b.data();
  T* po = out.data();
  switch (op) {
    case EwOp::Add:
      for (std::size_t i = 0; i < a.size(); ++i) po[i] = pa[i] + pb[i];
      break;
    case EwOp::Sub:
      for (std::size_t i = 0; i < a.size(); ++i) po[i] = pa[i] - pb[i];
      break;
    case EwOp::Mul:
      for (std::size_t i = 0; i < a.size(); ++i) po[i] = pa[i] * pb[i];
      break;
  }
  return out;
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(EwOp::Add, a, b);
}
template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(EwOp::Sub, a, b);
}
template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(EwOp::Mul, a, b);
}

// result[i] = sum_j W[i,j] * x[j]
template <class T>
Tensor<T> matvec(const Tensor<T>& w, const Tensor<T>& x) {
  if (w.rank() != 2 || x.rank() != 1 || w.extent(1) != x.extent(0)) {
    throw ValidationError("matvec dimension mismatch: " + shape_string(w.shape()) + " * " +
                          shape_string(x.shape()));
  }
  const std::size_t rows = w.extent(0);
  const std::size_t cols = w.extent(1);
  Tensor<T> out({rows});
  for (std::size_t i = 0; i < rows; ++i) {
    T acc = T{};
    const T* row = w.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
    out[i] = acc;
  }
  return out;
}

}  // namespace dtagn
