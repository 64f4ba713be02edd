#pragma once

#include <algorithm>
#include <span>
#include <utility>
#include <vector>

#include "tvc/error.hpp"
#include "tvc/precision.hpp"
#include "tvc/shape.hpp"

namespace tvc {

/// Non-owning view of a dense last-order tensor.
template <class T>
struct TensorView {
  Shape shape;
  std::span<T> data;

  TensorView() = default;
  TensorView(Shape s, std::span<T> d) : shape(std::move(s)), data(d) {
    if (data.size() != shape.size()) {
      throw ShapeError("tensor view buffer length does not match shape");
    }
  }

  operator TensorView<const T>() const { return TensorView<const T>(shape, data); }  // NOLINT
};

/// Dense d-order tensor owning N scalars in storage precision S.
template <class S>
class Tensor {
 public:
  using value_type = S;

  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_.size()) {}
  Tensor(Shape shape, S fill) : shape_(std::move(shape)), data_(shape_.size(), fill) {}
  Tensor(Shape shape, std::vector<S> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      throw ShapeError("tensor buffer length does not match shape " + shape_.to_string());
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  index_t order() const noexcept { return shape_.order(); }
  index_t size() const noexcept { return data_.size(); }
  static constexpr StorageFormat precision() noexcept { return storage_traits<S>::format; }

  std::span<S> data() noexcept { return data_; }
  std::span<const S> data() const noexcept { return data_; }
  std::vector<S>& buffer() noexcept { return data_; }
  const std::vector<S>& buffer() const noexcept { return data_; }

  S& operator()(std::span<const index_t> idx) { return data_[linear_index(shape_, idx)]; }
  const S& operator()(std::span<const index_t> idx) const { return data_[linear_index(shape_, idx)]; }
  S& operator[](index_t offset) { return data_[offset]; }
  const S& operator[](index_t offset) const { return data_[offset]; }

  TensorView<S> view() { return {shape_, data_}; }
  TensorView<const S> view() const { return {shape_, std::span<const S>(data_)}; }
  operator TensorView<const S>() const { return view(); }  // NOLINT

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && std::equal(a.data_.begin(), a.data_.end(), b.data_.begin(), b.data_.end());
  }

 private:
  Shape shape_;
  std::vector<S> data_;
};

}  // namespace tvc
