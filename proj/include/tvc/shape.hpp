#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tvc {

using index_t = std::size_t;

/// Extents of a dense tensor in last-order (row-major) layout.
///
/// Every extent is at least one and the order is at least one, so the
/// element count is always positive.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<index_t> extents);
  explicit Shape(std::vector<index_t> extents);

  /// Hypersquare shape n^d.
  static Shape hypersquare(index_t n, index_t d);

  index_t order() const noexcept { return extents_.size(); }
  index_t size() const noexcept;
  index_t operator[](index_t i) const { return extents_[i]; }
  std::span<const index_t> extents() const noexcept { return extents_; }

  /// Last-order strides: stride_j = prod_{m>j} n_m.
  std::vector<index_t> strides() const;

  /// Shape with mode k removed. Requires order() >= 2.
  Shape without_mode(index_t k) const;

  /// Shape with the extent of mode k replaced.
  Shape with_extent(index_t k, index_t extent) const;

  /// Product of extents in [first, last).
  index_t product(index_t first, index_t last) const;

  bool is_hypersquare() const noexcept;

  /// "2x3x4"
  std::string to_string() const;

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  void validate() const;
  std::vector<index_t> extents_;
};

/// Parses "2,3,4" or the power form "979^3".
Shape parse_shape(std::string_view text);

/// Offset of a multi-index in last-order layout.
index_t linear_index(const Shape& shape, std::span<const index_t> idx);

/// Inverse of linear_index.
std::vector<index_t> multi_index(const Shape& shape, index_t offset);

/// Matricized view of a tensor around mode k: (u, n_k, v) with
/// u = prod_{i<k} n_i and v = prod_{i>k} n_i.
struct MatricizedDims {
  index_t u = 1;
  index_t nk = 1;
  index_t v = 1;

  friend bool operator==(const MatricizedDims&, const MatricizedDims&) = default;
};

MatricizedDims matricize_dims(const Shape& shape, index_t k);

}  // namespace tvc
