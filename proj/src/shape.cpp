#include "tvc/shape.hpp"

#include <charconv>
#include <limits>

#include <fmt/format.h>

#include "tvc/error.hpp"

namespace tvc {

namespace {

index_t parse_extent(std::string_view token, std::string_view whole) {
  index_t value = 0;
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || token.empty()) {
    throw ShapeError(fmt::format("invalid extent '{}' in shape '{}'", token, whole));
  }
  return value;
}

}  // namespace

Shape::Shape(std::initializer_list<index_t> extents) : extents_(extents) { validate(); }

Shape::Shape(std::vector<index_t> extents) : extents_(std::move(extents)) { validate(); }

Shape Shape::hypersquare(index_t n, index_t d) { return Shape(std::vector<index_t>(d, n)); }

void Shape::validate() const {
  if (extents_.empty()) throw ShapeError("shape must have order >= 1");
  index_t total = 1;
  for (index_t e : extents_) {
    if (e == 0) throw ShapeError("shape extents must be >= 1");
    if (total > std::numeric_limits<index_t>::max() / e) {
      throw ShapeError("shape element count overflows");
    }
    total *= e;
  }
}

index_t Shape::size() const noexcept {
  index_t total = 1;
  for (index_t e : extents_) total *= e;
  return total;
}

std::vector<index_t> Shape::strides() const {
  std::vector<index_t> s(extents_.size());
  index_t stride = 1;
  for (index_t j = extents_.size(); j-- > 0;) {
    s[j] = stride;
    stride *= extents_[j];
  }
  return s;
}

Shape Shape::without_mode(index_t k) const {
  if (k >= order()) throw ModeError(fmt::format("mode {} out of range for order {}", k, order()));
  if (order() < 2) throw ModeError("cannot remove the only mode of an order-1 shape");
  std::vector<index_t> e;
  e.reserve(order() - 1);
  for (index_t i = 0; i < order(); ++i) {
    if (i != k) e.push_back(extents_[i]);
  }
  return Shape(std::move(e));
}

Shape Shape::with_extent(index_t k, index_t extent) const {
  if (k >= order()) throw ModeError(fmt::format("mode {} out of range for order {}", k, order()));
  auto e = extents_;
  e[k] = extent;
  return Shape(std::move(e));
}

index_t Shape::product(index_t first, index_t last) const {
  index_t p = 1;
  for (index_t i = first; i < last && i < order(); ++i) p *= extents_[i];
  return p;
}

bool Shape::is_hypersquare() const noexcept {
  for (index_t e : extents_) {
    if (e != extents_.front()) return false;
  }
  return true;
}

std::string Shape::to_string() const {
  std::string out;
  for (index_t i = 0; i < order(); ++i) {
    if (i) out += 'x';
    out += std::to_string(extents_[i]);
  }
  return out;
}

Shape parse_shape(std::string_view text) {
  if (auto caret = text.find('^'); caret != std::string_view::npos) {
    const index_t n = parse_extent(text.substr(0, caret), text);
    const index_t d = parse_extent(text.substr(caret + 1), text);
    if (d == 0) throw ShapeError(fmt::format("order must be >= 1 in '{}'", text));
    return Shape::hypersquare(n, d);
  }
  std::vector<index_t> extents;
  std::string_view rest = text;
  while (true) {
    auto comma = rest.find(',');
    extents.push_back(parse_extent(rest.substr(0, comma), text));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return Shape(std::move(extents));
}

index_t linear_index(const Shape& shape, std::span<const index_t> idx) {
  if (idx.size() != shape.order()) {
    throw IndexError(fmt::format("index has {} components, shape has order {}", idx.size(), shape.order()));
  }
  index_t offset = 0;
  for (index_t j = 0; j < idx.size(); ++j) {
    if (idx[j] >= shape[j]) {
      throw IndexError(fmt::format("index component {} = {} out of range [0, {})", j, idx[j], shape[j]));
    }
    offset = offset * shape[j] + idx[j];
  }
  return offset;
}

std::vector<index_t> multi_index(const Shape& shape, index_t offset) {
  if (offset >= shape.size()) {
    throw IndexError(fmt::format("offset {} out of range [0, {})", offset, shape.size()));
  }
  std::vector<index_t> idx(shape.order());
  for (index_t j = shape.order(); j-- > 0;) {
    idx[j] = offset % shape[j];
    offset /= shape[j];
  }
  return idx;
}

MatricizedDims matricize_dims(const Shape& shape, index_t k) {
  if (k >= shape.order()) {
    throw ModeError(fmt::format("mode {} out of range for order {}", k, shape.order()));
  }
  return {shape.product(0, k), shape[k], shape.product(k + 1, shape.order())};
}

}  // namespace tvc
