#pragma once

#include <cstdint>
#include <cstring>
#include <random>
#include <span>
#include <vector>

#include "tvc/shape.hpp"
#include "tvc/tensor.hpp"

namespace tvc::testing {

inline std::vector<double> integer_fill(index_t n, std::uint64_t seed, int lo = 1, int hi = 97) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dist(lo, hi);
  std::vector<double> v(n);
  for (auto& e : v) e = dist(rng);
  return v;
}

inline Tensor<double> integer_tensor(const Shape& shape, std::uint64_t seed) {
  return Tensor<double>(shape, integer_fill(shape.size(), seed));
}

template <class T>
bool bitwise_equal(std::span<const T> a, std::span<const T> b) {
  return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0);
}

template <class T>
bool bitwise_equal(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape() == b.shape() && bitwise_equal<T>(a.data(), b.data());
}

/// y[i_0..i_{k-1}, i_{k+1}..] = sum_j a[.., j, ..] * x[j], computed by
/// walking every input element once with an odometer, accumulating in
/// ascending j per output element.
inline Tensor<double> reference_tvc(const Tensor<double>& a, std::span<const double> x, index_t k) {
  const Shape& s = a.shape();
  const index_t d = s.order();
  std::vector<index_t> out_ext;
  for (index_t m = 0; m < d; ++m) {
    if (m != k) out_ext.push_back(s[m]);
  }
  Tensor<double> y(Shape(out_ext), 0.0);
  std::vector<index_t> idx(d, 0);
  std::vector<index_t> oidx(d - 1);
  // Visit j outermost so each output accumulates its terms in ascending j.
  for (index_t j = 0; j < s[k]; ++j) {
    std::fill(idx.begin(), idx.end(), 0);
    idx[k] = j;
    while (true) {
      index_t o = 0;
      for (index_t m = 0; m < d; ++m) {
        if (m != k) oidx[o++] = idx[m];
      }
      y(oidx) += a(idx) * x[j];
      index_t m = d;
      while (m-- > 0) {
        if (m == k) continue;
        if (++idx[m] < s[m]) break;
        idx[m] = 0;
      }
      if (m == static_cast<index_t>(-1)) break;
    }
  }
  return y;
}

/// Every hypersquare and mixed shape with order 2..5 used by the suites.
inline std::vector<Shape> shape_suite() {
  std::vector<Shape> out;
  for (index_t d = 2; d <= 5; ++d) {
    for (index_t n : {1, 2, 3, 4, 5, 6}) {
      out.push_back(Shape::hypersquare(n, d));
    }
  }
  out.push_back(Shape{2, 3});
  out.push_back(Shape{6, 1});
  out.push_back(Shape{5, 4});
  out.push_back(Shape{2, 3, 4});
  out.push_back(Shape{6, 1, 5});
  out.push_back(Shape{3, 6, 2});
  out.push_back(Shape{4, 2, 3, 5});
  out.push_back(Shape{1, 6, 2, 3});
  out.push_back(Shape{5, 3, 1, 4});
  out.push_back(Shape{2, 3, 4, 5, 6});
  out.push_back(Shape{6, 1, 2, 5, 3});
  out.push_back(Shape{3, 4, 2, 6, 2});
  return out;
}

}  // namespace tvc::testing
