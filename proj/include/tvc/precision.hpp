#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <string_view>
#include <type_traits>

namespace tvc {

/// IEEE 754 binary16 stored as its bit pattern. Storage only: arithmetic
/// happens after promotion to float.
struct Half {
  std::uint16_t bits = 0;

  static constexpr Half from_bits(std::uint16_t b) noexcept { return Half{b}; }
  friend constexpr bool operator==(Half, Half) = default;
};

/// Brain float: the upper 16 bits of an IEEE binary32 pattern.
struct BFloat16 {
  std::uint16_t bits = 0;

  static constexpr BFloat16 from_bits(std::uint16_t b) noexcept { return BFloat16{b}; }
  friend constexpr bool operator==(BFloat16, BFloat16) = default;
};

float half_to_float(Half h) noexcept;

/// Round-to-nearest-even. Values beyond the largest finite half overflow
/// to infinity; NaN stays NaN.
Half float_to_half(float f) noexcept;

constexpr float bfloat16_to_float(BFloat16 b) noexcept {
  return std::bit_cast<float>(static_cast<std::uint32_t>(b.bits) << 16);
}

/// Drops the low 16 bits of the binary32 pattern. A NaN whose payload
/// lives only in the dropped bits is kept quiet instead of becoming inf.
constexpr BFloat16 float_to_bfloat16(float f) noexcept {
  const auto u = std::bit_cast<std::uint32_t>(f);
  auto hi = static_cast<std::uint16_t>(u >> 16);
  if ((u & 0x7F800000u) == 0x7F800000u && (u & 0x007FFFFFu) != 0 && (hi & 0x007Fu) == 0) {
    hi |= 0x0040u;
  }
  return BFloat16{hi};
}

enum class StorageFormat { f64, f32, f16, bf16 };
enum class ComputeFormat { f64, f32 };

/// Storage/compute format pair. Only the five pairs below are valid:
/// (f64,f64) (f32,f32) (f32,f64) (f16,f32) (bf16,f32).
struct PrecisionMode {
  StorageFormat storage = StorageFormat::f64;
  ComputeFormat compute = ComputeFormat::f64;

  bool valid() const noexcept;
  bool mixed() const noexcept;
  std::size_t storage_bytes() const noexcept;

  /// CLI spelling: f64 | f32 | f32f64 | f16f32 | bf16f32.
  std::string name() const;
  static PrecisionMode parse(std::string_view text);

  friend bool operator==(const PrecisionMode&, const PrecisionMode&) = default;
};

template <class S>
struct storage_traits;

template <>
struct storage_traits<double> {
  static constexpr StorageFormat format = StorageFormat::f64;
};
template <>
struct storage_traits<float> {
  static constexpr StorageFormat format = StorageFormat::f32;
};
template <>
struct storage_traits<Half> {
  static constexpr StorageFormat format = StorageFormat::f16;
};
template <>
struct storage_traits<BFloat16> {
  static constexpr StorageFormat format = StorageFormat::bf16;
};

template <class S>
inline constexpr std::size_t storage_width = sizeof(S);

/// Conversion between a storage scalar S and a compute scalar C.
template <class S, class C>
struct Convert {
  static constexpr C promote(S v) noexcept { return static_cast<C>(v); }
  static constexpr S demote(C v) noexcept { return static_cast<S>(v); }
};

template <>
struct Convert<Half, float> {
  static float promote(Half v) noexcept { return half_to_float(v); }
  static Half demote(float v) noexcept { return float_to_half(v); }
};

template <>
struct Convert<BFloat16, float> {
  static constexpr float promote(BFloat16 v) noexcept { return bfloat16_to_float(v); }
  static constexpr BFloat16 demote(float v) noexcept { return float_to_bfloat16(v); }
};

template <class S, class C>
constexpr C promote(S v) noexcept {
  return Convert<S, C>::promote(v);
}

template <class S, class C>
constexpr S demote(C v) noexcept {
  return Convert<S, C>::demote(v);
}

template <class C>
constexpr ComputeFormat compute_format_of() {
  if constexpr (std::is_same_v<C, double>) return ComputeFormat::f64;
  else return ComputeFormat::f32;
}

template <class S, class C>
constexpr PrecisionMode precision_mode_of() {
  return PrecisionMode{storage_traits<S>::format, compute_format_of<C>()};
}

/// Calls fn.template operator()<S, C>() for the storage/compute pair of
/// a runtime precision mode.
template <class Fn>
decltype(auto) dispatch_precision(PrecisionMode mode, Fn&& fn);

}  // namespace tvc

#include "tvc/error.hpp"

namespace tvc {

template <class Fn>
decltype(auto) dispatch_precision(PrecisionMode mode, Fn&& fn) {
  using S = StorageFormat;
  using C = ComputeFormat;
  if (mode.storage == S::f64 && mode.compute == C::f64) return fn.template operator()<double, double>();
  if (mode.storage == S::f32 && mode.compute == C::f32) return fn.template operator()<float, float>();
  if (mode.storage == S::f32 && mode.compute == C::f64) return fn.template operator()<float, double>();
  if (mode.storage == S::f16 && mode.compute == C::f32) return fn.template operator()<Half, float>();
  if (mode.storage == S::bf16 && mode.compute == C::f32) return fn.template operator()<BFloat16, float>();
  throw ConfigError("unsupported storage/compute precision pair");
}

}  // namespace tvc
