#include "tvc/precision.hpp"

#include <cstring>

#include "tvc/error.hpp"

namespace tvc {

float half_to_float(Half h) noexcept {
  const std::uint32_t sign = static_cast<std::uint32_t>(h.bits & 0x8000u) << 16;
  const std::uint32_t exp = (h.bits >> 10) & 0x1Fu;
  std::uint32_t mant = h.bits & 0x03FFu;

  std::uint32_t out;
  if (exp == 0x1F) {
    out = sign | 0x7F800000u | (mant << 13);
  } else if (exp != 0) {
    out = sign | ((exp + 112u) << 23) | (mant << 13);
  } else if (mant == 0) {
    out = sign;
  } else {
    // Subnormal half: renormalize into binary32.
    std::uint32_t e = 113;
    while ((mant & 0x0400u) == 0) {
      mant <<= 1;
      --e;
    }
    mant &= 0x03FFu;
    out = sign | (e << 23) | (mant << 13);
  }
  return std::bit_cast<float>(out);
}

Half float_to_half(float f) noexcept {
  const auto u = std::bit_cast<std::uint32_t>(f);
  const auto sign = static_cast<std::uint16_t>((u >> 16) & 0x8000u);
  const std::uint32_t exp = (u >> 23) & 0xFFu;
  const std::uint32_t mant = u & 0x007FFFFFu;

  if (exp == 0xFF) {
    if (mant == 0) return Half{static_cast<std::uint16_t>(sign | 0x7C00u)};
    return Half{static_cast<std::uint16_t>(sign | 0x7E00u | (mant >> 13))};
  }

  const int e = static_cast<int>(exp) - 127;
  if (e > 15) return Half{static_cast<std::uint16_t>(sign | 0x7C00u)};

  if (e >= -14) {
    // Normal half range: keep 10 mantissa bits, round the dropped 13.
    std::uint32_t h = (static_cast<std::uint32_t>(e + 15) << 10) | (mant >> 13);
    const std::uint32_t rem = mant & 0x1FFFu;
    if (rem > 0x1000u || (rem == 0x1000u && (h & 1u))) ++h;  // carry may reach inf
    return Half{static_cast<std::uint16_t>(sign | h)};
  }

  if (e < -25) return Half{sign};

  // Subnormal half: value = m * 2^-24 with the implicit bit made explicit.
  const std::uint32_t full = mant | 0x00800000u;
  const int shift = -e - 1;  // 14..24 bits dropped from the 24-bit significand
  std::uint32_t h = full >> shift;
  const std::uint32_t rem = full & ((1u << shift) - 1u);
  const std::uint32_t halfway = 1u << (shift - 1);
  if (rem > halfway || (rem == halfway && (h & 1u))) ++h;
  return Half{static_cast<std::uint16_t>(sign | h)};
}

bool PrecisionMode::valid() const noexcept {
  using S = StorageFormat;
  using C = ComputeFormat;
  return (storage == S::f64 && compute == C::f64) || (storage == S::f32 && compute == C::f32) ||
         (storage == S::f32 && compute == C::f64) || (storage == S::f16 && compute == C::f32) ||
         (storage == S::bf16 && compute == C::f32);
}

bool PrecisionMode::mixed() const noexcept {
  return !((storage == StorageFormat::f64 && compute == ComputeFormat::f64) ||
           (storage == StorageFormat::f32 && compute == ComputeFormat::f32));
}

std::size_t PrecisionMode::storage_bytes() const noexcept {
  switch (storage) {
    case StorageFormat::f64: return 8;
    case StorageFormat::f32: return 4;
    case StorageFormat::f16:
    case StorageFormat::bf16: return 2;
  }
  return 0;
}

std::string PrecisionMode::name() const {
  using S = StorageFormat;
  if (storage == S::f64) return "f64";
  if (storage == S::f32) return compute == ComputeFormat::f32 ? "f32" : "f32f64";
  if (storage == S::f16) return "f16f32";
  return "bf16f32";
}

PrecisionMode PrecisionMode::parse(std::string_view text) {
  using S = StorageFormat;
  using C = ComputeFormat;
  if (text == "f64") return {S::f64, C::f64};
  if (text == "f32") return {S::f32, C::f32};
  if (text == "f32f64") return {S::f32, C::f64};
  if (text == "f16f32") return {S::f16, C::f32};
  if (text == "bf16f32") return {S::bf16, C::f32};
  throw ConfigError("unknown precision '" + std::string(text) + "' (expected f64|f32|f32f64|f16f32|bf16f32)");
}

}  // namespace tvc
