#include "ec2t/half.hpp"

#include <bit>

namespace ec2t {

Half float_to_half(float value) noexcept {
  const std::uint32_t f = std::bit_cast<std::uint32_t>(value);
  const std::uint32_t sign = (f >> 16) & 0x8000u;
  const std::uint32_t exp = (f >> 23) & 0xFFu;
  std::uint32_t mant = f & 0x7FFFFFu;

  if (exp == 0xFFu) {
    if (mant == 0) return static_cast<Half>(sign | 0x7C00u);
    return static_cast<Half>(sign | 0x7E00u | (mant >> 13));
  }

  const int unbiased = static_cast<int>(exp) - 127;
  if (unbiased > 15) return static_cast<Half>(sign | 0x7C00u);

  if (unbiased >= -14) {
    // Normal half. Round the 23-bit mantissa to 10 bits, ties to even. A carry
    // out of the mantissa correctly bumps the exponent (possibly to infinity).
    std::uint32_t half = (static_cast<std::uint32_t>(unbiased + 15) << 10) | (mant >> 13);
    const std::uint32_t rest = mant & 0x1FFFu;
    if (rest > 0x1000u || (rest == 0x1000u && (half & 1u))) ++half;
    return static_cast<Half>(sign | half);
  }

  // Subnormal half: value = mant_h * 2^-24. Shift the full 24-bit significand.
  if (unbiased < -25) return static_cast<Half>(sign);  // below half the smallest subnormal
  if (exp != 0) mant |= 0x800000u;
  const int shift = -unbiased - 1;  // 14..24 ; 24-bit significand -> value / 2^-24
  const std::uint32_t shifted = mant >> shift;
  const std::uint32_t rest = mant & ((1u << shift) - 1u);
  const std::uint32_t halfway = 1u << (shift - 1);
  std::uint32_t half = shifted;
  if (rest > halfway || (rest == halfway && (half & 1u))) ++half;
  return static_cast<Half>(sign | half);
}

float half_to_float(Half bits) noexcept {
  const std::uint32_t sign = static_cast<std::uint32_t>(bits & 0x8000u) << 16;
  const std::uint32_t exp = (bits >> 10) & 0x1Fu;
  std::uint32_t mant = bits & 0x3FFu;

  if (exp == 0x1Fu) return std::bit_cast<float>(sign | 0x7F800000u | (mant << 13));
  if (exp != 0) return std::bit_cast<float>(sign | ((exp + 112u) << 23) | (mant << 13));
  if (mant == 0) return std::bit_cast<float>(sign);

  int e = -1;
  do {
    ++e;
    mant <<= 1;
  } while ((mant & 0x400u) == 0);
  return std::bit_cast<float>(sign | (static_cast<std::uint32_t>(112 - e) << 23) | ((mant & 0x3FFu) << 13));
}

}  // namespace ec2t
