#pragma once

#include <cstdint>

namespace ec2t {

/// IEEE-754 binary16 stored as raw bits.
using Half = std::uint16_t;

/// Round-to-nearest-even conversion; overflow goes to infinity, NaN stays NaN.
Half float_to_half(float value) noexcept;

/// Exact widening conversion.
float half_to_float(Half bits) noexcept;

inline float round_through_half(float value) noexcept { return half_to_float(float_to_half(value)); }

}  // namespace ec2t
