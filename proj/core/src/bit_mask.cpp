#include "ec2t/bit_mask.hpp"

#include <bit>
#include <string>

#include "ec2t/error.hpp"

namespace ec2t {

BitMask BitMask::from_bytes(std::size_t bits, std::vector<std::uint8_t> bytes) {
  if (bytes.size() != byte_length(bits)) {
    throw FormatError("mask of " + std::to_string(bits) + " bits needs " +
                      std::to_string(byte_length(bits)) + " bytes, got " + std::to_string(bytes.size()));
  }
  if (bits % 8 != 0 && (bytes.back() >> (bits % 8)) != 0) {
    throw FormatError("nonzero padding bits in packed mask");
  }
  BitMask mask;
  mask.bits_ = bits;
  mask.bytes_ = std::move(bytes);
  return mask;
}

void BitMask::push_back(bool value) {
  if (bits_ % 8 == 0) bytes_.push_back(0);
  ++bits_;
  set(bits_ - 1, value);
}

std::size_t BitMask::popcount() const noexcept {
  std::size_t count = 0;
  for (auto b : bytes_) count += static_cast<std::size_t>(std::popcount(b));
  return count;
}

}  // namespace ec2t
