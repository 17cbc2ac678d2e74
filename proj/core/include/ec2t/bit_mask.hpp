#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ec2t {

/// Packed bit array: bit i lives in byte i / 8 at position i % 8
/// (least-significant bit first). Padding bits in the final byte are zero.
class BitMask {
 public:
  BitMask() = default;
  explicit BitMask(std::size_t bits) : bits_(bits), bytes_(byte_length(bits), 0) {}

  // Adopts packed bytes. Throws FormatError when the byte count does not fit
  // `bits` or a padding bit is set.
  static BitMask from_bytes(std::size_t bits, std::vector<std::uint8_t> bytes);

  static constexpr std::size_t byte_length(std::size_t bits) noexcept { return (bits + 7) / 8; }

  std::size_t size() const noexcept { return bits_; }
  std::span<const std::uint8_t> bytes() const noexcept { return bytes_; }

  bool test(std::size_t i) const noexcept { return (bytes_[i >> 3] >> (i & 7)) & 1u; }
  void set(std::size_t i, bool value = true) noexcept {
    const auto bit = static_cast<std::uint8_t>(1u << (i & 7));
    if (value) {
      bytes_[i >> 3] |= bit;
    } else {
      bytes_[i >> 3] &= static_cast<std::uint8_t>(~bit);
    }
  }
  void push_back(bool value);

  std::size_t popcount() const noexcept;

  friend bool operator==(const BitMask&, const BitMask&) = default;

 private:
  std::size_t bits_ = 0;
  std::vector<std::uint8_t> bytes_;
};

}  // namespace ec2t
