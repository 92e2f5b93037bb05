#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace chimera {

/// A SHA-256 digest, stored in big-endian output order.
struct Hash256 {
  std::array<std::uint8_t, 32> bytes{};

  std::string hex() const;
  /// Parses exactly 64 hex characters; throws InvalidArgument otherwise.
  static Hash256 from_hex(std::string_view hex);

  Hash256 operator~() const;
  friend bool operator==(const Hash256&, const Hash256&) = default;
};

/// Incremental FIPS 180-4 SHA-256.
class Sha256 {
 public:
  Sha256();

  void update(std::span<const std::uint8_t> data);
  void update(std::string_view data);
  Hash256 finish();

 private:
  void compress(const std::uint8_t* block);

  std::array<std::uint32_t, 8> state_;
  std::array<std::uint8_t, 64> buffer_{};
  std::size_t buffered_ = 0;
  std::uint64_t total_bytes_ = 0;
};

Hash256 sha256_digest(std::span<const std::uint8_t> message);
Hash256 sha256_digest(std::string_view message);

}  // namespace chimera
