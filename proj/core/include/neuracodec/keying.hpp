#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace neuracodec {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::span<const std::uint8_t> data);
Digest sha256(std::string_view text);
std::string to_hex(std::span<const std::uint8_t> bytes);

// 256-bit secret. Every random parameter of an encoder is derived from it.
class MasterKey {
 public:
  static constexpr std::size_t kSize = 32;
  using Bytes = std::array<std::uint8_t, kSize>;

  MasterKey() = default;
  explicit MasterKey(const Bytes& bytes) : bytes_(bytes) {}

  // Exactly 64 hex characters, either case. Throws KeyParseError.
  static MasterKey parse(std::string_view hex);
  // Reads a key file: one line of 64 hex chars, trailing newline optional.
  static MasterKey load(const std::filesystem::path& path);
  // 32 bytes from the operating system's entropy source.
  static MasterKey random();

  const Bytes& bytes() const noexcept { return bytes_; }
  std::string hex() const { return to_hex(bytes_); }
  // Hex SHA-256 of the key bytes; safe to publish.
  std::string fingerprint() const { return to_hex(sha256(bytes_)); }

  friend bool operator==(const MasterKey&, const MasterKey&) = default;

 private:
  Bytes bytes_{};
};

// ChaCha20 keystream keyed by the master key, nonce = SHA-256(label)[0..12),
// block counter starting at zero. Single consumer; move-only.
class KeyStream {
 public:
  KeyStream(const MasterKey& key, std::string_view label);
  ~KeyStream();
  KeyStream(KeyStream&&) noexcept;
  KeyStream& operator=(KeyStream&&) noexcept;
  KeyStream(const KeyStream&) = delete;
  KeyStream& operator=(const KeyStream&) = delete;

  void read(std::span<std::uint8_t> out);
  std::uint32_t next_u32();  // 4 bytes, little-endian

 private:
  void refill();

  struct CipherState;
  std::unique_ptr<CipherState> cipher_;
  std::array<std::uint8_t, 64> block_{};
  std::size_t used_ = 64;
};

// v / 2^32 for the next little-endian u32 v. Always in [0,1).
double sample_uniform(KeyStream& stream);

// Box-Muller over consecutive uniform pairs; odd n drops the last spare.
std::vector<float> sample_gaussian(KeyStream& stream, std::size_t n, float mean, float stddev);

// Unbiased Fisher-Yates (rejection sampled swap indices).
std::vector<std::uint32_t> sample_permutation(KeyStream& stream, std::size_t n);

}  // namespace neuracodec
