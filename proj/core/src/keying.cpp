#include "neuracodec/keying.hpp"

#include <openssl/evp.h>
#include <openssl/rand.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "neuracodec/errors.hpp"

namespace neuracodec {

namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

Digest sha256(std::span<const std::uint8_t> data) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size())
    throw std::runtime_error("SHA-256 failed");
  return out;
}

Digest sha256(std::string_view text) {
  return sha256(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 0xF]);
  }
  return s;
}

MasterKey MasterKey::parse(std::string_view hex) {
  for (std::size_t i = 0; i < hex.size() && i < kSize * 2; ++i) {
    if (hex_value(hex[i]) < 0)
      throw KeyParseError(i, "invalid hex digit at position " + std::to_string(i));
  }
  if (hex.size() != kSize * 2) {
    const std::size_t pos = std::min(hex.size(), kSize * 2);
    throw KeyParseError(pos, "key must be exactly 64 hex characters, got " + std::to_string(hex.size()) +
                                 " (position " + std::to_string(pos) + ")");
  }
  Bytes bytes{};
  for (std::size_t i = 0; i < kSize; ++i)
    bytes[i] = static_cast<std::uint8_t>(hex_value(hex[2 * i]) << 4 | hex_value(hex[2 * i + 1]));
  return MasterKey(bytes);
}

MasterKey MasterKey::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read key file " + path.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::string rest;
  if (in >> rest) throw KeyParseError(line.size(), "key file " + path.string() + " has trailing content");
  return parse(line);
}

MasterKey MasterKey::random() {
  Bytes bytes{};
  if (RAND_bytes(bytes.data(), static_cast<int>(bytes.size())) != 1)
    throw std::runtime_error("OS entropy source unavailable");
  return MasterKey(bytes);
}

struct KeyStream::CipherState {
  EVP_CIPHER_CTX* ctx = nullptr;
  ~CipherState() { EVP_CIPHER_CTX_free(ctx); }
};

KeyStream::KeyStream(const MasterKey& key, std::string_view label) : cipher_(std::make_unique<CipherState>()) {
  const Digest digest = sha256(label);
  // OpenSSL's ChaCha20 IV is the 32-bit LE block counter followed by the 96-bit nonce.
  std::array<std::uint8_t, 16> iv{};
  std::copy_n(digest.begin(), 12, iv.begin() + 4);
  cipher_->ctx = EVP_CIPHER_CTX_new();
  if (cipher_->ctx == nullptr ||
      EVP_EncryptInit_ex(cipher_->ctx, EVP_chacha20(), nullptr, key.bytes().data(), iv.data()) != 1)
    throw std::runtime_error("ChaCha20 initialisation failed");
}

KeyStream::~KeyStream() = default;
KeyStream::KeyStream(KeyStream&&) noexcept = default;
KeyStream& KeyStream::operator=(KeyStream&&) noexcept = default;

void KeyStream::refill() {
  static constexpr std::array<std::uint8_t, 64> kZeros{};
  int len = 0;
  if (EVP_EncryptUpdate(cipher_->ctx, block_.data(), &len, kZeros.data(), static_cast<int>(kZeros.size())) != 1 ||
      len != 64)
    throw std::runtime_error("ChaCha20 keystream generation failed");
  used_ = 0;
}

void KeyStream::read(std::span<std::uint8_t> out) {
  std::size_t done = 0;
  while (done < out.size()) {
    if (used_ == block_.size()) refill();
    const std::size_t take = std::min(out.size() - done, block_.size() - used_);
    std::copy_n(block_.begin() + static_cast<std::ptrdiff_t>(used_), take, out.begin() + static_cast<std::ptrdiff_t>(done));
    used_ += take;
    done += take;
  }
}

std::uint32_t KeyStream::next_u32() {
  std::array<std::uint8_t, 4> b{};
  read(b);
  return std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 | std::uint32_t{b[2]} << 16 | std::uint32_t{b[3]} << 24;
}

double sample_uniform(KeyStream& stream) { return std::ldexp(static_cast<double>(stream.next_u32()), -32); }

std::vector<float> sample_gaussian(KeyStream& stream, std::size_t n, float mean, float stddev) {
  if (!(stddev > 0.0f)) throw ConfigError("gaussian standard deviation must be positive");
  constexpr double kFloor = 0x1p-32;
  std::vector<float> out;
  out.reserve(n);
  while (out.size() < n) {
    const double u1 = std::max(sample_uniform(stream), kFloor);
    const double u2 = sample_uniform(stream);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    out.push_back(static_cast<float>(mean + stddev * radius * std::cos(angle)));
    if (out.size() < n) out.push_back(static_cast<float>(mean + stddev * radius * std::sin(angle)));
  }
  return out;
}

std::vector<std::uint32_t> sample_permutation(KeyStream& stream, std::size_t n) {
  if (n == 0) throw ConfigError("permutation length must be at least 1");
  std::vector<std::uint32_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<std::uint32_t>(i);
  for (std::size_t i = n - 1; i >= 1; --i) {
    const std::uint64_t bound = i + 1;
    const std::uint64_t limit = ((std::uint64_t{1} << 32) / bound) * bound;
    std::uint64_t v = stream.next_u32();
    while (v >= limit) v = stream.next_u32();
    std::swap(perm[i], perm[v % bound]);
  }
  return perm;
}

}  // namespace neuracodec
