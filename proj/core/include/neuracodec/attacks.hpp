#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "neuracodec/assignment.hpp"
#include "neuracodec/encoder.hpp"

namespace neuracodec {

// One 64-bit content hash per patch (plain) or token / output patch
// (encrypted). Positional signatures compare index by index; the others
// compare as multisets, which is all an attacker has after patch shuffling.
struct CollisionSignature {
  std::vector<std::uint64_t> hashes;
  bool positional = true;
};

// FNV-1a over the samples rounded to 6 decimal places.
std::uint64_t quantized_hash(std::span<const float> values);

CollisionSignature signature_from_rows(const Matrix& rows, bool positional = true);
CollisionSignature plain_signature(const ImageTensor& image, std::size_t patch_size);
CollisionSignature encrypted_signature(const EncryptedSample& sample, const EncoderConfig& config);

using CountMatrix = std::vector<std::vector<std::uint32_t>>;

std::uint32_t collision_count(const CollisionSignature& a, const CollisionSignature& b);

// Symmetric; diagonal equals the token count.
CountMatrix pairwise_collision_matrix(std::span<const CollisionSignature> signatures);

// L1 distance between row i of plain and row j of enc, each with its
// diagonal removed and sorted descending.
double signature_cost(const CountMatrix& plain, const CountMatrix& enc, std::size_t i, std::size_t j);

struct SignatureMatch {
  Assignment assignment;  // plain i -> encrypted column_of_row[i]
  CountMatrix plain_collisions;
  CountMatrix encrypted_collisions;
  bool no_collision_signal = false;
};

SignatureMatch match_signatures(std::span<const CollisionSignature> plain, std::span<const CollisionSignature> encrypted);

struct MatchPair {
  std::string plain;
  std::string encrypted;
  bool correct = false;
};

struct MatchReport {
  Scheme scheme = Scheme::color;
  std::size_t count = 0;
  std::vector<MatchPair> pairs;
  std::optional<double> accuracy;  // when manifest source names cover the plain set
  bool no_collision_signal = false;
  double total_cost = 0.0;
};

// Ciphertext-only matching: the encrypted samples are put in content-hash
// order, so the file order carries no correspondence.
MatchReport match_plain_encrypted(const std::filesystem::path& plain_dir, const std::filesystem::path& enc_dir);

std::string to_json(const MatchReport& report);

// Pearson correlation; nullopt when either side has zero variance.
std::optional<double> pearson(std::span<const float> a, std::span<const float> b);

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::uint64_t> counts;
};

Histogram histogram(std::span<const float> values, double lo, double hi, std::size_t bins = 32);

struct LeakageReport {
  Scheme scheme = Scheme::color;
  std::size_t count = 0;
  std::vector<std::string> sources;
  std::optional<std::vector<std::optional<double>>> pixel_correlation;  // colour scheme only
  std::optional<double> mean_abs_correlation;
  double mean_collision_rate = 0.0;
  Histogram plain_histogram;
  Histogram encrypted_histogram;
};

// Pure measurement; pairs plain files with encrypted samples by manifest order.
LeakageReport leakage_report(const std::filesystem::path& plain_dir, const std::filesystem::path& enc_dir);

std::string to_json(const LeakageReport& report);

}  // namespace neuracodec
