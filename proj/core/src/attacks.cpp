#include "neuracodec/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>

#include "json.hpp"
#include "neuracodec/dataset.hpp"
#include "neuracodec/image_io.hpp"

namespace neuracodec {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t quantized_hash(std::span<const float> values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (float v : values) {
    auto q = static_cast<std::uint64_t>(std::llround(static_cast<double>(v) * 1e6));
    for (int i = 0; i < 8; ++i) {
      h ^= (q >> (8 * i)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

CollisionSignature signature_from_rows(const Matrix& rows, bool positional) {
  CollisionSignature s;
  s.positional = positional;
  s.hashes.reserve(rows.rows());
  for (std::size_t r = 0; r < rows.rows(); ++r) s.hashes.push_back(quantized_hash(rows.row(r)));
  return s;
}

CollisionSignature plain_signature(const ImageTensor& image, std::size_t patch_size) {
  return signature_from_rows(extract_patches(image, patch_size));
}

CollisionSignature encrypted_signature(const EncryptedSample& sample, const EncoderConfig& config) {
  if (const auto* img = std::get_if<ImageTensor>(&sample.payload))
    return signature_from_rows(extract_patches(*img, config.patch_size));
  const bool shuffled = config.scheme == Scheme::neuracrypt && config.patch_shuffle;
  return signature_from_rows(std::get<TokenMatrix>(sample.payload), !shuffled);
}

std::uint32_t collision_count(const CollisionSignature& a, const CollisionSignature& b) {
  if (a.hashes.size() != b.hashes.size())
    throw ShapeError("signature lengths differ: " + std::to_string(a.hashes.size()) + " vs " + std::to_string(b.hashes.size()));
  std::uint32_t count = 0;
  if (a.positional && b.positional) {
    for (std::size_t k = 0; k < a.hashes.size(); ++k) count += a.hashes[k] == b.hashes[k];
    return count;
  }
  auto x = a.hashes, y = b.hashes;
  std::ranges::sort(x);
  std::ranges::sort(y);
  std::size_t i = 0, j = 0;
  while (i < x.size() && j < y.size()) {
    if (x[i] == y[j]) {
      ++count, ++i, ++j;
    } else if (x[i] < y[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return count;
}

CountMatrix pairwise_collision_matrix(std::span<const CollisionSignature> signatures) {
  const std::size_t n = signatures.size();
  CountMatrix m(n, std::vector<std::uint32_t>(n, 0));
  for (std::size_t a = 0; a < n; ++a) {
    m[a][a] = collision_count(signatures[a], signatures[a]);
    for (std::size_t b = a + 1; b < n; ++b) m[a][b] = m[b][a] = collision_count(signatures[a], signatures[b]);
  }
  return m;
}

namespace {

std::vector<std::uint32_t> sorted_offdiagonal(const CountMatrix& m, std::size_t i) {
  std::vector<std::uint32_t> row;
  row.reserve(m.size());
  for (std::size_t k = 0; k < m[i].size(); ++k)
    if (k != i) row.push_back(m[i][k]);
  std::ranges::sort(row, std::greater<>());
  return row;
}

bool has_offdiagonal(const CountMatrix& m) {
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m.size(); ++j)
      if (i != j && m[i][j] != 0) return true;
  return false;
}

}  // namespace

double signature_cost(const CountMatrix& plain, const CountMatrix& enc, std::size_t i, std::size_t j) {
  if (plain.size() != enc.size()) throw ShapeError("collision matrices differ in size");
  if (i >= plain.size() || j >= enc.size()) throw ShapeError("signature index out of range");
  const auto a = sorted_offdiagonal(plain, i);
  const auto b = sorted_offdiagonal(enc, j);
  double cost = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) cost += std::abs(static_cast<double>(a[k]) - static_cast<double>(b[k]));
  return cost;
}

SignatureMatch match_signatures(std::span<const CollisionSignature> plain, std::span<const CollisionSignature> encrypted) {
  if (plain.size() != encrypted.size())
    throw DataError("plain and encrypted sets differ in size: " + std::to_string(plain.size()) + " vs " +
                    std::to_string(encrypted.size()));
  SignatureMatch match;
  match.plain_collisions = pairwise_collision_matrix(plain);
  match.encrypted_collisions = pairwise_collision_matrix(encrypted);
  const std::size_t n = plain.size();
  CostMatrix cost(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cost(i, j) = signature_cost(match.plain_collisions, match.encrypted_collisions, i, j);
  match.assignment = hungarian_assign(cost);
  match.no_collision_signal = n > 1 && (!has_offdiagonal(match.plain_collisions) || !has_offdiagonal(match.encrypted_collisions));
  return match;
}

MatchReport match_plain_encrypted(const fs::path& plain_dir, const fs::path& enc_dir) {
  const DatasetManifest manifest = read_manifest(enc_dir);
  const auto& cfg = manifest.config;
  const auto plain_files = list_images(plain_dir);
  if (plain_files.size() != manifest.samples.size())
    throw DataError("plain set has " + std::to_string(plain_files.size()) + " images but encrypted set has " +
                    std::to_string(manifest.samples.size()));

  std::vector<std::string> plain_names;
  std::vector<CollisionSignature> plain_sigs;
  for (const auto& f : plain_files) {
    const ImageTensor img = load_image(f);
    if (img.channels() != cfg.channels || img.height() != cfg.height || img.width() != cfg.width)
      throw DataError(f.filename().string() + " does not match the manifest geometry");
    plain_names.push_back(f.filename().string());
    plain_sigs.push_back(plain_signature(img, cfg.patch_size));
  }

  // Attacker's view: ciphertexts in an order derived from their content only.
  struct Cipher {
    Digest digest;
    const ManifestEntry* entry;
    CollisionSignature signature;
  };
  std::vector<Cipher> ciphers;
  for (const auto& entry : manifest.samples) {
    const EncryptedSample sample = load_encrypted(enc_dir, manifest, entry);
    const auto values = sample.values();
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(values.data());
    ciphers.push_back({sha256(std::span(bytes, values.size_bytes())), &entry, encrypted_signature(sample, cfg)});
  }
  std::ranges::sort(ciphers, [](const Cipher& a, const Cipher& b) { return a.digest < b.digest; });
  std::vector<CollisionSignature> enc_sigs;
  for (const auto& c : ciphers) enc_sigs.push_back(c.signature);

  const SignatureMatch match = match_signatures(plain_sigs, enc_sigs);

  MatchReport report;
  report.scheme = cfg.scheme;
  report.count = plain_names.size();
  report.no_collision_signal = match.no_collision_signal;
  report.total_cost = match.assignment.cost;
  std::set<std::string> sources;
  for (const auto& e : manifest.samples) sources.insert(e.source);
  const bool ground_truth = std::ranges::all_of(plain_names, [&](const std::string& n) { return sources.contains(n); });
  std::size_t correct = 0;
  for (std::size_t i = 0; i < plain_names.size(); ++i) {
    const ManifestEntry& e = *ciphers[match.assignment.column_of_row[i]].entry;
    MatchPair pair{plain_names[i], e.output, e.source == plain_names[i]};
    correct += pair.correct;
    report.pairs.push_back(std::move(pair));
  }
  if (ground_truth && report.count > 0) report.accuracy = static_cast<double>(correct) / static_cast<double>(report.count);
  return report;
}

std::string to_json(const MatchReport& r) {
  json pairs = json::array();
  for (const auto& p : r.pairs) {
    json e{{"plain", p.plain}, {"encrypted", p.encrypted}};
    if (r.accuracy) e["correct"] = p.correct;
    pairs.push_back(std::move(e));
  }
  json j{{"attack", "collision_matching"},
         {"scheme", std::string(to_string(r.scheme))},
         {"count", r.count},
         {"assignment", std::move(pairs)},
         {"total_cost", r.total_cost},
         {"no_collision_signal", r.no_collision_signal},
         {"accuracy", r.accuracy ? json(*r.accuracy) : json(nullptr)}};
  return j.dump(2);
}

std::optional<double> pearson(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw ShapeError("pearson inputs differ in length");
  if (a.empty()) return std::nullopt;
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

Histogram histogram(std::span<const float> values, double lo, double hi, std::size_t bins) {
  if (bins == 0) throw ConfigError("histogram needs at least one bin");
  Histogram h{lo, hi, std::vector<std::uint64_t>(bins, 0)};
  const double width = hi > lo ? (hi - lo) / static_cast<double>(bins) : 1.0;
  for (float v : values) {
    const double t = (static_cast<double>(v) - lo) / width;
    const auto k = static_cast<std::ptrdiff_t>(std::floor(t));
    h.counts[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(bins) - 1))]++;
  }
  return h;
}

LeakageReport leakage_report(const fs::path& plain_dir, const fs::path& enc_dir) {
  const DatasetManifest manifest = read_manifest(enc_dir);
  const auto& cfg = manifest.config;
  LeakageReport report;
  report.scheme = cfg.scheme;
  report.count = manifest.samples.size();

  std::vector<const ManifestEntry*> order;
  for (const auto& e : manifest.samples) order.push_back(&e);
  std::ranges::sort(order, {}, &ManifestEntry::image_index);

  std::vector<float> plain_all, enc_all;
  std::vector<CollisionSignature> enc_sigs;
  std::vector<std::optional<double>> correlations;
  for (const auto* e : order) {
    const ImageTensor plain = load_image(plain_dir / e->source);
    if (plain.channels() != cfg.channels || plain.height() != cfg.height || plain.width() != cfg.width)
      throw DataError(e->source + " does not match the manifest geometry");
    const EncryptedSample enc = load_encrypted(enc_dir, manifest, *e);
    report.sources.push_back(e->source);
    plain_all.insert(plain_all.end(), plain.values().begin(), plain.values().end());
    enc_all.insert(enc_all.end(), enc.values().begin(), enc.values().end());
    enc_sigs.push_back(encrypted_signature(enc, cfg));
    if (enc.is_image()) correlations.push_back(pearson(plain.values(), enc.values()));
  }

  if (cfg.scheme == Scheme::color) {
    double sum = 0.0;
    std::size_t defined = 0;
    for (const auto& c : correlations)
      if (c) {
        sum += std::abs(*c);
        ++defined;
      }
    if (defined > 0) report.mean_abs_correlation = sum / static_cast<double>(defined);
    report.pixel_correlation = std::move(correlations);
  }

  const auto counts = pairwise_collision_matrix(enc_sigs);
  const std::size_t n = counts.size();
  if (n > 1) {
    double rate = 0.0;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) rate += static_cast<double>(counts[a][b]) / static_cast<double>(cfg.token_count());
    report.mean_collision_rate = rate / static_cast<double>(n * (n - 1) / 2);
  }

  report.plain_histogram = histogram(plain_all, 0.0, 1.0);
  report.encrypted_histogram = histogram(enc_all, manifest.value_min, manifest.value_max);
  return report;
}

std::string to_json(const LeakageReport& r) {
  auto hist = [](const Histogram& h) { return json{{"lo", h.lo}, {"hi", h.hi}, {"counts", h.counts}}; };
  json j{{"report", "leakage"},
         {"scheme", std::string(to_string(r.scheme))},
         {"count", r.count},
         {"sources", r.sources},
         {"mean_collision_rate", r.mean_collision_rate},
         {"plain_histogram", hist(r.plain_histogram)},
         {"encrypted_histogram", hist(r.encrypted_histogram)}};
  if (r.pixel_correlation) {
    json c = json::array();
    for (const auto& v : *r.pixel_correlation) c.push_back(v ? json(*v) : json(nullptr));
    j["pixel_correlation"] = std::move(c);
    j["mean_abs_correlation"] = r.mean_abs_correlation ? json(*r.mean_abs_correlation) : json(nullptr);
  } else {
    j["pixel_correlation"] = "N/A";
    j["mean_abs_correlation"] = "N/A";
  }
  return j.dump(2);
}

}  // namespace neuracodec
