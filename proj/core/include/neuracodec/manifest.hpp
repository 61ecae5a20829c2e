#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "neuracodec/encoder.hpp"

namespace neuracodec {

inline constexpr int kManifestVersion = 1;
inline constexpr std::string_view kManifestName = "manifest.json";

struct ManifestEntry {
  std::string source;
  std::string output;
  std::uint64_t image_index = 0;
  std::optional<std::int64_t> label;
  std::optional<std::vector<std::uint32_t>> permutation;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

// Provenance for one encrypted dataset. Holds the key fingerprint, never the key.
struct DatasetManifest {
  int format_version = kManifestVersion;
  EncoderConfig config;
  std::string key_fingerprint;
  std::vector<ManifestEntry> samples;
  float value_min = 0.0f;
  float value_max = 0.0f;
  std::string created;

  // Throws FormatError on non-contiguous indices or min > max.
  void validate() const;
  bool matches(const MasterKey& key) const { return key.fingerprint() == key_fingerprint; }

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

std::string to_json(const DatasetManifest& manifest);
DatasetManifest parse_manifest(std::string_view json);

void write_manifest(const std::filesystem::path& dir, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& dir);

std::string encoder_config_json(const EncoderConfig& config);

}  // namespace neuracodec
