#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "neuracodec/manifest.hpp"

namespace neuracodec {

// Loadable image files in a directory, sorted by file name.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

// Optional labels.csv with header "name,label". Missing file gives an empty map.
std::map<std::string, std::int64_t> read_labels(const std::filesystem::path& dir);

struct DatasetOptions {
  unsigned jobs = 1;
  bool export_png = false;  // colour scheme only
  EncryptOptions encrypt;
};

// Encrypts every image in src_dir into dst_dir as "<name>.nct" tensor files
// and writes manifest.json. Indices follow lexicographic source order, so
// output bytes do not depend on `jobs`.
DatasetManifest encrypt_dataset(const std::filesystem::path& src_dir, const MasterKey& key, const EncoderConfig& config,
                                const std::filesystem::path& dst_dir, const DatasetOptions& options = {});

std::string encrypted_name(const std::string& source);
std::string png_name(const std::string& source);
std::string plain_png_name(const std::string& source);

// Loads a stored encrypted sample back as the variant the scheme produces.
EncryptedSample load_encrypted(const std::filesystem::path& enc_dir, const DatasetManifest& manifest,
                               const ManifestEntry& entry);

}  // namespace neuracodec
