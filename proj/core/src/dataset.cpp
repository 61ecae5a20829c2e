#include "neuracodec/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <limits>
#include <optional>
#include <thread>

#include "neuracodec/image_io.hpp"
#include "neuracodec/tensor_file.hpp"

namespace fs = std::filesystem;

namespace neuracodec {

namespace {

std::string timestamp_utc() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) now = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r\n") - first + 1);
}

}  // namespace

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && is_image_file(entry.path())) out.push_back(entry.path());
  std::ranges::sort(out, [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  return out;
}

std::map<std::string, std::int64_t> read_labels(const fs::path& dir) {
  std::map<std::string, std::int64_t> labels;
  std::ifstream in(dir / "labels.csv");
  if (!in) return labels;
  std::string line;
  std::getline(in, line);
  if (trim(line) != "name,label") throw FormatError((dir / "labels.csv").string() + ": header must be 'name,label'");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw FormatError("labels.csv line " + std::to_string(lineno) + ": expected name,label");
    const std::string name = trim(line.substr(0, comma));
    const std::string value = trim(line.substr(comma + 1));
    char* end = nullptr;
    const long long label = std::strtoll(value.c_str(), &end, 10);
    if (value.empty() || *end != '\0') throw FormatError("labels.csv line " + std::to_string(lineno) + ": label is not an integer");
    labels[name] = label;
  }
  return labels;
}

std::string encrypted_name(const std::string& source) { return source + ".nct"; }
std::string png_name(const std::string& source) { return source + ".enc.png"; }
std::string plain_png_name(const std::string& source) { return source + ".plain.png"; }

DatasetManifest encrypt_dataset(const fs::path& src_dir, const MasterKey& key, const EncoderConfig& config,
                                const fs::path& dst_dir, const DatasetOptions& options) {
  config.validate();
  const auto files = list_images(src_dir);
  if (files.empty()) throw DataError("no loadable images (.png/.ppm) in " + src_dir.string());
  if (options.export_png && config.scheme != Scheme::color)
    throw ConfigError("PNG export is only available for the color scheme");
  const auto labels = read_labels(src_dir);

  // Geometry check up front so a mixed directory fails before any output is written.
  std::vector<ImageTensor> images;
  images.reserve(files.size());
  std::vector<std::string> offending;
  for (const auto& f : files) {
    images.push_back(load_image(f));
    const auto& img = images.back();
    if (img.channels() != config.channels || img.height() != config.height || img.width() != config.width)
      offending.push_back(f.filename().string() + " (" + std::to_string(img.channels()) + "x" +
                          std::to_string(img.height()) + "x" + std::to_string(img.width()) + ")");
  }
  if (!offending.empty()) {
    std::string msg = "images do not match configured geometry " + std::to_string(config.channels) + "x" +
                      std::to_string(config.height) + "x" + std::to_string(config.width) + ":";
    for (const auto& o : offending) msg += " " + o;
    throw DataError(msg);
  }

  fs::create_directories(dst_dir);
  const Encoder encoder(key, config);
  const std::size_t n = files.size();
  std::vector<std::optional<EncryptedSample>> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        auto sample = encoder.encrypt(images[i], i, options.encrypt);
        const std::string name = files[i].filename().string();
        if (sample.is_image())
          save_tensor(dst_dir / encrypted_name(name), std::get<ImageTensor>(sample.payload));
        else
          save_tensor(dst_dir / encrypted_name(name), std::get<TokenMatrix>(sample.payload));
        results[i] = std::move(sample);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned jobs = std::clamp<unsigned>(options.jobs, 1, static_cast<unsigned>(n));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
    worker();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  DatasetManifest manifest;
  manifest.config = config;
  manifest.key_fingerprint = key.fingerprint();
  manifest.created = timestamp_utc();
  float lo = std::numeric_limits<float>::infinity();
  float hi = -std::numeric_limits<float>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& sample = *results[i];
    const auto [mn, mx] = std::ranges::minmax(sample.values());
    lo = std::min(lo, mn);
    hi = std::max(hi, mx);
    ManifestEntry entry;
    entry.source = files[i].filename().string();
    entry.output = encrypted_name(entry.source);
    entry.image_index = i;
    if (auto it = labels.find(entry.source); it != labels.end()) entry.label = it->second;
    entry.permutation = sample.permutation;
    manifest.samples.push_back(std::move(entry));
  }
  manifest.value_min = lo;
  manifest.value_max = hi;

  if (options.export_png) {
    // A constant dataset would give an empty window; widen it so export stays defined.
    const float png_hi = hi > lo ? hi : lo + 1.0f;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& name = manifest.samples[i].source;
      export_png(std::get<ImageTensor>(results[i]->payload), lo, png_hi, dst_dir / png_name(name));
      if (images[i].channels() == 1 || images[i].channels() == 3) save_png(images[i], dst_dir / plain_png_name(name));
    }
  }

  write_manifest(dst_dir, manifest);
  return manifest;
}

EncryptedSample load_encrypted(const fs::path& enc_dir, const DatasetManifest& manifest, const ManifestEntry& entry) {
  const Tensor t = load_tensor(enc_dir / entry.output);
  const auto& cfg = manifest.config;
  EncryptedSample sample;
  if (cfg.scheme == Scheme::color) {
    auto img = to_image(t);
    if (img.channels() != cfg.channels || img.height() != cfg.height || img.width() != cfg.width)
      throw ShapeError(entry.output + ": encrypted image shape disagrees with manifest config");
    sample.payload = std::move(img);
  } else {
    auto m = to_matrix(t);
    if (m.rows() != cfg.token_count() || m.cols() != cfg.output_dim)
      throw ShapeError(entry.output + ": token matrix shape disagrees with manifest config");
    sample.payload = std::move(m);
  }
  sample.permutation = entry.permutation;
  return sample;
}

}  // namespace neuracodec
