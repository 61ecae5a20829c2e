#include "neuracodec/manifest.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace neuracodec {

using nlohmann::json;

namespace {

json config_to_json(const EncoderConfig& c) {
  return json{{"scheme", std::string(to_string(c.scheme))},
              {"channels", c.channels},
              {"height", c.height},
              {"width", c.width},
              {"patch_size", c.patch_size},
              {"hidden_width", c.hidden_width},
              {"depth", c.depth},
              {"output_dim", c.output_dim},
              {"patch_shuffle", c.patch_shuffle}};
}

EncoderConfig config_from_json(const json& j) {
  EncoderConfig c;
  c.scheme = parse_scheme(j.at("scheme").get<std::string>());
  c.channels = j.at("channels").get<std::size_t>();
  c.height = j.at("height").get<std::size_t>();
  c.width = j.at("width").get<std::size_t>();
  c.patch_size = j.at("patch_size").get<std::size_t>();
  c.hidden_width = j.at("hidden_width").get<std::size_t>();
  c.depth = j.at("depth").get<std::size_t>();
  c.output_dim = j.at("output_dim").get<std::size_t>();
  c.patch_shuffle = j.at("patch_shuffle").get<bool>();
  return c;
}

}  // namespace

void DatasetManifest::validate() const {
  if (format_version != kManifestVersion)
    throw FormatError("unsupported manifest version " + std::to_string(format_version));
  std::vector<bool> seen(samples.size(), false);
  for (const auto& s : samples) {
    if (s.image_index >= samples.size() || seen[s.image_index])
      throw FormatError("manifest image indices must be unique and contiguous from 0");
    seen[s.image_index] = true;
  }
  if (!(value_min <= value_max)) throw FormatError("manifest value range has min > max");
  config.validate();
}

std::string encoder_config_json(const EncoderConfig& config) { return config_to_json(config).dump(); }

std::string to_json(const DatasetManifest& m) {
  json samples = json::array();
  for (const auto& s : m.samples) {
    json e{{"source", s.source}, {"output", s.output}, {"image_index", s.image_index}};
    if (s.label) e["label"] = *s.label;
    if (s.permutation) e["permutation"] = *s.permutation;
    samples.push_back(std::move(e));
  }
  json j{{"format_version", m.format_version},
         {"scheme", std::string(to_string(m.config.scheme))},
         {"config", config_to_json(m.config)},
         {"key_fingerprint", m.key_fingerprint},
         {"samples", std::move(samples)},
         {"value_range", {{"min", m.value_min}, {"max", m.value_max}}},
         {"created", m.created}};
  return j.dump(2) + "\n";
}

DatasetManifest parse_manifest(std::string_view text) {
  DatasetManifest m;
  try {
    const json j = json::parse(text);
    m.format_version = j.at("format_version").get<int>();
    m.config = config_from_json(j.at("config"));
    if (parse_scheme(j.at("scheme").get<std::string>()) != m.config.scheme)
      throw FormatError("manifest scheme disagrees with its config");
    m.key_fingerprint = j.at("key_fingerprint").get<std::string>();
    for (const auto& e : j.at("samples")) {
      ManifestEntry s;
      s.source = e.at("source").get<std::string>();
      s.output = e.at("output").get<std::string>();
      s.image_index = e.at("image_index").get<std::uint64_t>();
      if (e.contains("label")) s.label = e.at("label").get<std::int64_t>();
      if (e.contains("permutation")) s.permutation = e.at("permutation").get<std::vector<std::uint32_t>>();
      m.samples.push_back(std::move(s));
    }
    m.value_min = j.at("value_range").at("min").get<float>();
    m.value_max = j.at("value_range").at("max").get<float>();
    m.created = j.value("created", "");
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }
  m.validate();
  return m;
}

void write_manifest(const std::filesystem::path& dir, const DatasetManifest& manifest) {
  const auto path = dir / kManifestName;
  std::ofstream out(path, std::ios::trunc);
  out << to_json(manifest);
  if (!out) throw DataError("cannot write " + path.string());
}

DatasetManifest read_manifest(const std::filesystem::path& dir) {
  const auto path = std::filesystem::is_directory(dir) ? dir / kManifestName : dir;
  std::ifstream in(path);
  if (!in) throw DataError("cannot read manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str());
}

}  // namespace neuracodec
