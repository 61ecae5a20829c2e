#include "neuracodec/encoder.hpp"

#include <algorithm>
#include <cmath>

namespace neuracodec {

namespace {

void check_vector(const std::vector<float>& v, std::size_t n, const char* what) {
  if (v.size() != n) throw ShapeError(std::string(what) + " has length " + std::to_string(v.size()) + ", expected " + std::to_string(n));
}

void check_matrix(const Matrix& m, std::size_t rows, std::size_t cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols)
    throw ShapeError(std::string(what) + " is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ", expected " +
                     std::to_string(rows) + "x" + std::to_string(cols));
}

Matrix gaussian_matrix(const MasterKey& key, std::string_view label, std::size_t rows, std::size_t cols, double variance) {
  KeyStream stream(key, label);
  return Matrix(rows, cols, sample_gaussian(stream, rows * cols, 0.0f, static_cast<float>(std::sqrt(variance))));
}

// y = W x + b with the dot product accumulated in index order, single precision.
void affine(const Matrix& w, std::span<const float> x, std::span<const float> bias, std::span<float> y) {
  const std::size_t in = w.cols();
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const float* wr = w.row(i).data();
    float acc = 0.0f;
    for (std::size_t j = 0; j < in; ++j) acc += wr[j] * x[j];
    y[i] = acc + bias[i];
  }
}

void relu(std::span<float> v) {
  for (float& x : v) x = x > 0.0f ? x : 0.0f;
}

}  // namespace

std::string_view to_string(Scheme scheme) { return scheme == Scheme::color ? "color" : "neuracrypt"; }

Scheme parse_scheme(std::string_view name) {
  if (name == "neuracrypt") return Scheme::neuracrypt;
  if (name == "color") return Scheme::color;
  throw ConfigError("unknown scheme '" + std::string(name) + "' (expected neuracrypt or color)");
}

void PatchGeometry::validate() const {
  if (channels == 0 || height == 0 || width == 0) throw ShapeError("image dimensions must be positive");
  if (patch_size == 0) throw ShapeError("patch size must be positive");
  if (height % patch_size != 0 || width % patch_size != 0)
    throw ShapeError("patch size " + std::to_string(patch_size) + " does not divide image size " + std::to_string(height) +
                     "x" + std::to_string(width));
}

EncoderConfig EncoderConfig::defaults(Scheme scheme) {
  EncoderConfig c;
  c.scheme = scheme;
  if (scheme == Scheme::color) {
    c.output_dim = c.patch_dim();
    c.patch_shuffle = false;
  }
  return c;
}

EncoderConfig EncoderConfig::toy(Scheme scheme) {
  EncoderConfig c = defaults(scheme);
  c.height = c.width = 32;
  c.patch_size = 8;
  c.hidden_width = 192;
  c.output_dim = c.patch_dim();
  return c;
}

void EncoderConfig::validate() const {
  if (channels == 0 || height == 0 || width == 0) throw ConfigError("image dimensions must be positive");
  if (patch_size == 0) throw ConfigError("patch size must be positive");
  if (height % patch_size != 0 || width % patch_size != 0)
    throw ConfigError("patch size " + std::to_string(patch_size) + " must divide image height " + std::to_string(height) +
                      " and width " + std::to_string(width));
  if (hidden_width == 0) throw ConfigError("hidden width must be positive");
  if (output_dim == 0) throw ConfigError("output dimension must be positive");
  if (scheme == Scheme::color) {
    if (output_dim != patch_dim())
      throw ConfigError("color scheme requires output dimension C*p*p = " + std::to_string(patch_dim()) + ", got " +
                        std::to_string(output_dim));
    if (patch_shuffle) throw ConfigError("color scheme does not shuffle patches");
  }
}

EncoderWeights EncoderWeights::inject(const EncoderConfig& config, Parts parts) {
  config.validate();
  const std::size_t dh = config.hidden_width;
  check_matrix(parts.patch_embed, dh, config.patch_dim(), "patch embedding");
  check_vector(parts.patch_bias, dh, "patch embedding bias");
  if (parts.blocks.size() != config.depth || parts.block_biases.size() != config.depth)
    throw ShapeError("expected " + std::to_string(config.depth) + " blocks");
  for (std::size_t b = 0; b < config.depth; ++b) {
    check_matrix(parts.blocks[b], dh, dh, "block matrix");
    check_vector(parts.block_biases[b], dh, "block bias");
  }
  check_matrix(parts.position, config.token_count(), dh, "position embedding");
  check_matrix(parts.projection, config.output_dim, dh, "projection");
  check_vector(parts.projection_bias, config.output_dim, "projection bias");
  return EncoderWeights(config, std::move(parts));
}

EncoderWeights build_weights(const MasterKey& key, const EncoderConfig& config) {
  config.validate();
  const std::size_t dh = config.hidden_width;
  const std::size_t in = config.patch_dim();
  EncoderWeights::Parts parts;
  parts.patch_embed = gaussian_matrix(key, "patch_embed.w", dh, in, 2.0 / static_cast<double>(in));
  parts.patch_bias.assign(dh, 0.0f);
  for (std::size_t b = 1; b <= config.depth; ++b) {
    parts.blocks.push_back(gaussian_matrix(key, "block." + std::to_string(b) + ".w", dh, dh, 2.0 / static_cast<double>(dh)));
    parts.block_biases.emplace_back(dh, 0.0f);
  }
  parts.position = gaussian_matrix(key, "pos_embed", config.token_count(), dh, 1.0);
  parts.projection = gaussian_matrix(key, "proj.w", config.output_dim, dh, 1.0 / static_cast<double>(dh));
  parts.projection_bias.assign(config.output_dim, 0.0f);
  return EncoderWeights::inject(config, std::move(parts));
}

Matrix extract_patches(const ImageTensor& image, std::size_t patch_size) {
  const PatchGeometry g{image.channels(), image.height(), image.width(), patch_size};
  g.validate();
  const std::size_t p = patch_size;
  Matrix out(g.token_count(), g.patch_dim());
  for (std::size_t gy = 0; gy < g.grid_rows(); ++gy) {
    for (std::size_t gx = 0; gx < g.grid_cols(); ++gx) {
      float* dst = out.row(gy * g.grid_cols() + gx).data();
      for (std::size_t c = 0; c < g.channels; ++c)
        for (std::size_t y = 0; y < p; ++y)
          for (std::size_t x = 0; x < p; ++x) *dst++ = image.at(c, gy * p + y, gx * p + x);
    }
  }
  return out;
}

ImageTensor reassemble_patches(const Matrix& rows, const PatchGeometry& g) {
  g.validate();
  if (rows.rows() != g.token_count() || rows.cols() != g.patch_dim())
    throw ShapeError("patch matrix " + std::to_string(rows.rows()) + "x" + std::to_string(rows.cols()) +
                     " inconsistent with geometry (expected " + std::to_string(g.token_count()) + "x" +
                     std::to_string(g.patch_dim()) + ")");
  const std::size_t p = g.patch_size;
  ImageTensor out(g.channels, g.height, g.width);
  for (std::size_t gy = 0; gy < g.grid_rows(); ++gy) {
    for (std::size_t gx = 0; gx < g.grid_cols(); ++gx) {
      const float* src = rows.row(gy * g.grid_cols() + gx).data();
      for (std::size_t c = 0; c < g.channels; ++c)
        for (std::size_t y = 0; y < p; ++y)
          for (std::size_t x = 0; x < p; ++x) out.at(c, gy * p + y, gx * p + x) = *src++;
    }
  }
  return out;
}

TokenMatrix forward_tokens(const Matrix& patches, const EncoderWeights& weights) {
  const auto& cfg = weights.config();
  const auto& w = weights.parts();
  if (patches.rows() != cfg.token_count() || patches.cols() != cfg.patch_dim())
    throw ShapeError("patch matrix " + std::to_string(patches.rows()) + "x" + std::to_string(patches.cols()) +
                     " does not match encoder input " + std::to_string(cfg.token_count()) + "x" +
                     std::to_string(cfg.patch_dim()));
  const std::size_t dh = cfg.hidden_width;
  TokenMatrix out(patches.rows(), cfg.output_dim);
  std::vector<float> h(dh), next(dh);
  for (std::size_t r = 0; r < patches.rows(); ++r) {
    affine(w.patch_embed, patches.row(r), w.patch_bias, h);
    relu(h);
    for (std::size_t b = 0; b < w.blocks.size(); ++b) {
      affine(w.blocks[b], h, w.block_biases[b], next);
      relu(next);
      std::swap(h, next);
    }
    const auto pos = w.position.row(r);
    for (std::size_t i = 0; i < dh; ++i) h[i] += pos[i];
    affine(w.projection, h, w.projection_bias, out.row(r));
  }
  return out;
}

TokenMatrix shuffle_patches(const TokenMatrix& tokens, std::span<const std::uint32_t> perm) {
  if (perm.size() != tokens.rows())
    throw ShapeError("permutation length " + std::to_string(perm.size()) + " does not match " +
                     std::to_string(tokens.rows()) + " tokens");
  TokenMatrix out(tokens.rows(), tokens.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (perm[i] >= tokens.rows()) throw ShapeError("permutation index out of range");
    std::ranges::copy(tokens.row(perm[i]), out.row(i).begin());
  }
  return out;
}

std::span<const float> EncryptedSample::values() const {
  return std::visit([](const auto& p) { return p.values(); }, payload);
}

std::string patch_permutation_label(std::uint64_t image_index) { return "patch_perm." + std::to_string(image_index); }

Encoder::Encoder(const MasterKey& key, const EncoderConfig& config) : key_(key), weights_(build_weights(key, config)) {}

Encoder::Encoder(const MasterKey& key, EncoderWeights weights) : key_(key), weights_(std::move(weights)) {}

EncryptedSample Encoder::encrypt(const ImageTensor& image, std::uint64_t image_index, const EncryptOptions& options) const {
  const auto& cfg = config();
  if (image.channels() != cfg.channels || image.height() != cfg.height || image.width() != cfg.width)
    throw ShapeError("image is " + std::to_string(image.channels()) + "x" + std::to_string(image.height()) + "x" +
                     std::to_string(image.width()) + ", encoder expects " + std::to_string(cfg.channels) + "x" +
                     std::to_string(cfg.height) + "x" + std::to_string(cfg.width));
  for (float v : image.values())
    if (!(v >= 0.0f && v <= 1.0f)) throw DataError("plain image sample outside [0,1]");

  TokenMatrix tokens = forward_tokens(extract_patches(image, cfg.patch_size), weights_);
  EncryptedSample sample;
  if (cfg.scheme == Scheme::color) {
    sample.payload = reassemble_patches(tokens, cfg.geometry());
    return sample;
  }
  if (!cfg.patch_shuffle) {
    sample.payload = std::move(tokens);
    return sample;
  }
  std::vector<std::uint32_t> perm;
  if (options.nondeterministic_shuffle) {
    KeyStream stream(MasterKey::random(), patch_permutation_label(image_index));
    perm = sample_permutation(stream, tokens.rows());
  } else {
    KeyStream stream(key_, patch_permutation_label(image_index));
    perm = sample_permutation(stream, tokens.rows());
  }
  sample.payload = shuffle_patches(tokens, perm);
  if (options.keep_permutation) sample.permutation = std::move(perm);
  return sample;
}

EncryptedSample encrypt(const ImageTensor& image, const MasterKey& key, const EncoderConfig& config,
                        std::uint64_t image_index, const EncryptOptions& options) {
  return Encoder(key, config).encrypt(image, image_index, options);
}

}  // namespace neuracodec
