#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "neuracodec/keying.hpp"
#include "neuracodec/tensor.hpp"

namespace neuracodec {

enum class Scheme { neuracrypt, color };

std::string_view to_string(Scheme scheme);
Scheme parse_scheme(std::string_view name);

struct PatchGeometry {
  std::size_t channels = 3;
  std::size_t height = 224;
  std::size_t width = 224;
  std::size_t patch_size = 16;

  std::size_t grid_rows() const { return height / patch_size; }
  std::size_t grid_cols() const { return width / patch_size; }
  std::size_t token_count() const { return grid_rows() * grid_cols(); }
  std::size_t patch_dim() const { return channels * patch_size * patch_size; }
  // Throws ShapeError unless the patch size tiles the image exactly.
  void validate() const;
};

struct EncoderConfig {
  Scheme scheme = Scheme::neuracrypt;
  std::size_t channels = 3;
  std::size_t height = 224;
  std::size_t width = 224;
  std::size_t patch_size = 16;
  std::size_t hidden_width = 768;
  std::size_t depth = 4;
  std::size_t output_dim = 768;
  bool patch_shuffle = true;

  // Full-size defaults (ViT-B/16 geometry). For the colour scheme the output
  // dimension and shuffle flag follow from the pixel-shuffle output stage.
  static EncoderConfig defaults(Scheme scheme);
  // Desk-scale geometry used by the probe experiments: 3x32x32, p=8, d_h=192.
  static EncoderConfig toy(Scheme scheme);

  PatchGeometry geometry() const { return {channels, height, width, patch_size}; }
  std::size_t token_count() const { return geometry().token_count(); }
  std::size_t patch_dim() const { return geometry().patch_dim(); }

  // Throws ConfigError naming the first violated constraint.
  void validate() const;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

// Parameters of the random network. Immutable once built.
class EncoderWeights {
 public:
  struct Parts {
    Matrix patch_embed;  // d_h x C*p*p
    std::vector<float> patch_bias;
    std::vector<Matrix> blocks;  // B matrices, d_h x d_h
    std::vector<std::vector<float>> block_biases;
    Matrix position;  // N x d_h
    Matrix projection;  // d_out x d_h
    std::vector<float> projection_bias;
  };

  // Testing hook: wraps hand-built parameters after checking their shapes
  // against the config. Keyed encoders go through build_weights().
  static EncoderWeights inject(const EncoderConfig& config, Parts parts);

  const EncoderConfig& config() const noexcept { return config_; }
  const Parts& parts() const noexcept { return parts_; }

 private:
  EncoderWeights(EncoderConfig config, Parts parts) : config_(config), parts_(std::move(parts)) {}

  EncoderConfig config_;
  Parts parts_;
};

// Derivation order and labels: "patch_embed.w", "block.<b>.w" for b = 1..B,
// "pos_embed", "proj.w". Biases are zero.
EncoderWeights build_weights(const MasterKey& key, const EncoderConfig& config);

// Row k = patch at grid (k / cols, k % cols), flattened channel, row, column.
Matrix extract_patches(const ImageTensor& image, std::size_t patch_size);
ImageTensor reassemble_patches(const Matrix& rows, const PatchGeometry& geometry);

// Per-row network: relu(W0 x + b0), B x relu(Wb h + bb), + P[row], Wf h + bf.
TokenMatrix forward_tokens(const Matrix& patches, const EncoderWeights& weights);

// out[i] = tokens[perm[i]].
TokenMatrix shuffle_patches(const TokenMatrix& tokens, std::span<const std::uint32_t> perm);

struct EncryptedSample {
  std::variant<TokenMatrix, ImageTensor> payload;
  // Applied patch permutation; kept only when requested.
  std::optional<std::vector<std::uint32_t>> permutation;

  bool is_image() const { return std::holds_alternative<ImageTensor>(payload); }
  std::span<const float> values() const;
};

struct EncryptOptions {
  bool keep_permutation = false;
  // Draw the per-image patch permutation from OS entropy instead of the key.
  bool nondeterministic_shuffle = false;
};

std::string patch_permutation_label(std::uint64_t image_index);

// Holds derived weights for one (key, config) and encrypts images with them.
// Thread-safe for concurrent encrypt() calls.
class Encoder {
 public:
  Encoder(const MasterKey& key, const EncoderConfig& config);
  Encoder(const MasterKey& key, EncoderWeights weights);

  const EncoderConfig& config() const noexcept { return weights_.config(); }
  const EncoderWeights& weights() const noexcept { return weights_; }

  EncryptedSample encrypt(const ImageTensor& image, std::uint64_t image_index, const EncryptOptions& options = {}) const;

 private:
  MasterKey key_;
  EncoderWeights weights_;
};

EncryptedSample encrypt(const ImageTensor& image, const MasterKey& key, const EncoderConfig& config,
                        std::uint64_t image_index, const EncryptOptions& options = {});

}  // namespace neuracodec
