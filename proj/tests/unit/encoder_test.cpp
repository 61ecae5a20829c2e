#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "json.hpp"
#include "neuracodec/attacks.hpp"
#include "neuracodec/encoder.hpp"
#include "test_support.hpp"

using namespace neuracodec;
using neuracodec::testing::key_from_seed;
using neuracodec::testing::random_image;

namespace {

EncoderWeights identity_weights(const EncoderConfig& cfg) {
  EncoderWeights::Parts parts;
  parts.patch_embed = Matrix::identity(cfg.patch_dim());
  parts.patch_bias.assign(cfg.hidden_width, 0.0f);
  parts.position = Matrix(cfg.token_count(), cfg.hidden_width);
  parts.projection = Matrix::identity(cfg.hidden_width);
  parts.projection_bias.assign(cfg.output_dim, 0.0f);
  return EncoderWeights::inject(cfg, std::move(parts));
}

EncoderConfig identity_config(Scheme scheme) {
  EncoderConfig cfg = EncoderConfig::toy(scheme);
  cfg.depth = 0;
  cfg.hidden_width = cfg.patch_dim();
  cfg.output_dim = cfg.patch_dim();
  cfg.patch_shuffle = false;
  return cfg;
}

std::vector<std::uint64_t> sorted_row_hashes(const Matrix& m) {
  auto h = signature_from_rows(m).hashes;
  std::ranges::sort(h);
  return h;
}

}  // namespace

TEST(EncoderConfig, Defaults) {
  const auto n = EncoderConfig::defaults(Scheme::neuracrypt);
  EXPECT_EQ(n.channels, 3u);
  EXPECT_EQ(n.height, 224u);
  EXPECT_EQ(n.patch_size, 16u);
  EXPECT_EQ(n.hidden_width, 768u);
  EXPECT_EQ(n.depth, 4u);
  EXPECT_EQ(n.output_dim, 768u);
  EXPECT_TRUE(n.patch_shuffle);
  EXPECT_EQ(n.token_count(), 196u);
  const auto c = EncoderConfig::defaults(Scheme::color);
  EXPECT_EQ(c.output_dim, 768u);
  EXPECT_FALSE(c.patch_shuffle);
  EXPECT_NO_THROW(n.validate());
  EXPECT_NO_THROW(c.validate());
}

TEST(EncoderConfig, Violations) {
  auto c = EncoderConfig::defaults(Scheme::neuracrypt);
  c.patch_size = 15;
  EXPECT_THROW(c.validate(), ConfigError);
  auto color = EncoderConfig::defaults(Scheme::color);
  color.output_dim = 512;
  EXPECT_THROW(color.validate(), ConfigError);
  color = EncoderConfig::defaults(Scheme::color);
  color.patch_shuffle = true;
  EXPECT_THROW(color.validate(), ConfigError);
  EXPECT_THROW(build_weights(key_from_seed(1), c), ConfigError);
}

TEST(BuildWeights, DefaultShapes) {
  const auto w = build_weights(key_from_seed(1), EncoderConfig::defaults(Scheme::color));
  const auto& p = w.parts();
  EXPECT_EQ(p.patch_embed.rows(), 768u);
  EXPECT_EQ(p.patch_embed.cols(), 768u);
  EXPECT_EQ(p.position.rows(), 196u);
  EXPECT_EQ(p.position.cols(), 768u);
  EXPECT_EQ(p.blocks.size(), 4u);
  EXPECT_EQ(p.projection.rows(), 768u);
  EXPECT_TRUE(std::ranges::all_of(p.patch_bias, [](float b) { return b == 0.0f; }));
}

TEST(BuildWeights, DeterministicAndKeySensitive) {
  const auto cfg = EncoderConfig::toy(Scheme::neuracrypt);
  MasterKey::Bytes b = key_from_seed(2).bytes();
  const auto w1 = build_weights(MasterKey(b), cfg);
  const auto w2 = build_weights(MasterKey(b), cfg);
  EXPECT_EQ(w1.parts().patch_embed, w2.parts().patch_embed);
  EXPECT_EQ(w1.parts().blocks, w2.parts().blocks);
  EXPECT_EQ(w1.parts().position, w2.parts().position);
  EXPECT_EQ(w1.parts().projection, w2.parts().projection);
  b[0] ^= 0x80;
  const auto w3 = build_weights(MasterKey(b), cfg);
  const auto r1 = w1.parts().patch_embed.row(0), r3 = w3.parts().patch_embed.row(0);
  EXPECT_FALSE(std::equal(r1.begin(), r1.end(), r3.begin()));
}

TEST(BuildWeights, GroupsUseTheirOwnLabels) {
  const MasterKey k = key_from_seed(3);
  const auto cfg = EncoderConfig::toy(Scheme::neuracrypt);
  const auto w = build_weights(k, cfg);
  KeyStream s(k, "pos_embed");
  const auto expected = sample_gaussian(s, cfg.token_count() * cfg.hidden_width, 0.0f, 1.0f);
  const auto got = w.parts().position.values();
  EXPECT_TRUE(std::equal(got.begin(), got.end(), expected.begin()));
}

TEST(BuildWeights, ScalesFollowFanIn) {
  const auto cfg = EncoderConfig::defaults(Scheme::neuracrypt);
  const auto w = build_weights(key_from_seed(4), cfg);
  auto variance = [](std::span<const float> v) {
    double s = 0, ss = 0;
    for (float x : v) s += x, ss += double(x) * x;
    const double m = s / v.size();
    return ss / v.size() - m * m;
  };
  EXPECT_NEAR(variance(w.parts().patch_embed.values()), 2.0 / 768, 0.05 * 2.0 / 768);
  EXPECT_NEAR(variance(w.parts().blocks[0].values()), 2.0 / 768, 0.05 * 2.0 / 768);
  EXPECT_NEAR(variance(w.parts().projection.values()), 1.0 / 768, 0.05 * 1.0 / 768);
  EXPECT_NEAR(variance(w.parts().position.values()), 1.0, 0.02);
}

TEST(Patches, Shapes) {
  const auto img = random_image(1, 3, 32, 32);
  const auto m = extract_patches(img, 16);
  EXPECT_EQ(m.rows(), 4u);
  EXPECT_EQ(m.cols(), 768u);
  EXPECT_THROW(extract_patches(img, 5), ShapeError);
}

TEST(Patches, SinglePatchIsFlattenedImage) {
  const auto img = random_image(2, 3, 16, 16);
  const auto m = extract_patches(img, 16);
  ASSERT_EQ(m.rows(), 1u);
  EXPECT_TRUE(std::ranges::equal(m.row(0), img.values()));
}

TEST(Patches, RowOrderAndLayout) {
  ImageTensor img(2, 4, 4);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 4; ++x) img.at(c, y, x) = static_cast<float>(c * 100 + y * 10 + x);
  const auto m = extract_patches(img, 2);
  // Row 1 is grid (0, 1): channel 0 rows 0..1, cols 2..3, then channel 1.
  const std::vector<float> expected{2, 3, 12, 13, 102, 103, 112, 113};
  EXPECT_TRUE(std::ranges::equal(m.row(1), expected));
}

TEST(Patches, RoundTripAndInverseCases) {
  for (std::uint32_t seed = 0; seed < 10; ++seed) {
    const auto img = random_image(seed, 3, 32, 48);
    EXPECT_EQ(reassemble_patches(extract_patches(img, 8), {3, 32, 48, 8}), img);
  }
  EXPECT_EQ(reassemble_patches(Matrix(16, 192), {3, 32, 32, 8}), ImageTensor(3, 32, 32));
  Matrix row(1, 768);
  for (std::size_t j = 0; j < 768; ++j) row(0, j) = static_cast<float>(j);
  const auto img = reassemble_patches(row, {3, 16, 16, 16});
  EXPECT_EQ(img.at(2, 15, 15), 767.0f);
  EXPECT_EQ(img.at(1, 0, 1), 257.0f);
  EXPECT_THROW(reassemble_patches(Matrix(15, 192), {3, 32, 32, 8}), ShapeError);
  EXPECT_THROW(reassemble_patches(Matrix(16, 191), {3, 32, 32, 8}), ShapeError);
}

TEST(ForwardTokens, IdentityConfiguration) {
  const auto cfg = identity_config(Scheme::color);
  const auto w = identity_weights(cfg);
  const auto patches = extract_patches(random_image(3, 3, 32, 32), 8);
  EXPECT_EQ(forward_tokens(patches, w), patches);
}

TEST(ForwardTokens, AllZeroWeights) {
  const auto cfg = EncoderConfig::toy(Scheme::color);
  EncoderWeights::Parts parts;
  parts.patch_embed = Matrix(cfg.hidden_width, cfg.patch_dim());
  parts.patch_bias.assign(cfg.hidden_width, 0.0f);
  for (std::size_t b = 0; b < cfg.depth; ++b) {
    parts.blocks.emplace_back(cfg.hidden_width, cfg.hidden_width);
    parts.block_biases.emplace_back(cfg.hidden_width, 0.0f);
  }
  parts.position = Matrix(cfg.token_count(), cfg.hidden_width);
  parts.projection = Matrix(cfg.output_dim, cfg.hidden_width);
  parts.projection_bias.assign(cfg.output_dim, 0.0f);
  const auto w = EncoderWeights::inject(cfg, std::move(parts));
  const auto out = forward_tokens(extract_patches(random_image(4, 3, 32, 32), 8), w);
  EXPECT_EQ(out, Matrix(cfg.token_count(), cfg.output_dim));
}

TEST(ForwardTokens, ShapeMismatch) {
  const auto w = build_weights(key_from_seed(5), EncoderConfig::toy(Scheme::color));
  EXPECT_THROW(forward_tokens(Matrix(15, 192), w), ShapeError);
  EXPECT_THROW(forward_tokens(Matrix(16, 100), w), ShapeError);
}

TEST(ForwardTokens, InjectRejectsBadShapes) {
  const auto cfg = identity_config(Scheme::color);
  EncoderWeights::Parts parts;
  parts.patch_embed = Matrix::identity(10);
  EXPECT_THROW(EncoderWeights::inject(cfg, std::move(parts)), ShapeError);
}

TEST(ForwardTokens, MatchesFloat64Reference) {
  // encoder_reference.json: numpy forward pass over independently derived weights.
  const auto ref = nlohmann::json::parse(neuracodec::testing::read_file(neuracodec::testing::golden_path("encoder_reference.json")));
  const auto& c = ref["config"];
  EncoderConfig cfg = EncoderConfig::defaults(Scheme::color);
  cfg.channels = c["channels"];
  cfg.height = c["height"];
  cfg.width = c["width"];
  cfg.patch_size = c["patch_size"];
  cfg.hidden_width = c["hidden_width"];
  cfg.depth = c["depth"];
  cfg.output_dim = cfg.patch_dim();
  ImageTensor img(cfg.channels, cfg.height, cfg.width);
  for (std::size_t ch = 0; ch < cfg.channels; ++ch)
    for (std::size_t y = 0; y < cfg.height; ++y)
      for (std::size_t x = 0; x < cfg.width; ++x) img.at(ch, y, x) = static_cast<float>((ch * 7 + y * 3 + x * 5) % 256) / 255.0f;
  const auto w = build_weights(MasterKey::parse(ref["key"].get<std::string>()), cfg);
  const auto tokens = forward_tokens(extract_patches(img, cfg.patch_size), w);
  const auto expected = ref["tokens"].get<std::vector<double>>();
  ASSERT_EQ(tokens.values().size(), expected.size());
  double scale = 0.0;
  for (double v : expected) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < expected.size(); ++i) ASSERT_NEAR(tokens.values()[i], expected[i], 1e-5 * scale) << "index " << i;
}

TEST(ForwardTokens, GoldenDigestAtDefaultConfig) {
  const auto cfg = EncoderConfig::defaults(Scheme::neuracrypt);
  ImageTensor img(3, 224, 224);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 224; ++y)
      for (std::size_t x = 0; x < 224; ++x) img.at(c, y, x) = static_cast<float>((c * 7 + y * 3 + x * 5) % 256) / 255.0f;
  const auto w = build_weights(MasterKey::parse("000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f"), cfg);
  const auto tokens = forward_tokens(extract_patches(img, 16), w);
  const auto v = tokens.values();
  const auto digest = to_hex(sha256(std::span(reinterpret_cast<const std::uint8_t*>(v.data()), v.size_bytes())));
  EXPECT_EQ(digest, "56c4cb5fa2f093dbb4d81bc8166680af0a45a13996213782aa15992eb8a8bab6");
}

TEST(ShufflePatches, Basics) {
  Matrix m(2, 3);
  m(0, 0) = 1;
  m(1, 0) = 2;
  const std::uint32_t id[] = {0, 1}, swap[] = {1, 0};
  EXPECT_EQ(shuffle_patches(m, id), m);
  const auto s = shuffle_patches(m, swap);
  EXPECT_EQ(s(0, 0), 2);
  EXPECT_EQ(s(1, 0), 1);
  const std::uint32_t short_perm[] = {0};
  EXPECT_THROW(shuffle_patches(m, short_perm), ShapeError);
}

TEST(ShufflePatches, PreservesRowMultiset) {
  const auto tokens = extract_patches(random_image(6, 3, 32, 32), 8);
  for (int trial = 0; trial < 10; ++trial) {
    KeyStream s(key_from_seed(6), "shuffle." + std::to_string(trial));
    const auto perm = sample_permutation(s, tokens.rows());
    EXPECT_EQ(sorted_row_hashes(shuffle_patches(tokens, perm)), sorted_row_hashes(tokens));
  }
}

TEST(Encrypt, DeterministicAndShapes) {
  const MasterKey k = key_from_seed(7);
  const auto img = random_image(7, 3, 32, 32);
  for (Scheme scheme : {Scheme::neuracrypt, Scheme::color}) {
    const auto cfg = EncoderConfig::toy(scheme);
    const auto a = encrypt(img, k, cfg, 3), b = encrypt(img, k, cfg, 3);
    EXPECT_TRUE(std::ranges::equal(a.values(), b.values()));
    EXPECT_EQ(a.is_image(), scheme == Scheme::color);
  }
}

TEST(Encrypt, ColorDefaultKeepsImageGeometry) {
  const auto out = encrypt(random_image(8, 3, 224, 224), key_from_seed(8), EncoderConfig::defaults(Scheme::color), 0);
  ASSERT_TRUE(out.is_image());
  const auto& img = std::get<ImageTensor>(out.payload);
  EXPECT_EQ(img.channels(), 3u);
  EXPECT_EQ(img.height(), 224u);
  EXPECT_EQ(img.width(), 224u);
  EXPECT_TRUE(all_finite(img.values()));
}

TEST(Encrypt, RejectsBadInput) {
  const Encoder enc(key_from_seed(9), EncoderConfig::toy(Scheme::color));
  auto img = random_image(9, 3, 32, 32);
  img.at(0, 0, 0) = 1.5f;
  EXPECT_THROW(enc.encrypt(img, 0), DataError);
  img.at(0, 0, 0) = -0.01f;
  EXPECT_THROW(enc.encrypt(img, 0), DataError);
  img.at(0, 0, 0) = std::nanf("");
  EXPECT_THROW(enc.encrypt(img, 0), DataError);
  EXPECT_THROW(enc.encrypt(random_image(9, 3, 32, 16), 0), ShapeError);
  EXPECT_THROW(enc.encrypt(random_image(9, 1, 32, 32), 0), ShapeError);
}

TEST(Encrypt, PatchLocality) {
  std::mt19937 rng(42);
  for (Scheme scheme : {Scheme::color, Scheme::neuracrypt}) {
    auto cfg = EncoderConfig::toy(scheme);
    cfg.patch_shuffle = false;
    const Encoder enc(key_from_seed(10), cfg);
    for (int trial = 0; trial < 20; ++trial) {
      const auto base = random_image(1000 + trial, 3, 32, 32);
      auto changed = base;
      const std::size_t patch = rng() % cfg.token_count();
      const std::size_t gy = patch / 4, gx = patch % 4;
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < 8; ++y)
          for (std::size_t x = 0; x < 8; ++x)
            if (rng() % 3 == 0) changed.at(c, gy * 8 + y, gx * 8 + x) = static_cast<float>(rng() % 256) / 255.0f;
      changed.at(0, gy * 8, gx * 8) = base.at(0, gy * 8, gx * 8) > 0.5f ? 0.0f : 1.0f;
      const auto a = enc.encrypt(base, 0), b = enc.encrypt(changed, 0);
      const Matrix ra = a.is_image() ? extract_patches(std::get<ImageTensor>(a.payload), 8) : std::get<TokenMatrix>(a.payload);
      const Matrix rb = b.is_image() ? extract_patches(std::get<ImageTensor>(b.payload), 8) : std::get<TokenMatrix>(b.payload);
      for (std::size_t r = 0; r < ra.rows(); ++r) {
        const bool same = std::ranges::equal(ra.row(r), rb.row(r));
        EXPECT_EQ(same, r != patch) << to_string(scheme) << " trial " << trial << " row " << r;
      }
    }
  }
}

TEST(Encrypt, CollisionProperty) {
  auto cfg = EncoderConfig::toy(Scheme::color);
  const Encoder enc(key_from_seed(11), cfg);
  auto a = random_image(20, 3, 32, 32), b = random_image(21, 3, 32, 32);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 8; y < 16; ++y)
      for (std::size_t x = 16; x < 24; ++x) b.at(c, y, x) = a.at(c, y, x);
  const auto ea = extract_patches(std::get<ImageTensor>(enc.encrypt(a, 0).payload), 8);
  const auto eb = extract_patches(std::get<ImageTensor>(enc.encrypt(b, 1).payload), 8);
  EXPECT_TRUE(std::ranges::equal(ea.row(6), eb.row(6)));
  EXPECT_FALSE(std::ranges::equal(ea.row(5), eb.row(5)));
}

TEST(Encrypt, ShuffleSoundness) {
  const MasterKey k = key_from_seed(12);
  const auto cfg = EncoderConfig::toy(Scheme::neuracrypt);
  auto unshuffled_cfg = cfg;
  unshuffled_cfg.patch_shuffle = false;
  const Encoder enc(k, cfg), plain_order(k, unshuffled_cfg);
  const auto img = random_image(30, 3, 32, 32);
  for (std::uint64_t index : {0u, 1u, 17u}) {
    const auto out = enc.encrypt(img, index, {.keep_permutation = true});
    const auto& tokens = std::get<TokenMatrix>(out.payload);
    const auto base = std::get<TokenMatrix>(plain_order.encrypt(img, index).payload);
    EXPECT_EQ(sorted_row_hashes(tokens), sorted_row_hashes(base));
    ASSERT_TRUE(out.permutation.has_value());
    KeyStream s(k, patch_permutation_label(index));
    EXPECT_EQ(*out.permutation, sample_permutation(s, cfg.token_count()));
    EXPECT_EQ(tokens, shuffle_patches(base, *out.permutation));
  }
  EXPECT_FALSE(enc.encrypt(img, 0).permutation.has_value());
  const auto p0 = *enc.encrypt(img, 0, {.keep_permutation = true}).permutation;
  const auto p1 = *enc.encrypt(img, 1, {.keep_permutation = true}).permutation;
  EXPECT_NE(p0, p1);
}

TEST(Encrypt, NondeterministicShuffleKeepsContent) {
  const Encoder enc(key_from_seed(13), EncoderConfig::toy(Scheme::neuracrypt));
  const auto img = random_image(31, 3, 32, 32);
  const EncryptOptions opts{.keep_permutation = true, .nondeterministic_shuffle = true};
  const auto a = enc.encrypt(img, 0, opts), b = enc.encrypt(img, 0, opts);
  EXPECT_NE(*a.permutation, *b.permutation);
  EXPECT_EQ(sorted_row_hashes(std::get<TokenMatrix>(a.payload)), sorted_row_hashes(std::get<TokenMatrix>(b.payload)));
}

TEST(Encrypt, FiniteOutputs) {
  for (Scheme scheme : {Scheme::color, Scheme::neuracrypt}) {
    const Encoder enc(key_from_seed(14), EncoderConfig::toy(scheme));
    for (std::uint32_t i = 0; i < 100; ++i) ASSERT_TRUE(all_finite(enc.encrypt(random_image(2000 + i, 3, 32, 32), i).values()));
  }
  const Encoder full(key_from_seed(14), EncoderConfig::defaults(Scheme::neuracrypt));
  ImageTensor ones(3, 224, 224, 1.0f), zeros(3, 224, 224, 0.0f);
  EXPECT_TRUE(all_finite(full.encrypt(ones, 0).values()));
  EXPECT_TRUE(all_finite(full.encrypt(zeros, 1).values()));
  EXPECT_TRUE(all_finite(full.encrypt(random_image(15, 3, 224, 224), 2).values()));
}

TEST(Encrypt, IdentityWeightsReproduceImage) {
  const auto cfg = identity_config(Scheme::color);
  const Encoder enc(key_from_seed(15), identity_weights(cfg));
  for (std::uint32_t seed = 0; seed < 5; ++seed) {
    const auto img = random_image(seed, 3, 32, 32);
    EXPECT_EQ(std::get<ImageTensor>(enc.encrypt(img, seed).payload), img);
  }
}
