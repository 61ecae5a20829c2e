#include <gtest/gtest.h>

#include "json.hpp"
#include "neuracodec/attacks.hpp"
#include "neuracodec/dataset.hpp"
#include "neuracodec/image_io.hpp"
#include "test_support.hpp"

using namespace neuracodec;
using namespace neuracodec::testing;

namespace fs = std::filesystem;

namespace {

CollisionSignature sig(std::vector<std::uint64_t> h, bool positional = true) { return {std::move(h), positional}; }

// Counts equal patches at equal positions by comparing pixels directly.
std::uint32_t direct_patch_matches(const ImageTensor& a, const ImageTensor& b, std::size_t p) {
  const auto pa = extract_patches(a, p), pb = extract_patches(b, p);
  std::uint32_t n = 0;
  for (std::size_t r = 0; r < pa.rows(); ++r) n += std::ranges::equal(pa.row(r), pb.row(r));
  return n;
}

std::vector<CollisionSignature> plain_sigs(const std::vector<ImageTensor>& images) {
  std::vector<CollisionSignature> out;
  for (const auto& img : images) out.push_back(plain_signature(img, 8));
  return out;
}

}  // namespace

TEST(QuantizedHash, AbsorbsSubMicroNoise) {
  const float a[] = {0.1234561f, 2.0f}, b[] = {0.1234562f, 2.0f}, c[] = {0.1234599f, 2.0f};
  EXPECT_EQ(quantized_hash(a), quantized_hash(b));
  EXPECT_NE(quantized_hash(a), quantized_hash(c));
}

TEST(CollisionMatrix, SingleSample) {
  const CollisionSignature s[] = {sig({1, 2, 3})};
  EXPECT_EQ(pairwise_collision_matrix(s), (CountMatrix{{3}}));
}

TEST(CollisionMatrix, IdenticalSamples) {
  const CollisionSignature s[] = {sig({1, 2, 3}), sig({1, 2, 3})};
  EXPECT_EQ(pairwise_collision_matrix(s), (CountMatrix{{3, 3}, {3, 3}}));
}

TEST(CollisionMatrix, SharedPatchAtIndexFive) {
  auto a = random_image(1, 3, 32, 32), b = random_image(2, 3, 32, 32);
  // Patch 5 is grid (1, 1).
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 8; y < 16; ++y)
      for (std::size_t x = 8; x < 16; ++x) b.at(c, y, x) = a.at(c, y, x);
  const auto m = pairwise_collision_matrix(plain_sigs({a, b}));
  EXPECT_EQ(m[0][1], 1u);
  EXPECT_EQ(m[0][1], direct_patch_matches(a, b, 8));
  EXPECT_EQ(m[0][0], 16u);
}

TEST(CollisionMatrix, PositionalVersusMultiset) {
  const CollisionSignature s[] = {sig({1, 2, 3}), sig({3, 2, 1})};
  EXPECT_EQ(pairwise_collision_matrix(s)[0][1], 1u);
  const CollisionSignature m[] = {sig({1, 2, 3}, false), sig({3, 2, 1}, false)};
  EXPECT_EQ(pairwise_collision_matrix(m)[0][1], 3u);
  const CollisionSignature bad[] = {sig({1, 2}), sig({1})};
  EXPECT_THROW(pairwise_collision_matrix(bad), ShapeError);
}

TEST(CollisionMatrix, EngineeredSetMatchesDirectCount) {
  const auto images = engineered_collision_images();
  const auto m = pairwise_collision_matrix(plain_sigs(images));
  for (std::size_t a = 0; a < images.size(); ++a) {
    EXPECT_EQ(m[a][a], 16u);
    for (std::size_t b = 0; b < images.size(); ++b) {
      EXPECT_EQ(m[a][b], m[b][a]);
      if (a != b) EXPECT_EQ(m[a][b], direct_patch_matches(images[a], images[b], 8));
    }
  }
  for (std::size_t i = 0; i + 1 < images.size(); ++i) EXPECT_EQ(m[i][i + 1], i + 1);
}

TEST(SignatureCost, Cases) {
  const CountMatrix m{{4, 3, 1, 0}, {3, 4, 0, 0}, {1, 0, 4, 0}, {0, 0, 0, 4}};
  EXPECT_EQ(signature_cost(m, m, 0, 0), 0.0);
  // Same off-diagonal multiset in a different order.
  const CountMatrix p{{4, 0, 1, 3}, {0, 4, 0, 0}, {1, 0, 4, 0}, {3, 0, 0, 4}};
  EXPECT_EQ(signature_cost(m, p, 0, 0), 0.0);
  const CountMatrix a{{5, 2, 0}, {2, 5, 0}, {0, 0, 5}}, b{{5, 1, 0}, {1, 5, 0}, {0, 0, 5}};
  EXPECT_EQ(signature_cost(a, b, 0, 0), 1.0);
  EXPECT_THROW(signature_cost(a, m, 0, 0), ShapeError);
}

TEST(MatchSignatures, EngineeredSetRecoversShuffledOrder) {
  const auto images = engineered_collision_images();
  const auto plain = plain_sigs(images);
  const std::vector<std::size_t> order{5, 2, 7, 0, 3, 6, 1, 4};
  std::vector<CollisionSignature> enc;
  for (auto i : order) enc.push_back(plain[i]);
  const auto match = match_signatures(plain, enc);
  EXPECT_FALSE(match.no_collision_signal);
  for (std::size_t i = 0; i < images.size(); ++i) EXPECT_EQ(order[match.assignment.column_of_row[i]], i);
  EXPECT_EQ(match.assignment.cost, 0.0);
}

TEST(MatchSignatures, NoCollisionsFlagged) {
  const auto plain = plain_sigs(no_collision_images());
  EXPECT_TRUE(match_signatures(plain, plain).no_collision_signal);
  const std::vector<CollisionSignature> one(plain.begin(), plain.begin() + 1);
  EXPECT_FALSE(match_signatures(one, one).no_collision_signal);
  EXPECT_THROW(match_signatures(plain, one), DataError);
}

TEST(CollisionTransport, EncryptedMatrixEqualsPlainMatrix) {
  const auto images = engineered_collision_images();
  const auto plain = pairwise_collision_matrix(plain_sigs(images));
  for (std::uint8_t seed = 0; seed < 3; ++seed) {
    for (Scheme scheme : {Scheme::color, Scheme::neuracrypt}) {
      for (bool shuffle : {false, true}) {
        auto cfg = EncoderConfig::toy(scheme);
        cfg.depth = 1 + seed;
        if (scheme == Scheme::neuracrypt) cfg.patch_shuffle = shuffle;
        else if (shuffle) continue;
        const Encoder enc(key_from_seed(seed), cfg);
        std::vector<CollisionSignature> sigs;
        // Reverse order: the encrypted matrix is the plain one under a simultaneous permutation.
        for (std::size_t i = images.size(); i-- > 0;) sigs.push_back(encrypted_signature(enc.encrypt(images[i], i), cfg));
        const auto m = pairwise_collision_matrix(sigs);
        const std::size_t n = images.size();
        for (std::size_t a = 0; a < n; ++a)
          for (std::size_t b = 0; b < n; ++b) ASSERT_EQ(m[n - 1 - a][n - 1 - b], plain[a][b]) << to_string(scheme);
      }
    }
  }
}

class MatchDirectories : public ::testing::Test {
 protected:
  TempDir tmp;
};

TEST_F(MatchDirectories, EngineeredColorSet) {
  write_png_set(tmp / "plain", engineered_collision_images());
  encrypt_dataset(tmp / "plain", key_from_seed(1), EncoderConfig::toy(Scheme::color), tmp / "enc");
  const auto r = match_plain_encrypted(tmp / "plain", tmp / "enc");
  ASSERT_TRUE(r.accuracy.has_value());
  EXPECT_EQ(*r.accuracy, 1.0);
  EXPECT_FALSE(r.no_collision_signal);
  const auto j = nlohmann::json::parse(to_json(r));
  EXPECT_EQ(j["accuracy"].get<double>(), 1.0);
  EXPECT_EQ(j["assignment"].size(), 8u);
}

TEST_F(MatchDirectories, EngineeredShuffledNeuracryptSet) {
  // Position embeddings ride along in every token, so shuffling alone does not hide collisions.
  write_png_set(tmp / "plain", engineered_collision_images());
  encrypt_dataset(tmp / "plain", key_from_seed(2), EncoderConfig::toy(Scheme::neuracrypt), tmp / "enc");
  const auto r = match_plain_encrypted(tmp / "plain", tmp / "enc");
  EXPECT_EQ(r.accuracy.value_or(0.0), 1.0);
}

TEST_F(MatchDirectories, NoCollisionControl) {
  write_png_set(tmp / "plain", no_collision_images());
  encrypt_dataset(tmp / "plain", key_from_seed(3), EncoderConfig::toy(Scheme::color), tmp / "enc");
  const auto r = match_plain_encrypted(tmp / "plain", tmp / "enc");
  EXPECT_TRUE(r.no_collision_signal);
  ASSERT_TRUE(r.accuracy.has_value());
  EXPECT_LE(*r.accuracy, 0.25);
}

TEST_F(MatchDirectories, SingleImage) {
  write_png_set(tmp / "plain", {random_image(1, 3, 32, 32)});
  encrypt_dataset(tmp / "plain", key_from_seed(4), EncoderConfig::toy(Scheme::color), tmp / "enc");
  const auto r = match_plain_encrypted(tmp / "plain", tmp / "enc");
  EXPECT_EQ(r.accuracy.value_or(0.0), 1.0);
}

TEST_F(MatchDirectories, CountMismatch) {
  write_png_set(tmp / "plain", no_collision_images());
  encrypt_dataset(tmp / "plain", key_from_seed(5), EncoderConfig::toy(Scheme::color), tmp / "enc");
  fs::remove(tmp / "plain" / "img_07.png");
  EXPECT_THROW(match_plain_encrypted(tmp / "plain", tmp / "enc"), DataError);
}

TEST(Pearson, Basics) {
  const float a[] = {1, 2, 3, 4}, b[] = {2, 4, 6, 8}, c[] = {4, 3, 2, 1}, flat[] = {1, 1, 1, 1};
  EXPECT_NEAR(*pearson(a, a), 1.0, 1e-12);
  EXPECT_NEAR(*pearson(a, b), 1.0, 1e-12);
  EXPECT_NEAR(*pearson(a, c), -1.0, 1e-12);
  EXPECT_FALSE(pearson(a, flat).has_value());
}

TEST(Histogram, BinsAndClamping) {
  const float v[] = {0.0f, 0.5f, 0.999f, 1.0f, -2.0f, 3.0f};
  const auto h = histogram(v, 0.0, 1.0, 4);
  EXPECT_EQ(h.counts, (std::vector<std::uint64_t>{2, 0, 1, 3}));
}

TEST_F(MatchDirectories, LeakageReport) {
  write_png_set(tmp / "plain", no_collision_images());
  encrypt_dataset(tmp / "plain", key_from_seed(6), EncoderConfig::toy(Scheme::color), tmp / "enc");
  const auto r = leakage_report(tmp / "plain", tmp / "enc");
  EXPECT_EQ(r.count, 8u);
  EXPECT_EQ(r.mean_collision_rate, 0.0);
  ASSERT_TRUE(r.pixel_correlation.has_value());
  EXPECT_EQ(r.pixel_correlation->size(), 8u);
  ASSERT_TRUE(r.mean_abs_correlation.has_value());
  EXPECT_LT(*r.mean_abs_correlation, 0.5);
  EXPECT_EQ(r.plain_histogram.counts.size(), 32u);
  std::uint64_t total = 0;
  for (auto c : r.encrypted_histogram.counts) total += c;
  EXPECT_EQ(total, 8u * 3 * 32 * 32);
  const auto j = nlohmann::json::parse(to_json(r));
  EXPECT_TRUE(j["pixel_correlation"].is_array());

  encrypt_dataset(tmp / "plain", key_from_seed(6), EncoderConfig::toy(Scheme::neuracrypt), tmp / "enc_n");
  const auto rn = leakage_report(tmp / "plain", tmp / "enc_n");
  EXPECT_FALSE(rn.pixel_correlation.has_value());
  EXPECT_EQ(nlohmann::json::parse(to_json(rn))["pixel_correlation"], "N/A");
}

TEST_F(MatchDirectories, LeakageCollisionRateOnEngineeredSet) {
  write_png_set(tmp / "plain", engineered_collision_images());
  encrypt_dataset(tmp / "plain", key_from_seed(7), EncoderConfig::toy(Scheme::color), tmp / "enc");
  // Pairs (i, i+1) share i+1 of 16 patches: (1+...+7) / 16 over 28 pairs.
  EXPECT_NEAR(leakage_report(tmp / "plain", tmp / "enc").mean_collision_rate, 28.0 / 16.0 / 28.0, 1e-12);
}
