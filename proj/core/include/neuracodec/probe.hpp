#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "neuracodec/encoder.hpp"

namespace neuracodec {

struct LabeledImage {
  ImageTensor image;
  std::size_t label = 0;
};

struct ToyDatasetOptions {
  std::size_t classes = 3;
  std::size_t per_class = 100;
  std::size_t channels = 3;
  std::size_t height = 32;
  std::size_t width = 32;
  double noise_sigma = 0.05;
};

// Class k is an axis-aligned rectangle whose colour is drawn around the k-th
// hue and whose side length comes from the k-th size band, on a keyed grey
// background, plus clamped Gaussian pixel noise. Output is class-major.
std::vector<LabeledImage> generate_toy_dataset(const MasterKey& key, const ToyDatasetOptions& options);

struct ProbeDataset {
  std::vector<std::vector<double>> features;
  std::vector<std::size_t> labels;
  std::size_t classes = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;

  std::size_t dim() const { return features.empty() ? 0 : features.front().size(); }
  // Throws DataError on ragged features, out-of-range labels, or a train
  // split that misses a class.
  void validate() const;
};

// Z-scores every feature with train-split statistics, then scales by
// 1/sqrt(D) so full-batch step sizes do not depend on the feature width.
void standardize_features(ProbeDataset& data);

struct ProbeModel {
  std::size_t classes = 0;
  std::size_t dim = 0;
  std::vector<double> weights;  // classes x dim, row-major
  std::vector<double> bias;
  std::vector<double> loss_log;  // loss before each step, then after the last

  static ProbeModel zeros(std::size_t classes, std::size_t dim);
  std::vector<double> logits(std::span<const double> x) const;
  std::size_t predict(std::span<const double> x) const;  // ties go to the smaller class
};

std::vector<double> softmax(std::span<const double> logits);

struct ProbeGradient {
  double loss = 0.0;  // mean cross-entropy
  std::vector<double> weights;
  std::vector<double> bias;
};

ProbeGradient loss_and_gradient(const ProbeModel& model, const ProbeDataset& data, std::span<const std::size_t> indices);

struct TrainOptions {
  std::size_t epochs = 200;
  double learning_rate = 0.5;
};

// Full-batch gradient descent from zero on the train split.
ProbeModel train_probe(const ProbeDataset& data, const TrainOptions& options);

struct Evaluation {
  double accuracy = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

Evaluation evaluate(const ProbeModel& model, const ProbeDataset& data, std::span<const std::size_t> indices);
inline Evaluation evaluate(const ProbeModel& model, const ProbeDataset& data) { return evaluate(model, data, data.test); }

struct UtilitySettings {
  std::size_t classes = 3;
  std::size_t train_per_class = 100;
  std::size_t test_per_class = 50;
  std::size_t channels = 3;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t patch_size = 8;
  std::size_t hidden_width = 192;
  std::size_t depth = 4;
  double noise_sigma = 0.05;
  TrainOptions train;
  std::size_t repetitions = 5;
  unsigned jobs = 1;
};

struct UtilityRun {
  double plain_acc = 0.0;
  double color_acc = 0.0;
  double neuracrypt_acc = 0.0;
  double shuffled_label_acc = 0.0;
};

struct UtilityReport {
  UtilitySettings settings;
  std::vector<UtilityRun> runs;
  UtilityRun median;
};

EncoderConfig probe_encoder_config(const UtilitySettings& settings, Scheme scheme);

// Key for repetition r, derived from the master key.
MasterKey repetition_key(const MasterKey& key, std::size_t repetition);

UtilityRun utility_run(const MasterKey& key, const UtilitySettings& settings);
UtilityReport utility_experiment(const MasterKey& key, const UtilitySettings& settings);

std::string to_json(const UtilityReport& report);

}  // namespace neuracodec
