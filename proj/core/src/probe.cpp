#include "neuracodec/probe.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>

#include "json.hpp"

namespace neuracodec {

namespace {

std::array<double, 3> hue_to_rgb(double hue) {
  // HSV with s = 0.8, v = 0.9.
  const double s = 0.8, v = 0.9;
  const double h6 = std::fmod(hue, 1.0) * 6.0;
  const int sector = static_cast<int>(h6) % 6;
  const double f = h6 - std::floor(h6);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (sector) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

double median(std::vector<double> v) {
  std::ranges::sort(v);
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> to_features(std::span<const float> values) { return {values.begin(), values.end()}; }

}  // namespace

std::vector<LabeledImage> generate_toy_dataset(const MasterKey& key, const ToyDatasetOptions& o) {
  if (o.classes < 2) throw ConfigError("toy dataset needs at least 2 classes");
  if (o.channels == 0 || o.height < 4 || o.width < 4) throw ConfigError("toy dataset images must be at least 4x4");
  std::vector<LabeledImage> out;
  out.reserve(o.classes * o.per_class);
  const double bands = static_cast<double>(o.classes);
  for (std::size_t k = 0; k < o.classes; ++k) {
    const auto base = hue_to_rgb(static_cast<double>(k) / bands);
    for (std::size_t i = 0; i < o.per_class; ++i) {
      KeyStream stream(key, "toy_image." + std::to_string(k) + "." + std::to_string(i));
      const double background = 0.1 + 0.3 * sample_uniform(stream);
      std::array<double, 3> colour{};
      for (std::size_t c = 0; c < 3; ++c) colour[c] = std::clamp(base[c] + 0.2 * (sample_uniform(stream) - 0.5), 0.0, 1.0);
      const double grey = (colour[0] + colour[1] + colour[2]) / 3.0;
      const double band = (static_cast<double>(k) + sample_uniform(stream)) / bands;
      const double side_frac = 0.25 + 0.5 * band;
      const auto rect_h = std::max<std::size_t>(1, static_cast<std::size_t>(side_frac * static_cast<double>(o.height)));
      const auto rect_w = std::max<std::size_t>(1, static_cast<std::size_t>(side_frac * static_cast<double>(o.width)));
      const auto top = static_cast<std::size_t>(sample_uniform(stream) * static_cast<double>(o.height - rect_h + 1));
      const auto left = static_cast<std::size_t>(sample_uniform(stream) * static_cast<double>(o.width - rect_w + 1));

      ImageTensor img(o.channels, o.height, o.width);
      for (std::size_t c = 0; c < o.channels; ++c) {
        const double fg = o.channels == 3 ? colour[c] : grey;
        for (std::size_t y = 0; y < o.height; ++y)
          for (std::size_t x = 0; x < o.width; ++x) {
            const bool inside = y >= top && y < top + rect_h && x >= left && x < left + rect_w;
            img.at(c, y, x) = static_cast<float>(inside ? fg : background);
          }
      }
      if (o.noise_sigma > 0.0) {
        const auto noise = sample_gaussian(stream, img.size(), 0.0f, static_cast<float>(o.noise_sigma));
        auto px = img.values();
        for (std::size_t j = 0; j < px.size(); ++j) px[j] = std::clamp(px[j] + noise[j], 0.0f, 1.0f);
      }
      out.push_back({std::move(img), k});
    }
  }
  return out;
}

void ProbeDataset::validate() const {
  if (classes < 2) throw DataError("probe needs at least 2 classes");
  if (labels.size() != features.size()) throw DataError("labels and features differ in count");
  const std::size_t d = dim();
  for (const auto& f : features)
    if (f.size() != d) throw DataError("feature vectors differ in length");
  for (auto l : labels)
    if (l >= classes) throw DataError("label " + std::to_string(l) + " outside 0.." + std::to_string(classes - 1));
  std::vector<bool> present(classes, false);
  for (auto i : train) {
    if (i >= features.size()) throw DataError("train index out of range");
    present[labels[i]] = true;
  }
  for (auto i : test)
    if (i >= features.size()) throw DataError("test index out of range");
  for (std::size_t k = 0; k < classes; ++k)
    if (!present[k]) throw DataError("class " + std::to_string(k) + " missing from the train split");
}

void standardize_features(ProbeDataset& data) {
  const std::size_t d = data.dim();
  if (d == 0 || data.train.empty()) return;
  const double n = static_cast<double>(data.train.size());
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (auto i : data.train)
    for (std::size_t j = 0; j < d; ++j) mean[j] += data.features[i][j];
  for (auto& m : mean) m /= n;
  for (auto i : data.train)
    for (std::size_t j = 0; j < d; ++j) {
      const double dv = data.features[i][j] - mean[j];
      var[j] += dv * dv;
    }
  const double width = std::sqrt(static_cast<double>(d));
  std::vector<double> scale(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double sd = std::sqrt(var[j] / n);
    scale[j] = sd > 1e-12 ? 1.0 / (sd * width) : 0.0;
  }
  for (auto& f : data.features)
    for (std::size_t j = 0; j < d; ++j) f[j] = (f[j] - mean[j]) * scale[j];
}

ProbeModel ProbeModel::zeros(std::size_t classes, std::size_t dim) {
  ProbeModel m;
  m.classes = classes;
  m.dim = dim;
  m.weights.assign(classes * dim, 0.0);
  m.bias.assign(classes, 0.0);
  return m;
}

std::vector<double> ProbeModel::logits(std::span<const double> x) const {
  if (x.size() != dim) throw ShapeError("feature length " + std::to_string(x.size()) + " does not match probe width " + std::to_string(dim));
  std::vector<double> z(classes);
  for (std::size_t k = 0; k < classes; ++k) {
    const double* w = weights.data() + k * dim;
    double acc = bias[k];
    for (std::size_t j = 0; j < dim; ++j) acc += w[j] * x[j];
    z[k] = acc;
  }
  return z;
}

std::size_t ProbeModel::predict(std::span<const double> x) const {
  const auto z = logits(x);
  std::size_t best = 0;
  for (std::size_t k = 1; k < z.size(); ++k)
    if (z[k] > z[best]) best = k;
  return best;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double mx = *std::ranges::max_element(p);
  double sum = 0.0;
  for (auto& v : p) sum += (v = std::exp(v - mx));
  for (auto& v : p) v /= sum;
  return p;
}

ProbeGradient loss_and_gradient(const ProbeModel& model, const ProbeDataset& data, std::span<const std::size_t> indices) {
  ProbeGradient g;
  g.weights.assign(model.weights.size(), 0.0);
  g.bias.assign(model.classes, 0.0);
  if (indices.empty()) return g;
  const double inv_n = 1.0 / static_cast<double>(indices.size());
  for (auto i : indices) {
    const auto& x = data.features[i];
    const auto p = softmax(model.logits(x));
    const std::size_t y = data.labels[i];
    g.loss -= std::log(std::max(p[y], std::numeric_limits<double>::min())) * inv_n;
    for (std::size_t k = 0; k < model.classes; ++k) {
      const double err = (p[k] - (k == y ? 1.0 : 0.0)) * inv_n;
      g.bias[k] += err;
      double* gw = g.weights.data() + k * model.dim;
      for (std::size_t j = 0; j < model.dim; ++j) gw[j] += err * x[j];
    }
  }
  return g;
}

ProbeModel train_probe(const ProbeDataset& data, const TrainOptions& options) {
  if (options.epochs == 0) throw ConfigError("probe training needs at least one epoch");
  if (!(options.learning_rate > 0.0)) throw ConfigError("probe learning rate must be positive");
  data.validate();
  ProbeModel model = ProbeModel::zeros(data.classes, data.dim());
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    const auto g = loss_and_gradient(model, data, data.train);
    model.loss_log.push_back(g.loss);
    for (std::size_t j = 0; j < model.weights.size(); ++j) model.weights[j] -= options.learning_rate * g.weights[j];
    for (std::size_t k = 0; k < model.classes; ++k) model.bias[k] -= options.learning_rate * g.bias[k];
  }
  model.loss_log.push_back(loss_and_gradient(model, data, data.train).loss);
  return model;
}

Evaluation evaluate(const ProbeModel& model, const ProbeDataset& data, std::span<const std::size_t> indices) {
  if (data.dim() != model.dim) throw DataError("dataset feature length " + std::to_string(data.dim()) + " does not match probe width " + std::to_string(model.dim));
  Evaluation e;
  e.confusion.assign(model.classes, std::vector<std::size_t>(model.classes, 0));
  std::size_t correct = 0;
  for (auto i : indices) {
    const std::size_t pred = model.predict(data.features[i]);
    const std::size_t truth = data.labels[i];
    if (truth < model.classes) e.confusion[truth][pred]++;
    correct += pred == truth;
  }
  e.accuracy = indices.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(indices.size());
  return e;
}

EncoderConfig probe_encoder_config(const UtilitySettings& s, Scheme scheme) {
  EncoderConfig c = EncoderConfig::defaults(scheme);
  c.channels = s.channels;
  c.height = s.height;
  c.width = s.width;
  c.patch_size = s.patch_size;
  c.hidden_width = s.hidden_width;
  c.depth = s.depth;
  c.output_dim = c.patch_dim();
  c.validate();
  return c;
}

MasterKey repetition_key(const MasterKey& key, std::size_t repetition) {
  KeyStream stream(key, "probe.rep." + std::to_string(repetition));
  MasterKey::Bytes bytes{};
  stream.read(bytes);
  return MasterKey(bytes);
}

UtilityRun utility_run(const MasterKey& key, const UtilitySettings& s) {
  const EncoderConfig color_cfg = probe_encoder_config(s, Scheme::color);
  const EncoderConfig neura_cfg = probe_encoder_config(s, Scheme::neuracrypt);

  ToyDatasetOptions toy;
  toy.classes = s.classes;
  toy.per_class = s.train_per_class + s.test_per_class;
  toy.channels = s.channels;
  toy.height = s.height;
  toy.width = s.width;
  toy.noise_sigma = s.noise_sigma;
  const auto images = generate_toy_dataset(key, toy);

  ProbeDataset base;
  base.classes = s.classes;
  for (std::size_t i = 0; i < images.size(); ++i) {
    base.labels.push_back(images[i].label);
    ((i % toy.per_class) < s.train_per_class ? base.train : base.test).push_back(i);
  }

  auto with_features = [&](auto&& featurize) {
    ProbeDataset d = base;
    d.features.resize(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) d.features[i] = featurize(i);
    standardize_features(d);
    return d;
  };
  auto accuracy = [&](const ProbeDataset& d) { return evaluate(train_probe(d, s.train), d).accuracy; };

  const Encoder color(key, color_cfg);
  const Encoder neura(key, neura_cfg);
  auto plain_task = std::async(s.jobs > 1 ? std::launch::async : std::launch::deferred, [&] {
    return with_features([&](std::size_t i) { return to_features(images[i].image.values()); });
  });
  auto color_task = std::async(s.jobs > 1 ? std::launch::async : std::launch::deferred, [&] {
    return with_features([&](std::size_t i) { return to_features(color.encrypt(images[i].image, i).values()); });
  });
  auto neura_task = std::async(s.jobs > 1 ? std::launch::async : std::launch::deferred, [&] {
    return with_features([&](std::size_t i) { return to_features(neura.encrypt(images[i].image, i).values()); });
  });
  const ProbeDataset plain = plain_task.get();

  UtilityRun run;
  run.plain_acc = accuracy(plain);
  run.color_acc = accuracy(color_task.get());
  run.neuracrypt_acc = accuracy(neura_task.get());

  // Control: train on plain features with keyed-shuffled train labels.
  ProbeDataset control = plain;
  KeyStream stream(key, "probe.label_shuffle");
  const auto perm = sample_permutation(stream, control.train.size());
  for (std::size_t t = 0; t < control.train.size(); ++t) control.labels[control.train[t]] = plain.labels[plain.train[perm[t]]];
  run.shuffled_label_acc = accuracy(control);
  return run;
}

UtilityReport utility_experiment(const MasterKey& key, const UtilitySettings& settings) {
  if (settings.repetitions == 0) throw ConfigError("utility experiment needs at least one repetition");
  UtilityReport report;
  report.settings = settings;
  for (std::size_t r = 0; r < settings.repetitions; ++r) report.runs.push_back(utility_run(repetition_key(key, r), settings));
  auto med = [&](double UtilityRun::*field) {
    std::vector<double> v;
    for (const auto& run : report.runs) v.push_back(run.*field);
    return median(std::move(v));
  };
  report.median = {med(&UtilityRun::plain_acc), med(&UtilityRun::color_acc), med(&UtilityRun::neuracrypt_acc),
                   med(&UtilityRun::shuffled_label_acc)};
  return report;
}

std::string to_json(const UtilityReport& r) {
  using nlohmann::json;
  auto run_json = [](const UtilityRun& u) {
    return json{{"plain_acc", u.plain_acc},
                {"color_acc", u.color_acc},
                {"neuracrypt_acc", u.neuracrypt_acc},
                {"shuffled_label_acc", u.shuffled_label_acc}};
  };
  json runs = json::array();
  for (const auto& u : r.runs) runs.push_back(run_json(u));
  const auto& s = r.settings;
  json j = run_json(r.median);
  j["aggregate"] = "median";
  j["chance"] = 1.0 / static_cast<double>(s.classes);
  j["runs"] = std::move(runs);
  j["settings"] = json{{"classes", s.classes},
                       {"train_per_class", s.train_per_class},
                       {"test_per_class", s.test_per_class},
                       {"geometry", {s.channels, s.height, s.width}},
                       {"patch_size", s.patch_size},
                       {"hidden_width", s.hidden_width},
                       {"depth", s.depth},
                       {"noise_sigma", s.noise_sigma},
                       {"epochs", s.train.epochs},
                       {"learning_rate", s.train.learning_rate},
                       {"repetitions", s.repetitions}};
  return j.dump(2);
}

}  // namespace neuracodec
