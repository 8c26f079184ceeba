#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "offlang/backbone.hpp"
#include "offlang/corpus.hpp"
#include "offlang/corpus_io.hpp"
#include "offlang/encoder.hpp"
#include "offlang/error.hpp"
#include "offlang/hash.hpp"
#include "offlang/rng.hpp"

namespace offlang {

struct TrainConfig {
  std::string backbone = "tiny-test";
  int epochs = 20;
  double learning_rate = 1e-2;
  int batch_size = 32;
  std::uint64_t seed = 0;
  double decision_threshold = 0.5;
};

/// Declared defaults per backbone kind; no run ever relies on unstated
/// hyperparameters.
inline TrainConfig default_train_config(const std::string& backbone_name, BackboneKind kind) {
  TrainConfig config;
  config.backbone = backbone_name;
  if (kind == BackboneKind::test) {
    config.epochs = 20;
    config.learning_rate = 1e-2;
    config.batch_size = 32;
  } else {
    config.epochs = 3;
    config.learning_rate = 2e-5;
    config.batch_size = 16;
  }
  return config;
}

inline void validate_train_config(const TrainConfig& config) {
  if (config.epochs <= 0) raise(ErrorCode::OutOfRange, "epochs must be positive");
  if (!(config.learning_rate > 0.0) || !std::isfinite(config.learning_rate)) {
    raise(ErrorCode::OutOfRange, "learning_rate must be positive and finite");
  }
  if (config.batch_size <= 0) raise(ErrorCode::OutOfRange, "batch_size must be positive");
  if (!(config.decision_threshold > 0.0) || !(config.decision_threshold < 1.0)) {
    raise(ErrorCode::OutOfRange, "decision_threshold must lie in (0,1)");
  }
}

inline std::string train_config_fingerprint(const TrainConfig& config) {
  HashWriter h;
  h.write(config.backbone)
      .write(static_cast<std::uint64_t>(config.epochs))
      .write(config.learning_rate)
      .write(static_cast<std::uint64_t>(config.batch_size))
      .write(config.seed)
      .write(config.decision_threshold);
  return to_hex16(h.finish());
}

inline nlohmann::ordered_json train_config_to_json(const TrainConfig& config) {
  nlohmann::ordered_json j;
  j["backbone"] = config.backbone;
  j["epochs"] = config.epochs;
  j["learning_rate"] = config.learning_rate;
  j["batch_size"] = config.batch_size;
  j["seed"] = config.seed;
  j["decision_threshold"] = config.decision_threshold;
  return j;
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig config;
  config.backbone = j.value("backbone", config.backbone);
  config.epochs = j.value("epochs", config.epochs);
  config.learning_rate = j.value("learning_rate", config.learning_rate);
  config.batch_size = j.value("batch_size", config.batch_size);
  config.seed = j.value("seed", config.seed);
  config.decision_threshold = j.value("decision_threshold", config.decision_threshold);
  return config;
}

struct EpochRecord {
  int epoch;
  double mean_loss;
  double train_accuracy;
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  bool single_class_warning = false;
};

using ScoreVector = std::vector<double>;

/// Encoder plus an untrained binary head, ready for fine_tune.
class Classifier {
 public:
  Classifier(BackboneSpec spec, std::shared_ptr<const Encoder> encoder, TrainConfig config)
      : spec_(std::move(spec)), encoder_(std::move(encoder)), config_(std::move(config)) {}

  const BackboneSpec& spec() const { return spec_; }
  const std::shared_ptr<const Encoder>& encoder() const { return encoder_; }
  const TrainConfig& build_config() const { return config_; }

  /// Head parameters before any training. Zero-initialized: deterministic for
  /// every seed and symmetric under label flips.
  std::vector<double> initial_weights() const {
    return std::vector<double>(encoder_->dim() + 1, 0.0);
  }

 private:
  BackboneSpec spec_;
  std::shared_ptr<const Encoder> encoder_;
  TrainConfig config_;
};

inline Classifier build_classifier(const BackboneSpec& spec, const TrainConfig& config,
                                   const BackboneRegistry& registry = BackboneRegistry::builtin()) {
  validate_train_config(config);
  const BackboneEntry& entry = registry.resolve(spec.name);
  std::shared_ptr<const Encoder> encoder;
  if (entry.spec.kind == BackboneKind::test) {
    encoder = std::make_shared<HashedBagEncoder>(entry.spec.max_sequence_length);
  } else {
    if (entry.weights_path.empty() || !std::filesystem::exists(entry.weights_path)) {
      raise(ErrorCode::WeightsUnavailable,
            "backbone '" + spec.name + "' has no reachable weights; register a weights_path");
    }
    encoder = EmbeddingTableEncoder::load(entry.weights_path, entry.spec.max_sequence_length);
  }
  return Classifier(entry.spec, std::move(encoder), config);
}

inline Classifier build_classifier(const std::string& backbone_name, const TrainConfig& config,
                                   const BackboneRegistry& registry = BackboneRegistry::builtin()) {
  return build_classifier(registry.resolve(backbone_name).spec, config, registry);
}

/// Immutable trained model; prediction is read-only and thread-safe.
class TrainedModel {
 public:
  TrainedModel(BackboneSpec spec, std::shared_ptr<const Encoder> encoder, TrainConfig config,
               std::vector<double> weights, double bias, std::string train_fingerprint,
               TrainingLog log)
      : spec_(std::move(spec)),
        encoder_(std::move(encoder)),
        config_(std::move(config)),
        weights_(std::move(weights)),
        bias_(bias),
        train_fingerprint_(std::move(train_fingerprint)),
        log_(std::move(log)) {}

  const BackboneSpec& backbone() const { return spec_; }
  const TrainConfig& config() const { return config_; }
  const std::string& train_fingerprint() const { return train_fingerprint_; }
  const TrainingLog& log() const { return log_; }
  const std::vector<double>& weights() const { return weights_; }
  double bias() const { return bias_; }
  const std::shared_ptr<const Encoder>& encoder() const { return encoder_; }

  double score_text(std::string_view text) const {
    double z = bias_;
    for (const Feature& f : encoder_->encode(text)) {
      z += weights_[f.index] * static_cast<double>(f.value);
    }
    return sigmoid(z);
  }

  static double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  }

 private:
  BackboneSpec spec_;
  std::shared_ptr<const Encoder> encoder_;
  TrainConfig config_;
  std::vector<double> weights_;
  double bias_;
  std::string train_fingerprint_;
  TrainingLog log_;
};

namespace detail {

inline double stable_bce_loss(double z, double y) {
  // -y*log(p) - (1-y)*log(1-p) without forming p. Grouped so a correct
  // prediction at infinite margin gives 0, not inf - inf.
  if (z >= 0.0) return z * (1.0 - y) + std::log1p(std::exp(-z));
  return -z * y + std::log1p(std::exp(z));
}

}  // namespace detail

/// Mini-batch gradient descent on a logistic head over encoder features.
/// Batch gradients use sum reduction. The epoch shuffle is seeded by
/// (config.seed, epoch) only, so runs are pure in (corpus, config) and label
/// flips mirror the trajectory exactly.
inline TrainedModel fine_tune(const Classifier& classifier, const LabeledCorpus& train,
                              const TrainConfig& config) {
  validate_train_config(config);
  if (train.empty()) {
    raise(ErrorCode::EmptyTrainingSet, "training corpus is empty");
  }

  const std::size_t n = train.size();
  const Encoder& encoder = *classifier.encoder();
  std::vector<FeatureVector> features;
  features.reserve(n);
  std::vector<double> targets;
  targets.reserve(n);
  std::size_t positives = 0;
  for (const TextSample& s : train.samples()) {
    features.push_back(encoder.encode(s.text));
    const bool hof = *s.label == Label::HOF;
    targets.push_back(hof ? 1.0 : 0.0);
    if (hof) ++positives;
  }

  TrainingLog log;
  log.single_class_warning = (positives == 0 || positives == n);

  std::vector<double> weights(encoder.dim(), 0.0);
  double bias = 0.0;
  const auto batch_size = static_cast<std::size_t>(config.batch_size);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, "epoch/" + std::to_string(epoch)));
    rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t end = std::min(n, start + batch_size);
      std::vector<std::pair<std::size_t, double>> pending;  // (sample, error)
      double bias_grad = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        double z = bias;
        for (const Feature& f : features[i]) z += weights[f.index] * f.value;
        const double p = TrainedModel::sigmoid(z);
        const double error = p - targets[i];
        loss_sum += detail::stable_bce_loss(z, targets[i]);
        if ((p >= 0.5) == (targets[i] == 1.0)) ++correct;
        pending.emplace_back(i, error);
        bias_grad += error;
      }
      for (const auto& [i, error] : pending) {
        for (const Feature& f : features[i]) {
          weights[f.index] -= config.learning_rate * error * f.value;
        }
      }
      bias -= config.learning_rate * bias_grad;
    }

    const double mean_loss = loss_sum / static_cast<double>(n);
    if (!std::isfinite(mean_loss)) {
      raise(ErrorCode::NonFiniteLoss,
            "training diverged at epoch " + std::to_string(epoch + 1));
    }
    log.epochs.push_back(
        {epoch + 1, mean_loss, static_cast<double>(correct) / static_cast<double>(n)});
  }

  HashWriter h;
  h.write(train.fingerprint()).write(train_config_fingerprint(config));
  return TrainedModel(classifier.spec(), classifier.encoder(), config, std::move(weights), bias,
                      to_hex16(h.finish()), std::move(log));
}

inline ScoreVector predict_scores(const TrainedModel& model,
                                  std::span<const std::string> texts) {
  if (texts.empty()) {
    raise(ErrorCode::EmptyInput, "predict_scores needs at least one text");
  }
  ScoreVector scores;
  scores.reserve(texts.size());
  for (const std::string& text : texts) scores.push_back(model.score_text(text));
  return scores;
}

/// Threshold rule: a score exactly at the threshold flags HOF.
inline Label decide(double score, double threshold) {
  if (!(score >= 0.0) || !(score <= 1.0)) {
    raise(ErrorCode::OutOfRange, "score must lie in [0,1]");
  }
  if (!(threshold > 0.0) || !(threshold < 1.0)) {
    raise(ErrorCode::OutOfRange, "threshold must lie in (0,1)");
  }
  return score >= threshold ? Label::HOF : Label::NOT;
}

// --- Checkpointing -----------------------------------------------------------
// A checkpoint is a directory: weights.bin (raw little-endian doubles) plus
// metadata.json (backbone, config, fingerprint, format version).

inline constexpr int kCheckpointFormatVersion = 1;

inline void save_model(const TrainedModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  nlohmann::ordered_json meta;
  meta["format_version"] = kCheckpointFormatVersion;
  meta["backbone"] = {{"name", model.backbone().name},
                      {"kind", std::string(to_string(model.backbone().kind))},
                      {"max_sequence_length", model.backbone().max_sequence_length}};
  meta["encoder_id"] = model.encoder()->id();
  meta["dim"] = model.weights().size();
  meta["config"] = train_config_to_json(model.config());
  meta["train_fingerprint"] = model.train_fingerprint();
  meta["single_class_warning"] = model.log().single_class_warning;
  nlohmann::ordered_json epochs = nlohmann::ordered_json::array();
  for (const EpochRecord& r : model.log().epochs) {
    epochs.push_back({{"epoch", r.epoch}, {"mean_loss", r.mean_loss},
                      {"train_accuracy", r.train_accuracy}});
  }
  meta["training_log"] = std::move(epochs);

  std::ofstream meta_out(dir / "metadata.json", std::ios::binary);
  if (!meta_out) raise(ErrorCode::MissingPath, "cannot write checkpoint metadata");
  meta_out << meta.dump(2) << '\n';

  std::ofstream weights_out(dir / "weights.bin", std::ios::binary);
  if (!weights_out) raise(ErrorCode::MissingPath, "cannot write checkpoint weights");
  const std::uint64_t count = model.weights().size();
  weights_out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  weights_out.write(reinterpret_cast<const char*>(model.weights().data()),
                    static_cast<std::streamsize>(count * sizeof(double)));
  const double bias = model.bias();
  weights_out.write(reinterpret_cast<const char*>(&bias), sizeof(bias));
}

inline TrainedModel load_model(const std::filesystem::path& dir,
                               const BackboneRegistry& registry = BackboneRegistry::builtin()) {
  const std::filesystem::path meta_path = dir / "metadata.json";
  const std::filesystem::path weights_path = dir / "weights.bin";
  if (!std::filesystem::exists(meta_path) || !std::filesystem::exists(weights_path)) {
    raise(ErrorCode::CorruptCheckpoint, "checkpoint files missing under '" + dir.string() + "'");
  }

  nlohmann::json meta = nlohmann::json::parse(detail::read_file(meta_path), nullptr, false);
  if (meta.is_discarded() || !meta.is_object()) {
    raise(ErrorCode::CorruptCheckpoint, "unreadable checkpoint metadata");
  }
  const int version = meta.value("format_version", -1);
  if (version != kCheckpointFormatVersion) {
    raise(ErrorCode::VersionMismatch,
          "checkpoint format version " + std::to_string(version) + ", expected " +
              std::to_string(kCheckpointFormatVersion));
  }

  BackboneSpec spec;
  spec.name = meta.at("backbone").at("name").get<std::string>();
  spec.kind = parse_backbone_kind(meta.at("backbone").at("kind").get<std::string>());
  spec.max_sequence_length = meta.at("backbone").at("max_sequence_length").get<int>();
  const auto dim = meta.at("dim").get<std::uint64_t>();
  const TrainConfig config = train_config_from_json(meta.at("config"));

  std::ifstream in(weights_path, std::ios::binary | std::ios::ate);
  const auto file_size = static_cast<std::uint64_t>(in.tellg());
  const std::uint64_t expected = sizeof(std::uint64_t) + (dim + 1) * sizeof(double);
  if (file_size != expected) {
    raise(ErrorCode::CorruptCheckpoint, "weights.bin has " + std::to_string(file_size) +
                                            " bytes, expected " + std::to_string(expected));
  }
  in.seekg(0);
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (count != dim) {
    raise(ErrorCode::CorruptCheckpoint, "weight count disagrees with metadata");
  }
  std::vector<double> weights(count);
  in.read(reinterpret_cast<char*>(weights.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  double bias = 0.0;
  in.read(reinterpret_cast<char*>(&bias), sizeof(bias));
  if (!in) raise(ErrorCode::CorruptCheckpoint, "truncated weights.bin");

  // Rebuild the encoder through the registry and make sure it is the same one
  // the checkpoint was written against.
  Classifier rebuilt = build_classifier(spec, config, registry);
  const std::string expected_encoder = meta.value("encoder_id", "");
  if (!expected_encoder.empty() && rebuilt.encoder()->id() != expected_encoder) {
    raise(ErrorCode::CorruptCheckpoint,
          "encoder behind backbone '" + spec.name + "' changed since the checkpoint was written");
  }
  if (rebuilt.encoder()->dim() != dim) {
    raise(ErrorCode::CorruptCheckpoint, "encoder dimension disagrees with checkpoint");
  }

  TrainingLog log;
  log.single_class_warning = meta.value("single_class_warning", false);
  if (meta.contains("training_log")) {
    for (const auto& r : meta.at("training_log")) {
      log.epochs.push_back({r.value("epoch", 0), r.value("mean_loss", 0.0),
                            r.value("train_accuracy", 0.0)});
    }
  }

  return TrainedModel(spec, rebuilt.encoder(), config, std::move(weights), bias,
                      meta.value("train_fingerprint", ""), std::move(log));
}

}  // namespace offlang
