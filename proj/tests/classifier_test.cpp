#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "offlang/backbone.hpp"
#include "offlang/classifier.hpp"
#include "offlang/corpus.hpp"
#include "offlang/encoder.hpp"
#include "offlang/error.hpp"
#include "support/synthetic.hpp"

using offlang::BackboneKind;
using offlang::BackboneRegistry;
using offlang::Classifier;
using offlang::Error;
using offlang::ErrorCode;
using offlang::Label;
using offlang::LabeledCorpus;
using offlang::TextSample;
using offlang::TrainConfig;
using offlang::TrainedModel;
using testsupport::TempDir;

namespace {

void expect_error(ErrorCode code, const std::function<void()>& fn) {
  try {
    fn();
    FAIL() << "expected error " << offlang::error_code_name(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

TrainConfig tiny_config(std::uint64_t seed = 0) {
  TrainConfig config;  // tiny-test defaults: 20 epochs, lr 1e-2, batch 32
  config.seed = seed;
  return config;
}

TrainedModel train_tiny(const LabeledCorpus& corpus, std::uint64_t seed = 0) {
  const TrainConfig config = tiny_config(seed);
  return offlang::fine_tune(offlang::build_classifier("tiny-test", config), corpus, config);
}

std::vector<std::string> corpus_texts(const LabeledCorpus& corpus) {
  std::vector<std::string> texts;
  for (const TextSample& s : corpus.samples()) texts.push_back(s.text);
  return texts;
}

}  // namespace

TEST(TrainConfig, KindSpecificDefaults) {
  const TrainConfig test_cfg = offlang::default_train_config("tiny-test", BackboneKind::test);
  EXPECT_EQ(test_cfg.epochs, 20);
  EXPECT_DOUBLE_EQ(test_cfg.learning_rate, 1e-2);
  EXPECT_EQ(test_cfg.batch_size, 32);

  const TrainConfig prod_cfg =
      offlang::default_train_config("xlm-roberta-large", BackboneKind::multilingual);
  EXPECT_EQ(prod_cfg.epochs, 3);
  EXPECT_DOUBLE_EQ(prod_cfg.learning_rate, 2e-5);
  EXPECT_EQ(prod_cfg.batch_size, 16);
  EXPECT_DOUBLE_EQ(prod_cfg.decision_threshold, 0.5);
}

TEST(TrainConfig, RejectsOutOfRangeValues) {
  TrainConfig config;
  config.epochs = 0;
  expect_error(ErrorCode::OutOfRange, [&] { offlang::validate_train_config(config); });
  config = TrainConfig{};
  config.learning_rate = -1.0;
  expect_error(ErrorCode::OutOfRange, [&] { offlang::validate_train_config(config); });
  config = TrainConfig{};
  config.batch_size = 0;
  expect_error(ErrorCode::OutOfRange, [&] { offlang::validate_train_config(config); });
  config = TrainConfig{};
  config.decision_threshold = 1.0;
  expect_error(ErrorCode::OutOfRange, [&] { offlang::validate_train_config(config); });
}

TEST(BuildClassifier, ResolvesBackbonesAndWeights) {
  expect_error(ErrorCode::UnknownBackbone,
               [] { offlang::build_classifier("made-up-bert", TrainConfig{}); });
  // Production backbones need a registered, existing weights file.
  TrainConfig config;
  config.backbone = "xlm-roberta-large";
  expect_error(ErrorCode::WeightsUnavailable,
               [&] { offlang::build_classifier("xlm-roberta-large", config); });

  const Classifier tiny = offlang::build_classifier("tiny-test", TrainConfig{});
  EXPECT_EQ(tiny.spec().kind, BackboneKind::test);
  EXPECT_GT(tiny.encoder()->dim(), 0u);
}

TEST(EmbeddingTableEncoder, MeanPoolsKnownTokens) {
  TempDir dir;
  testsupport::write_file(dir.file("embed.vec"),
                          "3 2\n"
                          "good 1.0 0.0\n"
                          "bad 0.0 1.0\n"
                          "day 1.0 1.0\n");
  const auto encoder = offlang::EmbeddingTableEncoder::load(dir.file("embed.vec"), 64);
  EXPECT_EQ(encoder->dim(), 2u);

  const offlang::FeatureVector fv = encoder->encode("good day unknown");
  ASSERT_EQ(fv.size(), 2u);
  EXPECT_FLOAT_EQ(fv[0].value, 1.0f);  // mean of 1.0 and 1.0
  EXPECT_FLOAT_EQ(fv[1].value, 0.5f);  // mean of 0.0 and 1.0

  EXPECT_TRUE(encoder->encode("nothing matches here").empty());
}

TEST(EmbeddingTableEncoder, RejectsBrokenTables) {
  TempDir dir;
  expect_error(ErrorCode::WeightsUnavailable,
               [&] { offlang::EmbeddingTableEncoder::load(dir.file("absent.vec"), 64); });

  testsupport::write_file(dir.file("ragged.vec"), "a 1.0 2.0\nb 1.0\n");
  expect_error(ErrorCode::WeightsUnavailable,
               [&] { offlang::EmbeddingTableEncoder::load(dir.file("ragged.vec"), 64); });

  testsupport::write_file(dir.file("empty.vec"), "\n");
  expect_error(ErrorCode::WeightsUnavailable,
               [&] { offlang::EmbeddingTableEncoder::load(dir.file("empty.vec"), 64); });
}

TEST(BuildClassifier, EmbeddingBackboneTrainsEndToEnd) {
  TempDir dir;
  testsupport::write_file(dir.file("embed.vec"),
                          "wretch 1.0 0.0\nfilth 1.0 0.1\nscum 0.9 0.0\nvile 1.0 0.0\n"
                          "trash 0.95 0.05\nrotten 1.0 0.0\nnasty 0.9 0.1\ngrim 1.0 0.0\n"
                          "kind 0.0 1.0\ngentle 0.1 1.0\nlovely 0.0 0.9\nwarm 0.0 1.0\n"
                          "calm 0.05 0.95\nsunny 0.0 1.0\nbright 0.1 0.9\nsweet 0.0 1.0\n");
  BackboneRegistry registry = BackboneRegistry::builtin();
  offlang::BackboneEntry entry;
  entry.spec = offlang::BackboneSpec{"micro-embed", BackboneKind::monolingual, 64};
  entry.weights_path = dir.file("embed.vec").string();
  registry.register_entry(entry);

  TrainConfig config = offlang::default_train_config("micro-embed", BackboneKind::monolingual);
  config.epochs = 200;
  config.learning_rate = 0.5;
  const LabeledCorpus corpus = testsupport::make_separable_corpus(60, 4);
  const TrainedModel model =
      offlang::fine_tune(offlang::build_classifier("micro-embed", config, registry), corpus, config);
  EXPECT_GE(model.log().epochs.back().train_accuracy, 0.95);
}

TEST(FineTune, LearnsSeparableCorpusAndLogsProgress) {
  const LabeledCorpus corpus = testsupport::make_separable_corpus(200, 21);
  const TrainedModel model = train_tiny(corpus, 21);
  ASSERT_EQ(model.log().epochs.size(), 20u);
  EXPECT_LT(model.log().epochs.back().mean_loss, model.log().epochs.front().mean_loss);
  EXPECT_GE(model.log().epochs.back().train_accuracy, 0.99);
  EXPECT_FALSE(model.log().single_class_warning);
}

TEST(FineTune, DeterministicInCorpusAndConfig) {
  const LabeledCorpus corpus = testsupport::make_separable_corpus(80, 5);
  const TrainedModel a = train_tiny(corpus, 7);
  const TrainedModel b = train_tiny(corpus, 7);
  EXPECT_EQ(a.train_fingerprint(), b.train_fingerprint());
  EXPECT_EQ(a.weights(), b.weights());
  EXPECT_EQ(a.bias(), b.bias());

  const TrainedModel c = train_tiny(corpus, 8);
  EXPECT_NE(a.train_fingerprint(), c.train_fingerprint());
}

TEST(FineTune, LabelFlipSymmetry) {
  const LabeledCorpus corpus = testsupport::make_separable_corpus(60, 13);
  std::vector<TextSample> flipped_samples = corpus.samples();
  for (TextSample& s : flipped_samples) s.label = offlang::flip(*s.label);
  const LabeledCorpus flipped = LabeledCorpus::from_samples(std::move(flipped_samples));

  const TrainedModel original = train_tiny(corpus, 3);
  const TrainedModel mirrored = train_tiny(flipped, 3);

  const std::vector<std::string> texts = corpus_texts(corpus);
  const offlang::ScoreVector s1 = offlang::predict_scores(original, texts);
  const offlang::ScoreVector s2 = offlang::predict_scores(mirrored, texts);
  for (std::size_t i = 0; i < s1.size(); ++i) {
    EXPECT_NEAR(s1[i] + s2[i], 1.0, 1e-6);
  }
}

TEST(FineTune, SingleClassCorpusWarnsButTrains) {
  std::vector<TextSample> samples;
  for (int i = 0; i < 8; ++i) {
    TextSample s;
    s.id = "h" + std::to_string(i);
    s.text = "angry text " + std::to_string(i);
    s.label = Label::HOF;
    s.source = "test";
    samples.push_back(std::move(s));
  }
  const TrainedModel model = train_tiny(LabeledCorpus::from_samples(std::move(samples)));
  EXPECT_TRUE(model.log().single_class_warning);
  EXPECT_GT(model.score_text("angry text 0"), 0.5);
}

TEST(FineTune, EmptyCorpusAndDivergenceAreErrors) {
  const TrainConfig config = tiny_config();
  const Classifier classifier = offlang::build_classifier("tiny-test", config);
  expect_error(ErrorCode::EmptyTrainingSet, [&] {
    offlang::fine_tune(classifier, LabeledCorpus::from_samples({}), config);
  });

  // A huge learning rate overflows the shared-token weight in one update;
  // the sample on the other side then sees an infinite loss.
  std::vector<TextSample> samples;
  TextSample a;
  a.id = "a";
  a.text = "t t t t t t t t";
  a.label = Label::HOF;
  a.source = "test";
  TextSample b;
  b.id = "b";
  b.text = "t";
  b.label = Label::NOT;
  b.source = "test";
  samples = {a, b};
  TrainConfig hot = tiny_config();
  hot.learning_rate = 1e308;
  hot.epochs = 3;
  expect_error(ErrorCode::NonFiniteLoss, [&] {
    offlang::fine_tune(classifier, LabeledCorpus::from_samples(samples), hot);
  });
}

TEST(PredictScores, RangeAndEmptyInput) {
  const LabeledCorpus corpus = testsupport::make_separable_corpus(40, 2);
  const TrainedModel model = train_tiny(corpus);
  const offlang::ScoreVector scores = offlang::predict_scores(model, corpus_texts(corpus));
  for (double s : scores) {
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
  expect_error(ErrorCode::EmptyInput, [&] {
    offlang::predict_scores(model, std::vector<std::string>{});
  });
}

TEST(Decide, BoundaryGoesToHof) {
  EXPECT_EQ(offlang::decide(0.5, 0.5), Label::HOF);
  EXPECT_EQ(offlang::decide(0.4999999, 0.5), Label::NOT);
  EXPECT_EQ(offlang::decide(0.91, 0.9), Label::HOF);
  expect_error(ErrorCode::OutOfRange, [] { offlang::decide(1.5, 0.5); });
  expect_error(ErrorCode::OutOfRange, [] { offlang::decide(0.5, 0.0); });
  expect_error(ErrorCode::OutOfRange, [] { offlang::decide(0.5, 1.0); });
}

TEST(Checkpoint, SaveLoadPredictIsScoreIdentical) {
  TempDir dir;
  const LabeledCorpus corpus = testsupport::make_separable_corpus(100, 31);
  const TrainedModel model = train_tiny(corpus, 31);
  offlang::save_model(model, dir.file("ckpt"));
  const TrainedModel loaded = offlang::load_model(dir.file("ckpt"));

  const std::vector<std::string> texts = corpus_texts(corpus);
  const offlang::ScoreVector before = offlang::predict_scores(model, texts);
  const offlang::ScoreVector after = offlang::predict_scores(loaded, texts);
  ASSERT_EQ(before.size(), after.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_EQ(before[i], after[i]);
  }
  EXPECT_EQ(loaded.train_fingerprint(), model.train_fingerprint());
  EXPECT_EQ(loaded.config().epochs, model.config().epochs);
}

TEST(Checkpoint, DetectsCorruptionAndVersionSkew) {
  TempDir dir;
  const LabeledCorpus corpus = testsupport::make_separable_corpus(20, 1);
  const TrainedModel model = train_tiny(corpus);

  offlang::save_model(model, dir.file("truncated"));
  std::filesystem::resize_file(dir.file("truncated") / "weights.bin", 64);
  expect_error(ErrorCode::CorruptCheckpoint, [&] { offlang::load_model(dir.file("truncated")); });

  offlang::save_model(model, dir.file("nometa"));
  std::filesystem::remove(dir.file("nometa") / "metadata.json");
  expect_error(ErrorCode::CorruptCheckpoint, [&] { offlang::load_model(dir.file("nometa")); });

  offlang::save_model(model, dir.file("version"));
  {
    std::string meta = testsupport::read_file(dir.file("version") / "metadata.json");
    const std::string needle = "\"format_version\": 1";
    meta.replace(meta.find(needle), needle.size(), "\"format_version\": 99");
    testsupport::write_file(dir.file("version") / "metadata.json", meta);
  }
  expect_error(ErrorCode::VersionMismatch, [&] { offlang::load_model(dir.file("version")); });
}

TEST(HashedBagEncoder, CountsAndTruncates) {
  const offlang::HashedBagEncoder encoder(4, 1u << 10);
  const offlang::FeatureVector fv = encoder.encode("x x x x x x");
  ASSERT_EQ(fv.size(), 1u);
  EXPECT_FLOAT_EQ(fv[0].value, 4.0f);  // max_tokens caps the count

  const offlang::FeatureVector multi = encoder.encode("a b a");
  ASSERT_EQ(multi.size(), 2u);
  EXPECT_TRUE(std::is_sorted(multi.begin(), multi.end(),
                             [](const auto& l, const auto& r) { return l.index < r.index; }));
}
