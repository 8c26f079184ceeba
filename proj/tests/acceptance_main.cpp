// Standalone acceptance gate. Runs every headline behavior contract end to
// end and prints one PASS/FAIL line per criterion; exits nonzero if any fail.
// No test framework: this binary is meant to be run (and read) on its own.

#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "offlang/offlang.hpp"
#include "support/synthetic.hpp"

using offlang::ConfusionMatrix;
using offlang::Label;
using offlang::LabeledCorpus;
using offlang::MockCompletionClient;
using offlang::Provenance;
using offlang::TextSample;
using offlang::ThresholdPolicy;
using offlang::TrainConfig;
using offlang::TrainedModel;

namespace {

int g_failures = 0;

void run_criterion(int number, const std::string& title,
                   const std::function<void(std::string&)>& body) {
  std::string detail;
  bool ok = true;
  try {
    body(detail);
    ok = detail.empty();
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("exception: ") + e.what();
  }
  if (ok) {
    std::printf("PASS criterion %d: %s\n", number, title.c_str());
  } else {
    std::printf("FAIL criterion %d: %s (%s)\n", number, title.c_str(), detail.c_str());
    ++g_failures;
  }
  std::fflush(stdout);
}

void require(std::string& detail, bool condition, const std::string& message) {
  if (!condition && detail.empty()) detail = message;
}

double uniform01(offlang::Rng& rng) {
  return static_cast<double>(rng.next() >> 11) * (1.0 / 9007199254740992.0);
}

TrainedModel train_tiny(const LabeledCorpus& corpus, std::uint64_t seed) {
  TrainConfig config;
  config.seed = seed;
  return offlang::fine_tune(offlang::build_classifier("tiny-test", config), corpus, config);
}

// --- criterion 1: metric correctness against an independent oracle ---------

void criterion_metrics(std::string& detail) {
  ConfusionMatrix a;
  a.tp = 2;
  a.fp = 0;
  a.fn = 1;
  a.tn = 1;
  require(detail, std::abs(offlang::macro_f1(a) - 11.0 / 15.0) <= 1e-12,
          "hand case macro F1 should be 11/15, got " + std::to_string(offlang::macro_f1(a)));

  ConfusionMatrix b;
  b.tp = 1;
  b.fp = 1;
  b.fn = 0;
  b.tn = 0;
  require(detail, std::abs(offlang::macro_f1(b) - 1.0 / 3.0) <= 1e-12,
          "degenerate hand case macro F1 should be 1/3");
  require(detail, offlang::not_metrics(b).degenerate,
          "all-HOF predictions must set the NOT degeneracy flag");
  require(detail, offlang::not_metrics(b).f1 == 0.0,
          "zero-denominator NOT F1 must score exactly 0");

  offlang::Rng rng(424242);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(50);
    std::vector<Label> gold;
    std::vector<Label> pred;
    for (std::size_t i = 0; i < n; ++i) {
      gold.push_back(rng.below(2) == 0 ? Label::HOF : Label::NOT);
      pred.push_back(rng.below(2) == 0 ? Label::HOF : Label::NOT);
    }
    const ConfusionMatrix m = offlang::confusion(pred, gold);
    const testsupport::OracleMetrics oracle = testsupport::oracle_metrics(gold, pred);
    const offlang::ClassMetrics hof = offlang::hof_metrics(m);
    const offlang::ClassMetrics not_class = offlang::not_metrics(m);

    const bool match = std::abs(hof.precision - oracle.hof_precision) <= 1e-12 &&
                       std::abs(hof.recall - oracle.hof_recall) <= 1e-12 &&
                       std::abs(hof.f1 - oracle.hof_f1) <= 1e-12 &&
                       std::abs(not_class.precision - oracle.not_precision) <= 1e-12 &&
                       std::abs(not_class.recall - oracle.not_recall) <= 1e-12 &&
                       std::abs(not_class.f1 - oracle.not_f1) <= 1e-12 &&
                       std::abs(offlang::macro_f1(m) - oracle.macro_f1) <= 1e-12;
    require(detail, match, "oracle mismatch at randomized trial " + std::to_string(trial));
    if (!detail.empty()) return;
  }
}

// --- criterion 2: corpus tripling arithmetic --------------------------------

void criterion_augment_arithmetic(std::string& detail) {
  struct Row {
    offlang::Language language;
    std::size_t before;
    std::size_t after;
  };
  const std::vector<Row> rows = {
      {offlang::Language::bengali, 1281, 3843},
      {offlang::Language::assamese, 4036, 12108},
      {offlang::Language::bodo, 1679, 5037},
  };

  const MockCompletionClient client;
  std::uint64_t seed = 1;
  for (const Row& row : rows) {
    const LabeledCorpus train = testsupport::make_separable_corpus(row.before, seed, row.language);
    const LabeledCorpus heldout =
        testsupport::make_separable_corpus(200, seed + 1000, row.language);
    const std::string heldout_before = heldout.fingerprint();

    const auto [expanded, records] =
        offlang::augment_corpus(train, 3, client, offlang::PromptTemplate{}, {}, 8);
    require(detail, expanded.size() == row.after,
            std::string(offlang::to_string(row.language)) + ": expected " +
                std::to_string(row.after) + " samples, got " + std::to_string(expanded.size()));

    for (const TextSample& s : expanded.samples()) {
      if (s.provenance != Provenance::augmented) continue;
      const TextSample* parent = expanded.find(*s.parent_id);
      require(detail, parent != nullptr && *parent->label == *s.label,
              "augmented sample '" + s.id + "' does not preserve its parent label");
      if (!detail.empty()) return;
    }
    require(detail, heldout.fingerprint() == heldout_before,
            "augmentation must leave heldout data untouched");
    if (!detail.empty()) return;
    ++seed;
  }
}

// --- criterion 3: human audit bookkeeping ------------------------------------

void criterion_audit(std::string& detail) {
  const LabeledCorpus train = testsupport::make_separable_corpus(100, 7);

  MockCompletionClient::Options options;
  for (int i = 0; i < 4; ++i) options.flip_texts.push_back(train.samples()[i].text);
  const MockCompletionClient client{options};

  const auto [expanded, records] = offlang::augment_corpus(train, 3, client);
  std::size_t augmented_count = 0;
  for (const TextSample& s : expanded.samples()) {
    if (s.provenance == Provenance::augmented) ++augmented_count;
  }
  require(detail, augmented_count == 200,
          "expected exactly 200 augmented samples, got " + std::to_string(augmented_count));
  if (!detail.empty()) return;

  offlang::ReviewSheet sheet = offlang::export_audit_sheet(expanded, 200, 99);
  require(detail, sheet.rows.size() == 200, "audit sheet should cover all 200 samples");

  // Simulated reviewer: flag exactly the variants carrying the flip marker.
  std::size_t flagged = 0;
  for (offlang::ReviewRow& row : sheet.rows) {
    if (row.augmented_text.find("<label-flip>") != std::string::npos) {
      row.verdict = offlang::Verdict::disagree;
      ++flagged;
    } else {
      row.verdict = offlang::Verdict::agree;
    }
  }
  require(detail, flagged == 4, "expected 4 flagged rows, got " + std::to_string(flagged));

  const double agreement = offlang::compute_agreement(sheet);
  require(detail, agreement == 0.98,
          "agreement should be exactly 0.980, got " + std::to_string(agreement));
}

// --- criterion 4: dual-threshold gate invariants -----------------------------

void criterion_gate(std::string& detail) {
  // Default policy hand case, boundary values included on the kept side.
  {
    std::vector<TextSample> pool;
    for (int i = 0; i < 6; ++i) {
      TextSample s;
      s.id = "g" + std::to_string(i);
      s.text = "gate " + std::to_string(i);
      s.source = "pool";
      pool.push_back(std::move(s));
    }
    const offlang::ScoreVector scores = {0.95, 0.90, 0.50, 0.20, 0.10, 0.899999};
    const offlang::PseudoLabelBatch batch =
        offlang::detail::partition_scores(pool, scores, ThresholdPolicy{}, "fp");
    std::unordered_map<std::string, Label> kept;
    for (const TextSample& s : batch.kept) kept.emplace(s.id, *s.label);
    require(detail, kept.size() == 4 && batch.abstained.size() == 2,
            "default gate should keep 4 of 6 and abstain on 2");
    require(detail,
            kept.count("g0") && kept.at("g0") == Label::HOF && kept.count("g1") &&
                kept.at("g1") == Label::HOF && kept.count("g3") && kept.at("g3") == Label::NOT &&
                kept.count("g4") && kept.at("g4") == Label::NOT,
            "kept samples landed on the wrong side of the default thresholds");
  }
  if (!detail.empty()) return;

  offlang::Rng rng(31337);
  for (int trial = 0; trial < 500; ++trial) {
    const double lower = uniform01(rng) * 0.45;
    const double upper = 0.55 + uniform01(rng) * 0.45;
    const double decision = lower + uniform01(rng) * (upper - lower);
    ThresholdPolicy policy;
    policy.lower = lower;
    policy.upper = upper;
    policy.decision = decision;
    offlang::validate_policy(policy);

    const int n = 1 + static_cast<int>(rng.below(16));
    std::vector<TextSample> pool;
    offlang::ScoreVector scores;
    for (int i = 0; i < n; ++i) {
      TextSample s;
      s.id = "r" + std::to_string(i);
      s.text = "pool " + std::to_string(i);
      s.source = "pool";
      pool.push_back(std::move(s));
      scores.push_back(uniform01(rng));
    }

    const offlang::PseudoLabelBatch batch =
        offlang::detail::partition_scores(pool, scores, policy, "fp");
    require(detail, batch.kept.size() + batch.abstained.size() == pool.size(),
            "gate must partition the pool (trial " + std::to_string(trial) + ")");

    std::unordered_map<std::string, double> by_id;
    for (int i = 0; i < n; ++i) by_id[pool[i].id] = scores[i];
    for (const TextSample& s : batch.kept) {
      const bool side = *s.label == Label::HOF ? *s.score >= policy.upper
                                               : *s.score <= policy.lower;
      require(detail, side && *s.score == by_id[s.id],
              "kept sample on the wrong side (trial " + std::to_string(trial) + ")");
    }
    for (const std::string& id : batch.abstained) {
      require(detail, by_id[id] > policy.lower && by_id[id] < policy.upper,
              "abstained score outside the open middle band (trial " + std::to_string(trial) +
                  ")");
    }

    ThresholdPolicy strict = policy;
    strict.upper = std::min(1.0, policy.upper + 0.03);
    strict.lower = std::max(0.0, policy.lower - 0.03);
    const offlang::PseudoLabelBatch strict_batch =
        offlang::detail::partition_scores(pool, scores, strict, "fp");
    std::set<std::string> loose_ids;
    for (const TextSample& s : batch.kept) loose_ids.insert(s.id);
    for (const TextSample& s : strict_batch.kept) {
      require(detail, loose_ids.count(s.id) == 1,
              "stricter gate kept a sample the looser one dropped (trial " +
                  std::to_string(trial) + ")");
    }
    if (!detail.empty()) return;
  }
}

// --- criterion 5: desk-scale self-training -----------------------------------

void criterion_selftrain(std::string& detail) {
  const LabeledCorpus corpus = testsupport::make_separable_corpus(200, 101);
  offlang::SplitSpec spec;
  spec.train_fraction = 0.9;
  spec.seed = 101;
  const auto [train, heldout] = offlang::split_corpus(corpus, spec);
  const auto [pool, gold] = testsupport::make_separable_pool(900, 102);

  TrainConfig config;
  config.seed = 101;
  const offlang::SelfTrainResult result =
      offlang::self_train(config, train, heldout, pool, ThresholdPolicy{});

  require(detail, result.report.rounds.size() == 1, "expected a single self-training round");
  if (!detail.empty()) return;
  const offlang::RoundRecord& round = result.report.rounds[0];

  const double kept_fraction = static_cast<double>(round.kept_count) / 900.0;
  require(detail, kept_fraction >= 0.50,
          "gate kept only " + std::to_string(kept_fraction) + " of the pool");

  std::size_t correct = 0;
  std::size_t pseudo = 0;
  for (const TextSample& s : result.corpus.samples()) {
    if (s.provenance != Provenance::pseudo_labeled) continue;
    ++pseudo;
    if (*s.label == gold.at(s.id)) ++correct;
  }
  require(detail, pseudo == round.kept_count, "pseudo-labeled rows must match the round record");
  const double accuracy = pseudo == 0 ? 0.0 : static_cast<double>(correct) / pseudo;
  require(detail, accuracy >= 0.95,
          "pseudo-label accuracy " + std::to_string(accuracy) + " below 0.95");

  require(detail, round.post_retrain.macro_f1 >= round.pre_retrain.macro_f1 - 0.01,
          "post-retrain macro F1 dropped more than 0.01");

  std::unordered_set<std::string> heldout_texts;
  for (const TextSample& s : heldout.samples()) heldout_texts.insert(s.text);
  for (const TextSample& s : result.corpus.samples()) {
    require(detail, heldout_texts.count(s.text) == 0 && !heldout.contains_id(s.id),
            "heldout data leaked into the self-training corpus");
    if (!detail.empty()) return;
  }
}

// --- criterion 6: end-to-end determinism -------------------------------------

void criterion_determinism(std::string& detail) {
  testsupport::TempDir dir;
  offlang::save_corpus_jsonl(testsupport::make_separable_corpus(60, 11),
                             dir.file("corpus.jsonl"));
  const auto [pool, gold] = testsupport::make_separable_pool(40, 12);
  offlang::save_pool_jsonl(pool, dir.file("pool.jsonl"));
  testsupport::write_file(dir.file("manifest.json"), R"({
    "language": "bengali",
    "dataset_path": "corpus.jsonl",
    "split": {"train_fraction": 0.8},
    "backbones": [{"name": "tiny-test", "label": "baseline"}],
    "augmentation": {"multiplier": 2},
    "selftrain": {"pool_path": "pool.jsonl"},
    "seed": 5
  })");

  const offlang::ExperimentManifest manifest =
      offlang::validate_manifest(dir.file("manifest.json"));
  const offlang::RunArtifacts first = offlang::run_experiment(manifest, dir.file("manifest.json"));
  const offlang::RunArtifacts second =
      offlang::run_experiment(manifest, dir.file("manifest.json"));

  require(detail, first.dir != second.dir, "each run must land in a fresh directory");
  for (const char* rel :
       {"eval/baseline.json", "eval/baseline-selftrain.json", "tables/comparison.md",
        "tables/comparison.csv", "corpora/train_augmented.jsonl",
        "corpora/train_selftrain.jsonl", "augmentation/audit_sheet.csv",
        "selftrain/report.json", "manifest.resolved"}) {
    require(detail,
            testsupport::read_file(first.dir / rel) == testsupport::read_file(second.dir / rel),
            std::string(rel) + " differs between identical runs");
    if (!detail.empty()) return;
  }
}

// --- criterion 7: comparison table golden ------------------------------------

void criterion_table(std::string& detail) {
  const auto stub = [](double macro, double hof, double nothate) {
    offlang::EvaluationReport r;
    r.language = "bengali";
    r.macro_f1 = macro;
    r.hof.f1 = hof;
    r.nothate.f1 = nothate;
    return r;
  };
  const std::vector<std::pair<std::string, offlang::EvaluationReport>> reports = {
      {"baseline", stub(0.722, 0.700, 0.744)},
      {"augmented", stub(0.734, 0.710, 0.758)},
      {"selftrain", stub(0.762, 0.745, 0.779)},
  };
  const std::string expected_md =
      "### bengali\n"
      "\n"
      "| Run | Macro F1 | HOF F1 | NOT F1 |\n"
      "| --- | --- | --- | --- |\n"
      "| selftrain | 0.762 | 0.745 | 0.779 |\n"
      "| augmented | 0.734 | 0.710 | 0.758 |\n"
      "| baseline | 0.722 | 0.700 | 0.744 |\n";
  require(detail, offlang::render_table(reports, offlang::TableFormat::markdown) == expected_md,
          "markdown comparison table deviates from the golden rendering");

  const std::string expected_csv =
      "language,run,macro_f1,hof_f1,not_f1\n"
      "bengali,selftrain,0.762,0.745,0.779\n"
      "bengali,augmented,0.734,0.710,0.758\n"
      "bengali,baseline,0.722,0.700,0.744\n";
  require(detail, offlang::render_table(reports, offlang::TableFormat::csv) == expected_csv,
          "csv comparison table deviates from the golden rendering");
}

// --- criterion 8: checkpoint fidelity ----------------------------------------

void criterion_checkpoint(std::string& detail) {
  testsupport::TempDir dir;
  const LabeledCorpus corpus = testsupport::make_separable_corpus(100, 55);
  const TrainedModel model = train_tiny(corpus, 55);
  offlang::save_model(model, dir.file("checkpoint"));
  const TrainedModel loaded = offlang::load_model(dir.file("checkpoint"));

  std::vector<std::string> texts;
  for (const TextSample& s : corpus.samples()) texts.push_back(s.text);
  const offlang::ScoreVector before = offlang::predict_scores(model, texts);
  const offlang::ScoreVector after = offlang::predict_scores(loaded, texts);
  require(detail, before.size() == after.size() && before.size() == 100,
          "expected 100 scores on both sides");
  for (std::size_t i = 0; i < before.size(); ++i) {
    require(detail, before[i] == after[i],
            "score " + std::to_string(i) + " changed across save/load");
    if (!detail.empty()) return;
  }
  require(detail, loaded.train_fingerprint() == model.train_fingerprint(),
          "training fingerprint must survive the round trip");
}

}  // namespace

int main() {
  run_criterion(1,
                "per-class and macro F1 match an independent oracle "
                "(hand fractions exact, 1000 randomized cases, tol 1e-12)",
                criterion_metrics);
  run_criterion(2,
                "tripling 1281/4036/1679 training samples yields exactly "
                "3843/12108/5037 with labels preserved and heldout untouched",
                criterion_augment_arithmetic);
  run_criterion(3,
                "a 200-row audit over generations with 4 planted label flips "
                "scores agreement 0.980 exactly",
                criterion_audit);
  run_criterion(4,
                "dual-threshold gate partitions, keeps boundary-inclusive "
                "correct sides, and nests (500 randomized policies)",
                criterion_gate);
  run_criterion(5,
                "self-training on 180/20 labeled plus a 900-text pool keeps "
                ">=50%, >=95% correct pseudo-labels, and never drops macro F1 "
                "by more than 0.01 or leaks heldout data",
                criterion_selftrain);
  run_criterion(6, "two runs of the same manifest produce byte-identical reports and tables",
                criterion_determinism);
  run_criterion(7, "comparison tables match their golden renderings digit for digit",
                criterion_table);
  run_criterion(8, "a saved and reloaded checkpoint scores 100 texts bit-for-bit identically",
                criterion_checkpoint);

  if (g_failures == 0) {
    std::printf("acceptance: all 8 criteria passed\n");
    return 0;
  }
  std::printf("acceptance: %d criteria failed\n", g_failures);
  return 1;
}
