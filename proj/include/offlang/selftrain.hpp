#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "offlang/classifier.hpp"
#include "offlang/corpus.hpp"
#include "offlang/error.hpp"
#include "offlang/evalkit.hpp"
#include "offlang/sample.hpp"
#include "offlang/text.hpp"

namespace offlang {

/// Dual-threshold confidence gate over P(HOF). Scores at or above `upper`
/// become HOF, at or below `lower` become NOT, anything strictly between
/// abstains. `decision` is the plain classification cutoff carried alongside
/// for evaluation.
struct ThresholdPolicy {
  double decision = 0.5;
  double upper = 0.90;
  double lower = 0.20;
};

inline void validate_policy(const ThresholdPolicy& policy) {
  if (!(policy.lower >= 0.0) || !(policy.upper <= 1.0) || !(policy.lower < policy.upper)) {
    raise(ErrorCode::InvalidPolicy, "thresholds must satisfy 0 <= lower < upper <= 1");
  }
  if (!(policy.decision >= policy.lower) || !(policy.decision <= policy.upper)) {
    raise(ErrorCode::InvalidPolicy, "decision threshold must lie between lower and upper");
  }
}

inline nlohmann::ordered_json policy_to_json(const ThresholdPolicy& policy) {
  nlohmann::ordered_json j;
  j["decision"] = policy.decision;
  j["upper"] = policy.upper;
  j["lower"] = policy.lower;
  return j;
}

struct PseudoLabelBatch {
  std::vector<TextSample> kept;
  std::vector<std::string> abstained;
  ThresholdPolicy policy;
  std::string source_model_fingerprint;
};

namespace detail {

/// Threshold partition over precomputed scores; scores are policy-independent
/// so sweeps reuse one scoring pass. Boundary comparisons are inclusive.
inline PseudoLabelBatch partition_scores(const std::vector<TextSample>& pool_samples,
                                         const ScoreVector& scores,
                                         const ThresholdPolicy& policy,
                                         std::string model_fingerprint) {
  PseudoLabelBatch batch;
  batch.policy = policy;
  batch.source_model_fingerprint = std::move(model_fingerprint);
  for (std::size_t i = 0; i < pool_samples.size(); ++i) {
    const double score = scores[i];
    if (score >= policy.upper || score <= policy.lower) {
      TextSample s = pool_samples[i];
      s.label = score >= policy.upper ? Label::HOF : Label::NOT;
      s.score = score;
      s.provenance = Provenance::pseudo_labeled;
      s.parent_id = s.id;
      batch.kept.push_back(std::move(s));
    } else {
      batch.abstained.push_back(pool_samples[i].id);
    }
  }
  return batch;
}

}  // namespace detail

inline PseudoLabelBatch pseudo_label(const TrainedModel& model, const UnlabeledPool& pool,
                                     const ThresholdPolicy& policy) {
  validate_policy(policy);
  if (pool.samples().empty()) raise(ErrorCode::EmptyPool, "nothing to pseudo-label");
  std::vector<std::string> texts;
  texts.reserve(pool.samples().size());
  for (const TextSample& s : pool.samples()) texts.push_back(s.text);
  const ScoreVector scores = predict_scores(model, texts);
  return detail::partition_scores(pool.samples(), scores, policy, model.train_fingerprint());
}

inline nlohmann::ordered_json batch_to_json(const PseudoLabelBatch& batch) {
  nlohmann::ordered_json j;
  j["policy"] = policy_to_json(batch.policy);
  j["source_model_fingerprint"] = batch.source_model_fingerprint;
  j["kept_count"] = batch.kept.size();
  j["abstained_count"] = batch.abstained.size();
  nlohmann::ordered_json kept = nlohmann::ordered_json::array();
  for (const TextSample& s : batch.kept) kept.push_back(sample_to_json(s));
  j["kept"] = std::move(kept);
  j["abstained"] = batch.abstained;
  return j;
}

struct RoundRecord {
  int round = 0;
  std::size_t pool_size = 0;
  std::size_t kept_count = 0;
  std::size_t kept_hof = 0;
  std::size_t kept_not = 0;
  EvaluationReport pre_retrain;
  EvaluationReport post_retrain;
};

struct SelfTrainReport {
  std::vector<RoundRecord> rounds;
  /// Final post-retrain macro F1 minus the first pre-retrain macro F1,
  /// reported both as absolute points and relative to the starting value.
  double absolute_gain = 0.0;
  double relative_gain = 0.0;
};

inline nlohmann::ordered_json selftrain_report_to_json(const SelfTrainReport& report) {
  nlohmann::ordered_json rounds = nlohmann::ordered_json::array();
  for (const RoundRecord& r : report.rounds) {
    nlohmann::ordered_json jr;
    jr["round"] = r.round;
    jr["pool_size"] = r.pool_size;
    jr["kept_count"] = r.kept_count;
    jr["kept_hof"] = r.kept_hof;
    jr["kept_not"] = r.kept_not;
    jr["pre_retrain"] = report_to_json(r.pre_retrain);
    jr["post_retrain"] = report_to_json(r.post_retrain);
    rounds.push_back(std::move(jr));
  }
  nlohmann::ordered_json j;
  j["rounds"] = std::move(rounds);
  j["absolute_gain"] = report.absolute_gain;
  j["relative_gain"] = report.relative_gain;
  return j;
}

namespace detail {

inline void check_pool_disjoint(const UnlabeledPool& pool, const LabeledCorpus& train,
                                const LabeledCorpus& heldout) {
  std::unordered_set<std::string> ids;
  std::unordered_set<std::string> texts;
  for (const TextSample& s : train.samples()) {
    ids.insert(s.id);
    texts.insert(trim(s.text));
  }
  for (const TextSample& s : heldout.samples()) {
    ids.insert(s.id);
    texts.insert(trim(s.text));
  }
  for (const TextSample& s : pool.samples()) {
    if (ids.count(s.id) != 0) {
      raise(ErrorCode::PoolContamination,
            "pool sample '" + s.id + "' shares an id with train or heldout data");
    }
    if (texts.count(trim(s.text)) != 0) {
      raise(ErrorCode::PoolContamination,
            "pool sample '" + s.id + "' duplicates a train or heldout text");
    }
  }
}

inline LabeledCorpus merge_kept(const LabeledCorpus& corpus, const std::vector<TextSample>& kept) {
  std::vector<TextSample> merged(corpus.samples().begin(), corpus.samples().end());
  merged.insert(merged.end(), kept.begin(), kept.end());
  return LabeledCorpus::from_samples(std::move(merged));
}

inline UnlabeledPool remove_kept(const UnlabeledPool& pool,
                                 const std::vector<TextSample>& kept) {
  std::unordered_set<std::string> kept_ids;
  for (const TextSample& s : kept) kept_ids.insert(s.id);
  std::vector<TextSample> remaining;
  remaining.reserve(pool.samples().size() - kept.size());
  for (const TextSample& s : pool.samples()) {
    if (kept_ids.count(s.id) == 0) remaining.push_back(s);
  }
  return UnlabeledPool::from_samples(std::move(remaining), pool.source());
}

}  // namespace detail

struct SelfTrainResult {
  TrainedModel model;
  LabeledCorpus corpus;
  SelfTrainReport report;
};

/// Expand-and-retrain loop: train on the current corpus, pseudo-label the
/// remaining pool under the policy, fold the kept samples in, retrain from
/// scratch, and evaluate on heldout before and after. Heldout data is never
/// trained on or pseudo-labeled; a round that keeps nothing ends the loop.
inline SelfTrainResult self_train(const TrainConfig& base_config, const LabeledCorpus& train,
                                  const LabeledCorpus& heldout, const UnlabeledPool& pool,
                                  const ThresholdPolicy& policy, int rounds = 1,
                                  const BackboneRegistry& registry = BackboneRegistry::builtin()) {
  validate_policy(policy);
  validate_train_config(base_config);
  if (rounds < 1) raise(ErrorCode::OutOfRange, "rounds must be at least 1");
  if (pool.samples().empty()) raise(ErrorCode::EmptyPool, "self-training needs a pool");
  detail::check_pool_disjoint(pool, train, heldout);

  const Classifier classifier = build_classifier(base_config.backbone, base_config, registry);
  LabeledCorpus corpus = train;
  UnlabeledPool remaining = pool;
  TrainedModel model = fine_tune(classifier, corpus, base_config);
  SelfTrainReport report;

  for (int round = 1; round <= rounds; ++round) {
    if (remaining.samples().empty()) break;
    const EvaluationReport pre = evaluate(model, heldout, policy.decision);
    const PseudoLabelBatch batch = pseudo_label(model, remaining, policy);

    RoundRecord record;
    record.round = round;
    record.pool_size = remaining.samples().size();
    record.kept_count = batch.kept.size();
    for (const TextSample& s : batch.kept) {
      if (*s.label == Label::HOF) ++record.kept_hof;
      else ++record.kept_not;
    }
    record.pre_retrain = pre;

    if (batch.kept.empty()) {
      record.post_retrain = pre;
      report.rounds.push_back(std::move(record));
      break;
    }

    corpus = detail::merge_kept(corpus, batch.kept);
    remaining = detail::remove_kept(remaining, batch.kept);
    model = fine_tune(classifier, corpus, base_config);
    record.post_retrain = evaluate(model, heldout, policy.decision);
    report.rounds.push_back(std::move(record));
  }

  if (!report.rounds.empty()) {
    const double before = report.rounds.front().pre_retrain.macro_f1;
    const double after = report.rounds.back().post_retrain.macro_f1;
    report.absolute_gain = after - before;
    report.relative_gain = before > 0.0 ? (after - before) / before : 0.0;
  }
  return {std::move(model), std::move(corpus), std::move(report)};
}

struct SweepRow {
  ThresholdPolicy policy;
  std::size_t kept_count = 0;
  std::size_t kept_hof = 0;
  std::size_t kept_not = 0;
  double post_retrain_macro_f1 = 0.0;
};

/// One row per candidate policy: how much the gate keeps, how balanced it is,
/// and where heldout macro F1 lands after folding the kept set in and
/// retraining. The pool is scored once; policies only re-partition.
inline std::vector<SweepRow> sweep_thresholds(
    const TrainedModel& model, const UnlabeledPool& pool, const LabeledCorpus& heldout,
    const std::vector<ThresholdPolicy>& grid, const TrainConfig& base_config,
    const LabeledCorpus& train, const BackboneRegistry& registry = BackboneRegistry::builtin()) {
  if (grid.empty()) raise(ErrorCode::EmptyInput, "threshold grid is empty");
  for (const ThresholdPolicy& policy : grid) validate_policy(policy);
  validate_train_config(base_config);
  if (pool.samples().empty()) raise(ErrorCode::EmptyPool, "sweep needs a pool");
  detail::check_pool_disjoint(pool, train, heldout);

  std::vector<std::string> texts;
  texts.reserve(pool.samples().size());
  for (const TextSample& s : pool.samples()) texts.push_back(s.text);
  const ScoreVector scores = predict_scores(model, texts);

  const Classifier classifier = build_classifier(base_config.backbone, base_config, registry);
  std::vector<SweepRow> rows;
  rows.reserve(grid.size());
  for (const ThresholdPolicy& policy : grid) {
    const PseudoLabelBatch batch =
        detail::partition_scores(pool.samples(), scores, policy, model.train_fingerprint());
    SweepRow row;
    row.policy = policy;
    row.kept_count = batch.kept.size();
    for (const TextSample& s : batch.kept) {
      if (*s.label == Label::HOF) ++row.kept_hof;
      else ++row.kept_not;
    }
    const LabeledCorpus expanded =
        batch.kept.empty() ? train : detail::merge_kept(train, batch.kept);
    const TrainedModel retrained = fine_tune(classifier, expanded, base_config);
    row.post_retrain_macro_f1 = evaluate(retrained, heldout, policy.decision).macro_f1;
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::string out = "decision,upper,lower,kept_count,kept_hof,kept_not,post_retrain_macro_f1\n";
  for (const SweepRow& row : rows) {
    out += detail::format_fixed(row.policy.decision, 6) + ',' +
           detail::format_fixed(row.policy.upper, 6) + ',' +
           detail::format_fixed(row.policy.lower, 6) + ',' + std::to_string(row.kept_count) +
           ',' + std::to_string(row.kept_hof) + ',' + std::to_string(row.kept_not) + ',' +
           detail::format_fixed(row.post_retrain_macro_f1, 6) + '\n';
  }
  return out;
}

}  // namespace offlang
