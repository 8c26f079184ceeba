#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "offlang/error.hpp"
#include "offlang/hash.hpp"
#include "offlang/rng.hpp"
#include "offlang/sample.hpp"

namespace offlang {

namespace detail {

inline void check_unique_ids(const std::vector<TextSample>& samples) {
  std::unordered_set<std::string_view> seen;
  seen.reserve(samples.size());
  for (const TextSample& s : samples) {
    if (!seen.insert(s.id).second) {
      raise(ErrorCode::DuplicateId, "duplicate sample id '" + s.id + "'");
    }
  }
}

inline Language dominant_language(const std::vector<TextSample>& samples) {
  std::array<std::size_t, 4> counts{};
  for (const TextSample& s : samples) counts[static_cast<std::size_t>(s.language)]++;
  std::size_t best = 3;  // other
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] > counts[best] || (counts[i] == counts[best] && counts[i] > 0 && i < best)) {
      best = i;
    }
  }
  return static_cast<Language>(best);
}

/// Order-insensitive corpus fingerprint: wrapping sum of per-sample hashes.
inline std::string content_fingerprint(const std::vector<TextSample>& samples) {
  std::uint64_t sum = 0;
  for (const TextSample& s : samples) sum += sample_content_hash(s);
  return to_hex16(sum);
}

}  // namespace detail

/// Immutable, validated collection of labeled samples.
class LabeledCorpus {
 public:
  static LabeledCorpus from_samples(std::vector<TextSample> samples) {
    for (const TextSample& s : samples) {
      validate_sample(s);
      if (!s.label) {
        raise(ErrorCode::InvalidSample,
              "labeled corpus requires a label on every sample; '" + s.id + "' has none");
      }
    }
    detail::check_unique_ids(samples);
    // An augmented sample must agree with its parent when the parent is here.
    std::unordered_map<std::string_view, const TextSample*> by_id;
    by_id.reserve(samples.size());
    for (const TextSample& s : samples) by_id.emplace(s.id, &s);
    for (const TextSample& s : samples) {
      if (s.provenance != Provenance::augmented) continue;
      auto it = by_id.find(*s.parent_id);
      if (it != by_id.end() && it->second->label != s.label) {
        raise(ErrorCode::InvalidSample,
              "augmented sample '" + s.id + "' label differs from parent '" + *s.parent_id + "'");
      }
    }
    return LabeledCorpus(std::move(samples));
  }

  const std::vector<TextSample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  Language language() const { return language_; }
  const std::string& fingerprint() const { return fingerprint_; }

  bool contains_id(std::string_view id) const { return id_index_.count(std::string(id)) > 0; }
  const TextSample* find(std::string_view id) const {
    auto it = id_index_.find(std::string(id));
    return it == id_index_.end() ? nullptr : &samples_[it->second];
  }

 private:
  explicit LabeledCorpus(std::vector<TextSample> samples)
      : samples_(std::move(samples)),
        language_(detail::dominant_language(samples_)),
        fingerprint_(detail::content_fingerprint(samples_)) {
    id_index_.reserve(samples_.size());
    for (std::size_t i = 0; i < samples_.size(); ++i) id_index_.emplace(samples_[i].id, i);
  }

  std::vector<TextSample> samples_;
  Language language_;
  std::string fingerprint_;
  std::unordered_map<std::string, std::size_t> id_index_;
};

/// Immutable collection of unlabeled samples awaiting pseudo-labeling.
class UnlabeledPool {
 public:
  static UnlabeledPool from_samples(std::vector<TextSample> samples, std::string source) {
    for (const TextSample& s : samples) {
      validate_sample(s);
      if (s.label) {
        raise(ErrorCode::InvalidSample,
              "unlabeled pool must not carry labels; '" + s.id + "' has one");
      }
    }
    detail::check_unique_ids(samples);
    return UnlabeledPool(std::move(samples), std::move(source));
  }

  const std::vector<TextSample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const std::string& source() const { return source_; }

 private:
  UnlabeledPool(std::vector<TextSample> samples, std::string source)
      : samples_(std::move(samples)), source_(std::move(source)) {}

  std::vector<TextSample> samples_;
  std::string source_;
};

struct SplitSpec {
  double train_fraction = 0.9;
  std::uint64_t seed = 0;
  bool stratified = true;  // preserve the class ratio in both partitions
};

inline void validate_split_spec(const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0) || !(spec.train_fraction < 1.0)) {
    raise(ErrorCode::InvalidFraction,
          "train_fraction must lie in (0,1), got " + std::to_string(spec.train_fraction));
  }
}

namespace detail {

/// Largest-remainder allocation of `total_train` slots across strata, so the
/// overall train size is exact while each stratum stays near its quota.
inline std::vector<std::size_t> allocate_per_stratum(
    const std::vector<std::size_t>& stratum_sizes, double fraction,
    std::size_t total_train) {
  const std::size_t k = stratum_sizes.size();
  std::vector<std::size_t> alloc(k);
  std::vector<std::pair<double, std::size_t>> remainders;  // (-remainder, stratum)
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double quota = fraction * static_cast<double>(stratum_sizes[i]);
    alloc[i] = static_cast<std::size_t>(quota);
    assigned += alloc[i];
    remainders.emplace_back(-(quota - static_cast<double>(alloc[i])), i);
  }
  std::sort(remainders.begin(), remainders.end());
  while (assigned < total_train) {
    bool progressed = false;
    for (const auto& [neg_rem, i] : remainders) {
      if (assigned == total_train) break;
      if (alloc[i] < stratum_sizes[i]) {
        ++alloc[i];
        ++assigned;
        progressed = true;
      }
    }
    if (!progressed) break;  // total_train exceeds corpus size; cannot happen for valid specs
  }
  return alloc;
}

}  // namespace detail

/// Deterministic (fingerprint, seed)-keyed partition into train and heldout.
/// |train| = round(train_fraction * n).
inline std::pair<LabeledCorpus, LabeledCorpus> split_corpus(const LabeledCorpus& corpus,
                                                            const SplitSpec& spec) {
  validate_split_spec(spec);
  const std::size_t n = corpus.size();
  if (n < 2) {
    raise(ErrorCode::TooFewSamples, "need at least 2 samples to split, got " + std::to_string(n));
  }
  const auto total_train =
      static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));

  HashWriter seed_material;
  seed_material.write(corpus.fingerprint());
  seed_material.write(spec.seed);
  seed_material.write(spec.train_fraction);
  seed_material.write(std::uint64_t{spec.stratified ? 1u : 0u});
  Rng rng(seed_material.finish());

  std::vector<char> in_train(n, 0);
  if (spec.stratified) {
    std::vector<std::vector<std::size_t>> strata(2);
    for (std::size_t i = 0; i < n; ++i) {
      strata[corpus.samples()[i].label == Label::HOF ? 0 : 1].push_back(i);
    }
    const std::vector<std::size_t> sizes{strata[0].size(), strata[1].size()};
    const std::vector<std::size_t> alloc =
        detail::allocate_per_stratum(sizes, spec.train_fraction, total_train);
    for (std::size_t s = 0; s < strata.size(); ++s) {
      rng.shuffle(strata[s]);
      for (std::size_t j = 0; j < alloc[s]; ++j) in_train[strata[s][j]] = 1;
    }
  } else {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    for (std::size_t j = 0; j < total_train; ++j) in_train[order[j]] = 1;
  }

  std::vector<TextSample> train, heldout;
  train.reserve(total_train);
  heldout.reserve(n - total_train);
  for (std::size_t i = 0; i < n; ++i) {
    (in_train[i] ? train : heldout).push_back(corpus.samples()[i]);
  }
  return {LabeledCorpus::from_samples(std::move(train)),
          LabeledCorpus::from_samples(std::move(heldout))};
}

struct ThreeWaySplit {
  LabeledCorpus train;
  LabeledCorpus validation;
  LabeledCorpus heldout;
};

/// Optional three-way variant: the non-train slice is subdivided, with
/// `validation_fraction` of it going to a model-selection set.
inline ThreeWaySplit split_corpus_three(const LabeledCorpus& corpus, const SplitSpec& spec,
                                        double validation_fraction) {
  if (!(validation_fraction > 0.0) || !(validation_fraction < 1.0)) {
    raise(ErrorCode::InvalidFraction, "validation_fraction must lie in (0,1)");
  }
  auto [train, rest] = split_corpus(corpus, spec);
  SplitSpec inner = spec;
  inner.train_fraction = validation_fraction;
  inner.seed = derive_seed(spec.seed, "validation-split");
  auto [validation, heldout] = split_corpus(rest, inner);
  return ThreeWaySplit{std::move(train), std::move(validation), std::move(heldout)};
}

enum class DedupPolicy { by_id, by_text, none };

/// Base-wins merge. Under by_id an id collision with differing text is an
/// error; matching text is treated as the same sample and skipped.
inline LabeledCorpus merge_corpora(const LabeledCorpus& base, const LabeledCorpus& addition,
                                   DedupPolicy dedup) {
  std::vector<TextSample> merged = base.samples();
  if (dedup == DedupPolicy::by_id) {
    std::unordered_map<std::string_view, std::string_view> text_by_id;
    text_by_id.reserve(merged.size());
    for (const TextSample& s : merged) text_by_id.emplace(s.id, s.text);
    for (const TextSample& s : addition.samples()) {
      auto it = text_by_id.find(s.id);
      if (it != text_by_id.end()) {
        if (it->second != s.text) {
          raise(ErrorCode::IdCollisionWithDifferentText,
                "id '" + s.id + "' carries different text in base and addition");
        }
        continue;
      }
      merged.push_back(s);
      text_by_id.emplace(merged.back().id, merged.back().text);
    }
  } else if (dedup == DedupPolicy::by_text) {
    std::unordered_set<std::string_view> texts;
    texts.reserve(merged.size());
    for (const TextSample& s : merged) texts.insert(s.text);
    for (const TextSample& s : addition.samples()) {
      if (texts.count(s.text)) continue;
      merged.push_back(s);
      texts.insert(merged.back().text);
    }
  } else {
    merged.insert(merged.end(), addition.samples().begin(), addition.samples().end());
  }
  return LabeledCorpus::from_samples(std::move(merged));
}

struct StatsRecord {
  std::size_t total = 0;
  std::array<std::size_t, 2> label_counts{};       // HOF, NOT (labeled samples only)
  std::array<std::size_t, 4> language_counts{};    // bengali, assamese, bodo, other
  std::array<std::size_t, 3> provenance_counts{};  // original, augmented, pseudo_labeled
  double mean_text_length = 0.0;                   // code points

  std::size_t count(Label label) const { return label_counts[static_cast<std::size_t>(label)]; }
  std::size_t count(Language language) const {
    return language_counts[static_cast<std::size_t>(language)];
  }
  std::size_t count(Provenance provenance) const {
    return provenance_counts[static_cast<std::size_t>(provenance)];
  }
  double label_share(Label label) const {
    const std::size_t labeled = label_counts[0] + label_counts[1];
    return labeled == 0 ? 0.0
                        : static_cast<double>(count(label)) / static_cast<double>(labeled);
  }
};

inline StatsRecord corpus_stats(std::span<const TextSample> samples) {
  StatsRecord stats;
  stats.total = samples.size();
  std::size_t length_sum = 0;
  for (const TextSample& s : samples) {
    if (s.label) stats.label_counts[static_cast<std::size_t>(*s.label)]++;
    stats.language_counts[static_cast<std::size_t>(s.language)]++;
    stats.provenance_counts[static_cast<std::size_t>(s.provenance)]++;
    length_sum += utf8_length(s.text);
  }
  if (stats.total > 0) {
    stats.mean_text_length = static_cast<double>(length_sum) / static_cast<double>(stats.total);
  }
  return stats;
}

inline StatsRecord corpus_stats(const LabeledCorpus& corpus) {
  return corpus_stats(std::span<const TextSample>(corpus.samples()));
}

inline StatsRecord corpus_stats(const UnlabeledPool& pool) {
  return corpus_stats(std::span<const TextSample>(pool.samples()));
}

inline nlohmann::ordered_json stats_to_json(const StatsRecord& stats) {
  nlohmann::ordered_json j;
  j["total"] = stats.total;
  j["labels"] = {{"HOF", stats.count(Label::HOF)}, {"NOT", stats.count(Label::NOT)}};
  j["label_shares"] = {{"HOF", stats.label_share(Label::HOF)},
                       {"NOT", stats.label_share(Label::NOT)}};
  nlohmann::ordered_json langs;
  for (Language l : {Language::bengali, Language::assamese, Language::bodo, Language::other}) {
    langs[std::string(to_string(l))] = stats.count(l);
  }
  j["languages"] = langs;
  nlohmann::ordered_json prov;
  for (Provenance p :
       {Provenance::original, Provenance::augmented, Provenance::pseudo_labeled}) {
    prov[std::string(to_string(p))] = stats.count(p);
  }
  j["provenance"] = prov;
  j["mean_text_length"] = stats.mean_text_length;
  return j;
}

}  // namespace offlang
