#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "offlang/completion.hpp"
#include "offlang/corpus.hpp"
#include "offlang/corpus_io.hpp"
#include "offlang/error.hpp"
#include "offlang/hash.hpp"
#include "offlang/rng.hpp"
#include "offlang/sample.hpp"
#include "offlang/text.hpp"

namespace offlang {

inline constexpr std::string_view kDefaultPromptTemplate =
    "Given the following text sample: {text}, please generate {n} additional samples "
    "that preserve the original annotation label {label_set}.";

inline constexpr std::string_view kLabelSetReminder = "(HOF or NOT)";

struct PromptTemplate {
  std::string text = std::string(kDefaultPromptTemplate);
};

namespace detail {

inline std::string replace_all(std::string subject, std::string_view needle,
                               std::string_view replacement) {
  std::size_t pos = 0;
  while ((pos = subject.find(needle, pos)) != std::string::npos) {
    subject.replace(pos, needle.size(), replacement);
    pos += replacement.size();
  }
  return subject;
}

}  // namespace detail

/// Fills the template placeholders. The sample text is substituted verbatim;
/// the count renders as an English word for small n so the instruction reads
/// naturally ("three additional samples").
inline std::string render_prompt(const TextSample& sample, int n,
                                 const PromptTemplate& tmpl = PromptTemplate{}) {
  if (!sample.label.has_value()) {
    raise(ErrorCode::UnlabeledSample, "cannot build an augmentation prompt for unlabeled sample '" +
                                          sample.id + "'");
  }
  if (n <= 0) raise(ErrorCode::OutOfRange, "prompt must request at least one sample");
  std::string out = detail::replace_all(tmpl.text, "{text}", sample.text);
  out = detail::replace_all(std::move(out), "{n}", number_word(n));
  out = detail::replace_all(std::move(out), "{label_set}", kLabelSetReminder);
  return out;
}

/// Pulls candidate texts out of a completion response. Accepts numbered
/// lists, dash/star bullets, or bare lines; strips the list markers, drops
/// blanks and exact repeats, and keeps at most expected_n candidates.
inline std::vector<std::string> parse_llm_response(const std::string& raw, int expected_n) {
  if (expected_n <= 0) raise(ErrorCode::OutOfRange, "expected_n must be positive");
  std::vector<std::string> texts;
  std::unordered_set<std::string> seen;
  for (std::string_view line : split_lines(raw)) {
    std::string_view body = trim_view(line);
    if (body.empty()) continue;

    std::size_t digits = 0;
    while (digits < body.size() && body[digits] >= '0' && body[digits] <= '9') ++digits;
    if (digits > 0 && digits < body.size() && (body[digits] == '.' || body[digits] == ')')) {
      body = trim_view(body.substr(digits + 1));
    } else if (body.size() >= 2 && (body[0] == '-' || body[0] == '*') &&
               is_ascii_space(body[1])) {
      body = trim_view(body.substr(2));
    }
    if (body.empty()) continue;

    std::string text(body);
    if (!seen.insert(text).second) continue;
    texts.push_back(std::move(text));
    if (static_cast<int>(texts.size()) == expected_n) break;
  }
  if (texts.empty()) {
    raise(ErrorCode::UnparseableResponse, "no candidate texts found in completion response");
  }
  return texts;
}

/// Full lineage of one augmentation call: exactly what was asked, what came
/// back, what was kept, and the parameters used, so failed or suspicious
/// generations can be audited later.
struct AugmentationRecord {
  std::string parent_id;
  std::string prompt;
  std::string raw_response;
  std::vector<std::string> extracted_texts;
  std::vector<bool> kept;
  std::vector<bool> duplicate_of_parent;
  std::optional<std::string> failure;
  CompletionParams params;
};

inline nlohmann::ordered_json augmentation_record_to_json(const AugmentationRecord& record) {
  nlohmann::ordered_json j;
  j["parent_id"] = record.parent_id;
  j["prompt"] = record.prompt;
  j["raw_response"] = record.raw_response;
  j["extracted_texts"] = record.extracted_texts;
  j["kept"] = record.kept;
  j["duplicate_of_parent"] = record.duplicate_of_parent;
  if (record.failure.has_value()) j["failure"] = *record.failure;
  j["params"] = completion_params_to_json(record.params);
  return j;
}

inline void save_augmentation_records(const std::vector<AugmentationRecord>& records,
                                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::MissingPath, "cannot write '" + path.string() + "'");
  for (const AugmentationRecord& r : records) {
    out << augmentation_record_to_json(r).dump() << '\n';
  }
}

inline std::string augmented_sample_id(const std::string& parent_id, std::size_t k) {
  return parent_id + "::aug" + std::to_string(k);
}

/// Asks the client for n label-preserving variants of one sample. Client and
/// parse failures never escape: they come back as an empty sample list with
/// the failure recorded.
inline std::pair<std::vector<TextSample>, AugmentationRecord> augment_sample(
    const TextSample& sample, int n, const CompletionClient& client,
    const PromptTemplate& tmpl = PromptTemplate{}, const CompletionParams& params = {}) {
  if (!sample.label.has_value()) {
    raise(ErrorCode::UnlabeledSample, "cannot augment unlabeled sample '" + sample.id + "'");
  }

  AugmentationRecord record;
  record.parent_id = sample.id;
  record.params = params;
  if (n == 0) return {{}, std::move(record)};

  record.prompt = render_prompt(sample, n, tmpl);
  try {
    record.raw_response = client.complete(record.prompt, params);
    record.extracted_texts = parse_llm_response(record.raw_response, n);
  } catch (const Error& e) {
    record.failure = std::string(error_code_name(e.code())) + ": " + e.what();
    record.extracted_texts.clear();
    return {{}, std::move(record)};
  } catch (const std::exception& e) {
    record.failure = std::string("client_error: ") + e.what();
    record.extracted_texts.clear();
    return {{}, std::move(record)};
  }

  std::vector<TextSample> out;
  out.reserve(record.extracted_texts.size());
  for (std::size_t i = 0; i < record.extracted_texts.size(); ++i) {
    const std::string& text = record.extracted_texts[i];
    record.kept.push_back(true);
    record.duplicate_of_parent.push_back(text == sample.text);

    TextSample aug;
    aug.id = augmented_sample_id(sample.id, i + 1);
    aug.text = text;
    aug.label = sample.label;
    aug.language = sample.language;
    aug.source = sample.source;
    aug.provenance = Provenance::augmented;
    aug.parent_id = sample.id;
    out.push_back(std::move(aug));
  }
  return {std::move(out), std::move(record)};
}

/// Expands a training corpus to multiplier times its size: each original is
/// kept and contributes multiplier-1 generated variants. Output order is the
/// input order with each original followed by its variants, independent of
/// how calls are scheduled. Failures leave a corpus smaller than the target;
/// the records say exactly where the deficit came from.
inline std::pair<LabeledCorpus, std::vector<AugmentationRecord>> augment_corpus(
    const LabeledCorpus& train, int multiplier, const CompletionClient& client,
    const PromptTemplate& tmpl = PromptTemplate{}, const CompletionParams& params = {},
    int max_in_flight = 1) {
  if (multiplier < 1) raise(ErrorCode::OutOfRange, "multiplier must be at least 1");
  if (train.empty()) raise(ErrorCode::EmptyTrainingSet, "cannot augment an empty corpus");
  if (max_in_flight < 1) raise(ErrorCode::OutOfRange, "max_in_flight must be at least 1");

  const int per_sample = multiplier - 1;
  std::vector<AugmentationRecord> records;
  if (multiplier == 1) return {train, std::move(records)};

  const std::size_t n = train.size();
  std::vector<std::pair<std::vector<TextSample>, AugmentationRecord>> results(n);
  for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(max_in_flight)) {
    const std::size_t end = std::min(n, start + static_cast<std::size_t>(max_in_flight));
    std::vector<std::future<void>> wave;
    wave.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) {
      wave.push_back(std::async(std::launch::async, [&, i] {
        results[i] = augment_sample(train.samples()[i], per_sample, client, tmpl, params);
      }));
    }
    for (std::future<void>& f : wave) f.get();
  }

  std::vector<TextSample> merged;
  merged.reserve(n * static_cast<std::size_t>(multiplier));
  std::size_t successes = 0;
  records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    merged.push_back(train.samples()[i]);
    auto& [generated, record] = results[i];
    if (!record.failure.has_value()) ++successes;
    for (TextSample& s : generated) merged.push_back(std::move(s));
    records.push_back(std::move(record));
  }
  if (successes == 0) {
    raise(ErrorCode::AllCallsFailed, "every augmentation call failed; corpus left unchanged");
  }
  return {LabeledCorpus::from_samples(std::move(merged)), std::move(records)};
}

// --- Human audit -------------------------------------------------------------

enum class Verdict { agree, disagree, blank };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::agree: return "agree";
    case Verdict::disagree: return "disagree";
    case Verdict::blank: return "";
  }
  return "";
}

struct ReviewRow {
  std::string augmented_id;
  std::string parent_text;
  Label parent_label;
  std::string augmented_text;
  Verdict verdict = Verdict::blank;
};

struct ReviewSheet {
  std::vector<ReviewRow> rows;
};

/// Draws a seeded uniform sample (without replacement) of augmented samples
/// for human label-preservation review. Verdicts start blank; the sheet is
/// meant to go out as CSV and come back filled in.
inline ReviewSheet export_audit_sheet(const LabeledCorpus& augmented, int sample_size = 200,
                                      std::uint64_t seed = 0) {
  if (sample_size < 0) raise(ErrorCode::OutOfRange, "sample_size cannot be negative");

  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < augmented.size(); ++i) {
    if (augmented.samples()[i].provenance == Provenance::augmented) candidates.push_back(i);
  }
  if (candidates.size() < static_cast<std::size_t>(sample_size)) {
    raise(ErrorCode::InsufficientAugmentedSamples,
          "corpus has " + std::to_string(candidates.size()) + " augmented samples, audit needs " +
              std::to_string(sample_size));
  }

  ReviewSheet sheet;
  if (sample_size == 0) return sheet;

  Rng rng(derive_seed(seed, "audit-sheet"));
  const std::vector<std::size_t> picks =
      rng.sample_indices(candidates.size(), static_cast<std::size_t>(sample_size));
  sheet.rows.reserve(picks.size());
  for (std::size_t pick : picks) {
    const TextSample& aug = augmented.samples()[candidates[pick]];
    const TextSample* parent = aug.parent_id ? augmented.find(*aug.parent_id) : nullptr;
    if (parent == nullptr) {
      raise(ErrorCode::InvalidSample,
            "augmented sample '" + aug.id + "' has no parent in this corpus");
    }
    ReviewRow row;
    row.augmented_id = aug.id;
    row.parent_text = parent->text;
    row.parent_label = *parent->label;
    row.augmented_text = aug.text;
    sheet.rows.push_back(std::move(row));
  }
  return sheet;
}

/// Share of reviewed rows where the human agreed the label was preserved.
/// Every verdict must be filled in first.
inline double compute_agreement(const ReviewSheet& sheet) {
  if (sheet.rows.empty()) raise(ErrorCode::EmptyInput, "review sheet has no rows");
  std::size_t agree = 0;
  for (const ReviewRow& row : sheet.rows) {
    if (row.verdict == Verdict::blank) {
      raise(ErrorCode::IncompleteSheet,
            "row '" + row.augmented_id + "' has no verdict; finish the review first");
    }
    if (row.verdict == Verdict::agree) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(sheet.rows.size());
}

inline void save_review_sheet_csv(const ReviewSheet& sheet, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::MissingPath, "cannot write '" + path.string() + "'");
  out << "augmented_id,parent_text,parent_label,augmented_text,verdict\n";
  for (const ReviewRow& row : sheet.rows) {
    out << csv_escape(row.augmented_id) << ',' << csv_escape(row.parent_text) << ','
        << to_string(row.parent_label) << ',' << csv_escape(row.augmented_text) << ','
        << to_string(row.verdict) << '\n';
  }
}

inline ReviewSheet load_review_sheet_csv(const std::filesystem::path& path) {
  const std::string content = detail::read_file(path);
  std::size_t pos = 0;
  std::vector<std::string> fields;
  if (!csv_parse_record(content, pos, fields) || fields.size() != 5 ||
      fields[0] != "augmented_id") {
    raise(ErrorCode::MalformedRow, "'" + path.string() + "' is not a review sheet");
  }
  ReviewSheet sheet;
  while (csv_parse_record(content, pos, fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != 5) {
      raise(ErrorCode::MalformedRow, "review sheet row " +
                                         std::to_string(sheet.rows.size() + 2) + " has " +
                                         std::to_string(fields.size()) + " fields, expected 5");
    }
    ReviewRow row;
    row.augmented_id = fields[0];
    row.parent_text = fields[1];
    row.parent_label = normalize_label(fields[2]);
    row.augmented_text = fields[3];
    if (fields[4] == "agree") {
      row.verdict = Verdict::agree;
    } else if (fields[4] == "disagree") {
      row.verdict = Verdict::disagree;
    } else if (fields[4].empty()) {
      row.verdict = Verdict::blank;
    } else {
      raise(ErrorCode::MalformedRow, "unknown verdict '" + fields[4] + "'");
    }
    sheet.rows.push_back(std::move(row));
  }
  return sheet;
}

}  // namespace offlang
