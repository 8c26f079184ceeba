#pragma once

#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "offlang/error.hpp"
#include "offlang/hash.hpp"
#include "offlang/label.hpp"
#include "offlang/text.hpp"

namespace offlang {

enum class Language { bengali, assamese, bodo, other };

inline std::string_view to_string(Language language) {
  switch (language) {
    case Language::bengali: return "bengali";
    case Language::assamese: return "assamese";
    case Language::bodo: return "bodo";
    case Language::other: return "other";
  }
  return "other";
}

inline Language parse_language(std::string_view raw) {
  const std::string token = ascii_lower(trim_view(raw));
  if (token == "bengali") return Language::bengali;
  if (token == "assamese") return Language::assamese;
  if (token == "bodo") return Language::bodo;
  return Language::other;
}

/// Where a sample came from; preserved through every pipeline stage.
enum class Provenance { original, augmented, pseudo_labeled };

inline std::string_view to_string(Provenance provenance) {
  switch (provenance) {
    case Provenance::original: return "original";
    case Provenance::augmented: return "augmented";
    case Provenance::pseudo_labeled: return "pseudo_labeled";
  }
  return "original";
}

inline Provenance parse_provenance(std::string_view raw) {
  const std::string token = ascii_lower(trim_view(raw));
  if (token == "original") return Provenance::original;
  if (token == "augmented") return Provenance::augmented;
  if (token == "pseudo_labeled") return Provenance::pseudo_labeled;
  raise(ErrorCode::InvalidSample, "unrecognized provenance '" + std::string(raw) + "'");
}

struct TextSample {
  std::string id;
  std::string text;
  std::optional<Label> label;
  Language language = Language::other;
  std::string source;
  Provenance provenance = Provenance::original;
  std::optional<std::string> parent_id;  // set iff provenance != original
  std::optional<double> score;           // set iff provenance == pseudo_labeled
};

/// Structural invariants of a single sample, independent of any corpus.
inline void validate_sample(const TextSample& sample) {
  if (sample.id.empty()) {
    raise(ErrorCode::InvalidSample, "sample has an empty id");
  }
  if (is_blank(sample.text)) {
    raise(ErrorCode::InvalidSample, "sample '" + sample.id + "' has blank text");
  }
  const bool original = sample.provenance == Provenance::original;
  if (original == sample.parent_id.has_value()) {
    raise(ErrorCode::InvalidSample,
          "sample '" + sample.id + "': parent_id must be set exactly when provenance is not original");
  }
  if (sample.provenance == Provenance::pseudo_labeled) {
    if (!sample.score || !sample.label) {
      raise(ErrorCode::InvalidSample,
            "pseudo-labeled sample '" + sample.id + "' needs both score and label");
    }
  }
  if (sample.score && (*sample.score < 0.0 || *sample.score > 1.0)) {
    raise(ErrorCode::InvalidSample,
          "sample '" + sample.id + "' score outside [0,1]");
  }
}

/// Order-independent content hash contribution of one sample.
inline std::uint64_t sample_content_hash(const TextSample& sample) {
  HashWriter h;
  h.write(sample.id).write(sample.text);
  h.write(sample.label ? to_string(*sample.label) : std::string_view("-"));
  h.write(to_string(sample.language));
  h.write(sample.source);
  h.write(to_string(sample.provenance));
  h.write(sample.parent_id ? std::string_view(*sample.parent_id) : std::string_view("-"));
  if (sample.score) {
    h.write(*sample.score);
  } else {
    h.write(std::string_view("-"));
  }
  return h.finish();
}

inline nlohmann::ordered_json sample_to_json(const TextSample& sample) {
  nlohmann::ordered_json j;
  j["id"] = sample.id;
  j["text"] = sample.text;
  if (sample.label) j["label"] = std::string(to_string(*sample.label));
  j["language"] = std::string(to_string(sample.language));
  j["source"] = sample.source;
  j["provenance"] = std::string(to_string(sample.provenance));
  if (sample.parent_id) j["parent_id"] = *sample.parent_id;
  if (sample.score) j["score"] = *sample.score;
  return j;
}

inline TextSample sample_from_json(const nlohmann::json& j) {
  TextSample sample;
  sample.id = j.value("id", "");
  sample.text = j.value("text", "");
  if (j.contains("label") && !j.at("label").is_null()) {
    const std::string raw = j.at("label").get<std::string>();
    if (!is_blank(raw)) sample.label = normalize_label(raw);
  }
  if (j.contains("language")) sample.language = parse_language(j.at("language").get<std::string>());
  sample.source = j.value("source", "");
  if (j.contains("provenance")) {
    sample.provenance = parse_provenance(j.at("provenance").get<std::string>());
  }
  if (j.contains("parent_id") && !j.at("parent_id").is_null()) {
    sample.parent_id = j.at("parent_id").get<std::string>();
  }
  if (j.contains("score") && !j.at("score").is_null()) {
    sample.score = j.at("score").get<double>();
  }
  return sample;
}

}  // namespace offlang
