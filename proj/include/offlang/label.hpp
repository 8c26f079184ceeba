#pragma once

#include <string>
#include <string_view>

#include "offlang/error.hpp"
#include "offlang/text.hpp"

namespace offlang {

/// The binary task labels: hate-or-offensive vs not.
enum class Label { HOF, NOT };

inline std::string_view to_string(Label label) {
  return label == Label::HOF ? "HOF" : "NOT";
}

/// Case-insensitive label normalization. Some source files mark the negative
/// class "NONE"; it folds into NOT. Anything else is rejected.
inline Label normalize_label(std::string_view raw) {
  const std::string token = ascii_upper(trim_view(raw));
  if (token == "HOF") return Label::HOF;
  if (token == "NOT" || token == "NONE") return Label::NOT;
  raise(ErrorCode::UnknownLabel, "unrecognized label token '" + std::string(raw) + "'");
}

inline Label flip(Label label) {
  return label == Label::HOF ? Label::NOT : Label::HOF;
}

}  // namespace offlang
