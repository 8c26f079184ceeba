#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace offlang {

inline bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

inline std::string_view trim_view(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_ascii_space(s[b])) ++b;
  while (e > b && is_ascii_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

inline std::string trim(std::string_view s) { return std::string(trim_view(s)); }

inline bool is_blank(std::string_view s) { return trim_view(s).empty(); }

/// Code-point count of a UTF-8 string (continuation bytes are skipped).
/// Bengali/Assamese/Bodo scripts are multi-byte, so byte length misleads.
inline std::size_t utf8_length(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) {
    if ((c & 0xc0) != 0x80) ++n;
  }
  return n;
}

/// Whitespace tokenization; scripts in scope separate words with spaces.
inline std::vector<std::string_view> tokenize(std::string_view text) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_ascii_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_ascii_space(text[i])) ++i;
    if (i > start) tokens.push_back(text.substr(start, i - start));
  }
  return tokens;
}

inline std::string ascii_upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  }
  return out;
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

/// English number words for prompt rendering ("three additional samples").
inline std::string number_word(int n) {
  static constexpr const char* words[] = {
      "zero", "one", "two",    "three", "four",  "five",  "six",
      "seven", "eight", "nine", "ten",  "eleven", "twelve"};
  if (n >= 0 && n <= 12) return words[n];
  return std::to_string(n);
}

inline int parse_number_word(std::string_view word) {
  static constexpr const char* words[] = {
      "zero", "one", "two",    "three", "four",  "five",  "six",
      "seven", "eight", "nine", "ten",  "eleven", "twelve"};
  const std::string lower = ascii_lower(word);
  for (int i = 0; i <= 12; ++i) {
    if (lower == words[i]) return i;
  }
  int value = 0;
  bool any = false;
  for (char c : lower) {
    if (c < '0' || c > '9') return -1;
    value = value * 10 + (c - '0');
    any = true;
  }
  return any ? value : -1;
}

// --- TSV field escaping -----------------------------------------------------
// Tab, newline and backslash are escaped; a raw tab inside a field would shift
// the column boundaries.

inline std::string tsv_escape(std::string_view field) {
  std::string out;
  out.reserve(field.size());
  for (char c : field) {
    switch (c) {
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\\': out += "\\\\"; break;
      default: out += c;
    }
  }
  return out;
}

/// Returns false on a malformed escape (lone trailing backslash or unknown
/// escape character).
inline bool tsv_unescape(std::string_view field, std::string& out) {
  out.clear();
  out.reserve(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (field[i] != '\\') {
      out += field[i];
      continue;
    }
    if (i + 1 >= field.size()) return false;
    switch (field[++i]) {
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case '\\': out += '\\'; break;
      default: return false;
    }
  }
  return true;
}

// --- CSV (RFC 4180 style) ---------------------------------------------------

inline std::string csv_escape(std::string_view field) {
  const bool needs_quotes =
      field.find_first_of(",\"\n\r") != std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

/// Splits one logical CSV record. `input` is consumed from `pos`; quoted
/// fields may contain commas, quotes and newlines. Returns false when the
/// record is malformed (unterminated quote, stray quote).
inline bool csv_parse_record(std::string_view input, std::size_t& pos,
                             std::vector<std::string>& fields) {
  fields.clear();
  if (pos >= input.size()) return false;
  std::string field;
  bool in_quotes = false;
  bool saw_any = false;
  while (pos < input.size()) {
    char c = input[pos];
    saw_any = true;
    if (in_quotes) {
      if (c == '"') {
        if (pos + 1 < input.size() && input[pos + 1] == '"') {
          field += '"';
          pos += 2;
        } else {
          in_quotes = false;
          ++pos;
        }
      } else {
        field += c;
        ++pos;
      }
      continue;
    }
    if (c == '"') {
      if (!field.empty()) return false;
      in_quotes = true;
      ++pos;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      ++pos;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && pos + 1 < input.size() && input[pos + 1] == '\n') ++pos;
      ++pos;
      break;
    } else {
      field += c;
      ++pos;
    }
  }
  if (in_quotes) return false;
  if (!saw_any) return false;
  fields.push_back(std::move(field));
  return true;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == '\n') {
      std::string_view line = text.substr(start, i - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      lines.push_back(line);
      start = i + 1;
    }
  }
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

}  // namespace offlang
