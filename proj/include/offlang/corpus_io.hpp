#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "offlang/corpus.hpp"
#include "offlang/error.hpp"
#include "offlang/hash.hpp"
#include "offlang/sample.hpp"
#include "offlang/text.hpp"

namespace offlang {

enum class Format { tsv, jsonl };

inline Format parse_format(std::string_view raw) {
  const std::string token = ascii_lower(trim_view(raw));
  if (token == "tsv") return Format::tsv;
  if (token == "jsonl") return Format::jsonl;
  raise(ErrorCode::ParseError, "unknown corpus format '" + std::string(raw) + "'");
}

inline std::string_view to_string(Format format) {
  return format == Format::tsv ? "tsv" : "jsonl";
}

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    raise(ErrorCode::MissingPath, "cannot open '" + path.string() + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return std::move(buffer).str();
}

inline std::string derived_row_id(std::string_view source, std::size_t row_index) {
  HashWriter h;
  h.write(source).write(static_cast<std::uint64_t>(row_index));
  return to_hex16(h.finish());
}

struct TsvColumns {
  std::optional<std::size_t> id, text, label, language, source;
  std::size_t count = 0;
};

inline TsvColumns parse_tsv_header(std::string_view header, const std::string& path,
                                   bool require_label) {
  TsvColumns cols;
  std::size_t start = 0;
  std::size_t index = 0;
  for (std::size_t i = 0; i <= header.size(); ++i) {
    if (i == header.size() || header[i] == '\t') {
      const std::string name = ascii_lower(trim_view(header.substr(start, i - start)));
      if (name == "id") cols.id = index;
      else if (name == "text") cols.text = index;
      else if (name == "label") cols.label = index;
      else if (name == "language") cols.language = index;
      else if (name == "source") cols.source = index;
      else raise(ErrorCode::MalformedRow, path + ": unknown TSV column '" + name + "'");
      ++index;
      start = i + 1;
    }
  }
  cols.count = index;
  if (!cols.text) raise(ErrorCode::MalformedRow, path + ": TSV header is missing 'text'");
  if (require_label && !cols.label) {
    raise(ErrorCode::MalformedRow, path + ": TSV header is missing 'label'");
  }
  return cols;
}

/// Parses TSV rows into samples. Rows are 1-based in error messages, with the
/// header as row 1.
inline std::vector<TextSample> parse_tsv(const std::string& content,
                                         const std::string& default_source,
                                         const std::string& path, bool labeled) {
  const std::vector<std::string_view> lines = split_lines(content);
  if (lines.empty()) raise(ErrorCode::EmptyFile, path + ": no header row");
  const TsvColumns cols = parse_tsv_header(lines[0], path, labeled);

  std::vector<TextSample> samples;
  samples.reserve(lines.size() - 1);
  for (std::size_t line_no = 1; line_no < lines.size(); ++line_no) {
    const std::string_view line = lines[line_no];
    const std::string row_tag = path + " row " + std::to_string(line_no + 1);
    if (line.empty()) continue;

    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == '\t') {
        std::string decoded;
        if (!tsv_unescape(line.substr(start, i - start), decoded)) {
          raise(ErrorCode::MalformedRow, row_tag + ": bad escape sequence");
        }
        fields.push_back(std::move(decoded));
        start = i + 1;
      }
    }
    if (fields.size() != cols.count) {
      raise(ErrorCode::MalformedRow,
            row_tag + ": expected " + std::to_string(cols.count) + " columns, got " +
                std::to_string(fields.size()));
    }

    TextSample sample;
    sample.text = fields[*cols.text];
    if (is_blank(sample.text)) {
      raise(ErrorCode::MalformedRow, row_tag + ": text is empty after trimming");
    }
    sample.source = cols.source && !fields[*cols.source].empty() ? fields[*cols.source]
                                                                 : default_source;
    sample.id = cols.id && !is_blank(fields[*cols.id])
                    ? trim(fields[*cols.id])
                    : derived_row_id(sample.source, line_no);
    if (cols.language) sample.language = parse_language(fields[*cols.language]);
    if (labeled) {
      const std::string& raw_label = fields[*cols.label];
      if (is_blank(raw_label)) {
        raise(ErrorCode::MalformedRow, row_tag + ": label is empty");
      }
      try {
        sample.label = normalize_label(raw_label);
      } catch (const Error& e) {
        raise(e.code(), row_tag + ": " + e.what());
      }
    } else if (cols.label && !is_blank(fields[*cols.label])) {
      raise(ErrorCode::MalformedRow, row_tag + ": unlabeled input carries a label");
    }
    samples.push_back(std::move(sample));
  }
  if (samples.empty()) raise(ErrorCode::EmptyFile, path + ": no data rows");
  return samples;
}

inline std::vector<TextSample> parse_jsonl(const std::string& content,
                                           const std::string& default_source,
                                           const std::string& path, bool labeled) {
  std::vector<TextSample> samples;
  const std::vector<std::string_view> lines = split_lines(content);
  for (std::size_t line_no = 0; line_no < lines.size(); ++line_no) {
    const std::string_view line = lines[line_no];
    if (is_blank(line)) continue;
    const std::string row_tag = path + " line " + std::to_string(line_no + 1);
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      raise(ErrorCode::MalformedRow, row_tag + ": not a JSON object");
    }
    TextSample sample;
    try {
      sample = sample_from_json(j);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      raise(ErrorCode::MalformedRow, row_tag + ": " + e.what());
    }
    if (sample.source.empty()) sample.source = default_source;
    if (sample.id.empty()) sample.id = derived_row_id(sample.source, line_no + 1);
    if (is_blank(sample.text)) {
      raise(ErrorCode::MalformedRow, row_tag + ": text is empty after trimming");
    }
    if (labeled && !sample.label) {
      raise(ErrorCode::MalformedRow, row_tag + ": missing label");
    }
    if (!labeled && sample.label) {
      raise(ErrorCode::MalformedRow, row_tag + ": unlabeled input carries a label");
    }
    samples.push_back(std::move(sample));
  }
  if (samples.empty()) raise(ErrorCode::EmptyFile, path + ": no data lines");
  return samples;
}

inline std::vector<TextSample> load_samples(const std::filesystem::path& path, Format format,
                                            bool labeled) {
  const std::string content = read_file(path);
  const std::string default_source = path.filename().string();
  if (format == Format::tsv) {
    return parse_tsv(content, default_source, path.string(), labeled);
  }
  return parse_jsonl(content, default_source, path.string(), labeled);
}

}  // namespace detail

inline LabeledCorpus load_corpus(const std::filesystem::path& path, Format format) {
  return LabeledCorpus::from_samples(detail::load_samples(path, format, /*labeled=*/true));
}

inline UnlabeledPool load_pool(const std::filesystem::path& path, Format format) {
  return UnlabeledPool::from_samples(detail::load_samples(path, format, /*labeled=*/false),
                                     path.filename().string());
}

/// JSONL is the canonical interchange format between pipeline stages.
inline void save_samples_jsonl(std::span<const TextSample> samples,
                               const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::MissingPath, "cannot write '" + path.string() + "'");
  for (const TextSample& s : samples) {
    out << sample_to_json(s).dump() << '\n';
  }
}

inline void save_corpus_jsonl(const LabeledCorpus& corpus, const std::filesystem::path& path) {
  save_samples_jsonl(std::span<const TextSample>(corpus.samples()), path);
}

inline void save_pool_jsonl(const UnlabeledPool& pool, const std::filesystem::path& path) {
  save_samples_jsonl(std::span<const TextSample>(pool.samples()), path);
}

inline void save_corpus_tsv(const LabeledCorpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::MissingPath, "cannot write '" + path.string() + "'");
  out << "id\ttext\tlabel\tlanguage\tsource\n";
  for (const TextSample& s : corpus.samples()) {
    out << tsv_escape(s.id) << '\t' << tsv_escape(s.text) << '\t' << to_string(*s.label) << '\t'
        << to_string(s.language) << '\t' << tsv_escape(s.source) << '\n';
  }
}

}  // namespace offlang
