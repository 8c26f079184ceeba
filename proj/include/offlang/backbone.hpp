#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "offlang/corpus_io.hpp"
#include "offlang/error.hpp"

namespace offlang {

enum class BackboneKind { multilingual, monolingual, test };

inline std::string_view to_string(BackboneKind kind) {
  switch (kind) {
    case BackboneKind::multilingual: return "multilingual";
    case BackboneKind::monolingual: return "monolingual";
    case BackboneKind::test: return "test";
  }
  return "test";
}

inline BackboneKind parse_backbone_kind(std::string_view raw) {
  const std::string token = ascii_lower(trim_view(raw));
  if (token == "multilingual") return BackboneKind::multilingual;
  if (token == "monolingual") return BackboneKind::monolingual;
  if (token == "test") return BackboneKind::test;
  raise(ErrorCode::ParseError, "unknown backbone kind '" + std::string(raw) + "'");
}

struct BackboneSpec {
  std::string name;
  BackboneKind kind = BackboneKind::test;
  int max_sequence_length = 512;
};

struct BackboneEntry {
  BackboneSpec spec;
  std::string weights_path;  // empty: no weights registered
};

/// Maps registry names to encoder weights. Production names ship without
/// weight locations; a registry file supplies them for offline substitution.
/// The tiny-test backbone is always available and needs no weights.
class BackboneRegistry {
 public:
  static BackboneRegistry builtin() {
    BackboneRegistry registry;
    auto add = [&](std::string name, BackboneKind kind, int max_len) {
      registry.entries_[name] = BackboneEntry{BackboneSpec{name, kind, max_len}, ""};
    };
    add("xlm-roberta-large", BackboneKind::multilingual, 512);
    add("indic-bert", BackboneKind::multilingual, 512);
    add("bangla-bert", BackboneKind::monolingual, 512);
    add("bangla-hate-bert", BackboneKind::monolingual, 512);
    add("l3-cube", BackboneKind::monolingual, 512);
    add("tiny-test", BackboneKind::test, 256);
    return registry;
  }

  void register_entry(BackboneEntry entry) {
    entries_[entry.spec.name] = std::move(entry);
  }

  /// Merges entries from a JSON manifest:
  ///   [{"name": ..., "kind": ..., "max_sequence_length": ..., "weights_path": ...}, ...]
  void load_file(const std::filesystem::path& path) {
    const std::string content = detail::read_file(path);
    nlohmann::json j = nlohmann::json::parse(content, nullptr, false);
    if (j.is_discarded() || !j.is_array()) {
      raise(ErrorCode::ParseError, "backbone registry '" + path.string() + "' must be a JSON array");
    }
    for (const auto& item : j) {
      if (!item.is_object() || !item.contains("name")) {
        raise(ErrorCode::ParseError, "registry entries need at least a 'name'");
      }
      const std::string name = item.at("name").get<std::string>();
      BackboneEntry entry;
      if (auto it = entries_.find(name); it != entries_.end()) entry = it->second;
      entry.spec.name = name;
      if (item.contains("kind")) {
        entry.spec.kind = parse_backbone_kind(item.at("kind").get<std::string>());
      }
      if (item.contains("max_sequence_length")) {
        entry.spec.max_sequence_length = item.at("max_sequence_length").get<int>();
        if (entry.spec.max_sequence_length <= 0) {
          raise(ErrorCode::ParseError, "max_sequence_length must be positive");
        }
      }
      if (item.contains("weights_path")) {
        std::filesystem::path weights = item.at("weights_path").get<std::string>();
        if (weights.is_relative()) weights = path.parent_path() / weights;
        entry.weights_path = weights.string();
      }
      entries_[name] = std::move(entry);
    }
  }

  bool contains(const std::string& name) const { return entries_.count(name) > 0; }

  const BackboneEntry& resolve(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) {
      raise(ErrorCode::UnknownBackbone, "backbone '" + name + "' is not in the registry");
    }
    return it->second;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, entry] : entries_) out.push_back(name);
    return out;
  }

 private:
  std::map<std::string, BackboneEntry> entries_;
};

}  // namespace offlang
