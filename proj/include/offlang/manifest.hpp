#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "offlang/backbone.hpp"
#include "offlang/classifier.hpp"
#include "offlang/completion.hpp"
#include "offlang/corpus.hpp"
#include "offlang/corpus_io.hpp"
#include "offlang/error.hpp"
#include "offlang/hash.hpp"
#include "offlang/selftrain.hpp"

namespace offlang {

inline constexpr int kManifestSchemaVersion = 1;

struct AugmentationSettings {
  int multiplier = 3;
  std::string client = "mock";
  std::optional<std::string> template_override;
  CompletionParams params;
  std::optional<std::string> endpoint;
  int max_in_flight = 1;
};

struct SelfTrainSettings {
  std::string pool_path;
  Format pool_format = Format::jsonl;
  ThresholdPolicy policy;
  int rounds = 1;
};

/// One table row to be: a backbone plus its training configuration, under a
/// label that names the run directory entries and report rows.
struct BackboneRun {
  std::string label;
  TrainConfig config;
};

struct ExperimentManifest {
  int schema_version = kManifestSchemaVersion;
  std::string language = "other";
  std::string dataset_path;
  Format format = Format::jsonl;
  SplitSpec split;
  std::vector<BackboneRun> backbones;
  std::optional<AugmentationSettings> augmentation;
  std::optional<SelfTrainSettings> selftrain;
  std::string output_dir = "runs";
  std::uint64_t seed = 0;
  std::optional<std::string> registry_path;
};

/// Builtin backbones plus whatever the manifest's registry file adds.
inline BackboneRegistry load_manifest_registry(const ExperimentManifest& manifest) {
  BackboneRegistry registry = BackboneRegistry::builtin();
  if (manifest.registry_path.has_value()) registry.load_file(*manifest.registry_path);
  return registry;
}

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& object, const char* where,
                                std::initializer_list<std::string_view> known) {
  for (const auto& [key, value] : object.items()) {
    bool found = false;
    for (std::string_view k : known) {
      if (key == k) {
        found = true;
        break;
      }
    }
    if (!found) {
      raise(ErrorCode::ParseError,
            std::string("unknown key '") + key + "' in " + where + " block");
    }
  }
}

inline std::string resolve_against(const std::filesystem::path& base, const std::string& path) {
  const std::filesystem::path p(path);
  if (p.is_absolute()) return p.lexically_normal().string();
  return (base / p).lexically_normal().string();
}

inline std::string sanitize_label(std::string_view label) {
  std::string out;
  out.reserve(label.size());
  for (char c : label) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '.' || c == '_' || c == '-';
    out += ok ? c : '-';
  }
  return out.empty() ? std::string("run") : out;
}

}  // namespace detail

/// Parses and fully resolves a manifest: defaults filled, relative paths
/// anchored at the manifest's directory, referenced files checked, per-stage
/// seeds derived from the global seed wherever the manifest does not pin one.
inline ExperimentManifest validate_manifest(
    const std::filesystem::path& path,
    std::optional<std::uint64_t> seed_override = std::nullopt) {
  const std::string content = detail::read_file(path);
  const nlohmann::json j = nlohmann::json::parse(content, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    raise(ErrorCode::ParseError, "'" + path.string() + "' is not a JSON object");
  }
  detail::reject_unknown_keys(j, "manifest",
                              {"schema_version", "language", "dataset_path", "format", "split",
                               "backbones", "augmentation", "selftrain", "output_dir", "seed",
                               "registry"});

  ExperimentManifest manifest;
  manifest.schema_version = j.value("schema_version", kManifestSchemaVersion);
  if (manifest.schema_version != kManifestSchemaVersion) {
    raise(ErrorCode::VersionMismatch,
          "manifest schema_version " + std::to_string(manifest.schema_version) +
              " is not supported (expected " + std::to_string(kManifestSchemaVersion) + ")");
  }

  const std::filesystem::path base = std::filesystem::absolute(path).parent_path();
  manifest.language = j.value("language", manifest.language);
  manifest.seed = seed_override.value_or(j.value("seed", manifest.seed));
  manifest.output_dir = detail::resolve_against(base, j.value("output_dir", manifest.output_dir));

  if (!j.contains("dataset_path") || !j.at("dataset_path").is_string()) {
    raise(ErrorCode::ParseError, "manifest needs a string 'dataset_path'");
  }
  manifest.dataset_path = detail::resolve_against(base, j.at("dataset_path").get<std::string>());
  if (!std::filesystem::exists(manifest.dataset_path)) {
    raise(ErrorCode::MissingPath, "dataset_path '" + manifest.dataset_path + "' does not exist");
  }
  manifest.format = parse_format(j.value("format", "jsonl"));

  if (j.contains("registry")) {
    manifest.registry_path = detail::resolve_against(base, j.at("registry").get<std::string>());
    if (!std::filesystem::exists(*manifest.registry_path)) {
      raise(ErrorCode::MissingPath, "registry '" + *manifest.registry_path + "' does not exist");
    }
  }
  const BackboneRegistry registry = load_manifest_registry(manifest);

  manifest.split.seed = derive_seed(manifest.seed, "split");
  if (j.contains("split")) {
    const nlohmann::json& s = j.at("split");
    detail::reject_unknown_keys(s, "split", {"train_fraction", "stratified", "seed"});
    manifest.split.train_fraction = s.value("train_fraction", manifest.split.train_fraction);
    manifest.split.stratified = s.value("stratified", manifest.split.stratified);
    if (s.contains("seed")) manifest.split.seed = s.at("seed").get<std::uint64_t>();
  }
  validate_split_spec(manifest.split);

  if (!j.contains("backbones") || !j.at("backbones").is_array() || j.at("backbones").empty()) {
    raise(ErrorCode::NoBackbones, "manifest must list at least one backbone");
  }
  std::unordered_set<std::string> labels_seen;
  for (const nlohmann::json& b : j.at("backbones")) {
    if (!b.is_object() || !b.contains("name")) {
      raise(ErrorCode::ParseError, "each backbone entry needs at least a 'name'");
    }
    detail::reject_unknown_keys(b, "backbone",
                                {"name", "label", "epochs", "learning_rate", "batch_size", "seed",
                                 "decision_threshold"});
    const std::string name = b.at("name").get<std::string>();
    const BackboneEntry& entry = registry.resolve(name);

    BackboneRun run;
    run.label = detail::sanitize_label(b.value("label", name));
    while (!labels_seen.insert(run.label).second) run.label += "x";

    run.config = default_train_config(name, entry.spec.kind);
    run.config.epochs = b.value("epochs", run.config.epochs);
    run.config.learning_rate = b.value("learning_rate", run.config.learning_rate);
    run.config.batch_size = b.value("batch_size", run.config.batch_size);
    run.config.decision_threshold = b.value("decision_threshold", run.config.decision_threshold);
    run.config.seed = b.contains("seed") ? b.at("seed").get<std::uint64_t>()
                                         : derive_seed(manifest.seed, "train/" + run.label);
    validate_train_config(run.config);
    manifest.backbones.push_back(std::move(run));
  }

  if (j.contains("augmentation") && !j.at("augmentation").is_null()) {
    const nlohmann::json& a = j.at("augmentation");
    detail::reject_unknown_keys(a, "augmentation",
                                {"multiplier", "client", "template", "temperature", "max_tokens",
                                 "seed", "endpoint", "max_in_flight"});
    AugmentationSettings aug;
    aug.multiplier = a.value("multiplier", aug.multiplier);
    if (aug.multiplier < 1) raise(ErrorCode::OutOfRange, "augmentation multiplier must be >= 1");
    aug.client = a.value("client", aug.client);
    if (aug.client != "mock" && aug.client != "remote") {
      raise(ErrorCode::ParseError, "augmentation client must be 'mock' or 'remote'");
    }
    if (a.contains("template")) aug.template_override = a.at("template").get<std::string>();
    aug.params.temperature = a.value("temperature", aug.params.temperature);
    aug.params.max_tokens = a.value("max_tokens", aug.params.max_tokens);
    aug.params.seed = a.contains("seed") ? a.at("seed").get<std::uint64_t>()
                                         : derive_seed(manifest.seed, "augment");
    if (a.contains("endpoint")) aug.endpoint = a.at("endpoint").get<std::string>();
    if (aug.client == "remote" && !aug.endpoint.has_value()) {
      raise(ErrorCode::ParseError, "remote augmentation needs an 'endpoint'");
    }
    aug.max_in_flight = a.value("max_in_flight", aug.max_in_flight);
    if (aug.max_in_flight < 1) raise(ErrorCode::OutOfRange, "max_in_flight must be >= 1");
    manifest.augmentation = std::move(aug);
  }

  if (j.contains("selftrain") && !j.at("selftrain").is_null()) {
    const nlohmann::json& s = j.at("selftrain");
    detail::reject_unknown_keys(s, "selftrain", {"pool_path", "pool_format", "policy", "rounds"});
    SelfTrainSettings st;
    if (!s.contains("pool_path") || !s.at("pool_path").is_string()) {
      raise(ErrorCode::ParseError, "selftrain block needs a string 'pool_path'");
    }
    st.pool_path = detail::resolve_against(base, s.at("pool_path").get<std::string>());
    if (!std::filesystem::exists(st.pool_path)) {
      raise(ErrorCode::MissingPath, "pool_path '" + st.pool_path + "' does not exist");
    }
    st.pool_format = parse_format(s.value("pool_format", "jsonl"));
    if (s.contains("policy")) {
      const nlohmann::json& p = s.at("policy");
      detail::reject_unknown_keys(p, "policy", {"decision", "upper", "lower"});
      st.policy.decision = p.value("decision", st.policy.decision);
      st.policy.upper = p.value("upper", st.policy.upper);
      st.policy.lower = p.value("lower", st.policy.lower);
    }
    validate_policy(st.policy);
    st.rounds = s.value("rounds", st.rounds);
    if (st.rounds < 1) raise(ErrorCode::OutOfRange, "selftrain rounds must be >= 1");
    manifest.selftrain = std::move(st);
  }

  return manifest;
}

/// The fully resolved manifest, echoed so a run directory records exactly
/// what was executed (every default and derived seed made explicit).
inline nlohmann::ordered_json manifest_to_json(const ExperimentManifest& manifest) {
  nlohmann::ordered_json j;
  j["schema_version"] = manifest.schema_version;
  j["language"] = manifest.language;
  j["dataset_path"] = manifest.dataset_path;
  j["format"] = std::string(to_string(manifest.format));
  j["seed"] = manifest.seed;
  j["output_dir"] = manifest.output_dir;
  j["split"] = {{"train_fraction", manifest.split.train_fraction},
                {"stratified", manifest.split.stratified},
                {"seed", manifest.split.seed}};
  nlohmann::ordered_json backbones = nlohmann::ordered_json::array();
  for (const BackboneRun& run : manifest.backbones) {
    nlohmann::ordered_json b = train_config_to_json(run.config);
    b["label"] = run.label;
    backbones.push_back(std::move(b));
  }
  j["backbones"] = std::move(backbones);
  if (manifest.augmentation.has_value()) {
    const AugmentationSettings& aug = *manifest.augmentation;
    nlohmann::ordered_json a;
    a["multiplier"] = aug.multiplier;
    a["client"] = aug.client;
    if (aug.template_override.has_value()) a["template"] = *aug.template_override;
    a["temperature"] = aug.params.temperature;
    a["max_tokens"] = aug.params.max_tokens;
    a["seed"] = aug.params.seed;
    if (aug.endpoint.has_value()) a["endpoint"] = *aug.endpoint;
    a["max_in_flight"] = aug.max_in_flight;
    j["augmentation"] = std::move(a);
  }
  if (manifest.selftrain.has_value()) {
    const SelfTrainSettings& st = *manifest.selftrain;
    nlohmann::ordered_json s;
    s["pool_path"] = st.pool_path;
    s["pool_format"] = std::string(to_string(st.pool_format));
    s["policy"] = policy_to_json(st.policy);
    s["rounds"] = st.rounds;
    j["selftrain"] = std::move(s);
  }
  if (manifest.registry_path.has_value()) j["registry"] = *manifest.registry_path;
  return j;
}

}  // namespace offlang
