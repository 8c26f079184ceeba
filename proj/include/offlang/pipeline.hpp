#pragma once

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "offlang/augment.hpp"
#include "offlang/classifier.hpp"
#include "offlang/completion.hpp"
#include "offlang/corpus.hpp"
#include "offlang/corpus_io.hpp"
#include "offlang/error.hpp"
#include "offlang/evalkit.hpp"
#include "offlang/manifest.hpp"
#include "offlang/selftrain.hpp"

namespace offlang {

struct RunArtifacts {
  std::filesystem::path dir;
};

namespace detail {

inline std::string utc_timestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

inline void append_run_log(const std::filesystem::path& run_dir, const std::string& line) {
  std::ofstream out(run_dir / "run.log", std::ios::binary | std::ios::app);
  out << line << '\n';
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::MissingPath, "cannot write '" + path.string() + "'");
  out << content;
}

inline std::filesystem::path require_file(const std::filesystem::path& path,
                                          const char* produced_by) {
  if (!std::filesystem::exists(path)) {
    raise(ErrorCode::MissingPath,
          "'" + path.string() + "' not found; run the " + produced_by + " stage first");
  }
  return path;
}

/// The training corpus a later stage should consume: the augmented snapshot
/// when the augmentation stage ran, the plain split otherwise.
inline std::filesystem::path effective_train_path(const std::filesystem::path& run_dir) {
  const std::filesystem::path augmented = run_dir / "corpora" / "train_augmented.jsonl";
  if (std::filesystem::exists(augmented)) return augmented;
  return require_file(run_dir / "corpora" / "train.jsonl", "prepare");
}

}  // namespace detail

/// Fresh timestamped directory under the manifest's output_dir; an existing
/// run directory is never reused or overwritten.
inline std::filesystem::path create_run_dir(const ExperimentManifest& manifest) {
  const std::filesystem::path base(manifest.output_dir);
  std::filesystem::create_directories(base);
  const std::string stamp = detail::utc_timestamp();
  std::filesystem::path dir = base / ("run-" + stamp);
  for (int k = 2; std::filesystem::exists(dir); ++k) {
    dir = base / ("run-" + stamp + "-" + std::to_string(k));
  }
  std::filesystem::create_directories(dir);
  return dir;
}

/// Load, split, snapshot. Also records both the input manifest verbatim and
/// its fully resolved form, so the run directory is self-describing.
inline void stage_prepare(const ExperimentManifest& manifest, const std::filesystem::path& run_dir,
                          const std::filesystem::path& manifest_source) {
  std::filesystem::create_directories(run_dir / "corpora");
  detail::write_text_file(run_dir / "manifest.input", detail::read_file(manifest_source));
  detail::write_text_file(run_dir / "manifest.resolved", manifest_to_json(manifest).dump(2) + "\n");

  const LabeledCorpus corpus = load_corpus(manifest.dataset_path, manifest.format);
  const auto [train, heldout] = split_corpus(corpus, manifest.split);
  save_corpus_jsonl(train, run_dir / "corpora" / "train.jsonl");
  save_corpus_jsonl(heldout, run_dir / "corpora" / "heldout.jsonl");

  if (manifest.selftrain.has_value()) {
    const UnlabeledPool pool =
        load_pool(manifest.selftrain->pool_path, manifest.selftrain->pool_format);
    save_pool_jsonl(pool, run_dir / "corpora" / "pool.jsonl");
  }
}

/// Expands the train split through the configured completion client and
/// snapshots the result, its lineage records, and a blank audit sheet.
/// Returns false when the manifest has no augmentation block.
inline bool stage_augment(const ExperimentManifest& manifest, const std::filesystem::path& run_dir,
                          bool offline) {
  if (!manifest.augmentation.has_value()) return false;
  const AugmentationSettings& settings = *manifest.augmentation;

  const LabeledCorpus train =
      load_corpus(detail::require_file(run_dir / "corpora" / "train.jsonl", "prepare"),
                  Format::jsonl);

  std::unique_ptr<CompletionClient> client;
  if (offline || settings.client == "mock") {
    client = std::make_unique<MockCompletionClient>();
  } else {
    RemoteCompletionClient::Options options;
    options.endpoint = *settings.endpoint;
    client = std::make_unique<RemoteCompletionClient>(std::move(options));
  }
  PromptTemplate tmpl;
  if (settings.template_override.has_value()) tmpl.text = *settings.template_override;

  const auto [augmented, records] = augment_corpus(train, settings.multiplier, *client, tmpl,
                                                   settings.params, settings.max_in_flight);

  std::filesystem::create_directories(run_dir / "augmentation");
  save_corpus_jsonl(augmented, run_dir / "corpora" / "train_augmented.jsonl");
  save_augmentation_records(records, run_dir / "augmentation" / "records.jsonl");

  std::size_t augmented_count = 0;
  for (const TextSample& s : augmented.samples()) {
    if (s.provenance == Provenance::augmented) ++augmented_count;
  }
  const int sheet_size = static_cast<int>(std::min<std::size_t>(200, augmented_count));
  const ReviewSheet sheet = export_audit_sheet(augmented, sheet_size, settings.params.seed);
  save_review_sheet_csv(sheet, run_dir / "augmentation" / "audit_sheet.csv");
  return true;
}

/// Fine-tunes every configured backbone on the effective train corpus and
/// checkpoints each run.
inline void stage_train(const ExperimentManifest& manifest, const std::filesystem::path& run_dir,
                        const BackboneRegistry& registry) {
  const LabeledCorpus train =
      load_corpus(detail::effective_train_path(run_dir), Format::jsonl);
  std::filesystem::create_directories(run_dir / "checkpoints");
  for (const BackboneRun& run : manifest.backbones) {
    const Classifier classifier = build_classifier(run.config.backbone, run.config, registry);
    const TrainedModel model = fine_tune(classifier, train, run.config);
    save_model(model, run_dir / "checkpoints" / run.label);
  }
}

/// Scores every checkpoint against the heldout split at its configured
/// decision threshold.
inline void stage_evaluate(const ExperimentManifest& manifest,
                           const std::filesystem::path& run_dir,
                           const BackboneRegistry& registry) {
  const LabeledCorpus heldout = load_corpus(
      detail::require_file(run_dir / "corpora" / "heldout.jsonl", "prepare"), Format::jsonl);
  std::filesystem::create_directories(run_dir / "eval");
  for (const BackboneRun& run : manifest.backbones) {
    const TrainedModel model =
        load_model(detail::require_file(run_dir / "checkpoints" / run.label, "train"), registry);
    const EvaluationReport report = evaluate(model, heldout, run.config.decision_threshold);
    nlohmann::ordered_json j;
    j["run"] = run.label;
    j["report"] = report_to_json(report);
    detail::write_text_file(run_dir / "eval" / (run.label + ".json"), j.dump(2) + "\n");
  }
}

namespace detail {

inline EvaluationReport read_eval_file(const std::filesystem::path& path, std::string& run_label) {
  const nlohmann::json j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("report")) {
    raise(ErrorCode::ParseError, "'" + path.string() + "' is not an evaluation report");
  }
  run_label = j.value("run", path.stem().string());
  return report_from_json(j.at("report"));
}

}  // namespace detail

/// Runs the pseudo-label/retrain loop on the best backbone from the evaluate
/// stage (ties go to manifest order). Returns false when the manifest has no
/// selftrain block.
inline bool stage_selftrain(const ExperimentManifest& manifest,
                            const std::filesystem::path& run_dir,
                            const BackboneRegistry& registry) {
  if (!manifest.selftrain.has_value()) return false;
  const SelfTrainSettings& settings = *manifest.selftrain;

  const BackboneRun* best = nullptr;
  double best_macro = -1.0;
  for (const BackboneRun& run : manifest.backbones) {
    std::string label;
    const EvaluationReport report = detail::read_eval_file(
        detail::require_file(run_dir / "eval" / (run.label + ".json"), "evaluate"), label);
    if (report.macro_f1 > best_macro) {
      best_macro = report.macro_f1;
      best = &run;
    }
  }

  const LabeledCorpus train =
      load_corpus(detail::effective_train_path(run_dir), Format::jsonl);
  const LabeledCorpus heldout = load_corpus(
      detail::require_file(run_dir / "corpora" / "heldout.jsonl", "prepare"), Format::jsonl);
  const UnlabeledPool pool =
      load_pool(detail::require_file(run_dir / "corpora" / "pool.jsonl", "prepare"),
                Format::jsonl);

  SelfTrainResult result = self_train(best->config, train, heldout, pool, settings.policy,
                                      settings.rounds, registry);

  const std::string label = best->label + "-selftrain";
  save_model(result.model, run_dir / "checkpoints" / label);
  save_corpus_jsonl(result.corpus, run_dir / "corpora" / "train_selftrain.jsonl");

  std::filesystem::create_directories(run_dir / "selftrain");
  nlohmann::ordered_json report_json;
  report_json["base_run"] = best->label;
  report_json["policy"] = policy_to_json(settings.policy);
  report_json["report"] = selftrain_report_to_json(result.report);
  detail::write_text_file(run_dir / "selftrain" / "report.json", report_json.dump(2) + "\n");

  nlohmann::ordered_json eval_json;
  eval_json["run"] = label;
  eval_json["report"] = report_to_json(result.report.rounds.back().post_retrain);
  std::filesystem::create_directories(run_dir / "eval");
  detail::write_text_file(run_dir / "eval" / (label + ".json"), eval_json.dump(2) + "\n");
  return true;
}

/// Renders the comparison tables from every evaluation report in the run
/// directory. Returns the markdown rendering.
inline std::string stage_report(const std::filesystem::path& run_dir) {
  const std::filesystem::path eval_dir = run_dir / "eval";
  if (!std::filesystem::exists(eval_dir)) {
    raise(ErrorCode::MissingPath, "'" + eval_dir.string() + "' not found; run evaluate first");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(eval_dir)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<std::pair<std::string, EvaluationReport>> rows;
  for (const std::filesystem::path& file : files) {
    std::string label;
    EvaluationReport report = detail::read_eval_file(file, label);
    rows.emplace_back(std::move(label), std::move(report));
  }
  const std::string markdown = render_table(rows, TableFormat::markdown);
  const std::string csv = render_table(rows, TableFormat::csv);
  std::filesystem::create_directories(run_dir / "tables");
  detail::write_text_file(run_dir / "tables" / "comparison.md", markdown);
  detail::write_text_file(run_dir / "tables" / "comparison.csv", csv);
  return markdown;
}

/// Merged comparison table across several run directories; rows are prefixed
/// with the run directory name so identical labels stay distinguishable.
inline std::string merge_reports(const std::vector<std::filesystem::path>& run_dirs,
                                 TableFormat format = TableFormat::markdown) {
  std::vector<std::pair<std::string, EvaluationReport>> rows;
  for (const std::filesystem::path& dir : run_dirs) {
    const std::filesystem::path eval_dir = dir / "eval";
    if (!std::filesystem::exists(eval_dir)) {
      raise(ErrorCode::MissingPath, "'" + eval_dir.string() + "' not found");
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(eval_dir)) {
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const std::filesystem::path& file : files) {
      std::string label;
      EvaluationReport report = detail::read_eval_file(file, label);
      rows.emplace_back(dir.filename().string() + ":" + label, std::move(report));
    }
  }
  return render_table(rows, format);
}

struct RunOptions {
  bool offline = false;
  std::optional<std::filesystem::path> run_dir;
};

/// The whole pipeline as a composition of the stage functions, sharing one
/// run directory: prepare, augment (optional), train, evaluate, selftrain
/// (optional), report. A stage failure is logged with a partial-artifacts
/// marker and rethrown; nothing is cleaned up or papered over.
inline RunArtifacts run_experiment(const ExperimentManifest& manifest,
                                   const std::filesystem::path& manifest_source,
                                   const RunOptions& options = {}) {
  const BackboneRegistry registry = load_manifest_registry(manifest);
  const std::filesystem::path run_dir =
      options.run_dir.has_value() ? *options.run_dir : create_run_dir(manifest);
  std::filesystem::create_directories(run_dir);

  std::string current_stage = "prepare";
  try {
    stage_prepare(manifest, run_dir, manifest_source);
    detail::append_run_log(run_dir, "stage prepare: ok");

    current_stage = "augment";
    if (stage_augment(manifest, run_dir, options.offline)) {
      detail::append_run_log(run_dir, "stage augment: ok");
    } else {
      detail::append_run_log(run_dir, "stage augment: skipped (not configured)");
    }

    current_stage = "train";
    stage_train(manifest, run_dir, registry);
    detail::append_run_log(run_dir, "stage train: ok");

    current_stage = "evaluate";
    stage_evaluate(manifest, run_dir, registry);
    detail::append_run_log(run_dir, "stage evaluate: ok");

    current_stage = "selftrain";
    if (stage_selftrain(manifest, run_dir, registry)) {
      detail::append_run_log(run_dir, "stage selftrain: ok");
    } else {
      detail::append_run_log(run_dir, "stage selftrain: skipped (not configured)");
    }

    current_stage = "report";
    stage_report(run_dir);
    detail::append_run_log(run_dir, "stage report: ok");
    detail::append_run_log(run_dir, "run: complete");
  } catch (const Error& e) {
    const std::string line = "stage " + current_stage + ": failed error[" +
                             std::string(error_code_name(e.code())) + "]: " + e.what();
    detail::append_run_log(run_dir, line);
    detail::write_text_file(run_dir / "partial.marker", line + "\n");
    throw;
  }
  return RunArtifacts{run_dir};
}

}  // namespace offlang
