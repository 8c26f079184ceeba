#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "offlang/offlang.hpp"

namespace {

struct CommonArgs {
  std::string manifest_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool offline = false;
};

void add_manifest_option(CLI::App& cmd, CommonArgs& args, bool required) {
  auto* opt = cmd.add_option("--manifest", args.manifest_path, "Experiment manifest (JSON)");
  if (required) opt->required();
}

void add_seed_option(CLI::App& cmd, CommonArgs& args) {
  cmd.add_option_function<std::uint64_t>(
      "--seed", [&args](std::uint64_t v) { args.seed = v; },
      "Override the manifest's global seed");
}

offlang::ExperimentManifest load_manifest(const CommonArgs& args) {
  return offlang::validate_manifest(args.manifest_path, args.seed);
}

std::filesystem::path require_out(const CommonArgs& args, const char* subcommand) {
  if (args.out_dir.empty()) {
    offlang::raise(offlang::ErrorCode::MissingPath,
                   std::string("'") + subcommand + "' needs --out pointing at a run directory");
  }
  return args.out_dir;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Config-driven experiment runner for offensive-language detection:\n"
               "corpus preparation, backbone fine-tuning, LLM-based augmentation,\n"
               "threshold-gated self-training, and evaluation tables."};
  app.require_subcommand(1);

  CommonArgs run_args;
  std::string run_stage;
  CLI::App* run = app.add_subcommand("run", "Execute the full pipeline from a manifest");
  add_manifest_option(*run, run_args, true);
  run->add_option("--out", run_args.out_dir, "Run directory (default: fresh under output_dir)");
  add_seed_option(*run, run_args);
  run->add_flag("--offline", run_args.offline, "Force the mock completion client");
  run->add_option("--stage", run_stage,
                  "Run a single stage (prepare|augment|train|evaluate|selftrain|report)");

  CommonArgs prepare_args;
  CLI::App* prepare = app.add_subcommand("prepare", "Load, split, and snapshot the corpora");
  add_manifest_option(*prepare, prepare_args, true);
  prepare->add_option("--out", prepare_args.out_dir,
                      "Run directory (default: fresh under output_dir)");
  add_seed_option(*prepare, prepare_args);

  CommonArgs augment_args;
  CLI::App* augment = app.add_subcommand("augment", "Expand the train split via the LLM client");
  add_manifest_option(*augment, augment_args, true);
  augment->add_option("--out", augment_args.out_dir, "Run directory from prepare")->required();
  add_seed_option(*augment, augment_args);
  augment->add_flag("--offline", augment_args.offline, "Force the mock completion client");

  CommonArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Fine-tune every configured backbone");
  add_manifest_option(*train, train_args, true);
  train->add_option("--out", train_args.out_dir, "Run directory from prepare")->required();
  add_seed_option(*train, train_args);

  CommonArgs evaluate_args;
  CLI::App* evaluate = app.add_subcommand("evaluate", "Score checkpoints on the heldout split");
  add_manifest_option(*evaluate, evaluate_args, true);
  evaluate->add_option("--out", evaluate_args.out_dir, "Run directory from prepare")->required();
  add_seed_option(*evaluate, evaluate_args);

  CommonArgs selftrain_args;
  CLI::App* selftrain =
      app.add_subcommand("selftrain", "Pseudo-label the pool and retrain the best backbone");
  add_manifest_option(*selftrain, selftrain_args, true);
  selftrain->add_option("--out", selftrain_args.out_dir, "Run directory from prepare")->required();
  add_seed_option(*selftrain, selftrain_args);

  CommonArgs report_args;
  std::vector<std::string> report_dirs;
  CLI::App* report = app.add_subcommand("report", "Render comparison tables");
  report->add_option("--out", report_args.out_dir, "Run directory to render tables into");
  report->add_option("dirs", report_dirs, "Run directories to merge into one table");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const offlang::ExperimentManifest manifest = load_manifest(run_args);
      const offlang::BackboneRegistry registry = offlang::load_manifest_registry(manifest);
      if (run_stage.empty()) {
        offlang::RunOptions options;
        options.offline = run_args.offline;
        if (!run_args.out_dir.empty()) options.run_dir = run_args.out_dir;
        const offlang::RunArtifacts artifacts =
            offlang::run_experiment(manifest, run_args.manifest_path, options);
        std::cout << artifacts.dir.string() << '\n';
      } else if (run_stage == "prepare") {
        const std::filesystem::path dir = run_args.out_dir.empty()
                                              ? offlang::create_run_dir(manifest)
                                              : std::filesystem::path(run_args.out_dir);
        std::filesystem::create_directories(dir);
        offlang::stage_prepare(manifest, dir, run_args.manifest_path);
        std::cout << dir.string() << '\n';
      } else if (run_stage == "augment") {
        offlang::stage_augment(manifest, require_out(run_args, "run --stage augment"),
                               run_args.offline);
      } else if (run_stage == "train") {
        offlang::stage_train(manifest, require_out(run_args, "run --stage train"), registry);
      } else if (run_stage == "evaluate") {
        offlang::stage_evaluate(manifest, require_out(run_args, "run --stage evaluate"), registry);
      } else if (run_stage == "selftrain") {
        offlang::stage_selftrain(manifest, require_out(run_args, "run --stage selftrain"),
                                 registry);
      } else if (run_stage == "report") {
        std::cout << offlang::stage_report(require_out(run_args, "run --stage report"));
      } else {
        offlang::raise(offlang::ErrorCode::ParseError, "unknown stage '" + run_stage + "'");
      }
    } else if (prepare->parsed()) {
      const offlang::ExperimentManifest manifest = load_manifest(prepare_args);
      const std::filesystem::path dir = prepare_args.out_dir.empty()
                                            ? offlang::create_run_dir(manifest)
                                            : std::filesystem::path(prepare_args.out_dir);
      std::filesystem::create_directories(dir);
      offlang::stage_prepare(manifest, dir, prepare_args.manifest_path);
      std::cout << dir.string() << '\n';
    } else if (augment->parsed()) {
      const offlang::ExperimentManifest manifest = load_manifest(augment_args);
      if (!offlang::stage_augment(manifest, require_out(augment_args, "augment"),
                                  augment_args.offline)) {
        std::cerr << "note: manifest has no augmentation block; nothing to do\n";
      }
    } else if (train->parsed()) {
      const offlang::ExperimentManifest manifest = load_manifest(train_args);
      offlang::stage_train(manifest, require_out(train_args, "train"),
                           offlang::load_manifest_registry(manifest));
    } else if (evaluate->parsed()) {
      const offlang::ExperimentManifest manifest = load_manifest(evaluate_args);
      offlang::stage_evaluate(manifest, require_out(evaluate_args, "evaluate"),
                              offlang::load_manifest_registry(manifest));
    } else if (selftrain->parsed()) {
      const offlang::ExperimentManifest manifest = load_manifest(selftrain_args);
      if (!offlang::stage_selftrain(manifest, require_out(selftrain_args, "selftrain"),
                                    offlang::load_manifest_registry(manifest))) {
        std::cerr << "note: manifest has no selftrain block; nothing to do\n";
      }
    } else if (report->parsed()) {
      if (!report_dirs.empty()) {
        std::vector<std::filesystem::path> dirs(report_dirs.begin(), report_dirs.end());
        std::cout << offlang::merge_reports(dirs);
      } else {
        std::cout << offlang::stage_report(require_out(report_args, "report"));
      }
    }
  } catch (const offlang::Error& e) {
    std::cerr << "error[" << offlang::error_code_name(e.code()) << "]: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
