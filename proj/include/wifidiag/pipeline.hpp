#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "wifidiag/config.hpp"

namespace wifidiag::pipeline {

namespace fs = std::filesystem;

struct Options {
  /// Workspace root; every stage reads and writes below it.
  fs::path out;
  /// Run even when an input was produced under a different config hash.
  bool force = false;
  int threads = 1;
};

/// Stage-gated pipeline. Each stage records the hash of the config sections
/// it depends on and refuses inputs recorded under another hash unless
/// forced. Missing inputs raise MissingInputError naming the file.
///
/// Layout under `out`:
///   corpus/manifest.json, corpus/samples/<id>/, corpus/split.json
///   preprocess/norm.json, features_<modality>.csv, sequences.jsonl,
///     sequences.schema.json, stage.json
///   bench/results.jsonl, bench/report.md, bench/stage.json
///   llm/responses.jsonl, llm/features.jsonl, llm/results.jsonl,
///     llm/audit.jsonl, llm/stage.json
///   reasoning/reasoning_eval.jsonl, reasoning/features.json,
///     reasoning/results.jsonl, reasoning/stage.json
///   report.md
class Pipeline {
 public:
  Pipeline(config::RunConfig config, Options options);

  void generate();
  void split();
  void preprocess();
  void bench();
  void llm_extract();
  void reason_eval();
  /// Merges every *results.jsonl under the workspace into report.md.
  void report();

  /// Runs a stage by its command name. Throws ConfigError for unknown names.
  void run(std::string_view stage);
  static const std::vector<std::string>& stage_names();

  fs::path corpus_dir() const { return options_.out / "corpus"; }
  fs::path preprocess_dir() const { return options_.out / "preprocess"; }
  fs::path bench_dir() const { return options_.out / "bench"; }
  fs::path llm_dir() const { return options_.out / "llm"; }
  fs::path reasoning_dir() const { return options_.out / "reasoning"; }

  const config::RunConfig& config() const { return config_; }

 private:
  void check_hash(const std::string& found, config::Stage producer, const fs::path& source) const;
  void write_stage(const fs::path& dir, config::Stage stage, nlohmann::json extra = nlohmann::json::object()) const;
  void require_stage(const fs::path& dir, config::Stage producer) const;

  config::RunConfig config_;
  Options options_;
};

/// Every file named *results.jsonl below `root`, in path order.
std::vector<fs::path> find_results_files(const fs::path& root);

}  // namespace wifidiag::pipeline
