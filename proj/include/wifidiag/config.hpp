#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "wifidiag/dataset.hpp"
#include "wifidiag/diagnosis.hpp"
#include "wifidiag/llmclient.hpp"
#include "wifidiag/preprocess.hpp"
#include "wifidiag/reasoning.hpp"

namespace wifidiag::config {

struct SplitConfig {
  double ratio = 0.8;
  std::uint64_t seed = 1;
};

struct PreprocessConfig {
  /// Ticks per exported sequence; 0 takes the corpus mean rounded to 10.
  int sequence_length = 0;
};

struct BenchConfig {
  std::vector<diagnosis::Method> methods = {diagnosis::kAllMethods.begin(), diagnosis::kAllMethods.end()};
  std::vector<preprocess::ModalitySet> modality_sets = default_modality_sets();
  std::vector<diagnosis::Task> tasks = {diagnosis::kAllTasks.begin(), diagnosis::kAllTasks.end()};
  diagnosis::Hyper hyper;
  int threads = 1;

  /// The four single modalities, then the pairwise and full fusions.
  static std::vector<preprocess::ModalitySet> default_modality_sets();
};

struct LlmConfig {
  llm::EndpointConfig endpoint;
  std::vector<preprocess::ModalitySet> modality_sets = default_modality_sets();
  double subset_fraction = 0.1;
  std::uint64_t subset_seed = 11;
  diagnosis::Method distill_method = diagnosis::Method::DecisionTree;

  /// The four single modalities.
  static std::vector<preprocess::ModalitySet> default_modality_sets();
};

struct RunConfig {
  dataset::CorpusConfig corpus;
  SplitConfig split;
  PreprocessConfig preprocess;
  BenchConfig bench;
  reasoning::FeatureSpace features = reasoning::FeatureSpace::defaults();
  LlmConfig llm;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Every field, defaults included, with keys in canonical (sorted) order.
nlohmann::json to_json(const RunConfig& c);
/// Missing keys keep their defaults; unknown keys throw ConfigError.
RunConfig from_json(const nlohmann::json& j);
RunConfig load(const std::filesystem::path& path);
void save(const RunConfig& c, const std::filesystem::path& path);

enum class Stage { Generate, Split, Preprocess, Bench, LlmExtract, ReasonEval };
std::string_view to_string(Stage s);

/// Hex SHA-256 of the canonical JSON of the sections a stage depends on, so
/// editing a later stage's settings leaves earlier outputs valid.
std::string stage_hash(const RunConfig& c, Stage s);
/// Hash of the whole resolved config.
std::string config_hash(const RunConfig& c);
std::string sha256_hex(std::string_view text);

std::vector<diagnosis::Method> parse_methods(std::string_view csv);
std::vector<diagnosis::Task> parse_tasks(std::string_view csv);
/// Comma-separated modality sets, e.g. "flow,warning,flow+packet".
std::vector<preprocess::ModalitySet> parse_modality_sets(std::string_view csv);

}  // namespace wifidiag::config
