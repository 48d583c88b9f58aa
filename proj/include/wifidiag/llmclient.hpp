#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wifidiag/dataset.hpp"
#include "wifidiag/diagnosis.hpp"
#include "wifidiag/preprocess.hpp"
#include "wifidiag/reasoning.hpp"

namespace wifidiag::llm {

using reasoning::FeatureSpace;
using reasoning::Scores;

/// Version tag of the prompt and answer templates.
inline constexpr std::string_view kPromptVersion = "wifidiag-prompt-1";

enum class ParseStatus { Ok, Repaired, Failed };
std::string_view to_string(ParseStatus s);
ParseStatus parse_status_from_string(std::string_view s);

struct NodePrompt {
  NodeId node = 0;
  std::string text;
};

struct PromptBundle {
  std::string sample_id;
  std::string modalities;
  std::vector<NodePrompt> prompts;
  /// Feature names the answer must score, in order.
  std::vector<std::string> schema;
};

/// Words for a deviation level: "normal", "slightly raised", "reduced", ...
std::string_view level_descriptor(int level);

/// One prompt per node: the deviation levels of the features in `set`, then,
/// when warnings are in `set`, that node's event kinds and counts, then the
/// answer format.
PromptBundle build_prompts(const dataset::Sample& sample, const preprocess::DeviationView& levels,
                           const preprocess::ModalitySet& set, const FeatureSpace& space = FeatureSpace::defaults());

/// `name: score` lines in space order. Scores print in shortest round-trip
/// form, so parsing the text returns the same values.
std::string render_answer(const Scores& scores, const FeatureSpace& space = FeatureSpace::defaults());

struct ParsedFeatures {
  ParseStatus status = ParseStatus::Failed;
  std::optional<Scores> scores;
};

/// Reads `name: value` lines or a flat JSON object. Scores outside [0, 1]
/// are clamped, loosely written names (case, spaces, hyphens) are mapped,
/// and missing names default to 0; each of these marks the result Repaired.
/// No recognizable score at all is Failed.
ParsedFeatures parse_features(std::string_view raw, const FeatureSpace& space = FeatureSpace::defaults());

/// Rule-based stand-in for a text-generation service. Reads the levels and
/// warnings from the prompt and answers in the render_answer format. The
/// noise in [-0.1, 0.1] is seeded by `seed` and the prompt text.
std::string mock_llm(std::string_view prompt, std::uint64_t seed, const FeatureSpace& space = FeatureSpace::defaults());

struct NodeAggregate {
  Scores features;
  NodeId node = 0;
};

/// Elementwise max across nodes; the node with the highest single score
/// wins, ties to the lowest index. Throws ContractError on empty or ragged
/// input.
NodeAggregate aggregate_nodes(const std::vector<Scores>& per_node);

struct EndpointConfig {
  /// "mock" or "http".
  std::string kind = "mock";
  std::string base_url;
  std::string path = "/v1/chat/completions";
  std::string model;
  /// Name of the environment variable holding the bearer token.
  std::string token_env = "WIFIDIAG_LLM_TOKEN";
  double timeout_s = 60.0;
  int max_in_flight = 4;
  /// Extra attempts after a transport failure or a Failed parse.
  int max_retries = 2;
  /// Request starts per second across all workers; 0 disables the limit.
  double requests_per_second = 2.0;
  /// First back-off after a transport failure; doubles per attempt.
  double retry_backoff_s = 0.5;
  /// Seed of the mock's noise.
  std::uint64_t seed = 7;

  void validate() const;
};

nlohmann::json to_json(const EndpointConfig& c);
EndpointConfig endpoint_from_json(const nlohmann::json& j);

/// JSONL audit trail. Appends are serialized across threads.
class AuditLog {
 public:
  explicit AuditLog(std::filesystem::path path);
  void append(const nlohmann::json& entry);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mu_;
};

struct LlmResponse {
  std::string sample_id;
  NodeId node = 0;
  std::string raw;
  ParseStatus status = ParseStatus::Failed;
  std::optional<Scores> parsed;
  int attempts = 0;
};

/// Hex SHA-256 of the prompt text.
std::string prompt_hash(std::string_view prompt);

class Client {
 public:
  /// Sends one request body and returns the response body. Throws
  /// TransportError on failure.
  using Transport = std::function<std::string(const std::string& body)>;

  Client(EndpointConfig config, FeatureSpace space, AuditLog* audit = nullptr);
  /// Replace the HTTP transport, e.g. to record or fake traffic.
  void set_transport(Transport transport) { transport_ = std::move(transport); }

  /// One response per prompt, in prompt order. Exhausted retries leave that
  /// node Failed; the other nodes are still answered.
  std::vector<LlmResponse> query(const PromptBundle& bundle);

  /// Chat-completion request body for one prompt.
  std::string request_body(const std::string& prompt) const;
  /// Text of the first candidate. Throws TransportError on a malformed body.
  static std::string response_text(const std::string& body);

 private:
  LlmResponse ask(const std::string& sample_id, const NodePrompt& prompt);
  void throttle();

  EndpointConfig config_;
  FeatureSpace space_;
  AuditLog* audit_;
  Transport transport_;
  std::mutex rate_mu_;
  double next_slot_s_ = 0.0;
};

/// Stratified by fault type: round(fraction * N) ids, split across strata by
/// largest remainder, drawn with `seed`. Returned in id order.
std::vector<std::string> distill_subset(const dataset::CorpusManifest& manifest, double fraction, std::uint64_t seed);

struct DistillResult {
  diagnosis::ResultsRecord record;
  std::vector<std::string> test_ids;
  std::vector<int> predicted;
};

/// Train `method` on the subset's training portion (features -> fault class)
/// and score classification on its test portion. Classes absent from the
/// training portion are dropped from the label space. Throws ConfigError on
/// an empty subset or an empty portion.
DistillResult distill(const std::vector<std::string>& subset, const std::map<std::string, Scores>& features,
                      const std::map<std::string, dataset::Labels>& labels, const dataset::Split& split,
                      diagnosis::Method method, const diagnosis::Hyper& hyper, const std::string& modalities);

}  // namespace wifidiag::llm
