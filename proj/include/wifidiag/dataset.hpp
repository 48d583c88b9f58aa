#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wifidiag/core.hpp"
#include "wifidiag/sim.hpp"
#include "wifidiag/telemetry.hpp"

namespace wifidiag::dataset {

namespace fs = std::filesystem;

struct Labels {
  bool fault_present = false;
  FaultType fault_type = FaultType::Normal;
  std::optional<NodeId> fault_node;

  /// Throws ContractError unless present <=> type != Normal <=> node set.
  void validate(int n_nodes) const;
  friend bool operator==(const Labels&, const Labels&) = default;
};

Labels labels_for(const FaultSpec& spec);

struct Sample {
  std::string id;
  Scenario scenario = Scenario::IotApSta;
  std::uint64_t seed = 0;
  int n_nodes = 0;
  WindowSchedule schedule;
  FaultSpec fault;
  telemetry::TelemetryBundle bundle;
  Labels labels;
  /// permutation[original] = published node index.
  std::vector<NodeId> permutation;

  int ticks() const { return schedule.ticks(); }
  void validate() const;
  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Relabel every node reference by `pi` (pi[old] = new). The recorded
/// permutation is composed with pi.
Sample permute(Sample sample, const std::vector<NodeId>& pi);
std::vector<NodeId> invert(const std::vector<NodeId>& pi);
/// Draw a uniform permutation and apply it.
Sample anonymize(Sample sample, Rng& rng);

struct CorpusConfig {
  std::map<Scenario, int> counts = {{Scenario::H2hApSta, 400}, {Scenario::IotApSta, 400}, {Scenario::IotAdHoc, 400}};
  std::map<Scenario, int> n_nodes = {{Scenario::H2hApSta, 7}, {Scenario::IotApSta, 7}, {Scenario::IotAdHoc, 7}};
  double normal_fraction = 0.5;
  double missing_rate = 0.1;
  std::uint64_t base_seed = 20240601;
  bool anonymize = true;
  WindowSchedule schedule;
  TopologyConfig topology;
  TrafficConfig traffic;
  SeverityConfig severities;
  sim::ChannelConfig channel;
  telemetry::TelemetryConfig telemetry;

  int total() const;
  void validate() const;
};

struct PlannedSample {
  int index = 0;
  Scenario scenario = Scenario::IotApSta;
  FaultType fault = FaultType::Normal;
};

/// Label and scenario assignment for every index. The first
/// round(N * normal_fraction) labels are Normal, the rest cycle through the
/// injectable faults; the label list is then shuffled from base_seed.
std::vector<PlannedSample> plan_corpus(const CorpusConfig& config);

std::string sample_id(int index);

/// Simulate, observe, corrupt and anonymize one planned sample.
Sample build_sample(const PlannedSample& plan, const CorpusConfig& config);

struct ManifestEntry {
  std::string id;
  Scenario scenario = Scenario::IotApSta;
  FaultType fault_type = FaultType::Normal;
  std::optional<NodeId> fault_node;
  int n_nodes = 0;
  std::vector<telemetry::Modality> modalities;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct CorpusManifest {
  std::string config_hash;
  std::map<std::string, int> counts_per_scenario;
  std::map<std::string, int> counts_per_fault;
  int incomplete_count = 0;
  std::vector<ManifestEntry> samples;
  friend bool operator==(const CorpusManifest&, const CorpusManifest&) = default;
};

CorpusManifest summarize(const std::vector<ManifestEntry>& entries, const std::string& config_hash);
ManifestEntry entry_for(const Sample& s);

/// Writes <out>/samples/<id>/... and <out>/manifest.json.
CorpusManifest generate_corpus(const CorpusConfig& config, const fs::path& out_dir, const std::string& config_hash,
                               int threads = 1);

void save_sample(const Sample& sample, const fs::path& dir);
Sample load_sample(const fs::path& dir);
fs::path sample_dir(const fs::path& corpus_dir, const std::string& id);

void save_manifest(const CorpusManifest& manifest, const fs::path& corpus_dir);
CorpusManifest load_manifest(const fs::path& corpus_dir);

struct Split {
  std::string config_hash;
  std::uint64_t seed = 0;
  double ratio = 0.8;
  std::vector<std::string> train;
  std::vector<std::string> test;
  friend bool operator==(const Split&, const Split&) = default;
};

/// Stratified by fault type. Per-stratum train counts are within one sample
/// of ratio * n and the total equals round(ratio * N).
Split split(const CorpusManifest& manifest, double ratio, std::uint64_t seed);
void save_split(const Split& s, const fs::path& corpus_dir);
Split load_split(const fs::path& corpus_dir);

}  // namespace wifidiag::dataset
