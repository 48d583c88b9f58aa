#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "wifidiag/dataset.hpp"
#include "wifidiag/telemetry.hpp"

namespace wifidiag::preprocess {

using telemetry::Modality;

/// Sorted, duplicate-free, non-empty set of modalities.
using ModalitySet = std::vector<Modality>;

/// Parses "flow", "flow+packet", ... Throws ConfigError on unknown or empty.
ModalitySet parse_modality_set(std::string_view text);
std::string to_string(const ModalitySet& set);

/// Per-node feature names of one modality (window aggregates and per-tick
/// sequences share the inventory).
const std::vector<std::string>& feature_names(Modality m);
int feature_count(Modality m);

/// Window-mean raw features, [node][feature], for the modalities present in
/// the sample. Throughput, rate and byte features are log1p-compressed.
struct RawNodeFeatures {
  std::string id;
  int n_nodes = 0;
  std::map<Modality, std::vector<std::vector<double>>> values;

  bool has(Modality m) const { return values.contains(m); }
};

RawNodeFeatures extract_raw(const dataset::Sample& sample);

struct FeatureStats {
  double min = 0.0;
  double max = 0.0;
  /// Mean and standard deviation over normal training samples.
  double mean = 0.0;
  double stddev = 0.0;
  friend bool operator==(const FeatureStats&, const FeatureStats&) = default;
};

struct NormStats {
  int n_nodes = 0;
  int sequence_length = 0;
  std::map<Modality, std::vector<FeatureStats>> window;
  /// Per-tick min/max for the sequence view.
  std::map<Modality, std::vector<FeatureStats>> tick;
  friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// Min-max bounds pool every node of every training sample, per feature, so
/// the transform commutes with node relabeling. Throws ConfigError with
/// fewer than two samples.
NormStats fit_normalizer(const std::vector<RawNodeFeatures>& train, const std::vector<bool>& is_normal,
                         const std::vector<dataset::Sample>* sequences = nullptr);

/// Clamped min-max scaling; a constant feature maps to 0.5.
double min_max(double value, const FeatureStats& s);

struct FeatureMatrixView {
  std::string id;
  std::vector<double> values;
  friend bool operator==(const FeatureMatrixView&, const FeatureMatrixView&) = default;
};

/// Column names: node-major blocks per modality, then one mask column per
/// modality.
std::vector<std::string> feature_columns(const ModalitySet& set, int n_nodes);
FeatureMatrixView aggregate_features(const RawNodeFeatures& raw, const NormStats& norm, const ModalitySet& set);
FeatureMatrixView aggregate_features(const dataset::Sample& sample, const NormStats& norm, const ModalitySet& set);

struct SequenceView {
  std::string id;
  int length = 0;
  int n_nodes = 0;
  int n_features = 0;
  /// Row-major [tick][node][feature].
  std::vector<double> data;
  /// 1 for observed ticks, 0 for padding.
  std::vector<int> mask;
  std::vector<Modality> present;

  double at(int t, int node, int f) const {
    return data[(static_cast<std::size_t>(t) * n_nodes + node) * n_features + f];
  }
};

/// Per-tick node features for `set`, truncated or zero-padded to `length`.
SequenceView to_sequence(const dataset::Sample& sample, int length, const NormStats& norm, const ModalitySet& set);
/// Per-tick raw features before scaling, [tick][node][feature].
std::vector<std::vector<std::vector<double>>> raw_sequence(const dataset::Sample& sample, Modality m);

/// Corpus mean tick count rounded to a multiple of 10.
int default_sequence_length(const std::vector<int>& tick_counts);

/// 0 iff |z| < 1, +-1 iff 1 <= |z| < 2, +-2 iff 2 <= |z| < 3, +-3 otherwise.
int level_for(double z);
/// z-score level with the degenerate rule for zero spread.
int deviation_level(double value, const FeatureStats& s);

struct DeviationView {
  std::string id;
  /// Per node: "modality.feature" -> level in [-3, 3].
  std::vector<std::map<std::string, int>> levels;
};

DeviationView discretize(const RawNodeFeatures& raw, const NormStats& norm);
DeviationView discretize(const dataset::Sample& sample, const NormStats& norm);

void save_norm(const NormStats& norm, const std::filesystem::path& path);
NormStats load_norm(const std::filesystem::path& path);

/// Feature table for one modality set: id, then the view's columns.
void write_feature_csv(const std::filesystem::path& path, const ModalitySet& set, int n_nodes,
                       const std::vector<FeatureMatrixView>& rows);
struct FeatureTable {
  std::vector<std::string> columns;
  std::vector<FeatureMatrixView> rows;
};
FeatureTable read_feature_csv(const std::filesystem::path& path);

}  // namespace wifidiag::preprocess
