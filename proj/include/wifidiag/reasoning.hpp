#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "wifidiag/core.hpp"
#include "wifidiag/telemetry.hpp"

namespace wifidiag::reasoning {

using telemetry::WarningKind;

/// Ground-truth operational features, one 0/1 entry per dimension.
using Binary = std::vector<int>;
/// Model-generated scores in [0, 1].
using Scores = std::vector<double>;

/// Named operational features plus the warning and fault mapping tables.
struct FeatureSpace {
  std::vector<std::string> names;
  /// Warning kind -> feature indices.
  std::map<WarningKind, std::vector<int>> warning_map;
  /// Fault type -> feature indices. Normal maps to nothing.
  std::map<FaultType, std::vector<int>> fault_map;

  int dim() const { return static_cast<int>(names.size()); }
  /// Throws ConfigError for an unknown name.
  int index_of(std::string_view name) const;
  /// Throws ConfigError on duplicate names, out-of-range indices, or a
  /// missing warning kind or fault entry.
  void validate() const;

  /// The ten-feature default space.
  static const FeatureSpace& defaults();
};

nlohmann::json to_json(const FeatureSpace& space);
/// Mapping tables are written by feature name. Throws ConfigError.
FeatureSpace feature_space_from_json(const nlohmann::json& j);

/// E_data = f(W) OR f(F).
Binary build_ground_truth(const std::vector<telemetry::WarningEvent>& warnings, FaultType fault,
                          const FeatureSpace& space = FeatureSpace::defaults());

/// E_i = 1 iff e_i >= tau_i. Throws ContractError on a size mismatch.
Binary binarize(const Scores& e, const Scores& tau);

struct ExplanationScores {
  double ep = 0.0;
  double er = 0.0;
  double ef1 = 0.0;
};

/// Both sets empty -> (1, 1, 1). Exactly one empty -> the undefined ratio is
/// 0 and EF1 is 0. Throws ContractError on a size mismatch.
ExplanationScores explanation_scores(const Binary& predicted, const Binary& truth);

struct CalibrationPair {
  Scores e;
  Binary truth;
};

struct Calibration {
  Scores tau;
  /// Per-dimension binary F1 at tau.
  std::vector<double> dim_f1;
  /// Micro-averaged EF1 over all (pair, dimension) cells at tau.
  double micro_ef1 = 0.0;
  /// Best micro-EF1 reachable by moving one coordinate to another candidate.
  /// Equal to micro_ef1 when the sweep finds no improvement.
  double sweep_best_micro_ef1 = 0.0;
  int sweep_improvable_dims = 0;
};

/// Threshold candidates for one dimension: 0, every observed score, and 1,
/// sorted ascending without duplicates.
std::vector<double> threshold_candidates(const std::vector<CalibrationPair>& pairs, int dim);

/// Binary F1 of dimension `dim` at threshold `tau`. A dimension with no true
/// and no predicted positives scores 1.
double dimension_f1(const std::vector<CalibrationPair>& pairs, int dim, double tau);
double micro_ef1(const std::vector<CalibrationPair>& pairs, const Scores& tau);

/// Per dimension, the candidate with the highest binary F1; ties go to the
/// largest threshold. Dimensions are searched in parallel. A closing sweep
/// records whether a single-coordinate move would raise micro-EF1, without
/// applying it. Throws ContractError on an empty list or ragged pairs.
Calibration calibrate_thresholds(const std::vector<CalibrationPair>& pairs, int threads = 1);

ExplanationScores mean_scores(const std::vector<ExplanationScores>& rows);

}  // namespace wifidiag::reasoning
