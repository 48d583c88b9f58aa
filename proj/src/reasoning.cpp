#include "wifidiag/reasoning.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "parallel.hpp"
#include "wifidiag/errors.hpp"

namespace wifidiag::reasoning {

using nlohmann::json;

namespace {

FeatureSpace make_defaults() {
  FeatureSpace s;
  s.names = {"connectivity_loss",       "signal_degradation",  "elevated_packet_loss", "elevated_latency",
             "elevated_jitter",         "throughput_degradation", "excessive_retransmissions",
             "queue_saturation",        "application_failure", "resource_exhaustion"};
  auto ix = [&](std::initializer_list<std::string_view> names) {
    std::vector<int> out;
    for (auto n : names) out.push_back(s.index_of(n));
    return out;
  };
  s.warning_map = {
      {WarningKind::ConnectivityDegradation, ix({"connectivity_loss"})},
      {WarningKind::PacketLoss, ix({"elevated_packet_loss"})},
      {WarningKind::ExcessiveDelay, ix({"elevated_latency"})},
      {WarningKind::ProcessDown, ix({"application_failure"})},
      {WarningKind::ResourceAnomaly, ix({"resource_exhaustion"})},
      {WarningKind::Reassociation, ix({"connectivity_loss"})},
  };
  s.fault_map = {
      {FaultType::NodeCrash, ix({"connectivity_loss", "throughput_degradation"})},
      {FaultType::PoorLinkQuality,
       ix({"signal_degradation", "elevated_packet_loss", "elevated_jitter", "throughput_degradation"})},
      {FaultType::AppCrash, ix({"application_failure", "throughput_degradation"})},
      {FaultType::AppSlowdown, ix({"application_failure", "elevated_latency"})},
      {FaultType::TrafficOverload, ix({"resource_exhaustion", "elevated_latency", "elevated_packet_loss"})},
      {FaultType::HiddenNode, ix({"elevated_packet_loss", "excessive_retransmissions", "elevated_latency"})},
      {FaultType::RateAdaptationFailure, ix({"throughput_degradation", "excessive_retransmissions"})},
      {FaultType::ProbeFailure, ix({"connectivity_loss"})},
      {FaultType::BeaconLoss, ix({"connectivity_loss"})},
      {FaultType::BufferBloat, ix({"elevated_latency", "queue_saturation"})},
      {FaultType::QueueOverflow, ix({"elevated_packet_loss", "queue_saturation"})},
      {FaultType::Normal, {}},
  };
  s.validate();
  return s;
}

void check_sizes(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw ContractError(std::string(what) + ": dimension mismatch");
}

struct Counts {
  long tp = 0;
  long fp = 0;
  long fn = 0;
};

double f1_of(const Counts& c) {
  if (c.tp + c.fp + c.fn == 0) return 1.0;
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
}

Counts dimension_counts(const std::vector<CalibrationPair>& pairs, int dim, double tau) {
  Counts c;
  const auto d = static_cast<std::size_t>(dim);
  for (const auto& p : pairs) {
    const bool pred = p.e[d] >= tau;
    const bool truth = p.truth[d] != 0;
    c.tp += pred && truth;
    c.fp += pred && !truth;
    c.fn += !pred && truth;
  }
  return c;
}

}  // namespace

int FeatureSpace::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  throw ConfigError("unknown operational feature '" + std::string(name) + "'");
}

void FeatureSpace::validate() const {
  if (names.empty()) throw ConfigError("operational feature space is empty");
  std::set<std::string> seen(names.begin(), names.end());
  if (seen.size() != names.size()) throw ConfigError("duplicate operational feature name");
  auto check = [&](const std::vector<int>& idx, std::string_view key) {
    for (int i : idx) {
      if (i < 0 || i >= dim()) throw ConfigError("feature index out of range in entry '" + std::string(key) + "'");
    }
  };
  for (WarningKind k : telemetry::kAllWarningKinds) {
    auto it = warning_map.find(k);
    if (it == warning_map.end()) throw ConfigError("warning map lacks '" + std::string(telemetry::to_string(k)) + "'");
    check(it->second, telemetry::to_string(k));
  }
  for (const auto& info : kFaultTable) {
    auto it = fault_map.find(info.type);
    if (it == fault_map.end()) throw ConfigError("fault map lacks '" + std::string(info.name) + "'");
    check(it->second, info.name);
  }
}

const FeatureSpace& FeatureSpace::defaults() {
  static const FeatureSpace s = make_defaults();
  return s;
}

json to_json(const FeatureSpace& space) {
  auto names_of = [&](const std::vector<int>& idx) {
    json a = json::array();
    for (int i : idx) a.push_back(space.names[static_cast<std::size_t>(i)]);
    return a;
  };
  json w = json::object();
  for (const auto& [k, idx] : space.warning_map) w[std::string(telemetry::to_string(k))] = names_of(idx);
  json f = json::object();
  for (const auto& [t, idx] : space.fault_map) f[std::string(to_string(t))] = names_of(idx);
  return {{"names", space.names}, {"warning_map", w}, {"fault_map", f}};
}

FeatureSpace feature_space_from_json(const json& j) {
  try {
    FeatureSpace s;
    for (const auto& key : j.items()) {
      if (key.key() != "names" && key.key() != "warning_map" && key.key() != "fault_map") {
        throw ConfigError("features: unknown key '" + key.key() + "'");
      }
    }
    s.names = j.at("names").get<std::vector<std::string>>();
    auto indices = [&](const json& list) {
      std::vector<int> out;
      for (const auto& n : list) out.push_back(s.index_of(n.get<std::string>()));
      return out;
    };
    for (const auto& [k, v] : j.at("warning_map").items()) s.warning_map[telemetry::warning_kind_from_string(k)] = indices(v);
    for (const auto& [k, v] : j.at("fault_map").items()) s.fault_map[fault_type_from_string(k)] = indices(v);
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("features: ") + e.what());
  }
}

Binary build_ground_truth(const std::vector<telemetry::WarningEvent>& warnings, FaultType fault,
                          const FeatureSpace& space) {
  Binary e(static_cast<std::size_t>(space.dim()), 0);
  for (const auto& w : warnings) {
    for (int i : space.warning_map.at(w.kind)) e[static_cast<std::size_t>(i)] = 1;
  }
  for (int i : space.fault_map.at(fault)) e[static_cast<std::size_t>(i)] = 1;
  return e;
}

Binary binarize(const Scores& e, const Scores& tau) {
  check_sizes(e.size(), tau.size(), "binarize");
  Binary out(e.size(), 0);
  for (std::size_t i = 0; i < e.size(); ++i) out[i] = e[i] >= tau[i] ? 1 : 0;
  return out;
}

ExplanationScores explanation_scores(const Binary& predicted, const Binary& truth) {
  check_sizes(predicted.size(), truth.size(), "explanation_scores");
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if ((predicted[i] != 0 && predicted[i] != 1) || (truth[i] != 0 && truth[i] != 1))
      throw ContractError("explanation_scores: entries must be 0 or 1");
  }
  long inter = 0, n_pred = 0, n_truth = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    inter += predicted[i] != 0 && truth[i] != 0;
    n_pred += predicted[i] != 0;
    n_truth += truth[i] != 0;
  }
  if (n_pred == 0 && n_truth == 0) return {1.0, 1.0, 1.0};
  ExplanationScores s;
  s.ep = n_pred > 0 ? static_cast<double>(inter) / static_cast<double>(n_pred) : 0.0;
  s.er = n_truth > 0 ? static_cast<double>(inter) / static_cast<double>(n_truth) : 0.0;
  s.ef1 = s.ep + s.er > 0.0 ? 2.0 * s.ep * s.er / (s.ep + s.er) : 0.0;
  return s;
}

std::vector<double> threshold_candidates(const std::vector<CalibrationPair>& pairs, int dim) {
  std::vector<double> c = {0.0};
  double top = 0.0;
  for (const auto& p : pairs) {
    c.push_back(p.e[static_cast<std::size_t>(dim)]);
    top = std::max(top, c.back());
  }
  // One threshold above every score, so predicting nothing is always reachable.
  c.push_back(top < 1.0 ? 1.0 : std::nextafter(1.0, 2.0));
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return c;
}

double dimension_f1(const std::vector<CalibrationPair>& pairs, int dim, double tau) {
  return f1_of(dimension_counts(pairs, dim, tau));
}

double micro_ef1(const std::vector<CalibrationPair>& pairs, const Scores& tau) {
  Counts total;
  for (std::size_t d = 0; d < tau.size(); ++d) {
    const auto c = dimension_counts(pairs, static_cast<int>(d), tau[d]);
    total.tp += c.tp;
    total.fp += c.fp;
    total.fn += c.fn;
  }
  return f1_of(total);
}

Calibration calibrate_thresholds(const std::vector<CalibrationPair>& pairs, int threads) {
  if (pairs.empty()) throw ContractError("calibrate_thresholds: no pairs");
  const std::size_t d = pairs.front().e.size();
  for (const auto& p : pairs) {
    check_sizes(p.e.size(), d, "calibrate_thresholds");
    check_sizes(p.truth.size(), d, "calibrate_thresholds");
    for (double v : p.e) {
      if (!(v >= 0.0 && v <= 1.0)) throw ContractError("calibrate_thresholds: score outside [0, 1]");
    }
  }

  Calibration out;
  out.tau.assign(d, 0.0);
  out.dim_f1.assign(d, 0.0);
  std::vector<std::vector<double>> candidates(d);
  parallel_for(d, threads, [&](std::size_t i) {
    candidates[i] = threshold_candidates(pairs, static_cast<int>(i));
    double best = -1.0;
    // Ascending scan with >= keeps the largest threshold among ties.
    for (double t : candidates[i]) {
      const double f = dimension_f1(pairs, static_cast<int>(i), t);
      if (f >= best) {
        best = f;
        out.tau[i] = t;
      }
    }
    out.dim_f1[i] = best;
  });

  out.micro_ef1 = micro_ef1(pairs, out.tau);
  out.sweep_best_micro_ef1 = out.micro_ef1;
  for (std::size_t i = 0; i < d; ++i) {
    Scores probe = out.tau;
    bool improvable = false;
    for (double t : candidates[i]) {
      probe[i] = t;
      const double m = micro_ef1(pairs, probe);
      if (m > out.micro_ef1 + 1e-12) improvable = true;
      out.sweep_best_micro_ef1 = std::max(out.sweep_best_micro_ef1, m);
    }
    out.sweep_improvable_dims += improvable;
  }
  return out;
}

ExplanationScores mean_scores(const std::vector<ExplanationScores>& rows) {
  ExplanationScores m;
  if (rows.empty()) return m;
  for (const auto& r : rows) {
    m.ep += r.ep;
    m.er += r.er;
    m.ef1 += r.ef1;
  }
  const auto n = static_cast<double>(rows.size());
  return {m.ep / n, m.er / n, m.ef1 / n};
}

}  // namespace wifidiag::reasoning
