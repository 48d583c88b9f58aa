#include "wifidiag/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json_io.hpp"
#include "wifidiag/errors.hpp"

namespace wifidiag::preprocess {

namespace {

using io::json;
using telemetry::WarningKind;

const std::map<Modality, std::vector<std::string>>& inventory() {
  static const std::map<Modality, std::vector<std::string>> names = {
      {Modality::Flow,
       {"tx_throughput", "tx_latency", "tx_jitter", "tx_loss", "rx_throughput", "rx_latency", "rx_jitter", "rx_loss"}},
      {Modality::Packet, {"pkt_size", "iat", "fwd_rate", "bwd_rate", "retx_fraction", "hdr_overhead"}},
      {Modality::Warning,
       {"rate_ConnectivityDegradation", "rate_PacketLoss", "rate_ExcessiveDelay", "rate_ProcessDown",
        "rate_ResourceAnomaly", "rate_Reassociation", "mean_severity"}},
      {Modality::Monitor, {"cpu", "mem", "app_up", "tx_bytes", "rx_bytes", "rssi", "report_ratio"}},
  };
  return names;
}

double lp(double v) { return std::log1p(std::max(0.0, v)); }

struct Accumulator {
  std::vector<double> sum;
  std::vector<double> count;
  explicit Accumulator(std::size_t n) : sum(n, 0.0), count(n, 0.0) {}
  void add(std::size_t i, double v) {
    sum[i] += v;
    count[i] += 1.0;
  }
  double mean(std::size_t i) const { return count[i] > 0 ? sum[i] / count[i] : 0.0; }
};

std::vector<std::vector<double>> flow_window(const telemetry::TelemetryBundle& b, int n) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(n), std::vector<double>(8, 0.0));
  std::vector<Accumulator> acc(static_cast<std::size_t>(n), Accumulator(8));
  for (const auto& r : *b.flow) {
    const auto v = static_cast<std::size_t>(r.reporter());
    const std::size_t off = r.side == telemetry::Side::Sender ? 0 : 4;
    acc[v].add(off + 0, lp(r.throughput_bps));
    acc[v].add(off + 1, lp(r.latency_ms));
    acc[v].add(off + 2, lp(r.jitter_ms));
    acc[v].add(off + 3, r.loss);
  }
  for (std::size_t v = 0; v < out.size(); ++v) {
    for (std::size_t f = 0; f < 8; ++f) out[v][f] = acc[v].mean(f);
  }
  return out;
}

std::vector<double> packet_row(const telemetry::PacketFlowFeatures& r) {
  return {r.mean_pkt_size_bytes, lp(r.mean_iat_ms),  lp(r.mean_fwd_rate_pps),
          lp(r.mean_bwd_rate_pps), r.retx_fraction, r.mean_hdr_overhead};
}

std::vector<std::vector<double>> packet_window(const telemetry::TelemetryBundle& b, int n) {
  std::vector<Accumulator> acc(static_cast<std::size_t>(n), Accumulator(6));
  for (const auto& r : *b.packet) {
    const auto row = packet_row(r);
    // Each endpoint's capture sees the flow.
    for (NodeId v : {r.src, r.dst}) {
      for (std::size_t f = 0; f < 6; ++f) acc[static_cast<std::size_t>(v)].add(f, row[f]);
    }
  }
  std::vector<std::vector<double>> out(static_cast<std::size_t>(n), std::vector<double>(6, 0.0));
  for (std::size_t v = 0; v < out.size(); ++v) {
    for (std::size_t f = 0; f < 6; ++f) out[v][f] = acc[v].mean(f);
  }
  return out;
}

std::vector<std::vector<double>> warning_window(const telemetry::TelemetryBundle& b, int n, int ticks) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(n), std::vector<double>(7, 0.0));
  std::vector<double> sev(static_cast<std::size_t>(n), 0.0), count(static_cast<std::size_t>(n), 0.0);
  for (const auto& e : *b.warning) {
    const auto v = static_cast<std::size_t>(e.node);
    out[v][static_cast<std::size_t>(e.kind)] += 1.0 / ticks;
    sev[v] += e.severity;
    count[v] += 1.0;
  }
  for (std::size_t v = 0; v < out.size(); ++v) out[v][6] = count[v] > 0 ? sev[v] / count[v] : 0.0;
  return out;
}

std::vector<std::vector<double>> monitor_window(const telemetry::TelemetryBundle& b, int n) {
  std::vector<Accumulator> acc(static_cast<std::size_t>(n), Accumulator(6));
  std::set<int> stamps;
  std::vector<double> reports(static_cast<std::size_t>(n), 0.0);
  for (const auto& r : *b.monitor) {
    const auto v = static_cast<std::size_t>(r.node);
    acc[v].add(0, r.cpu_pct);
    acc[v].add(1, r.mem_pct);
    acc[v].add(2, r.app_process_up ? 1.0 : 0.0);
    acc[v].add(3, lp(static_cast<double>(r.tx_bytes)));
    acc[v].add(4, lp(static_cast<double>(r.rx_bytes)));
    acc[v].add(5, r.rssi_dbm);
    reports[v] += 1.0;
    stamps.insert(r.t_s);
  }
  std::vector<std::vector<double>> out(static_cast<std::size_t>(n), std::vector<double>(7, 0.0));
  for (std::size_t v = 0; v < out.size(); ++v) {
    for (std::size_t f = 0; f < 6; ++f) out[v][f] = acc[v].mean(f);
    out[v][6] = stamps.empty() ? 0.0 : reports[v] / static_cast<double>(stamps.size());
  }
  return out;
}

void check_set(const ModalitySet& set) {
  if (set.empty()) throw ConfigError("modality set is empty");
  for (std::size_t i = 1; i < set.size(); ++i) {
    if (!(set[i - 1] < set[i])) throw ConfigError("modality set must be sorted and unique");
  }
}

FeatureStats pooled(const std::vector<double>& all, const std::vector<double>& normal) {
  FeatureStats s;
  if (!all.empty()) {
    auto [lo, hi] = std::minmax_element(all.begin(), all.end());
    s.min = *lo;
    s.max = *hi;
  }
  if (!normal.empty()) {
    double sum = 0.0;
    for (double x : normal) sum += x;
    s.mean = sum / static_cast<double>(normal.size());
    double ss = 0.0;
    for (double x : normal) ss += (x - s.mean) * (x - s.mean);
    s.stddev = normal.size() > 1 ? std::sqrt(ss / static_cast<double>(normal.size() - 1)) : 0.0;
  }
  return s;
}

json stats_json(const std::map<Modality, std::vector<FeatureStats>>& stats) {
  json j = json::object();
  for (const auto& [m, v] : stats) {
    json arr = json::array();
    const auto& names = feature_names(m);
    for (std::size_t f = 0; f < v.size(); ++f) {
      arr.push_back({{"feature", names[f]},
                     {"min", v[f].min},
                     {"max", v[f].max},
                     {"mean", v[f].mean},
                     {"stddev", v[f].stddev}});
    }
    j[std::string(telemetry::to_string(m))] = arr;
  }
  return j;
}

std::map<Modality, std::vector<FeatureStats>> stats_from_json(const json& j) {
  std::map<Modality, std::vector<FeatureStats>> out;
  for (const auto& [name, arr] : j.items()) {
    auto& v = out[telemetry::modality_from_string(name)];
    for (const auto& e : arr) {
      v.push_back({e.at("min").get<double>(), e.at("max").get<double>(), e.at("mean").get<double>(),
                   e.at("stddev").get<double>()});
    }
  }
  return out;
}

}  // namespace

ModalitySet parse_modality_set(std::string_view text) {
  ModalitySet set;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('+', start);
    const auto part = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    set.push_back(telemetry::modality_from_string(part));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  std::sort(set.begin(), set.end());
  if (std::adjacent_find(set.begin(), set.end()) != set.end())
    throw ConfigError("modality repeated in '" + std::string(text) + "'");
  return set;
}

std::string to_string(const ModalitySet& set) {
  std::string out;
  for (auto m : set) {
    if (!out.empty()) out += '+';
    out += telemetry::to_string(m);
  }
  return out;
}

const std::vector<std::string>& feature_names(Modality m) { return inventory().at(m); }
int feature_count(Modality m) { return static_cast<int>(feature_names(m).size()); }

RawNodeFeatures extract_raw(const dataset::Sample& s) {
  RawNodeFeatures raw;
  raw.id = s.id;
  raw.n_nodes = s.n_nodes;
  const auto& b = s.bundle;
  if (b.flow) raw.values[Modality::Flow] = flow_window(b, s.n_nodes);
  if (b.packet) raw.values[Modality::Packet] = packet_window(b, s.n_nodes);
  if (b.warning) raw.values[Modality::Warning] = warning_window(b, s.n_nodes, s.ticks());
  if (b.monitor) raw.values[Modality::Monitor] = monitor_window(b, s.n_nodes);
  return raw;
}

std::vector<std::vector<std::vector<double>>> raw_sequence(const dataset::Sample& s, Modality m) {
  const int ticks = s.ticks();
  const auto n = static_cast<std::size_t>(s.n_nodes);
  const auto nf = static_cast<std::size_t>(feature_count(m));
  std::vector<std::vector<std::vector<double>>> out(static_cast<std::size_t>(ticks),
                                                    std::vector<std::vector<double>>(n, std::vector<double>(nf, 0.0)));
  const auto& b = s.bundle;
  auto tick_of = [&](int t_s) {
    return std::clamp(static_cast<int>(std::lround(t_s / s.schedule.tick_s)), 0, ticks - 1);
  };
  switch (m) {
    case Modality::Flow: {
      if (!b.flow) break;
      std::vector<std::vector<Accumulator>> acc(static_cast<std::size_t>(ticks), std::vector<Accumulator>(n, Accumulator(8)));
      for (const auto& r : *b.flow) {
        auto& a = acc[static_cast<std::size_t>(tick_of(r.t_s))][static_cast<std::size_t>(r.reporter())];
        const std::size_t off = r.side == telemetry::Side::Sender ? 0 : 4;
        a.add(off + 0, lp(r.throughput_bps));
        a.add(off + 1, lp(r.latency_ms));
        a.add(off + 2, lp(r.jitter_ms));
        a.add(off + 3, r.loss);
      }
      for (std::size_t t = 0; t < out.size(); ++t) {
        for (std::size_t v = 0; v < n; ++v) {
          for (std::size_t f = 0; f < 8; ++f) out[t][v][f] = acc[t][v].mean(f);
        }
      }
      break;
    }
    case Modality::Packet: {
      if (!b.packet) break;
      // Segment statistics hold for every tick of their segment.
      std::vector<int> starts;
      for (const auto& r : *b.packet) starts.push_back(tick_of(r.t_s));
      std::sort(starts.begin(), starts.end());
      starts.erase(std::unique(starts.begin(), starts.end()), starts.end());
      for (std::size_t si = 0; si < starts.size(); ++si) {
        const int from = starts[si];
        const int to = si + 1 < starts.size() ? starts[si + 1] : ticks;
        std::vector<Accumulator> acc(n, Accumulator(6));
        for (const auto& r : *b.packet) {
          if (tick_of(r.t_s) != from) continue;
          const auto row = packet_row(r);
          // Each endpoint's capture sees the flow.
          for (NodeId v : {r.src, r.dst}) {
            for (std::size_t f = 0; f < 6; ++f) acc[static_cast<std::size_t>(v)].add(f, row[f]);
          }
        }
        for (int t = from; t < to; ++t) {
          for (std::size_t v = 0; v < n; ++v) {
            for (std::size_t f = 0; f < 6; ++f) out[static_cast<std::size_t>(t)][v][f] = acc[v].mean(f);
          }
        }
      }
      break;
    }
    case Modality::Warning: {
      if (!b.warning) break;
      std::vector<std::vector<double>> count(static_cast<std::size_t>(ticks), std::vector<double>(n, 0.0));
      for (const auto& e : *b.warning) {
        const auto t = static_cast<std::size_t>(tick_of(e.t_s));
        const auto v = static_cast<std::size_t>(e.node);
        auto& row = out[t][v];
        row[static_cast<std::size_t>(e.kind)] = std::max(row[static_cast<std::size_t>(e.kind)], e.severity);
        row[6] += e.severity;
        count[t][v] += 1.0;
      }
      for (std::size_t t = 0; t < out.size(); ++t) {
        for (std::size_t v = 0; v < n; ++v) {
          if (count[t][v] > 0) out[t][v][6] /= count[t][v];
        }
      }
      break;
    }
    case Modality::Monitor: {
      if (!b.monitor) break;
      // Hold the latest report; report_ratio marks a report at this tick.
      std::vector<std::vector<double>> last(n, std::vector<double>(7, 0.0));
      std::size_t k = 0;
      const auto& recs = *b.monitor;
      for (int t = 0; t < ticks; ++t) {
        for (auto& row : last) row[6] = 0.0;
        while (k < recs.size() && tick_of(recs[k].t_s) <= t) {
          const auto& r = recs[k++];
          last[static_cast<std::size_t>(r.node)] = {r.cpu_pct,
                                                    r.mem_pct,
                                                    r.app_process_up ? 1.0 : 0.0,
                                                    lp(static_cast<double>(r.tx_bytes)),
                                                    lp(static_cast<double>(r.rx_bytes)),
                                                    r.rssi_dbm,
                                                    1.0};
        }
        out[static_cast<std::size_t>(t)] = last;
      }
      break;
    }
  }
  return out;
}

NormStats fit_normalizer(const std::vector<RawNodeFeatures>& train, const std::vector<bool>& is_normal,
                         const std::vector<dataset::Sample>* sequences) {
  if (train.size() < 2) throw ConfigError("fit_normalizer needs at least 2 training samples");
  if (is_normal.size() != train.size()) throw ContractError("is_normal size mismatch");
  NormStats norm;
  for (const auto& r : train) norm.n_nodes = std::max(norm.n_nodes, r.n_nodes);
  for (Modality m : telemetry::kAllModalities) {
    const auto nf = static_cast<std::size_t>(feature_count(m));
    std::vector<std::vector<double>> all(nf), normal(nf);
    for (std::size_t i = 0; i < train.size(); ++i) {
      auto it = train[i].values.find(m);
      if (it == train[i].values.end()) continue;
      for (const auto& node : it->second) {
        for (std::size_t f = 0; f < nf; ++f) {
          all[f].push_back(node[f]);
          if (is_normal[i]) normal[f].push_back(node[f]);
        }
      }
    }
    auto& stats = norm.window[m];
    for (std::size_t f = 0; f < nf; ++f) stats.push_back(pooled(all[f], normal[f]));
  }
  if (sequences) {
    std::vector<int> ticks;
    for (const auto& s : *sequences) ticks.push_back(s.ticks());
    norm.sequence_length = default_sequence_length(ticks);
    for (Modality m : telemetry::kAllModalities) {
      const auto nf = static_cast<std::size_t>(feature_count(m));
      std::vector<FeatureStats> stats(nf);
      std::vector<bool> seen(nf, false);
      for (const auto& s : *sequences) {
        if (!s.bundle.has(m)) continue;
        for (const auto& tick : raw_sequence(s, m)) {
          for (const auto& node : tick) {
            for (std::size_t f = 0; f < nf; ++f) {
              if (!seen[f]) {
                stats[f].min = stats[f].max = node[f];
                seen[f] = true;
              }
              stats[f].min = std::min(stats[f].min, node[f]);
              stats[f].max = std::max(stats[f].max, node[f]);
            }
          }
        }
      }
      norm.tick[m] = stats;
    }
  }
  return norm;
}

double min_max(double value, const FeatureStats& s) {
  if (!(s.max > s.min)) return 0.5;
  return std::clamp((value - s.min) / (s.max - s.min), 0.0, 1.0);
}

std::vector<std::string> feature_columns(const ModalitySet& set, int n_nodes) {
  check_set(set);
  std::vector<std::string> cols;
  for (Modality m : set) {
    for (int v = 0; v < n_nodes; ++v) {
      for (const auto& f : feature_names(m)) cols.push_back(fmt::format("n{}.{}.{}", v, telemetry::to_string(m), f));
    }
  }
  for (Modality m : set) cols.push_back(fmt::format("mask.{}", telemetry::to_string(m)));
  return cols;
}

FeatureMatrixView aggregate_features(const RawNodeFeatures& raw, const NormStats& norm, const ModalitySet& set) {
  check_set(set);
  FeatureMatrixView view;
  view.id = raw.id;
  for (Modality m : set) {
    const auto nf = static_cast<std::size_t>(feature_count(m));
    const auto& stats = norm.window.at(m);
    auto it = raw.values.find(m);
    for (int v = 0; v < norm.n_nodes; ++v) {
      for (std::size_t f = 0; f < nf; ++f) {
        const bool observed = it != raw.values.end() && v < raw.n_nodes;
        view.values.push_back(observed ? min_max(it->second[static_cast<std::size_t>(v)][f], stats[f]) : 0.0);
      }
    }
  }
  for (Modality m : set) view.values.push_back(raw.has(m) ? 1.0 : 0.0);
  return view;
}

FeatureMatrixView aggregate_features(const dataset::Sample& sample, const NormStats& norm, const ModalitySet& set) {
  return aggregate_features(extract_raw(sample), norm, set);
}

SequenceView to_sequence(const dataset::Sample& sample, int length, const NormStats& norm, const ModalitySet& set) {
  check_set(set);
  if (length <= 0) throw ConfigError("sequence length must be positive");
  SequenceView view;
  view.id = sample.id;
  view.length = length;
  view.n_nodes = norm.n_nodes;
  for (Modality m : set) view.n_features += feature_count(m);
  view.present = sample.bundle.present();
  view.data.assign(static_cast<std::size_t>(length) * view.n_nodes * view.n_features, 0.0);
  view.mask.assign(static_cast<std::size_t>(length), 0);
  const int observed = std::min(length, sample.ticks());
  for (int t = 0; t < observed; ++t) view.mask[static_cast<std::size_t>(t)] = 1;
  int offset = 0;
  for (Modality m : set) {
    const int nf = feature_count(m);
    if (sample.bundle.has(m)) {
      const auto seq = raw_sequence(sample, m);
      const auto& stats = norm.tick.at(m);
      for (int t = 0; t < observed; ++t) {
        for (int v = 0; v < std::min(sample.n_nodes, view.n_nodes); ++v) {
          for (int f = 0; f < nf; ++f) {
            const auto idx = (static_cast<std::size_t>(t) * view.n_nodes + v) * view.n_features + offset + f;
            view.data[idx] = min_max(seq[static_cast<std::size_t>(t)][static_cast<std::size_t>(v)][static_cast<std::size_t>(f)],
                                     stats[static_cast<std::size_t>(f)]);
          }
        }
      }
    }
    offset += nf;
  }
  return view;
}

int default_sequence_length(const std::vector<int>& tick_counts) {
  if (tick_counts.empty()) throw ConfigError("no samples to size sequences from");
  double sum = 0.0;
  for (int t : tick_counts) sum += t;
  const double mean = sum / static_cast<double>(tick_counts.size());
  return std::max(10, static_cast<int>(std::lround(mean / 10.0)) * 10);
}

int level_for(double z) {
  const double a = std::abs(z);
  const int mag = a < 1.0 ? 0 : a < 2.0 ? 1 : a < 3.0 ? 2 : 3;
  return z < 0 ? -mag : mag;
}

int deviation_level(double value, const FeatureStats& s) {
  if (!(s.stddev > 0.0)) {
    if (value == s.mean) return 0;
    return value > s.mean ? 3 : -3;
  }
  return level_for((value - s.mean) / s.stddev);
}

DeviationView discretize(const RawNodeFeatures& raw, const NormStats& norm) {
  DeviationView view;
  view.id = raw.id;
  view.levels.resize(static_cast<std::size_t>(raw.n_nodes));
  for (const auto& [m, nodes] : raw.values) {
    const auto& names = feature_names(m);
    const auto& stats = norm.window.at(m);
    for (std::size_t v = 0; v < nodes.size(); ++v) {
      for (std::size_t f = 0; f < names.size(); ++f) {
        view.levels[v][fmt::format("{}.{}", telemetry::to_string(m), names[f])] = deviation_level(nodes[v][f], stats[f]);
      }
    }
  }
  return view;
}

DeviationView discretize(const dataset::Sample& sample, const NormStats& norm) {
  return discretize(extract_raw(sample), norm);
}

void save_norm(const NormStats& norm, const std::filesystem::path& path) {
  json j = {{"n_nodes", norm.n_nodes},
            {"sequence_length", norm.sequence_length},
            {"window", stats_json(norm.window)},
            {"tick", stats_json(norm.tick)}};
  io::write_json(path, j);
}

NormStats load_norm(const std::filesystem::path& path) {
  const json j = io::read_json(path);
  const std::string w = path.string();
  NormStats n;
  n.n_nodes = io::field<int>(j, "n_nodes", w);
  n.sequence_length = io::field<int>(j, "sequence_length", w);
  n.window = stats_from_json(j.at("window"));
  n.tick = stats_from_json(j.at("tick"));
  return n;
}

void write_feature_csv(const std::filesystem::path& path, const ModalitySet& set, int n_nodes,
                       const std::vector<FeatureMatrixView>& rows) {
  const auto cols = feature_columns(set, n_nodes);
  std::string text = "id";
  for (const auto& c : cols) text += "," + c;
  text += '\n';
  for (const auto& r : rows) {
    if (r.values.size() != cols.size()) throw ContractError("feature row width does not match its columns");
    text += r.id;
    for (double v : r.values) text += fmt::format(",{}", v);
    text += '\n';
  }
  io::write_text(path, text);
}

FeatureTable read_feature_csv(const std::filesystem::path& path) {
  const std::string text = io::read_text(path);
  std::istringstream in(text);
  std::string line;
  FeatureTable table;
  auto split_line = [](const std::string& l) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
      const auto end = l.find(',', start);
      parts.push_back(l.substr(start, end == std::string::npos ? std::string::npos : end - start));
      if (end == std::string::npos) break;
      start = end + 1;
    }
    return parts;
  };
  if (!std::getline(in, line)) throw ContractError(path.string() + ": empty feature table");
  auto header = split_line(line);
  if (header.empty() || header.front() != "id") throw ContractError(path.string() + ": first column must be 'id'");
  table.columns.assign(header.begin() + 1, header.end());
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto parts = split_line(line);
    if (parts.size() != header.size())
      throw ContractError(fmt::format("{}:{}: expected {} fields, got {}", path.string(), lineno, header.size(), parts.size()));
    FeatureMatrixView row;
    row.id = parts[0];
    row.values.reserve(parts.size() - 1);
    for (std::size_t i = 1; i < parts.size(); ++i) row.values.push_back(std::stod(parts[i]));
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace wifidiag::preprocess
