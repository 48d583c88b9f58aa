#include "wifidiag/telemetry.hpp"

#include <algorithm>
#include <cmath>

#include "wifidiag/errors.hpp"

namespace wifidiag::telemetry {

namespace {

constexpr std::array<std::string_view, 4> kModalityNames = {"flow", "packet", "warning", "monitor"};
constexpr std::array<std::string_view, kWarningKindCount> kWarningNames = {
    "ConnectivityDegradation", "PacketLoss", "ExcessiveDelay", "ProcessDown", "ResourceAnomaly", "Reassociation"};

constexpr double kAckBytes = 64.0;
// Connection attempts toward an unreachable peer: one small segment per tick.
constexpr double kRetryPps = 1.0;
constexpr double kControlBytes = 60.0;

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

std::string_view to_string(Modality m) { return kModalityNames[static_cast<std::size_t>(m)]; }

Modality modality_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kModalityNames.size(); ++i) {
    if (kModalityNames[i] == s) return static_cast<Modality>(i);
  }
  throw ConfigError("unknown modality: '" + std::string(s) + "'");
}

std::string_view to_string(Side s) { return s == Side::Sender ? "Sender" : "Receiver"; }

Side side_from_string(std::string_view s) {
  if (s == "Sender") return Side::Sender;
  if (s == "Receiver") return Side::Receiver;
  throw ContractError("unknown flow record side: '" + std::string(s) + "'");
}

std::string_view to_string(WarningKind k) { return kWarningNames[static_cast<std::size_t>(k)]; }

WarningKind warning_kind_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kWarningNames.size(); ++i) {
    if (kWarningNames[i] == s) return static_cast<WarningKind>(i);
  }
  throw ContractError("unknown warning kind: '" + std::string(s) + "'");
}

bool TelemetryBundle::has(Modality m) const {
  switch (m) {
    case Modality::Flow: return flow.has_value();
    case Modality::Packet: return packet.has_value();
    case Modality::Warning: return warning.has_value();
    case Modality::Monitor: return monitor.has_value();
  }
  return false;
}

void TelemetryBundle::drop(Modality m) {
  switch (m) {
    case Modality::Flow: flow.reset(); break;
    case Modality::Packet: packet.reset(); break;
    case Modality::Warning: warning.reset(); break;
    case Modality::Monitor: monitor.reset(); break;
  }
}

std::vector<Modality> TelemetryBundle::present() const {
  std::vector<Modality> out;
  for (Modality m : kAllModalities) {
    if (has(m)) out.push_back(m);
  }
  return out;
}

void TelemetryBundle::validate(int duration_s) const {
  if (present().empty()) throw ContractError("telemetry bundle has no streams");
  auto check = [&](const auto& stream) {
    if (!stream) return;
    for (const auto& r : *stream) {
      if (r.t_s < 0 || r.t_s >= duration_s) throw ContractError("telemetry timestamp outside the window");
    }
  };
  check(flow);
  check(packet);
  check(warning);
  check(monitor);
}

void WarningRuleConfig::validate() const {
  if (connectivity_ticks <= 0 || loss_threshold <= 0 || loss_window_ticks <= 0 || delay_factor <= 0 ||
      resource_threshold <= 0)
    throw ConfigError("warning rule thresholds must be positive");
}

std::vector<FlowRecord> emit_flow(const sim::RawTrace& trace) {
  std::vector<FlowRecord> out;
  out.reserve(trace.snapshots.size() * trace.n_flows() * 2);
  for (const auto& snap : trace.snapshots) {
    for (const auto& fs : snap.flows) {
      if (snap.nodes[static_cast<std::size_t>(fs.src)].alive)
        out.push_back({snap.t_s, fs.src, fs.dst, Side::Sender, fs.sent_bps, fs.latency_ms, fs.jitter_ms, fs.loss});
      if (snap.nodes[static_cast<std::size_t>(fs.dst)].alive)
        out.push_back({snap.t_s, fs.src, fs.dst, Side::Receiver, fs.delivered_bps, fs.latency_ms, fs.jitter_ms, fs.loss});
    }
  }
  return out;
}

std::vector<PacketFlowFeatures> emit_packet_features(const sim::RawTrace& trace, int segment_ticks) {
  if (segment_ticks <= 0) throw ContractError("segment_ticks must be positive");
  std::vector<PacketFlowFeatures> out;
  const auto ticks = static_cast<int>(trace.snapshots.size());
  const double dt = trace.schedule.tick_s;
  const bool h2h = trace.traffic.mode == TrafficMode::H2H;
  const double ack_ratio = h2h ? 0.5 : 0.1;
  const double header_bytes = h2h ? 40.0 : 28.0;
  const double per_round = h2h ? 10.0 : 3.0;
  for (int start = 0; start < ticks; start += segment_ticks) {
    for (std::size_t f = 0; f < trace.n_flows(); ++f) {
      const auto& first = trace.snapshots.front().flows[f];
      const double pkt_bits = trace.node_profiles[static_cast<std::size_t>(first.src)].packet_bits;
      const int end = std::min(ticks, start + segment_ticks);
      double fwd = 0.0, retx = 0.0, bwd = 0.0, ctl = 0.0, gap_ms = 0.0;
      for (int t = start; t < end; ++t) {
        const auto& snap = trace.snapshots[static_cast<std::size_t>(t)];
        const auto& fs = snap.flows[f];
        const auto& src = snap.nodes[static_cast<std::size_t>(fs.src)];
        const auto& dst = snap.nodes[static_cast<std::size_t>(fs.dst)];
        const double sent_pkts = fs.sent_bps * dt / pkt_bits;
        fwd += sent_pkts;
        // Transactions are short, so gaps inside a connection follow the
        // round trip spread over the segments sent per round.
        gap_ms += sent_pkts * (1.0 + fs.retx_rate + fs.loss) * fs.latency_ms / per_round;
        // Link-layer retries plus transport resends of lost segments.
        retx += sent_pkts * (fs.retx_rate + fs.loss);
        // A closed port answers every segment with a reset instead of an ACK.
        const double answer = dst.app_running ? ack_ratio : 1.0;
        bwd += fs.delivered_bps * dt / pkt_bits * answer;
        const bool src_up = src.alive && src.associated && src.app_running;
        if (src_up && fs.offered_bps > 0.0 && (!dst.alive || !dst.associated)) {
          const double tries = kRetryPps * dt;
          ctl += tries;
          gap_ms += tries * 1000.0 / kRetryPps;
        }
      }
      PacketFlowFeatures pf;
      pf.t_s = trace.snapshots[static_cast<std::size_t>(start)].t_s;
      pf.src = first.src;
      pf.dst = first.dst;
      const double seconds = (end - start) * dt;
      const double data_pkts = fwd + retx + ctl;
      const double total_pkts = data_pkts + bwd;
      if (total_pkts > 0.0) {
        const double bytes = (fwd + retx) * pkt_bits / 8.0 + ctl * kControlBytes + bwd * kAckBytes;
        pf.mean_pkt_size_bytes = bytes / total_pkts;
        pf.mean_hdr_overhead = header_bytes * total_pkts / bytes;
      }
      // A silent segment counts as one gap spanning it.
      pf.mean_iat_ms = data_pkts > 0.0 ? gap_ms / data_pkts : seconds * 1000.0;
      if (data_pkts > 0.0) pf.retx_fraction = (retx + ctl) / data_pkts;
      pf.mean_fwd_rate_pps = data_pkts / seconds;
      pf.mean_bwd_rate_pps = bwd / seconds;
      out.push_back(pf);
    }
  }
  return out;
}

NodeSignals node_signals(const sim::RawTrace& trace) {
  NodeSignals s;
  const auto n = static_cast<std::size_t>(trace.n_nodes());
  const int inj = trace.schedule.injection_tick();
  std::vector<std::vector<double>> pre(n);
  for (const auto& snap : trace.snapshots) {
    std::vector<double> lat(n, 0.0), loss(n, 0.0), lat_count(n, 0.0), loss_count(n, 0.0);
    for (const auto& fs : snap.flows) {
      for (NodeId v : {fs.src, fs.dst}) {
        const auto i = static_cast<std::size_t>(v);
        if (fs.sent_bps > 0.0) {
          lat[i] += fs.latency_ms;
          lat_count[i] += 1.0;
        }
        if (fs.offered_bps > 0.0) {
          loss[i] += fs.loss;
          loss_count[i] += 1.0;
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      lat[i] = lat_count[i] > 0 ? lat[i] / lat_count[i] : 0.0;
      loss[i] = loss_count[i] > 0 ? loss[i] / loss_count[i] : 0.0;
      if (snap.tick < inj && lat_count[i] > 0) pre[i].push_back(lat[i]);
    }
    s.latency_ms.push_back(std::move(lat));
    s.loss.push_back(std::move(loss));
  }
  for (auto& p : pre) s.pre_injection_median_latency.push_back(median(std::move(p)));
  return s;
}

std::vector<WarningEvent> emit_warnings(const sim::RawTrace& trace, const WarningRuleConfig& rules) {
  rules.validate();
  std::vector<WarningEvent> out;
  const auto n = static_cast<std::size_t>(trace.n_nodes());
  const auto signals = node_signals(trace);
  const std::size_t n_flows = trace.n_flows();
  std::vector<int> zero_run(n_flows, 0);
  for (std::size_t t = 0; t < trace.snapshots.size(); ++t) {
    const auto& snap = trace.snapshots[t];
    for (std::size_t f = 0; f < n_flows; ++f) zero_run[f] = snap.flows[f].delivered_bps > 0.0 ? 0 : zero_run[f] + 1;
    for (std::size_t v = 0; v < n; ++v) {
      const auto& node = snap.nodes[v];
      if (!node.alive) continue;
      const auto id = static_cast<NodeId>(v);
      auto emit = [&](WarningKind k, double severity) { out.push_back({snap.t_s, id, k, clamp01(severity)}); };

      int longest = 0;
      for (std::size_t f = 0; f < n_flows; ++f) {
        if (snap.flows[f].dst == id) longest = std::max(longest, zero_run[f]);
      }
      if (longest >= rules.connectivity_ticks)
        emit(WarningKind::ConnectivityDegradation, longest / (2.0 * rules.connectivity_ticks));

      const std::size_t from = t + 1 >= static_cast<std::size_t>(rules.loss_window_ticks) ? t + 1 - rules.loss_window_ticks : 0;
      double windowed = 0.0;
      for (std::size_t k = from; k <= t; ++k) windowed += signals.loss[k][v];
      windowed /= static_cast<double>(t - from + 1);
      if (windowed > rules.loss_threshold) emit(WarningKind::PacketLoss, windowed / (2.0 * rules.loss_threshold));

      const double base = signals.pre_injection_median_latency[v];
      const double lat = signals.latency_ms[t][v];
      if (base > 0.0 && lat > rules.delay_factor * base)
        emit(WarningKind::ExcessiveDelay, lat / base / (2.0 * rules.delay_factor));

      if (!node.app_running) emit(WarningKind::ProcessDown, 1.0);

      const double resource = std::max(node.cpu_pct, node.mem_pct);
      if (resource > rules.resource_threshold)
        emit(WarningKind::ResourceAnomaly, resource / (2.0 * rules.resource_threshold));

      if (t > 0 && !trace.snapshots[t - 1].nodes[v].associated && node.associated)
        emit(WarningKind::Reassociation, 1.0);
    }
  }
  return out;
}

std::vector<MonitorRecord> emit_monitor(const sim::RawTrace& trace, int interval_ticks) {
  if (interval_ticks <= 0) throw ContractError("interval_ticks must be positive");
  std::vector<MonitorRecord> out;
  const auto n = static_cast<std::size_t>(trace.n_nodes());
  const double dt = trace.schedule.tick_s;
  const auto& links = trace.topology.links;
  for (std::size_t t = 0; t < trace.snapshots.size(); t += static_cast<std::size_t>(interval_ticks)) {
    const auto& snap = trace.snapshots[t];
    const std::size_t from = t + 1 >= static_cast<std::size_t>(interval_ticks) ? t + 1 - interval_ticks : 0;
    for (std::size_t v = 0; v < n; ++v) {
      const auto& node = snap.nodes[v];
      if (!node.alive) continue;
      const auto id = static_cast<NodeId>(v);
      double tx_bits = 0.0, rx_bits = 0.0;
      for (std::size_t k = from; k <= t; ++k) {
        for (const auto& fs : trace.snapshots[k].flows) {
          if (fs.src == id) tx_bits += fs.sent_bps * dt;
          if (fs.dst == id) rx_bits += fs.delivered_bps * dt;
        }
      }
      double rssi = 0.0;
      int count = 0;
      for (std::size_t i = 0; i < links.size(); ++i) {
        if (links[i].touches(id)) {
          rssi += snap.links[i].rssi_dbm;
          ++count;
        }
      }
      MonitorRecord r;
      r.t_s = snap.t_s;
      r.node = id;
      r.cpu_pct = node.cpu_pct;
      r.mem_pct = node.mem_pct;
      r.app_process_up = node.app_running;
      r.tx_bytes = std::llround(tx_bits / 8.0);
      r.rx_bytes = std::llround(rx_bits / 8.0);
      r.rssi_dbm = count > 0 ? rssi / count : 0.0;
      out.push_back(r);
    }
  }
  return out;
}

TelemetryBundle emit_all(const sim::RawTrace& trace, const TelemetryConfig& config) {
  TelemetryBundle b;
  b.flow = emit_flow(trace);
  b.packet = emit_packet_features(trace, config.packet_segment_ticks);
  b.warning = emit_warnings(trace, config.warnings);
  b.monitor = emit_monitor(trace, config.monitor_interval_ticks);
  return b;
}

TelemetryBundle drop_modalities(TelemetryBundle bundle, double rate, Rng& rng) {
  if (rate < 0.0 || rate > 0.5) throw ContractError("missing-modality rate must lie in [0, 0.5]");
  const double u = uniform(rng, 0.0, 1.0);
  auto present = bundle.present();
  if (u < rate && present.size() > 1) {
    const auto pick = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(present.size()) - 1));
    bundle.drop(present[pick]);
  }
  return bundle;
}

}  // namespace wifidiag::telemetry
