#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "wifidiag/core.hpp"
#include "wifidiag/sim.hpp"

namespace wifidiag::telemetry {

enum class Modality { Flow, Packet, Warning, Monitor };
inline constexpr std::array<Modality, 4> kAllModalities = {Modality::Flow, Modality::Packet, Modality::Warning,
                                                           Modality::Monitor};
std::string_view to_string(Modality m);
Modality modality_from_string(std::string_view s);

enum class Side { Sender, Receiver };
std::string_view to_string(Side s);
Side side_from_string(std::string_view s);

struct FlowRecord {
  int t_s = 0;
  NodeId src = 0;
  NodeId dst = 0;
  Side side = Side::Sender;
  double throughput_bps = 0.0;
  double latency_ms = 0.0;
  double jitter_ms = 0.0;
  double loss = 0.0;

  /// The node that produced the record.
  NodeId reporter() const { return side == Side::Sender ? src : dst; }
  friend bool operator==(const FlowRecord&, const FlowRecord&) = default;
};

/// Averaged per-flow statistics over one segment of the window.
struct PacketFlowFeatures {
  int t_s = 0;
  NodeId src = 0;
  NodeId dst = 0;
  double mean_pkt_size_bytes = 0.0;
  double mean_iat_ms = 0.0;
  double mean_fwd_rate_pps = 0.0;
  double mean_bwd_rate_pps = 0.0;
  double retx_fraction = 0.0;
  double mean_hdr_overhead = 0.0;
  friend bool operator==(const PacketFlowFeatures&, const PacketFlowFeatures&) = default;
};

enum class WarningKind { ConnectivityDegradation, PacketLoss, ExcessiveDelay, ProcessDown, ResourceAnomaly, Reassociation };
inline constexpr int kWarningKindCount = 6;
inline constexpr std::array<WarningKind, kWarningKindCount> kAllWarningKinds = {
    WarningKind::ConnectivityDegradation, WarningKind::PacketLoss,      WarningKind::ExcessiveDelay,
    WarningKind::ProcessDown,             WarningKind::ResourceAnomaly, WarningKind::Reassociation};
std::string_view to_string(WarningKind k);
WarningKind warning_kind_from_string(std::string_view s);

struct WarningEvent {
  int t_s = 0;
  NodeId node = 0;
  WarningKind kind = WarningKind::PacketLoss;
  double severity = 0.0;
  friend bool operator==(const WarningEvent&, const WarningEvent&) = default;
};

struct MonitorRecord {
  int t_s = 0;
  NodeId node = 0;
  double cpu_pct = 0.0;
  double mem_pct = 0.0;
  bool app_process_up = true;
  long long tx_bytes = 0;
  long long rx_bytes = 0;
  double rssi_dbm = 0.0;
  friend bool operator==(const MonitorRecord&, const MonitorRecord&) = default;
};

struct TelemetryBundle {
  std::optional<std::vector<FlowRecord>> flow;
  std::optional<std::vector<PacketFlowFeatures>> packet;
  std::optional<std::vector<WarningEvent>> warning;
  std::optional<std::vector<MonitorRecord>> monitor;

  bool has(Modality m) const;
  void drop(Modality m);
  std::vector<Modality> present() const;
  /// Throws ContractError if no stream is present or a timestamp leaves [0, duration).
  void validate(int duration_s) const;
  friend bool operator==(const TelemetryBundle&, const TelemetryBundle&) = default;
};

struct WarningRuleConfig {
  int connectivity_ticks = 5;
  double loss_threshold = 0.1;
  int loss_window_ticks = 5;
  double delay_factor = 3.0;
  double resource_threshold = 0.9;

  void validate() const;
};

struct TelemetryConfig {
  int packet_segment_ticks = 10;
  int monitor_interval_ticks = 5;
  WarningRuleConfig warnings;
};

std::vector<FlowRecord> emit_flow(const sim::RawTrace& trace);
std::vector<PacketFlowFeatures> emit_packet_features(const sim::RawTrace& trace, int segment_ticks = 10);
std::vector<WarningEvent> emit_warnings(const sim::RawTrace& trace, const WarningRuleConfig& rules = {});
std::vector<MonitorRecord> emit_monitor(const sim::RawTrace& trace, int interval_ticks = 5);

TelemetryBundle emit_all(const sim::RawTrace& trace, const TelemetryConfig& config = {});

/// With probability `rate`, remove one uniformly chosen modality. Never
/// removes the last remaining stream.
TelemetryBundle drop_modalities(TelemetryBundle bundle, double rate, Rng& rng);

/// Per-node, per-tick signals the warning rules read. Exposed so tests can
/// re-check each event against the trace.
struct NodeSignals {
  /// [tick][node]
  std::vector<std::vector<double>> latency_ms;
  std::vector<std::vector<double>> loss;
  std::vector<double> pre_injection_median_latency;
};
NodeSignals node_signals(const sim::RawTrace& trace);

}  // namespace wifidiag::telemetry
