#pragma once

#include <vector>

#include "wifidiag/core.hpp"

namespace wifidiag::sim {

struct LinkState {
  double rssi_dbm = -60.0;
  /// Residual channel loss after MAC retries.
  double base_loss = 0.0;
  double capacity_bps = 1.0;
  double phy_rate_bps = 1.0;
  /// Fraction of frames needing a retransmission.
  double frame_error = 0.0;
  bool carrier_sense = true;

  friend bool operator==(const LinkState&, const LinkState&) = default;
};

struct NodeState {
  bool alive = true;
  bool associated = true;
  bool app_running = true;
  double app_latency_multiplier = 1.0;
  double queue_bits = 0.0;
  int queue_cap_pkts = 50;
  double cpu_pct = 0.0;
  double mem_pct = 0.0;

  friend bool operator==(const NodeState&, const NodeState&) = default;
};

struct FlowState {
  NodeId src = 0;
  NodeId dst = 0;
  /// Demand presented to the MAC this tick: fresh load plus carried backlog.
  double offered_bps = 0.0;
  /// Bits put on the air by the sender.
  double sent_bps = 0.0;
  double delivered_bps = 0.0;
  double latency_ms = 0.0;
  double jitter_ms = 0.0;
  double loss = 0.0;
  double retx_rate = 0.0;

  friend bool operator==(const FlowState&, const FlowState&) = default;
};

/// Static per-sample calibration the dynamics read every tick.
struct NodeProfile {
  double packet_bits = 9600.0;
  double app_base_ms = 5.0;
  double cpu_base = 0.1;
  double mem_base = 0.3;
  double nominal_capacity_bps = 1.0;
  friend bool operator==(const NodeProfile&, const NodeProfile&) = default;
};

struct LinkProfile {
  double base_rssi_dbm = -60.0;
  double propagation_ms = 1.0;
  double nominal_phy_bps = 1.0;
  friend bool operator==(const LinkProfile&, const LinkProfile&) = default;
};

struct FlowProfile {
  NodeId src = 0;
  NodeId dst = 0;
  std::size_t link = 0;
  double mean_bps = 0.0;
  friend bool operator==(const FlowProfile&, const FlowProfile&) = default;
};

/// Mutable fault bookkeeping that persists between ticks.
struct FaultRuntime {
  bool applied = false;
  int disconnect_remaining = 0;
  int ticks_since_disconnect = 0;
  int missed_beacons = 0;
  double rssi_drop_db = 0.0;
  double loss_floor = 0.0;
  double rate_fraction = 1.0;
  double retx_increase = 0.0;
  double egress_limit_bps = 0.0;
  double arrival_factor = 1.0;
  double burst_factor = 1.0;
  double interferer_duty = 0.0;
  double load_factor = 0.0;
  double cpu_extra = 0.0;
  /// Per-flow share of the target's degradation carried by co-located flows;
  /// zero on the target's own flows and outside its radio neighbourhood.
  std::vector<double> spill;
  friend bool operator==(const FaultRuntime&, const FaultRuntime&) = default;
};

struct World {
  Topology topology;
  std::vector<NodeProfile> node_profiles;
  std::vector<LinkProfile> link_profiles;
  std::vector<FlowProfile> flow_profiles;
  std::vector<NodeState> nodes;
  std::vector<LinkState> links;
  std::vector<FlowState> flows;
  FaultRuntime fault;
  /// Previous-tick latency per flow, for the jitter estimator.
  std::vector<double> prev_latency;
  /// Smoothed pre-injection latency, loss and retransmission rate per flow.
  std::vector<double> nominal_latency;
  std::vector<double> nominal_loss;
  std::vector<double> nominal_retx;

  friend bool operator==(const World&, const World&) = default;
};

struct Snapshot {
  int tick = 0;
  int t_s = 0;
  std::vector<NodeState> nodes;
  std::vector<LinkState> links;
  std::vector<FlowState> flows;
  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

struct RawTrace {
  Scenario scenario = Scenario::IotApSta;
  Topology topology;
  TrafficProfile traffic;
  FaultSpec fault;
  WindowSchedule schedule;
  std::vector<NodeProfile> node_profiles;
  std::vector<Snapshot> snapshots;

  int n_nodes() const { return topology.size(); }
  std::size_t n_flows() const { return snapshots.empty() ? 0 : snapshots.front().flows.size(); }
  friend bool operator==(const RawTrace&, const RawTrace&) = default;
};

struct ChannelConfig {
  double mac_efficiency = 0.6;
  double residual_retx_loss = 0.15;
  double frame_overhead_us = 100.0;
  double base_queue_cap_pkts = 50.0;
  double fading_db = 1.0;
  double h2h_burst_cap = 4.0;
  /// Fault propagation: a per-sample coupling drawn from [min, max] scales
  /// how much of the target's excess loss, retransmission and latency
  /// co-located flows inherit; each flow further scales it by
  /// [1 - spread, 1 + spread].
  double spill_min = 0.6;
  double spill_max = 1.2;
  double spill_spread = 0.4;
  double spill_loss_cap = 0.3;
  double spill_latency_cap = 20.0;
};

// Channel maps: RSSI -> PHY rate / residual loss / frame error rate.
double phy_rate_for_rssi(double rssi_dbm);
double loss_for_rssi(double rssi_dbm);
double frame_error_for_rssi(double rssi_dbm);

World make_world(const Topology& topology, const TrafficProfile& traffic, const ChannelConfig& channel, Rng& rng);

/// Activate the fault's persistent effects. Normal leaves the world unchanged.
void apply_fault(World& world, const FaultSpec& fault, const ChannelConfig& channel, Rng& rng);

/// Advance one tick of fluid-flow dynamics.
void step(World& world, const TrafficProfile& traffic, const FaultSpec& fault, const WindowSchedule& schedule,
          const ChannelConfig& channel, int tick, Rng& rng);

RawTrace run_window(Scenario scenario, const Topology& topology, const TrafficProfile& traffic,
                    const FaultSpec& fault, const WindowSchedule& schedule, std::uint64_t seed,
                    const ChannelConfig& channel = {});

/// Indices of flows with `node` as an endpoint.
std::vector<std::size_t> flows_touching(const RawTrace& trace, NodeId node);

}  // namespace wifidiag::sim
