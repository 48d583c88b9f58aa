#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace wifidiag {

using NodeId = int;
using Rng = std::mt19937_64;

enum class Scenario { H2hApSta, IotApSta, IotAdHoc };

inline constexpr std::array<Scenario, 3> kAllScenarios = {Scenario::H2hApSta, Scenario::IotApSta,
                                                          Scenario::IotAdHoc};

std::string_view to_string(Scenario s);
Scenario scenario_from_string(std::string_view s);

enum class TopologyMode { Infrastructure, AdHoc };
enum class TrafficMode { H2H, IoT };

TopologyMode topology_mode(Scenario s);
TrafficMode traffic_mode(Scenario s);

struct Link {
  NodeId a = 0;
  NodeId b = 0;
  double rssi_dbm = -60.0;
  bool carrier_sense = true;

  bool touches(NodeId n) const { return a == n || b == n; }
  NodeId other(NodeId n) const { return a == n ? b : a; }
  friend bool operator==(const Link&, const Link&) = default;
};

struct Topology {
  std::vector<NodeId> nodes;
  TopologyMode mode = TopologyMode::Infrastructure;
  std::optional<NodeId> ap;
  std::vector<Link> links;

  int size() const { return static_cast<int>(nodes.size()); }
  bool contains(NodeId n) const;
  /// Index into `links` of the link joining a and b, if any.
  std::optional<std::size_t> link_between(NodeId a, NodeId b) const;
  std::vector<NodeId> neighbors(NodeId n) const;
  bool connected() const;
  /// Throws ContractError when an invariant does not hold.
  void validate() const;

  friend bool operator==(const Topology&, const Topology&) = default;
};

struct TopologyConfig {
  double rssi_min_dbm = -75.0;
  double rssi_max_dbm = -40.0;
  /// Extra random links added on top of the spanning tree in ad hoc mode,
  /// as a fraction of the node count.
  double adhoc_extra_link_fraction = 0.5;
};

/// Node 0 is the AP in infrastructure scenarios.
Topology build_topology(Scenario scenario, int n_nodes, std::uint64_t seed,
                        const TopologyConfig& config = {});

using FlowKey = std::pair<NodeId, NodeId>;

struct TrafficProfile {
  TrafficMode mode = TrafficMode::IoT;
  /// (src, dst) -> mean offered load in bits per second.
  std::map<FlowKey, double> matrix;
  /// Pareto shape of the H2H burst multiplier; 0 for IoT.
  double burstiness = 0.0;
  /// IoT reporting period; H2H profiles carry a nominal 1 s.
  double period_s = 1.0;
  /// Standard deviation of the IoT relative jitter.
  double jitter = 0.0;
  double packet_size_bytes = 1200.0;

  void validate() const;
  friend bool operator==(const TrafficProfile&, const TrafficProfile&) = default;
};

struct TrafficConfig {
  double h2h_base_bps = 400e3;
  double h2h_uplink_ratio = 0.3;
  double iot_base_bps = 50e3;
  double lognormal_sigma = 1.0;
  double pareto_shape_min = 1.2;
  double pareto_shape_max = 1.9;
  double iot_period_min_s = 1.0;
  double iot_period_max_s = 2.0;
  double iot_jitter = 0.05;
  double h2h_packet_bytes = 1200.0;
  double iot_packet_bytes = 200.0;
};

TrafficProfile build_traffic_profile(Scenario scenario, const Topology& topology, std::uint64_t seed,
                                     const TrafficConfig& config = {});

enum class FaultType {
  NodeCrash,
  PoorLinkQuality,
  AppCrash,
  AppSlowdown,
  TrafficOverload,
  HiddenNode,
  RateAdaptationFailure,
  ProbeFailure,
  BeaconLoss,
  BufferBloat,
  QueueOverflow,
  Normal,
};

enum class FaultCategory { Hardware, Software, MAC, Association, Congestion, None };
enum class Phenomenon { Disconnect, Lag, None };

struct FaultInfo {
  FaultType type;
  std::string_view name;
  FaultCategory category;
  Phenomenon phenomenon;
};

inline constexpr int kFaultTypeCount = 12;

// Fault taxonomy: name, category, observable phenomenon.
inline constexpr std::array<FaultInfo, kFaultTypeCount> kFaultTable = {{
    {FaultType::NodeCrash, "NodeCrash", FaultCategory::Hardware, Phenomenon::Disconnect},
    {FaultType::PoorLinkQuality, "PoorLinkQuality", FaultCategory::Hardware, Phenomenon::Lag},
    {FaultType::AppCrash, "AppCrash", FaultCategory::Software, Phenomenon::Disconnect},
    {FaultType::AppSlowdown, "AppSlowdown", FaultCategory::Software, Phenomenon::Lag},
    {FaultType::TrafficOverload, "TrafficOverload", FaultCategory::Software, Phenomenon::Lag},
    {FaultType::HiddenNode, "HiddenNode", FaultCategory::MAC, Phenomenon::Lag},
    {FaultType::RateAdaptationFailure, "RateAdaptationFailure", FaultCategory::MAC, Phenomenon::Lag},
    {FaultType::ProbeFailure, "ProbeFailure", FaultCategory::Association, Phenomenon::Disconnect},
    {FaultType::BeaconLoss, "BeaconLoss", FaultCategory::Association, Phenomenon::Disconnect},
    {FaultType::BufferBloat, "BufferBloat", FaultCategory::Congestion, Phenomenon::Lag},
    {FaultType::QueueOverflow, "QueueOverflow", FaultCategory::Congestion, Phenomenon::Lag},
    {FaultType::Normal, "Normal", FaultCategory::None, Phenomenon::None},
}};

/// The eleven injectable faults, in table order.
std::span<const FaultType> injectable_faults();

const FaultInfo& fault_info(FaultType f);
std::string_view to_string(FaultType f);
std::string_view to_string(FaultCategory c);
std::string_view to_string(Phenomenon p);
FaultType fault_type_from_string(std::string_view s);
FaultCategory fault_category_from_string(std::string_view s);
Phenomenon phenomenon_from_string(std::string_view s);
inline int fault_index(FaultType f) { return static_cast<int>(f); }

struct WindowSchedule {
  int duration_s = 180;
  int injection_at_s = 60;
  double tick_s = 1.0;

  void validate() const;
  int ticks() const;
  int injection_tick() const;
  int tick_time_s(int tick) const;
  friend bool operator==(const WindowSchedule&, const WindowSchedule&) = default;
};

struct FaultSpec {
  FaultType fault = FaultType::Normal;
  std::optional<NodeId> target;
  /// Second transmitter of a hidden-node pair.
  std::optional<NodeId> second;
  std::map<std::string, double> severity;
  int injected_at_s = 60;

  double param(std::string_view name) const;
  /// Throws InvalidFaultError when the spec is inconsistent with the topology.
  void validate(const Topology& topology) const;
  friend bool operator==(const FaultSpec&, const FaultSpec&) = default;
};

struct SeverityRange {
  double lo = 0.0;
  double hi = 0.0;
};

/// Parameter schema of one fault: name -> sampling range.
using SeveritySchema = std::map<std::string, SeverityRange>;

/// Injection magnitudes for every fault, keyed by fault name. Defaults are
/// the calibrated ranges documented in the README.
struct SeverityConfig {
  std::map<FaultType, SeveritySchema> ranges = default_ranges();
  static std::map<FaultType, SeveritySchema> default_ranges();
};

/// The parameter each fault's monotone-severity check doubles, if any.
std::optional<std::string_view> primary_severity_param(FaultType f);

/// Draw a concrete FaultSpec for `fault`. In infrastructure scenarios the AP
/// is a candidate only for faults of its own radio or host (NodeCrash,
/// PoorLinkQuality, AppSlowdown, RateAdaptationFailure).
FaultSpec draw_fault_spec(FaultType fault, const Topology& topology, const WindowSchedule& schedule,
                          const SeverityConfig& severities, Rng& rng);

// Small sampling helpers shared by the generators.
double uniform(Rng& rng, double lo, double hi);
double normal(Rng& rng, double mean, double stddev);
int uniform_int(Rng& rng, int lo, int hi);

}  // namespace wifidiag
