#include "wifidiag/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>

#include "wifidiag/errors.hpp"

namespace wifidiag {

namespace {

constexpr std::array<std::string_view, 3> kScenarioNames = {"H2H_APSTA", "IOT_APSTA", "IOT_ADHOC"};
constexpr std::array<std::string_view, 6> kCategoryNames = {"Hardware",    "Software",   "MAC",
                                                            "Association", "Congestion", "None"};
constexpr std::array<std::string_view, 3> kPhenomenonNames = {"Disconnect", "Lag", "None"};

constexpr std::array<FaultType, 11> kInjectable = {
    FaultType::NodeCrash,     FaultType::PoorLinkQuality,       FaultType::AppCrash,
    FaultType::AppSlowdown,   FaultType::TrafficOverload,       FaultType::HiddenNode,
    FaultType::RateAdaptationFailure, FaultType::ProbeFailure,  FaultType::BeaconLoss,
    FaultType::BufferBloat,   FaultType::QueueOverflow};

template <std::size_t N>
std::size_t lookup(const std::array<std::string_view, N>& names, std::string_view s, const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return i;
  }
  throw ConfigError(std::string("unknown ") + what + ": '" + std::string(s) + "'");
}

}  // namespace

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double normal(Rng& rng, double mean, double stddev) {
  return std::normal_distribution<double>(mean, stddev)(rng);
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

std::string_view to_string(Scenario s) { return kScenarioNames[static_cast<std::size_t>(s)]; }

Scenario scenario_from_string(std::string_view s) {
  return static_cast<Scenario>(lookup(kScenarioNames, s, "scenario"));
}

TopologyMode topology_mode(Scenario s) {
  return s == Scenario::IotAdHoc ? TopologyMode::AdHoc : TopologyMode::Infrastructure;
}

TrafficMode traffic_mode(Scenario s) { return s == Scenario::H2hApSta ? TrafficMode::H2H : TrafficMode::IoT; }

// ---------------------------------------------------------------------------
// Topology

bool Topology::contains(NodeId n) const { return std::find(nodes.begin(), nodes.end(), n) != nodes.end(); }

std::optional<std::size_t> Topology::link_between(NodeId a, NodeId b) const {
  for (std::size_t i = 0; i < links.size(); ++i) {
    if ((links[i].a == a && links[i].b == b) || (links[i].a == b && links[i].b == a)) return i;
  }
  return std::nullopt;
}

std::vector<NodeId> Topology::neighbors(NodeId n) const {
  std::vector<NodeId> out;
  for (const auto& l : links) {
    if (l.touches(n)) out.push_back(l.other(n));
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool Topology::connected() const {
  if (nodes.empty()) return true;
  std::set<NodeId> seen{nodes.front()};
  std::queue<NodeId> frontier;
  frontier.push(nodes.front());
  while (!frontier.empty()) {
    NodeId n = frontier.front();
    frontier.pop();
    for (NodeId m : neighbors(n)) {
      if (seen.insert(m).second) frontier.push(m);
    }
  }
  return seen.size() == nodes.size();
}

void Topology::validate() const {
  if (nodes.size() < 3) throw ContractError("topology needs at least 3 nodes");
  for (const auto& l : links) {
    if (!contains(l.a) || !contains(l.b) || l.a == l.b) throw ContractError("link references unknown node");
    if (l.rssi_dbm < -95.0 || l.rssi_dbm > -20.0) throw ContractError("link rssi outside [-95, -20] dBm");
  }
  if (mode == TopologyMode::Infrastructure) {
    if (!ap || !contains(*ap)) throw ContractError("infrastructure topology needs an AP");
    for (NodeId n : nodes) {
      if (n == *ap) continue;
      int to_ap = 0;
      for (const auto& l : links) {
        if (l.touches(n)) {
          if (l.other(n) != *ap) throw ContractError("station linked to a non-AP node");
          ++to_ap;
        }
      }
      if (to_ap != 1) throw ContractError("station must have exactly one link to the AP");
    }
  } else {
    if (ap) throw ContractError("ad hoc topology must not designate an AP");
    if (!connected()) throw ContractError("ad hoc topology is not connected");
  }
}

Topology build_topology(Scenario scenario, int n_nodes, std::uint64_t seed, const TopologyConfig& config) {
  if (n_nodes < 3) throw ConfigError("n_nodes must be >= 3, got " + std::to_string(n_nodes));
  Rng rng(seed ^ 0x746f706f6c6f6779ULL);
  Topology topo;
  topo.mode = topology_mode(scenario);
  topo.nodes.resize(static_cast<std::size_t>(n_nodes));
  std::iota(topo.nodes.begin(), topo.nodes.end(), 0);
  auto rssi = [&] { return uniform(rng, config.rssi_min_dbm, config.rssi_max_dbm); };

  if (topo.mode == TopologyMode::Infrastructure) {
    topo.ap = 0;
    for (NodeId n = 1; n < n_nodes; ++n) topo.links.push_back({0, n, rssi(), true});
    return topo;
  }

  // Random spanning tree: attach each node to a uniformly chosen earlier node.
  for (NodeId n = 1; n < n_nodes; ++n) {
    NodeId parent = uniform_int(rng, 0, n - 1);
    topo.links.push_back({parent, n, rssi(), true});
  }
  int extra = static_cast<int>(std::lround(config.adhoc_extra_link_fraction * n_nodes));
  for (int attempt = 0; attempt < extra * 4 && extra > 0; ++attempt) {
    NodeId a = uniform_int(rng, 0, n_nodes - 1);
    NodeId b = uniform_int(rng, 0, n_nodes - 1);
    if (a == b || topo.link_between(a, b)) continue;
    topo.links.push_back({std::min(a, b), std::max(a, b), rssi(), true});
    --extra;
  }
  return topo;
}

// ---------------------------------------------------------------------------
// Traffic

void TrafficProfile::validate() const {
  for (const auto& [key, load] : matrix) {
    if (key.first == key.second) throw ContractError("traffic matrix contains a self pair");
    if (!(load >= 0.0)) throw ContractError("negative offered load");
  }
  if (!(period_s > 0.0)) throw ContractError("period_s must be positive");
  if (mode == TrafficMode::H2H && !(burstiness > 1.0 && burstiness <= 2.0))
    throw ContractError("H2H burst shape must lie in (1, 2]");
  if (burstiness < 0.0) throw ContractError("burstiness must be non-negative");
}

TrafficProfile build_traffic_profile(Scenario scenario, const Topology& topology, std::uint64_t seed,
                                     const TrafficConfig& config) {
  topology.validate();
  if (topology.mode != topology_mode(scenario)) throw ContractError("topology does not match scenario");
  Rng rng(seed ^ 0x7472616666696321ULL);
  TrafficProfile p;
  p.mode = traffic_mode(scenario);
  std::lognormal_distribution<double> scale(0.0, config.lognormal_sigma);
  // Keep a single heavy draw from saturating the channel on its own.
  auto draw = [&](double base) { return base * std::clamp(scale(rng), 0.1, 6.0); };

  if (p.mode == TrafficMode::H2H) {
    p.burstiness = uniform(rng, config.pareto_shape_min, config.pareto_shape_max);
    p.period_s = 1.0;
    p.packet_size_bytes = config.h2h_packet_bytes;
    for (NodeId n : topology.nodes) {
      if (n == *topology.ap) continue;
      double down = draw(config.h2h_base_bps);
      p.matrix[{*topology.ap, n}] = down;
      p.matrix[{n, *topology.ap}] = down * config.h2h_uplink_ratio;
    }
  } else {
    p.period_s = uniform(rng, config.iot_period_min_s, config.iot_period_max_s);
    p.jitter = config.iot_jitter;
    p.packet_size_bytes = config.iot_packet_bytes;
    if (topology.mode == TopologyMode::Infrastructure) {
      for (NodeId n : topology.nodes) {
        if (n == *topology.ap) continue;
        p.matrix[{n, *topology.ap}] = draw(config.iot_base_bps);
      }
    } else {
      // Each device reports to one radio neighbour.
      for (NodeId n : topology.nodes) {
        auto nb = topology.neighbors(n);
        NodeId dst = nb[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(nb.size()) - 1))];
        p.matrix[{n, dst}] = draw(config.iot_base_bps);
      }
    }
  }
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------
// Fault taxonomy

std::span<const FaultType> injectable_faults() { return kInjectable; }

const FaultInfo& fault_info(FaultType f) { return kFaultTable[static_cast<std::size_t>(f)]; }
std::string_view to_string(FaultType f) { return fault_info(f).name; }
std::string_view to_string(FaultCategory c) { return kCategoryNames[static_cast<std::size_t>(c)]; }
std::string_view to_string(Phenomenon p) { return kPhenomenonNames[static_cast<std::size_t>(p)]; }

FaultType fault_type_from_string(std::string_view s) {
  for (const auto& info : kFaultTable) {
    if (info.name == s) return info.type;
  }
  throw ConfigError("unknown fault type: '" + std::string(s) + "'");
}

FaultCategory fault_category_from_string(std::string_view s) {
  return static_cast<FaultCategory>(lookup(kCategoryNames, s, "fault category"));
}

Phenomenon phenomenon_from_string(std::string_view s) {
  return static_cast<Phenomenon>(lookup(kPhenomenonNames, s, "phenomenon"));
}

// ---------------------------------------------------------------------------
// Schedule

void WindowSchedule::validate() const {
  if (!(tick_s > 0.0)) throw ConfigError("tick_s must be positive");
  if (!(0 < injection_at_s && injection_at_s < duration_s))
    throw ConfigError("injection_at_s must lie strictly inside (0, duration_s)");
  auto divides = [&](int v) {
    double q = v / tick_s;
    return std::abs(q - std::round(q)) < 1e-9;
  };
  if (!divides(duration_s) || !divides(injection_at_s)) throw ConfigError("tick_s must divide duration and injection time");
}

int WindowSchedule::ticks() const { return static_cast<int>(std::lround(duration_s / tick_s)); }
int WindowSchedule::injection_tick() const { return static_cast<int>(std::lround(injection_at_s / tick_s)); }
int WindowSchedule::tick_time_s(int tick) const { return static_cast<int>(std::floor(tick * tick_s + 1e-9)); }

// ---------------------------------------------------------------------------
// Fault specs

std::map<FaultType, SeveritySchema> SeverityConfig::default_ranges() {
  return {
      {FaultType::NodeCrash, {}},
      {FaultType::PoorLinkQuality, {{"rssi_drop_db", {15, 25}}, {"base_loss", {0.05, 0.2}}}},
      {FaultType::AppCrash, {}},
      {FaultType::AppSlowdown, {{"latency_multiplier", {3, 10}}}},
      {FaultType::TrafficOverload, {{"load_factor", {2, 4}}}},
      {FaultType::HiddenNode, {{"interferer_duty", {0.3, 0.6}}}},
      {FaultType::RateAdaptationFailure, {{"rate_fraction", {0.1, 0.3}}, {"retx_increase", {0.1, 0.3}}}},
      {FaultType::ProbeFailure, {{"reassoc_fail_ticks", {10, 30}}, {"disconnect_period_ticks", {45, 45}}}},
      {FaultType::BeaconLoss, {{"miss_probability", {0.7, 0.95}}, {"rescan_ticks", {10, 20}}}},
      {FaultType::BufferBloat, {{"queue_factor", {20, 20}}, {"load_factor", {1.2, 1.2}}}},
      {FaultType::QueueOverflow, {{"queue_factor", {0.1, 0.1}}, {"burst_factor", {2, 4}}}},
      {FaultType::Normal, {}},
  };
}

std::optional<std::string_view> primary_severity_param(FaultType f) {
  switch (f) {
    case FaultType::PoorLinkQuality: return "rssi_drop_db";
    case FaultType::AppSlowdown: return "latency_multiplier";
    case FaultType::TrafficOverload: return "load_factor";
    case FaultType::HiddenNode: return "interferer_duty";
    case FaultType::RateAdaptationFailure: return "retx_increase";
    case FaultType::ProbeFailure: return "reassoc_fail_ticks";
    case FaultType::BeaconLoss: return "rescan_ticks";
    case FaultType::BufferBloat: return "load_factor";
    case FaultType::QueueOverflow: return "burst_factor";
    default: return std::nullopt;
  }
}

double FaultSpec::param(std::string_view name) const {
  auto it = severity.find(std::string(name));
  if (it == severity.end())
    throw InvalidFaultError("fault " + std::string(to_string(fault)) + " lacks severity parameter '" +
                            std::string(name) + "'");
  return it->second;
}

void FaultSpec::validate(const Topology& topology) const {
  if (fault == FaultType::Normal) {
    if (target || second) throw InvalidFaultError("normal samples carry no target");
    return;
  }
  if (!target) throw InvalidFaultError("fault " + std::string(to_string(fault)) + " needs a target node");
  if (!topology.contains(*target))
    throw InvalidFaultError("fault target " + std::to_string(*target) + " is not in the topology");
  if (fault == FaultType::HiddenNode) {
    if (!second || !topology.contains(*second) || *second == *target)
      throw InvalidFaultError("hidden-node fault needs a distinct second transmitter in the topology");
  } else if (second) {
    throw InvalidFaultError("only hidden-node faults carry a second transmitter");
  }
  const auto defaults = SeverityConfig::default_ranges();
  const auto& schema = defaults.at(fault);
  for (const auto& [name, value] : severity) {
    if (!schema.contains(name))
      throw InvalidFaultError("parameter '" + name + "' is not in the schema of " + std::string(to_string(fault)));
  }
}

FaultSpec draw_fault_spec(FaultType fault, const Topology& topology, const WindowSchedule& schedule,
                          const SeverityConfig& severities, Rng& rng) {
  FaultSpec spec;
  spec.fault = fault;
  spec.injected_at_s = schedule.injection_at_s;
  if (fault == FaultType::Normal) return spec;

  // The AP can host faults of its own links or host; faults that live in
  // station association or in a station's own sending stay on stations.
  const bool ap_eligible = fault == FaultType::NodeCrash || fault == FaultType::PoorLinkQuality ||
                           fault == FaultType::AppSlowdown || fault == FaultType::RateAdaptationFailure;
  std::vector<NodeId> candidates;
  for (NodeId n : topology.nodes) {
    if (!topology.ap || n != *topology.ap || ap_eligible) candidates.push_back(n);
  }
  spec.target = candidates[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(candidates.size()) - 1))];

  if (fault == FaultType::HiddenNode) {
    // The pair shares a receiver but cannot sense each other.
    NodeId receiver = topology.ap ? *topology.ap : topology.neighbors(*spec.target).front();
    std::vector<NodeId> others;
    for (NodeId n : topology.nodes) {
      if (n != *spec.target && n != receiver) others.push_back(n);
    }
    spec.second = others[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(others.size()) - 1))];
  }
  auto it = severities.ranges.find(fault);
  if (it != severities.ranges.end()) {
    for (const auto& [name, range] : it->second) {
      spec.severity[name] = range.hi > range.lo ? uniform(rng, range.lo, range.hi) : range.lo;
    }
  }
  spec.validate(topology);
  return spec;
}

}  // namespace wifidiag
