#include "wifidiag/sim.hpp"

#include <algorithm>
#include <cmath>

#include "wifidiag/errors.hpp"

namespace wifidiag::sim {

namespace {

constexpr double kElasticFill = 0.9;
constexpr double kQueueDelayCapMs = 30000.0;
constexpr int kBeaconMissLimit = 5;
constexpr double kNominalGain = 0.1;

bool touches(const Link& l, std::optional<NodeId> n) { return n && l.touches(*n); }

// How a fault's degradation reaches co-located flows: shared-medium faults
// through interference and airtime, an absent station through the airtime its
// peers burn retrying frames toward it, queueing faults through shared
// buffers, host faults through transport-level waits on the slow endpoint.
enum class Spread { Medium, Retry, Queue, Host, None };

Spread spread_of(FaultType ft) {
  switch (ft) {
    case FaultType::PoorLinkQuality:
    case FaultType::HiddenNode:
    case FaultType::RateAdaptationFailure:
    case FaultType::TrafficOverload:
      return Spread::Medium;
    case FaultType::NodeCrash:
    case FaultType::ProbeFailure:
    case FaultType::BeaconLoss:
      return Spread::Retry;
    case FaultType::BufferBloat:
    case FaultType::QueueOverflow:
      return Spread::Queue;
    case FaultType::AppSlowdown:
      return Spread::Host;
    default:
      return Spread::None;
  }
}

// Imposes a share of the target's excess over its pre-injection baseline on
// the flows that share its neighbourhood.
void spill_over(World& w, FaultType ft, NodeId target, const ChannelConfig& channel) {
  const Spread kind = spread_of(ft);
  if (kind == Spread::None) return;
  double lat_excess = 0.0, loss_excess = 0.0, retx_excess = 0.0;
  int lat_n = 0, n = 0;
  for (std::size_t f = 0; f < w.flows.size(); ++f) {
    const auto& fs = w.flows[f];
    if (fs.src != target && fs.dst != target) continue;
    if (kind == Spread::Retry && fs.dst != target) continue;
    if (fs.offered_bps <= 0.0) continue;
    ++n;
    loss_excess += std::max(0.0, fs.loss - w.nominal_loss[f]);
    retx_excess += std::max(0.0, fs.retx_rate - w.nominal_retx[f]);
    if (fs.latency_ms > 0.0 && w.nominal_latency[f] > 0.0) {
      lat_excess += std::max(0.0, fs.latency_ms / w.nominal_latency[f] - 1.0);
      ++lat_n;
    }
  }
  if (n == 0) return;
  loss_excess = std::min(loss_excess / n, channel.spill_loss_cap);
  retx_excess /= n;
  lat_excess = lat_n > 0 ? std::min(lat_excess / lat_n, channel.spill_latency_cap) : 0.0;
  if (kind == Spread::Host) loss_excess = retx_excess = 0.0;
  if (kind == Spread::Queue) retx_excess = 0.0;

  for (std::size_t f = 0; f < w.flows.size(); ++f) {
    const double share = w.fault.spill[f];
    auto& fs = w.flows[f];
    if (share <= 0.0 || fs.sent_bps <= 0.0) continue;
    const double extra_loss = std::min(share * loss_excess, 1.0 - fs.loss);
    const double keep = fs.loss < 1.0 ? (1.0 - fs.loss - extra_loss) / (1.0 - fs.loss) : 0.0;
    fs.delivered_bps *= keep;
    fs.loss += extra_loss;
    fs.retx_rate = std::min(0.95, fs.retx_rate + share * retx_excess);
    fs.latency_ms *= 1.0 + share * lat_excess;
  }
}

}  // namespace

double phy_rate_for_rssi(double rssi_dbm) {
  // 802.11n single-stream 20 MHz MCS ladder.
  struct Step {
    double min_rssi;
    double mbps;
  };
  static constexpr Step kLadder[] = {{-60, 65.0}, {-64, 58.5}, {-68, 52.0}, {-72, 39.0},
                                     {-76, 26.0}, {-80, 19.5}, {-84, 13.0}, {-88, 6.5}};
  for (const auto& s : kLadder) {
    if (rssi_dbm >= s.min_rssi) return s.mbps * 1e6;
  }
  return 1e6;
}

double loss_for_rssi(double rssi_dbm) { return 0.001 + 0.5 / (1.0 + std::exp((rssi_dbm + 88.0) / 3.0)); }

double frame_error_for_rssi(double rssi_dbm) { return 0.02 + 0.4 / (1.0 + std::exp((rssi_dbm + 82.0) / 3.0)); }

World make_world(const Topology& topology, const TrafficProfile& traffic, const ChannelConfig& channel, Rng& rng) {
  World w;
  w.topology = topology;
  const auto n = static_cast<std::size_t>(topology.size());
  w.nodes.assign(n, NodeState{});
  w.node_profiles.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    auto& p = w.node_profiles[v];
    p.packet_bits = traffic.packet_size_bytes * 8.0;
    p.app_base_ms = uniform(rng, 4.0, 6.0);
    p.cpu_base = uniform(rng, 0.05, 0.2);
    p.mem_base = uniform(rng, 0.2, 0.4);
    w.nodes[v].queue_cap_pkts = static_cast<int>(channel.base_queue_cap_pkts);
  }
  for (const auto& l : topology.links) {
    LinkProfile lp;
    lp.base_rssi_dbm = l.rssi_dbm;
    lp.propagation_ms = uniform(rng, 0.5, 2.0);
    lp.nominal_phy_bps = phy_rate_for_rssi(l.rssi_dbm);
    w.link_profiles.push_back(lp);
    LinkState ls;
    ls.rssi_dbm = l.rssi_dbm;
    ls.phy_rate_bps = lp.nominal_phy_bps;
    ls.base_loss = loss_for_rssi(l.rssi_dbm);
    ls.frame_error = frame_error_for_rssi(l.rssi_dbm);
    ls.capacity_bps = ls.phy_rate_bps * channel.mac_efficiency * (1.0 - ls.frame_error);
    ls.carrier_sense = l.carrier_sense;
    w.links.push_back(ls);
  }
  for (std::size_t v = 0; v < n; ++v) {
    double cap = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < topology.links.size(); ++i) {
      if (topology.links[i].touches(static_cast<NodeId>(v))) {
        cap += w.links[i].capacity_bps;
        ++count;
      }
    }
    w.node_profiles[v].nominal_capacity_bps = count > 0 ? cap / count : 1.0;
  }
  for (const auto& [key, load] : traffic.matrix) {
    auto link = topology.link_between(key.first, key.second);
    if (!link) throw ContractError("traffic flow between unlinked nodes");
    w.flow_profiles.push_back({key.first, key.second, *link, load});
    FlowState fs;
    fs.src = key.first;
    fs.dst = key.second;
    w.flows.push_back(fs);
  }
  w.prev_latency.assign(w.flows.size(), 0.0);
  w.nominal_latency.assign(w.flows.size(), 0.0);
  w.nominal_loss.assign(w.flows.size(), 0.0);
  w.nominal_retx.assign(w.flows.size(), 0.0);
  return w;
}

void apply_fault(World& world, const FaultSpec& fault, const ChannelConfig& channel, Rng& rng) {
  fault.validate(world.topology);
  if (fault.fault == FaultType::Normal) return;
  auto& rt = world.fault;
  const auto t = static_cast<std::size_t>(*fault.target);
  auto& node = world.nodes[t];
  auto egress_mean = [&] {
    double sum = 0.0;
    for (const auto& fp : world.flow_profiles) {
      if (fp.src == *fault.target) sum += fp.mean_bps;
    }
    return sum;
  };

  switch (fault.fault) {
    case FaultType::NodeCrash:
      node.alive = false;
      node.associated = false;
      node.queue_bits = 0.0;
      break;
    case FaultType::PoorLinkQuality:
      rt.rssi_drop_db = fault.param("rssi_drop_db");
      rt.loss_floor = fault.param("base_loss");
      break;
    case FaultType::AppCrash:
      node.app_running = false;
      break;
    case FaultType::AppSlowdown:
      node.app_latency_multiplier = fault.param("latency_multiplier");
      rt.cpu_extra = 0.04 * node.app_latency_multiplier;
      break;
    case FaultType::TrafficOverload:
      rt.load_factor = fault.param("load_factor");
      break;
    case FaultType::HiddenNode:
      rt.interferer_duty = fault.param("interferer_duty");
      for (std::size_t i = 0; i < world.links.size(); ++i) {
        const auto& l = world.topology.links[i];
        if (touches(l, fault.target) || touches(l, fault.second)) world.links[i].carrier_sense = false;
      }
      break;
    case FaultType::RateAdaptationFailure:
      rt.rate_fraction = fault.param("rate_fraction");
      rt.retx_increase = fault.param("retx_increase");
      break;
    case FaultType::ProbeFailure:
      node.associated = false;
      rt.disconnect_remaining = static_cast<int>(std::lround(fault.param("reassoc_fail_ticks")));
      rt.ticks_since_disconnect = 0;
      break;
    case FaultType::BeaconLoss:
      rt.missed_beacons = 0;
      break;
    case FaultType::BufferBloat:
      node.queue_cap_pkts = static_cast<int>(std::lround(channel.base_queue_cap_pkts * fault.param("queue_factor")));
      rt.egress_limit_bps = egress_mean();
      rt.arrival_factor = fault.param("load_factor");
      break;
    case FaultType::QueueOverflow:
      node.queue_cap_pkts =
          std::max(1, static_cast<int>(std::lround(channel.base_queue_cap_pkts * fault.param("queue_factor"))));
      rt.egress_limit_bps = egress_mean();
      rt.burst_factor = fault.param("burst_factor");
      break;
    case FaultType::Normal:
      break;
  }

  // Radio neighbourhood of the target: the whole BSS in infrastructure mode,
  // one hop in ad hoc mode.
  std::vector<bool> near(world.nodes.size(), world.topology.mode == TopologyMode::Infrastructure);
  for (NodeId nb : world.topology.neighbors(*fault.target)) near[static_cast<std::size_t>(nb)] = true;
  const double coupling = uniform(rng, channel.spill_min, channel.spill_max);
  rt.spill.assign(world.flows.size(), 0.0);
  for (std::size_t f = 0; f < world.flows.size(); ++f) {
    const auto& fp = world.flow_profiles[f];
    const double share = coupling * uniform(rng, 1.0 - channel.spill_spread, 1.0 + channel.spill_spread);
    if (fp.src == *fault.target || fp.dst == *fault.target) continue;
    if (near[static_cast<std::size_t>(fp.src)] || near[static_cast<std::size_t>(fp.dst)]) rt.spill[f] = share;
  }
  rt.applied = true;
}

void step(World& w, const TrafficProfile& traffic, const FaultSpec& fault, const WindowSchedule& schedule,
          const ChannelConfig& channel, int tick, Rng& rng) {
  const double dt = schedule.tick_s;
  const int t_s = schedule.tick_time_s(tick);
  const bool active = fault.fault != FaultType::Normal && t_s >= fault.injected_at_s;
  bool just_applied = false;
  if (active && !w.fault.applied) {
    apply_fault(w, fault, channel, rng);
    just_applied = true;
  }
  auto& rt = w.fault;
  const FaultType ft = active ? fault.fault : FaultType::Normal;
  const NodeId target = fault.target.value_or(-1);
  const auto n_nodes = w.nodes.size();
  const auto n_links = w.links.size();
  const auto n_flows = w.flows.size();

  // Association dynamics of the association-class faults.
  if (ft == FaultType::BeaconLoss && !just_applied) {
    const bool missed = uniform(rng, 0.0, 1.0) < fault.param("miss_probability");
    auto& node = w.nodes[static_cast<std::size_t>(target)];
    if (rt.disconnect_remaining > 0) {
      if (--rt.disconnect_remaining == 0) {
        node.associated = true;
        rt.missed_beacons = 0;
      }
    } else {
      rt.missed_beacons = missed ? rt.missed_beacons + 1 : 0;
      if (rt.missed_beacons >= kBeaconMissLimit) {
        node.associated = false;
        rt.disconnect_remaining = static_cast<int>(std::lround(fault.param("rescan_ticks")));
        rt.missed_beacons = 0;
      }
    }
  } else if (ft == FaultType::ProbeFailure && !just_applied) {
    auto& node = w.nodes[static_cast<std::size_t>(target)];
    ++rt.ticks_since_disconnect;
    if (rt.disconnect_remaining > 0) {
      if (--rt.disconnect_remaining == 0) node.associated = true;
    } else if (rt.ticks_since_disconnect >= static_cast<int>(std::lround(fault.param("disconnect_period_ticks")))) {
      node.associated = false;
      rt.disconnect_remaining = static_cast<int>(std::lround(fault.param("reassoc_fail_ticks")));
      rt.ticks_since_disconnect = 0;
    }
  }

  // Channel state.
  for (std::size_t i = 0; i < n_links; ++i) {
    const auto& lp = w.link_profiles[i];
    auto& ls = w.links[i];
    const bool on_target = w.topology.links[i].touches(target);
    double rssi = lp.base_rssi_dbm + normal(rng, 0.0, channel.fading_db);
    if (ft == FaultType::PoorLinkQuality && on_target) rssi -= rt.rssi_drop_db;
    ls.rssi_dbm = std::clamp(rssi, -95.0, -20.0);
    ls.phy_rate_bps = phy_rate_for_rssi(ls.rssi_dbm);
    ls.base_loss = loss_for_rssi(ls.rssi_dbm);
    ls.frame_error = frame_error_for_rssi(ls.rssi_dbm);
    if (ft == FaultType::PoorLinkQuality && on_target) ls.base_loss = std::max(ls.base_loss, rt.loss_floor);
    if (ft == FaultType::RateAdaptationFailure && on_target) {
      ls.phy_rate_bps = rt.rate_fraction * lp.nominal_phy_bps;
      ls.frame_error += rt.retx_increase;
    }
    ls.frame_error = std::min(ls.frame_error, 0.9);
    ls.capacity_bps = ls.phy_rate_bps * channel.mac_efficiency * (1.0 - ls.frame_error);
  }

  // Fresh load from the traffic generators; one draw per flow per tick.
  std::vector<double> generated(n_flows, 0.0);
  std::vector<int> out_degree(n_nodes, 0);
  for (const auto& fp : w.flow_profiles) ++out_degree[static_cast<std::size_t>(fp.src)];
  for (std::size_t f = 0; f < n_flows; ++f) {
    const auto& fp = w.flow_profiles[f];
    double m = 1.0;
    if (traffic.mode == TrafficMode::H2H) {
      const double shape = traffic.burstiness;
      const double xm = (shape - 1.0) / shape;  // unit-mean Pareto
      const double u = uniform(rng, 0.0, 1.0);
      const double pareto = xm / std::pow(1.0 - u, 1.0 / shape);
      m = 0.3 + 0.7 * std::min(pareto, channel.h2h_burst_cap);
    } else {
      m = std::max(0.0, 1.0 + normal(rng, 0.0, traffic.jitter));
    }
    double g = fp.mean_bps * m;
    if (fp.src == target) {
      if (ft == FaultType::AppCrash) g = 0.0;
      if (ft == FaultType::TrafficOverload) {
        g = std::max(g, rt.load_factor * w.links[fp.link].capacity_bps /
                            std::max(1, out_degree[static_cast<std::size_t>(fp.src)]));
      }
    }
    generated[f] = g;
  }

  auto usable = [&](const FlowProfile& fp) {
    const auto& s = w.nodes[static_cast<std::size_t>(fp.src)];
    const auto& d = w.nodes[static_cast<std::size_t>(fp.dst)];
    return s.alive && d.alive && s.associated && d.associated;
  };

  // Per-node arrivals and backlog.
  double burst = 1.0;
  if (ft == FaultType::QueueOverflow) burst = uniform(rng, 0.0, 1.0) < 0.5 ? rt.burst_factor : 1.0;
  std::vector<double> arrivals(n_flows, 0.0);
  std::vector<double> backlog_node(n_nodes, 0.0);
  std::vector<double> backlog_flow(n_flows, 0.0);
  for (std::size_t v = 0; v < n_nodes; ++v) {
    auto& node = w.nodes[v];
    if (!node.alive) {
      node.queue_bits = 0.0;
      continue;
    }
    const bool is_target = static_cast<NodeId>(v) == target;
    const double cap_bits = node.queue_cap_pkts * w.node_profiles[v].packet_bits;
    double total = 0.0;
    int usable_out = 0;
    for (std::size_t f = 0; f < n_flows; ++f) {
      const auto& fp = w.flow_profiles[f];
      if (fp.src != static_cast<NodeId>(v) || !usable(fp)) continue;
      ++usable_out;
      double a = generated[f];
      if (is_target && ft == FaultType::BufferBloat) {
        // Elastic senders fill the oversized buffer, then pace at the drain rate.
        const double factor = node.queue_bits < kElasticFill * cap_bits ? rt.arrival_factor : 1.0;
        a = factor * fp.mean_bps;
      } else if (is_target && ft == FaultType::QueueOverflow) {
        a *= burst;
      }
      arrivals[f] = a;
      total += a;
    }
    backlog_node[v] = node.queue_bits + total * dt;
    for (std::size_t f = 0; f < n_flows; ++f) {
      const auto& fp = w.flow_profiles[f];
      if (fp.src != static_cast<NodeId>(v) || !usable(fp)) continue;
      const double share = total > 0.0 ? arrivals[f] / total : 1.0 / usable_out;
      backlog_flow[f] = backlog_node[v] * share;
    }
  }

  // Shared-channel airtime, split in proportion to demand.
  double demand = 0.0;
  for (std::size_t f = 0; f < n_flows; ++f) {
    if (backlog_flow[f] > 0.0) demand += backlog_flow[f] / (w.links[w.flow_profiles[f].link].capacity_bps * dt);
  }
  const double scale = demand > 1.0 ? 1.0 / demand : 1.0;
  const double util = std::min(demand, 0.9);
  std::vector<double> served(n_flows, 0.0);
  std::vector<double> served_node(n_nodes, 0.0);
  for (std::size_t f = 0; f < n_flows; ++f) served[f] = backlog_flow[f] * scale;
  if (ft == FaultType::BufferBloat || ft == FaultType::QueueOverflow) {
    double sum = 0.0;
    for (std::size_t f = 0; f < n_flows; ++f) {
      if (w.flow_profiles[f].src == target) sum += served[f];
    }
    const double limit = rt.egress_limit_bps * dt;
    if (sum > limit && sum > 0.0) {
      for (std::size_t f = 0; f < n_flows; ++f) {
        if (w.flow_profiles[f].src == target) served[f] *= limit / sum;
      }
    }
  }
  for (std::size_t f = 0; f < n_flows; ++f) served_node[static_cast<std::size_t>(w.flow_profiles[f].src)] += served[f];

  // Queue update and tail drops.
  std::vector<double> dropped(n_flows, 0.0);
  for (std::size_t v = 0; v < n_nodes; ++v) {
    auto& node = w.nodes[v];
    if (!node.alive) continue;
    double bits_with_usable = 0.0;
    for (std::size_t f = 0; f < n_flows; ++f) {
      if (w.flow_profiles[f].src == static_cast<NodeId>(v)) bits_with_usable += backlog_flow[f];
    }
    if (bits_with_usable <= 0.0) continue;  // nothing could be sent; backlog held
    double q = backlog_node[v] - served_node[v];
    const double cap_bits = node.queue_cap_pkts * w.node_profiles[v].packet_bits;
    const double overflow = std::max(0.0, q - cap_bits);
    q -= overflow;
    node.queue_bits = std::max(0.0, q);
    if (overflow > 0.0) {
      for (std::size_t f = 0; f < n_flows; ++f) {
        if (w.flow_profiles[f].src == static_cast<NodeId>(v)) dropped[f] = overflow * backlog_flow[f] / bits_with_usable;
      }
    }
  }

  // Hidden-node collisions.
  std::vector<double> collision(n_flows, 0.0);
  if (ft == FaultType::HiddenNode) {
    const double duty = rt.interferer_duty * uniform(rng, 0.8, 1.2);
    double target_airtime = 0.0;
    for (std::size_t f = 0; f < n_flows; ++f) {
      if (w.flow_profiles[f].src == target)
        target_airtime += served[f] / (w.links[w.flow_profiles[f].link].capacity_bps * dt);
    }
    for (std::size_t f = 0; f < n_flows; ++f) {
      if (w.flow_profiles[f].src == target) collision[f] = std::min(1.0, duty);
      if (fault.second && w.flow_profiles[f].src == *fault.second) collision[f] = std::min(1.0, target_airtime);
    }
  }

  // Delivery and per-flow measurements.
  std::vector<double> carried_jitter(n_flows, 0.0);
  for (std::size_t f = 0; f < n_flows; ++f) {
    const auto& fp = w.flow_profiles[f];
    const auto& ls = w.links[fp.link];
    const auto src = static_cast<std::size_t>(fp.src);
    const auto dst = static_cast<std::size_t>(fp.dst);
    auto& fs = w.flows[f];
    const double noise = normal(rng, 0.0, 0.03);
    carried_jitter[f] = fs.jitter_ms;
    fs = FlowState{fp.src, fp.dst};
    if (!usable(fp)) {
      if (generated[f] > 0.0) {
        fs.offered_bps = generated[f];
        fs.loss = 1.0;
      }
      continue;
    }
    const double chan_loss = std::clamp(ls.base_loss + channel.residual_retx_loss * ls.frame_error + collision[f], 0.0, 1.0);
    const double delivered = served[f] * (1.0 - chan_loss);
    const double lost = dropped[f] + (served[f] - delivered);
    fs.offered_bps = backlog_flow[f] / dt;
    fs.sent_bps = served[f] / dt;
    fs.delivered_bps = delivered / dt;
    fs.loss = (lost + delivered) > 0.0 ? lost / (lost + delivered) : 0.0;
    fs.retx_rate = std::min(0.95, ls.frame_error + collision[f]);
    if (fs.sent_bps <= 0.0) continue;
    const auto& sp = w.node_profiles[src];
    const auto& dp = w.node_profiles[dst];
    const double attempts = 1.0 / (1.0 - fs.retx_rate);
    const double mac_ms =
        (sp.packet_bits / ls.phy_rate_bps + channel.frame_overhead_us * 1e-6) * 1000.0 * attempts / (1.0 - util);
    const double drain = served_node[src] / dt;
    double queue_ms = drain > 0.0 ? w.nodes[src].queue_bits / drain * 1000.0 : (w.nodes[src].queue_bits > 0 ? kQueueDelayCapMs : 0.0);
    queue_ms = std::min(queue_ms, kQueueDelayCapMs);
    const double app_ms = sp.app_base_ms * w.nodes[src].app_latency_multiplier +
                          dp.app_base_ms * w.nodes[dst].app_latency_multiplier;
    fs.latency_ms = std::max(0.0, (w.link_profiles[fp.link].propagation_ms + mac_ms + queue_ms + app_ms) * (1.0 + noise));
  }

  if (!active) {
    for (std::size_t f = 0; f < n_flows; ++f) {
      const auto& fs = w.flows[f];
      if (fs.sent_bps <= 0.0) continue;
      const bool first = w.nominal_latency[f] <= 0.0;
      auto track = [&](double& avg, double v) { avg = first ? v : avg + kNominalGain * (v - avg); };
      track(w.nominal_latency[f], fs.latency_ms);
      track(w.nominal_loss[f], fs.loss);
      track(w.nominal_retx[f], fs.retx_rate);
    }
  } else if (rt.applied) {
    spill_over(w, ft, target, channel);
  }

  for (std::size_t f = 0; f < n_flows; ++f) {
    auto& fs = w.flows[f];
    if (fs.sent_bps <= 0.0 || fs.latency_ms <= 0.0) {
      w.prev_latency[f] = 0.0;
      continue;
    }
    const double prev = w.prev_latency[f];
    const double prev_jitter = prev > 0.0 ? carried_jitter[f] : 0.0;
    fs.jitter_ms = prev > 0.0 ? prev_jitter + (std::abs(fs.latency_ms - prev) - prev_jitter) / 4.0 : 0.05 * fs.latency_ms;
    w.prev_latency[f] = fs.latency_ms;
  }

  // Host resources follow offered load and queue occupancy.
  for (std::size_t v = 0; v < n_nodes; ++v) {
    auto& node = w.nodes[v];
    const double cpu_noise = normal(rng, 0.0, 0.015);
    const double mem_noise = normal(rng, 0.0, 0.01);
    if (!node.alive) {
      node.cpu_pct = 0.0;
      node.mem_pct = 0.0;
      continue;
    }
    const auto& np = w.node_profiles[v];
    double tx = 0.0;
    for (std::size_t f = 0; f < n_flows; ++f) {
      if (w.flow_profiles[f].src == static_cast<NodeId>(v)) tx += generated[f];
    }
    double cpu = np.cpu_base + 0.25 * std::min(tx / np.nominal_capacity_bps, 4.0) + cpu_noise;
    if (ft == FaultType::AppSlowdown && static_cast<NodeId>(v) == target) cpu += rt.cpu_extra;
    const double bloat_ref = channel.base_queue_cap_pkts * 20.0 * np.packet_bits;
    const double mem = np.mem_base + 0.3 * std::min(1.0, node.queue_bits / bloat_ref) + mem_noise;
    node.cpu_pct = std::clamp(cpu, 0.0, 1.0);
    node.mem_pct = std::clamp(mem, 0.0, 1.0);
  }
}

RawTrace run_window(Scenario scenario, const Topology& topology, const TrafficProfile& traffic,
                    const FaultSpec& fault, const WindowSchedule& schedule, std::uint64_t seed,
                    const ChannelConfig& channel) {
  schedule.validate();
  topology.validate();
  traffic.validate();
  fault.validate(topology);
  Rng rng(seed);
  World world = make_world(topology, traffic, channel, rng);
  RawTrace trace;
  trace.scenario = scenario;
  trace.topology = topology;
  trace.traffic = traffic;
  trace.fault = fault;
  trace.schedule = schedule;
  trace.node_profiles = world.node_profiles;
  const int ticks = schedule.ticks();
  trace.snapshots.reserve(static_cast<std::size_t>(ticks));
  for (int tick = 0; tick < ticks; ++tick) {
    step(world, traffic, fault, schedule, channel, tick, rng);
    trace.snapshots.push_back({tick, schedule.tick_time_s(tick), world.nodes, world.links, world.flows});
  }
  return trace;
}

std::vector<std::size_t> flows_touching(const RawTrace& trace, NodeId node) {
  std::vector<std::size_t> out;
  if (trace.snapshots.empty()) return out;
  const auto& flows = trace.snapshots.front().flows;
  for (std::size_t f = 0; f < flows.size(); ++f) {
    if (flows[f].src == node || flows[f].dst == node) out.push_back(f);
  }
  return out;
}

}  // namespace wifidiag::sim
