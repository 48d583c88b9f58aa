#include <gtest/gtest.h>

#include <map>

#include "support/phenomenology.hpp"
#include "wifidiag/errors.hpp"
#include "wifidiag/telemetry.hpp"

using namespace wifidiag;
using namespace wifidiag::telemetry;

namespace {

// Independent re-evaluation of one warning rule at its timestamp.
class WarningOracle {
 public:
  explicit WarningOracle(const sim::RawTrace& t) : t_(t) {
    const auto n = static_cast<std::size_t>(t.n_nodes());
    lat_.assign(t.snapshots.size(), std::vector<double>(n, 0.0));
    loss_.assign(t.snapshots.size(), std::vector<double>(n, 0.0));
    std::vector<std::vector<double>> pre(n);
    for (std::size_t k = 0; k < t.snapshots.size(); ++k) {
      for (std::size_t v = 0; v < n; ++v) {
        std::vector<double> lats, losses;
        for (const auto& fs : t.snapshots[k].flows) {
          if (fs.src != static_cast<NodeId>(v) && fs.dst != static_cast<NodeId>(v)) continue;
          if (fs.sent_bps > 0) lats.push_back(fs.latency_ms);
          if (fs.offered_bps > 0) losses.push_back(fs.loss);
        }
        lat_[k][v] = oracle::mean(lats);
        loss_[k][v] = oracle::mean(losses);
        if (static_cast<int>(k) < t.schedule.injection_tick() && !lats.empty()) pre[v].push_back(lat_[k][v]);
      }
    }
    for (auto& p : pre) base_.push_back(oracle::median(p));
  }

  bool holds(const WarningEvent& e, const WarningRuleConfig& r) const {
    const auto k = static_cast<std::size_t>(e.t_s);
    const auto v = static_cast<std::size_t>(e.node);
    const auto& node = t_.snapshots[k].nodes[v];
    if (!node.alive) return false;
    switch (e.kind) {
      case WarningKind::ConnectivityDegradation:
        for (std::size_t f = 0; f < t_.n_flows(); ++f) {
          if (t_.snapshots[k].flows[f].dst != e.node || k + 1 < static_cast<std::size_t>(r.connectivity_ticks)) continue;
          bool silent = true;
          for (std::size_t j = k + 1 - r.connectivity_ticks; j <= k; ++j)
            silent = silent && t_.snapshots[j].flows[f].delivered_bps <= 0.0;
          if (silent) return true;
        }
        return false;
      case WarningKind::PacketLoss: {
        const std::size_t from = k + 1 >= static_cast<std::size_t>(r.loss_window_ticks) ? k + 1 - r.loss_window_ticks : 0;
        double sum = 0.0;
        for (std::size_t j = from; j <= k; ++j) sum += loss_[j][v];
        return sum / static_cast<double>(k - from + 1) > r.loss_threshold;
      }
      case WarningKind::ExcessiveDelay:
        return base_[v] > 0 && lat_[k][v] > r.delay_factor * base_[v];
      case WarningKind::ProcessDown:
        return !node.app_running;
      case WarningKind::ResourceAnomaly:
        return node.cpu_pct > r.resource_threshold || node.mem_pct > r.resource_threshold;
      case WarningKind::Reassociation:
        return k > 0 && !t_.snapshots[k - 1].nodes[v].associated && node.associated;
    }
    return false;
  }

 private:
  const sim::RawTrace& t_;
  std::vector<std::vector<double>> lat_, loss_;
  std::vector<double> base_;
};

}  // namespace

TEST(Flow, TwoRecordsPerFlowTick) {
  const auto w = oracle::run_fault(FaultType::Normal, Scenario::H2hApSta, 3);
  const auto recs = emit_flow(w.trace);
  EXPECT_EQ(recs.size(), 2 * w.trace.n_flows() * 180);
  std::map<std::tuple<int, NodeId, NodeId>, double> sender;
  std::vector<double> ratios;
  for (const auto& r : recs) {
    if (r.side == Side::Sender) sender[{r.t_s, r.src, r.dst}] = r.throughput_bps;
  }
  for (const auto& r : recs) {
    if (r.side != Side::Receiver) continue;
    const double s = sender.at({r.t_s, r.src, r.dst});
    EXPECT_LE(r.throughput_bps, s + 1e-9);
    if (s > 0) ratios.push_back(r.throughput_bps / s);
  }
  EXPECT_GE(oracle::median(ratios), 0.97);
}

TEST(Flow, CrashedEndpointStopsReporting) {
  const auto w = oracle::run_fault(FaultType::NodeCrash, Scenario::IotApSta, 2);
  const NodeId target = *w.spec.target;
  std::size_t expected = 0;
  for (const auto& snap : w.trace.snapshots) {
    for (const auto& fs : snap.flows) {
      expected += snap.nodes[static_cast<std::size_t>(fs.src)].alive;
      expected += snap.nodes[static_cast<std::size_t>(fs.dst)].alive;
    }
  }
  const auto recs = emit_flow(w.trace);
  EXPECT_EQ(recs.size(), expected);
  bool saw_peer = false;
  for (const auto& r : recs) {
    if (r.t_s < 60) continue;
    EXPECT_NE(r.reporter(), target);
    if (r.side == Side::Receiver && r.src == target) {
      EXPECT_EQ(r.throughput_bps, 0.0);
      saw_peer = true;
    }
  }
  EXPECT_TRUE(saw_peer);
}

TEST(Flow, EmptyFlowSetGivesNoRecords) {
  auto w = oracle::run_fault(FaultType::Normal, Scenario::IotApSta, 2);
  for (auto& s : w.trace.snapshots) s.flows.clear();
  EXPECT_TRUE(emit_flow(w.trace).empty());
}

TEST(Packet, OneRecordPerFlowSegment) {
  const auto w = oracle::run_fault(FaultType::Normal, Scenario::H2hApSta, 5);
  EXPECT_EQ(emit_packet_features(w.trace).size(), w.trace.n_flows() * 18);
  EXPECT_EQ(emit_packet_features(w.trace, 7).size(), w.trace.n_flows() * 26);
  EXPECT_EQ(emit_packet_features(w.trace), emit_packet_features(w.trace));
  EXPECT_THROW(emit_packet_features(w.trace, 0), ContractError);
}

TEST(Packet, RateAdaptationFailureRaisesRetransmissions) {
  for (auto s : kAllScenarios) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto w = oracle::run_fault(FaultType::RateAdaptationFailure, s, seed);
      const NodeId target = *w.spec.target;
      std::vector<double> pre, post;
      for (const auto& p : emit_packet_features(w.trace)) {
        if (p.src != target && p.dst != target) continue;
        (p.t_s < 60 ? pre : post).push_back(p.retx_fraction);
      }
      EXPECT_GE(oracle::mean(post), 2.0 * oracle::mean(pre)) << to_string(s) << " seed " << seed;
    }
  }
}

TEST(Packet, ZeroTrafficGivesZeroRates) {
  auto w = oracle::run_fault(FaultType::Normal, Scenario::IotApSta, 2);
  for (auto& s : w.trace.snapshots) {
    for (auto& f : s.flows) f = sim::FlowState{f.src, f.dst};
  }
  for (const auto& p : emit_packet_features(w.trace)) {
    EXPECT_EQ(p.mean_fwd_rate_pps, 0.0);
    EXPECT_EQ(p.mean_bwd_rate_pps, 0.0);
    EXPECT_EQ(p.retx_fraction, 0.0);
  }
}

TEST(Warning, EveryEventIsRederivable) {
  const WarningRuleConfig rules;
  for (auto s : kAllScenarios) {
    for (auto f : kFaultTable) {
      const auto w = oracle::run_fault(f.type, s, 21);
      const WarningOracle check(w.trace);
      for (const auto& e : emit_warnings(w.trace, rules)) {
        ASSERT_TRUE(check.holds(e, rules)) << f.name << " " << to_string(e.kind) << " node " << e.node << " t " << e.t_s;
        ASSERT_GE(e.severity, 0.0);
        ASSERT_LE(e.severity, 1.0);
      }
    }
  }
}

TEST(Warning, NormalWindowsRarelyWarn) {
  std::size_t events = 0, node_ticks = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto w = oracle::run_fault(FaultType::Normal, kAllScenarios[seed % 3], seed);
    events += emit_warnings(w.trace).size();
    node_ticks += static_cast<std::size_t>(w.trace.n_nodes()) * w.trace.snapshots.size();
  }
  EXPECT_LT(static_cast<double>(events) / static_cast<double>(node_ticks), 0.01);
}

TEST(Warning, AppCrashRaisesProcessDown) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto w = oracle::run_fault(FaultType::AppCrash, Scenario::IotAdHoc, seed);
    int hits = 0;
    for (const auto& e : emit_warnings(w.trace))
      hits += e.node == *w.spec.target && e.kind == WarningKind::ProcessDown;
    EXPECT_GE(hits, 1);
  }
}

TEST(Warning, IdleTraceIsSilent) {
  auto w = oracle::run_fault(FaultType::Normal, Scenario::IotApSta, 2);
  for (auto& s : w.trace.snapshots) {
    s.flows.clear();
    for (auto& n : s.nodes) n.cpu_pct = n.mem_pct = 0.0;
  }
  EXPECT_TRUE(emit_warnings(w.trace).empty());
}

TEST(Warning, RulesMustBePositive) {
  const auto w = oracle::run_fault(FaultType::Normal, Scenario::IotApSta, 2);
  WarningRuleConfig bad;
  bad.loss_threshold = 0.0;
  EXPECT_THROW(emit_warnings(w.trace, bad), ConfigError);
}

TEST(Monitor, CadenceAndCrashSilence) {
  const auto normal = oracle::run_fault(FaultType::Normal, Scenario::H2hApSta, 8);
  const auto recs = emit_monitor(normal.trace);
  EXPECT_EQ(recs.size(), static_cast<std::size_t>(normal.trace.n_nodes()) * 36);
  for (const auto& r : recs) EXPECT_TRUE(r.app_process_up);

  const auto crash = oracle::run_fault(FaultType::NodeCrash, Scenario::H2hApSta, 8);
  int post = 0, pre = 0;
  for (const auto& r : emit_monitor(crash.trace)) {
    if (r.node != *crash.spec.target) continue;
    (r.t_s >= 60 ? post : pre) += 1;
  }
  EXPECT_EQ(post, 0);
  EXPECT_EQ(pre, 12);
}

TEST(Bundle, StreamsShareTheWindow) {
  for (auto f : injectable_faults()) {
    const auto w = oracle::run_fault(f, Scenario::IotAdHoc, 13);
    const auto b = emit_all(w.trace);
    EXPECT_EQ(b.present().size(), 4u);
    EXPECT_NO_THROW(b.validate(180));
  }
  TelemetryBundle empty;
  EXPECT_THROW(empty.validate(180), ContractError);
}

TEST(Bundle, DropModalities) {
  const auto w = oracle::run_fault(FaultType::Normal, Scenario::IotApSta, 1);
  const auto full = emit_all(w.trace);
  Rng rng(77);
  EXPECT_EQ(drop_modalities(full, 0.0, rng), full);

  TelemetryBundle light;
  light.warning = std::vector<WarningEvent>{};
  light.flow = std::vector<FlowRecord>{};
  light.packet = std::vector<PacketFlowFeatures>{};
  light.monitor = std::vector<MonitorRecord>{};
  int incomplete = 0;
  for (int i = 0; i < 2000; ++i) incomplete += drop_modalities(light, 0.1, rng).present().size() < 4;
  EXPECT_GE(incomplete, 160);
  EXPECT_LE(incomplete, 240);

  TelemetryBundle single;
  single.warning = std::vector<WarningEvent>{};
  for (int i = 0; i < 500; ++i) {
    EXPECT_EQ(drop_modalities(light, 0.5, rng).present().size() >= 3, true);
    EXPECT_EQ(drop_modalities(single, 0.5, rng).present().size(), 1u);
  }
  EXPECT_THROW(drop_modalities(light, 0.6, rng), ContractError);
}
