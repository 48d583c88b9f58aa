#include <gtest/gtest.h>

#include "support/phenomenology.hpp"
#include "wifidiag/errors.hpp"
#include "wifidiag/sim.hpp"

using namespace wifidiag;

namespace {

oracle::Window window(FaultType f, std::uint64_t seed, Scenario s = Scenario::IotApSta) {
  return oracle::run_fault(f, s, seed);
}

// Mean of a per-flow quantity over the target's flows after injection.
template <typename Fn>
double post_mean(const sim::RawTrace& t, NodeId node, Fn&& fn) {
  double sum = 0.0;
  int n = 0;
  for (int k = t.schedule.injection_tick(); k < t.schedule.ticks(); ++k) {
    for (auto f : sim::flows_touching(t, node)) {
      sum += fn(t.snapshots[static_cast<std::size_t>(k)].flows[f]);
      ++n;
    }
  }
  return n ? sum / n : 0.0;
}

int zero_delivery_ticks(const sim::RawTrace& t, NodeId node) {
  int count = 0;
  for (int k = t.schedule.injection_tick(); k < t.schedule.ticks(); ++k) {
    for (auto f : sim::flows_touching(t, node)) {
      if (t.snapshots[static_cast<std::size_t>(k)].flows[f].delivered_bps <= 0.0) ++count;
    }
  }
  return count;
}

// The symptom each fault's primary severity parameter drives.
double symptom(const oracle::Window& w) {
  const auto& t = w.trace;
  const NodeId n = *w.spec.target;
  switch (w.spec.fault) {
    case FaultType::PoorLinkQuality:
    case FaultType::HiddenNode:
    case FaultType::QueueOverflow:
    case FaultType::TrafficOverload:
      return post_mean(t, n, [](const auto& f) { return f.loss; });
    case FaultType::AppSlowdown:
    case FaultType::BufferBloat:
      return post_mean(t, n, [](const auto& f) { return f.latency_ms; });
    case FaultType::RateAdaptationFailure:
      return post_mean(t, n, [](const auto& f) { return f.retx_rate; });
    case FaultType::ProbeFailure:
    case FaultType::BeaconLoss:
      return zero_delivery_ticks(t, n);
    default:
      return 0.0;
  }
}

}  // namespace

TEST(Sim, WindowHasOneSnapshotPerTick) {
  const auto w = window(FaultType::Normal, 1);
  EXPECT_EQ(w.trace.snapshots.size(), 180u);
  for (int k = 0; k < 180; ++k) EXPECT_EQ(w.trace.snapshots[static_cast<std::size_t>(k)].tick, k);
}

TEST(Sim, DeterministicPerSeed) {
  for (auto s : kAllScenarios) {
    EXPECT_EQ(window(FaultType::HiddenNode, 3, s).trace, window(FaultType::HiddenNode, 3, s).trace);
  }
}

TEST(Sim, InjectionGatesEveryFault) {
  for (auto s : kAllScenarios) {
    const auto normal = window(FaultType::Normal, 6, s);
    for (auto f : injectable_faults()) {
      const auto w = window(f, 6, s);
      for (int k = 0; k < 60; ++k) {
        ASSERT_EQ(w.trace.snapshots[static_cast<std::size_t>(k)], normal.trace.snapshots[static_cast<std::size_t>(k)])
            << to_string(f) << " tick " << k;
      }
    }
  }
}

TEST(Sim, Conservation) {
  for (auto s : kAllScenarios) {
    for (auto f : injectable_faults()) {
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        for (const auto& snap : window(f, seed, s).trace.snapshots) {
          for (const auto& fs : snap.flows) {
            ASSERT_LE(fs.delivered_bps, fs.offered_bps + 1e-9);
            ASSERT_LE(fs.sent_bps, fs.offered_bps + 1e-9);
            ASSERT_GE(fs.loss, 0.0);
            ASSERT_LE(fs.loss, 1.0);
            ASSERT_GE(fs.latency_ms, 0.0);
          }
          for (const auto& n : snap.nodes) {
            if (!n.alive) ASSERT_FALSE(n.associated);
          }
        }
      }
    }
  }
}

TEST(Sim, NormalWindowStaysHealthy) {
  for (auto s : kAllScenarios) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto w = window(FaultType::Normal, seed, s);
      for (const auto& snap : w.trace.snapshots) {
        for (const auto& n : snap.nodes) {
          ASSERT_TRUE(n.alive);
          ASSERT_TRUE(n.app_running);
        }
      }
      const auto all = oracle::series(w.trace, 0, 0, 180);
      EXPECT_LT(oracle::median(all.loss), 0.1);
    }
  }
}

TEST(Sim, NormalFaultLeavesWorldUnchanged) {
  const auto topo = build_topology(Scenario::H2hApSta, 7, 2);
  const auto traffic = build_traffic_profile(Scenario::H2hApSta, topo, 2);
  Rng rng(2);
  auto world = sim::make_world(topo, traffic, {}, rng);
  const auto before = world;
  sim::apply_fault(world, FaultSpec{}, {}, rng);
  EXPECT_EQ(world, before);
}

TEST(Sim, AppCrashKeepsNodeAlive) {
  const auto w = window(FaultType::AppCrash, 4);
  const auto target = static_cast<std::size_t>(*w.spec.target);
  const auto& last = w.trace.snapshots.back();
  EXPECT_FALSE(last.nodes[target].app_running);
  EXPECT_TRUE(last.nodes[target].alive);
}

TEST(Sim, TargetOutsideTopologyRejected) {
  const auto w = window(FaultType::Normal, 1);
  FaultSpec bad;
  bad.fault = FaultType::NodeCrash;
  bad.target = 99;
  EXPECT_THROW(sim::run_window(w.trace.scenario, w.trace.topology, w.trace.traffic, bad, w.trace.schedule, 1),
               InvalidFaultError);
}

TEST(Sim, PreInjectionNeutrality) {
  // Same topology and traffic with and without each fault: pre-injection
  // throughput must not move.
  double fault_sum = 0.0, normal_sum = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto scenario = kAllScenarios[seed % 3];
    const auto fault = injectable_faults()[seed % 11];
    const auto f = oracle::run_fault(fault, scenario, seed);
    const auto n = oracle::rerun_with(f, FaultSpec{}, seed);
    for (int k = 0; k < 60; ++k) {
      for (const auto& fs : f.trace.snapshots[static_cast<std::size_t>(k)].flows) fault_sum += fs.delivered_bps;
      for (const auto& fs : n.trace.snapshots[static_cast<std::size_t>(k)].flows) normal_sum += fs.delivered_bps;
    }
  }
  EXPECT_LT(std::abs(fault_sum - normal_sum) / normal_sum, 0.05);
}

TEST(Sim, FaultSignatures) {
  for (auto s : kAllScenarios) {
    for (auto f : injectable_faults()) {
      for (std::uint64_t seed = 100; seed < 105; ++seed) {
        const auto w = oracle::run_fault(f, s, seed);
        const auto why = oracle::check_signature(w, seed);
        EXPECT_FALSE(why.has_value()) << to_string(f) << " " << to_string(s) << " seed " << seed << ": " << *why;
      }
    }
  }
}

TEST(Sim, MonotoneSeverity) {
  for (auto f : injectable_faults()) {
    const auto param = primary_severity_param(f);
    if (!param) continue;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      for (auto s : kAllScenarios) {
        const auto base = oracle::run_fault(f, s, seed);
        auto doubled = base.spec;
        doubled.severity[std::string(*param)] *= 2.0;
        const auto more = oracle::rerun_with(base, doubled, seed);
        EXPECT_GE(symptom(more) + 1e-9, symptom(base))
            << to_string(f) << " " << to_string(s) << " seed " << seed << " param " << *param;
      }
    }
  }
}
