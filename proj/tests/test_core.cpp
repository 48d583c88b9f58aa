#include <gtest/gtest.h>

#include <set>

#include "wifidiag/core.hpp"
#include "wifidiag/errors.hpp"

using namespace wifidiag;

TEST(Topology, AdHocMinimalIsConnectedWithoutAp) {
  const auto t = build_topology(Scenario::IotAdHoc, 3, 5);
  EXPECT_EQ(t.size(), 3);
  EXPECT_EQ(t.mode, TopologyMode::AdHoc);
  EXPECT_FALSE(t.ap.has_value());
  EXPECT_TRUE(t.connected());
  EXPECT_NO_THROW(t.validate());
}

TEST(Topology, InfrastructureIsStarAroundNodeZero) {
  const auto t = build_topology(Scenario::H2hApSta, 7, 9);
  ASSERT_TRUE(t.ap.has_value());
  EXPECT_EQ(*t.ap, 0);
  EXPECT_EQ(t.links.size(), 6u);
  for (NodeId n = 1; n < 7; ++n) {
    int to_ap = 0;
    for (const auto& l : t.links) {
      EXPECT_TRUE(l.touches(0));
      if (l.touches(n)) ++to_ap;
    }
    EXPECT_EQ(to_ap, 1) << "node " << n;
  }
  for (const auto& l : t.links) {
    EXPECT_GE(l.rssi_dbm, -95.0);
    EXPECT_LE(l.rssi_dbm, -20.0);
  }
}

TEST(Topology, DeterministicPerSeed) {
  for (auto s : kAllScenarios) EXPECT_EQ(build_topology(s, 7, 42), build_topology(s, 7, 42));
}

TEST(Topology, DistinctSeedsGiveDistinctRssi) {
  std::set<std::vector<double>> seen;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::vector<double> rssi;
    for (const auto& l : build_topology(Scenario::IotApSta, 7, seed).links) rssi.push_back(l.rssi_dbm);
    seen.insert(rssi);
  }
  EXPECT_GE(seen.size(), 99u);
}

TEST(Topology, TooFewNodesRejected) {
  EXPECT_THROW(build_topology(Scenario::IotAdHoc, 2, 1), ConfigError);
}

TEST(Topology, AdHocConnectedOverSeeds) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto t = build_topology(Scenario::IotAdHoc, 7, seed);
    EXPECT_TRUE(t.connected()) << seed;
    EXPECT_NO_THROW(t.validate());
  }
}

TEST(Traffic, IotStarHasOneEntryPerSta) {
  const auto topo = build_topology(Scenario::IotApSta, 5, 3);
  const auto p = build_traffic_profile(Scenario::IotApSta, topo, 3);
  EXPECT_EQ(p.mode, TrafficMode::IoT);
  EXPECT_GT(p.period_s, 0.0);
  std::set<NodeId> stas;
  for (const auto& [key, load] : p.matrix) {
    EXPECT_GT(load, 0.0);
    EXPECT_NE(key.first, key.second);
    EXPECT_TRUE(key.first == 0 || key.second == 0);
    stas.insert(key.first == 0 ? key.second : key.first);
  }
  EXPECT_EQ(stas.size(), 4u);
}

TEST(Traffic, H2hBurstShapeIsHeavyTailed) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto topo = build_topology(Scenario::H2hApSta, 5, seed);
    const auto p = build_traffic_profile(Scenario::H2hApSta, topo, seed);
    EXPECT_GT(p.burstiness, 1.0);
    EXPECT_LE(p.burstiness, 2.0);
  }
}

TEST(Traffic, Deterministic) {
  const auto topo = build_topology(Scenario::IotAdHoc, 7, 8);
  EXPECT_EQ(build_traffic_profile(Scenario::IotAdHoc, topo, 8), build_traffic_profile(Scenario::IotAdHoc, topo, 8));
}

TEST(FaultTable, TotalAndRoundTrips) {
  for (const auto& info : kFaultTable) {
    EXPECT_EQ(fault_type_from_string(info.name), info.type);
    EXPECT_EQ(fault_category_from_string(to_string(info.category)), info.category);
    EXPECT_EQ(phenomenon_from_string(to_string(info.phenomenon)), info.phenomenon);
    EXPECT_EQ(&fault_info(info.type), &info);
  }
  EXPECT_EQ(injectable_faults().size(), 11u);
  EXPECT_EQ(fault_info(FaultType::NodeCrash).category, FaultCategory::Hardware);
  EXPECT_EQ(fault_info(FaultType::NodeCrash).phenomenon, Phenomenon::Disconnect);
  EXPECT_EQ(fault_info(FaultType::BufferBloat).category, FaultCategory::Congestion);
  EXPECT_EQ(fault_info(FaultType::BufferBloat).phenomenon, Phenomenon::Lag);
  EXPECT_EQ(fault_info(FaultType::Normal).phenomenon, Phenomenon::None);
  EXPECT_THROW(fault_type_from_string("Meltdown"), ConfigError);
}

TEST(Schedule, DefaultsAndValidation) {
  WindowSchedule s;
  EXPECT_EQ(s.ticks(), 180);
  EXPECT_EQ(s.injection_tick(), 60);
  s.injection_at_s = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {180, 60, 7.0};
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(FaultSpec, DrawnSpecsAreValid) {
  const SeverityConfig sev;
  const WindowSchedule sched;
  for (auto scenario : kAllScenarios) {
    const auto topo = build_topology(scenario, 7, 4);
    Rng rng(4);
    for (auto f : injectable_faults()) {
      for (int i = 0; i < 10; ++i) {
        const auto spec = draw_fault_spec(f, topo, sched, sev, rng);
        EXPECT_NO_THROW(spec.validate(topo));
        ASSERT_TRUE(spec.target.has_value());
        EXPECT_EQ(spec.injected_at_s, 60);
        const auto& schema = sev.ranges.at(f);
        for (const auto& [name, value] : spec.severity) {
          ASSERT_TRUE(schema.count(name)) << name;
          EXPECT_GE(value, schema.at(name).lo);
          EXPECT_LE(value, schema.at(name).hi);
        }
        if (f == FaultType::HiddenNode) EXPECT_TRUE(spec.second.has_value());
      }
    }
    const auto normal = draw_fault_spec(FaultType::Normal, topo, sched, sev, rng);
    EXPECT_FALSE(normal.target.has_value());
  }
}

TEST(FaultSpec, ApOnlyForItsOwnFaults) {
  const auto topo = build_topology(Scenario::IotApSta, 7, 1);
  const std::set<FaultType> ap_ok = {FaultType::NodeCrash, FaultType::PoorLinkQuality, FaultType::AppSlowdown,
                                     FaultType::RateAdaptationFailure};
  Rng rng(1);
  for (auto f : injectable_faults()) {
    for (int i = 0; i < 40; ++i) {
      const auto spec = draw_fault_spec(f, topo, {}, {}, rng);
      if (!ap_ok.count(f)) EXPECT_NE(*spec.target, 0) << to_string(f);
    }
  }
}

TEST(FaultSpec, TargetOutsideTopologyRejected) {
  const auto topo = build_topology(Scenario::IotApSta, 5, 1);
  FaultSpec spec;
  spec.fault = FaultType::AppCrash;
  spec.target = 17;
  EXPECT_THROW(spec.validate(topo), InvalidFaultError);
  spec.fault = FaultType::Normal;
  EXPECT_THROW(spec.validate(topo), InvalidFaultError);
  spec.target.reset();
  EXPECT_NO_THROW(spec.validate(topo));
  spec.fault = FaultType::NodeCrash;
  EXPECT_THROW(spec.validate(topo), InvalidFaultError);
}
