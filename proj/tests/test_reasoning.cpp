#include <gtest/gtest.h>

#include <set>

#include "wifidiag/errors.hpp"
#include "wifidiag/reasoning.hpp"
#include "support/calibration_oracle.hpp"

using namespace wifidiag;
using namespace wifidiag::reasoning;
using telemetry::WarningEvent;
using namespace oracle;

namespace {

const FeatureSpace& space() { return FeatureSpace::defaults(); }

Binary set_of(std::initializer_list<const char*> names) {
  Binary b(static_cast<std::size_t>(space().dim()), 0);
  for (const char* n : names) b[static_cast<std::size_t>(space().index_of(n))] = 1;
  return b;
}

}  // namespace

TEST(Space, DefaultsAreTenUniqueNames) {
  const auto& s = space();
  EXPECT_EQ(s.dim(), 10);
  EXPECT_EQ(std::set<std::string>(s.names.begin(), s.names.end()).size(), 10u);
  EXPECT_EQ(s.names.front(), "connectivity_loss");
  EXPECT_EQ(s.names.back(), "resource_exhaustion");
  EXPECT_NO_THROW(s.validate());
  EXPECT_THROW(s.index_of("vibes"), ConfigError);
}

TEST(Space, JsonRoundTripAndStrictness) {
  const auto j = to_json(space());
  const auto back = feature_space_from_json(j);
  EXPECT_EQ(back.names, space().names);
  EXPECT_EQ(back.warning_map, space().warning_map);
  EXPECT_EQ(back.fault_map, space().fault_map);
  auto extra = j;
  extra["colour"] = "blue";
  EXPECT_THROW(feature_space_from_json(extra), ConfigError);
  auto dup = j;
  dup["names"][1] = dup["names"][0];
  EXPECT_THROW(feature_space_from_json(dup), ConfigError);
  auto unknown = j;
  unknown["fault_map"]["NodeCrash"] = {"not_a_feature"};
  EXPECT_THROW(feature_space_from_json(unknown), ConfigError);
}

TEST(GroundTruth, Examples) {
  EXPECT_EQ(build_ground_truth({}, FaultType::Normal), Binary(10, 0));
  const WarningEvent loss{70, 1, telemetry::WarningKind::PacketLoss, 0.5};
  EXPECT_EQ(build_ground_truth({loss}, FaultType::Normal), set_of({"elevated_packet_loss"}));
  const WarningEvent down{70, 1, telemetry::WarningKind::ProcessDown, 1.0};
  EXPECT_EQ(build_ground_truth({down, down}, FaultType::AppCrash),
            set_of({"application_failure", "throughput_degradation"}));
}

TEST(GroundTruth, FaultTable) {
  const std::map<FaultType, Binary> want = {
      {FaultType::NodeCrash, set_of({"connectivity_loss", "throughput_degradation"})},
      {FaultType::PoorLinkQuality,
       set_of({"signal_degradation", "elevated_packet_loss", "elevated_jitter", "throughput_degradation"})},
      {FaultType::AppCrash, set_of({"application_failure", "throughput_degradation"})},
      {FaultType::AppSlowdown, set_of({"application_failure", "elevated_latency"})},
      {FaultType::TrafficOverload, set_of({"resource_exhaustion", "elevated_latency", "elevated_packet_loss"})},
      {FaultType::HiddenNode, set_of({"elevated_packet_loss", "excessive_retransmissions", "elevated_latency"})},
      {FaultType::RateAdaptationFailure, set_of({"throughput_degradation", "excessive_retransmissions"})},
      {FaultType::ProbeFailure, set_of({"connectivity_loss"})},
      {FaultType::BeaconLoss, set_of({"connectivity_loss"})},
      {FaultType::BufferBloat, set_of({"elevated_latency", "queue_saturation"})},
      {FaultType::QueueOverflow, set_of({"elevated_packet_loss", "queue_saturation"})},
      {FaultType::Normal, Binary(10, 0)},
  };
  for (const auto& [f, b] : want) EXPECT_EQ(build_ground_truth({}, f), b) << to_string(f);
  const std::map<telemetry::WarningKind, const char*> w = {
      {telemetry::WarningKind::ConnectivityDegradation, "connectivity_loss"},
      {telemetry::WarningKind::PacketLoss, "elevated_packet_loss"},
      {telemetry::WarningKind::ExcessiveDelay, "elevated_latency"},
      {telemetry::WarningKind::ProcessDown, "application_failure"},
      {telemetry::WarningKind::ResourceAnomaly, "resource_exhaustion"},
      {telemetry::WarningKind::Reassociation, "connectivity_loss"},
  };
  for (const auto& [k, name] : w) EXPECT_EQ(build_ground_truth({{0, 0, k, 1.0}}, FaultType::Normal), set_of({name}));
}

TEST(Binarize, Examples) {
  EXPECT_EQ(binarize({0.3, 0.8}, {0.5, 0.5}), (Binary{0, 1}));
  EXPECT_EQ(binarize({0.0, 0.2, 1.0}, {0, 0, 0}), (Binary{1, 1, 1}));
  EXPECT_EQ(binarize({0.5}, {0.5}), (Binary{1}));
  EXPECT_THROW(binarize({0.5}, {0.5, 0.2}), ContractError);
}

TEST(Binarize, RaisingAThresholdNeverGrowsTheSet) {
  Rng rng(9);
  for (int trial = 0; trial < 2000; ++trial) {
    Scores e(10), tau(10);
    for (int i = 0; i < 10; ++i) {
      e[static_cast<std::size_t>(i)] = uniform(rng, 0, 1);
      tau[static_cast<std::size_t>(i)] = uniform(rng, 0, 1);
    }
    const auto before = binarize(e, tau);
    const auto i = static_cast<std::size_t>(uniform_int(rng, 0, 9));
    tau[i] = uniform(rng, tau[i], 1.0);
    const auto after = binarize(e, tau);
    for (std::size_t k = 0; k < 10; ++k) EXPECT_LE(after[k], before[k]);
  }
}

TEST(Scores, Examples) {
  const auto same = explanation_scores(set_of({"elevated_latency"}), set_of({"elevated_latency"}));
  EXPECT_EQ(same.ep, 1.0);
  EXPECT_EQ(same.er, 1.0);
  EXPECT_EQ(same.ef1, 1.0);
  const auto disjoint = explanation_scores(set_of({"elevated_latency"}), set_of({"queue_saturation"}));
  EXPECT_EQ(disjoint.ep, 0.0);
  EXPECT_EQ(disjoint.er, 0.0);
  EXPECT_EQ(disjoint.ef1, 0.0);
  const auto abc = set_of({"connectivity_loss", "signal_degradation", "elevated_packet_loss"});
  const auto bcd = set_of({"signal_degradation", "elevated_packet_loss", "elevated_latency"});
  const auto s = explanation_scores(abc, bcd);
  EXPECT_NEAR(s.ep, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(s.er, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(s.ef1, 2.0 / 3.0, 1e-12);
}

TEST(Scores, EdgeRules) {
  const Binary empty(10, 0);
  const auto both = explanation_scores(empty, empty);
  EXPECT_EQ(both.ep, 1.0);
  EXPECT_EQ(both.er, 1.0);
  EXPECT_EQ(both.ef1, 1.0);
  const auto no_pred = explanation_scores(empty, set_of({"elevated_latency"}));
  EXPECT_EQ(no_pred.ep, 0.0);
  EXPECT_EQ(no_pred.er, 0.0);
  EXPECT_EQ(no_pred.ef1, 0.0);
  const auto no_truth = explanation_scores(set_of({"elevated_latency"}), empty);
  EXPECT_EQ(no_truth.ep, 0.0);
  EXPECT_EQ(no_truth.er, 0.0);
  EXPECT_EQ(no_truth.ef1, 0.0);
  EXPECT_THROW(explanation_scores({1, 0}, {1}), ContractError);
  EXPECT_THROW(explanation_scores({2, 0}, {1, 0}), ContractError);
}

TEST(Scores, BoundsAndSymmetry) {
  Rng rng(12);
  for (int trial = 0; trial < 5000; ++trial) {
    Binary a(10), b(10);
    for (std::size_t i = 0; i < 10; ++i) {
      a[i] = uniform_int(rng, 0, 1);
      b[i] = uniform_int(rng, 0, 1);
    }
    const auto s = explanation_scores(a, b);
    const auto t = explanation_scores(b, a);
    for (double v : {s.ep, s.er, s.ef1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_EQ(s.ep, t.er);
    EXPECT_EQ(s.er, t.ep);
    EXPECT_DOUBLE_EQ(s.ef1, t.ef1);
    if (s.ep > 0 && s.er > 0) {
      EXPECT_GE(s.ef1, std::min(s.ep, s.er) - 1e-12);
      EXPECT_LE(s.ef1, std::max(s.ep, s.er) + 1e-12);
    }
  }
}

TEST(Calibration, SeparableDimensionReachesOne) {
  std::vector<CalibrationPair> pairs = {{{0.9, 0.1}, {1, 0}}, {{0.7, 0.4}, {1, 1}}, {{0.2, 0.3}, {0, 0}},
                                        {{0.1, 0.8}, {0, 1}}};
  const auto c = calibrate_thresholds(pairs);
  EXPECT_EQ(c.dim_f1[0], 1.0);
  EXPECT_EQ(c.tau[0], 0.7);
  EXPECT_EQ(c.dim_f1[1], 1.0);
  EXPECT_EQ(c.tau[1], 0.4);
}

TEST(Calibration, ConstantZeroTruthPredictsNothing) {
  const std::vector<CalibrationPair> pairs = {{{0.2}, {0}}, {{0.9}, {0}}, {{0.5}, {0}}};
  const auto c = calibrate_thresholds(pairs);
  EXPECT_GT(c.tau[0], 0.9);
  for (const auto& b : predictions(pairs, c.tau)) EXPECT_EQ(b[0], 0);
  EXPECT_EQ(c.dim_f1[0], 1.0);
}

TEST(Calibration, ConstantZeroTruthWithTopScoreOne) {
  const std::vector<CalibrationPair> pairs = {{{1.0}, {0}}, {{0.4}, {0}}};
  const auto c = calibrate_thresholds(pairs);
  for (const auto& b : predictions(pairs, c.tau)) EXPECT_EQ(b[0], 0);
  EXPECT_EQ(c.dim_f1[0], 1.0);
}

TEST(Calibration, MatchesJointBruteForce) {
  Rng rng(2024);
  int instances = 0;
  for (int n = 1; n <= 6; ++n) {
    for (int d = 1; d <= 2; ++d) {
      for (int trial = 0; trial < 300; ++trial) {
        const auto pairs = random_pairs(rng, n, d, trial % 2 == 0);
        const auto c = calibrate_thresholds(pairs);
        const auto want = brute_force(pairs);
        ASSERT_EQ(predictions(pairs, c.tau), predictions(pairs, want)) << "n=" << n << " d=" << d << " trial " << trial;
        for (std::size_t i = 0; i < static_cast<std::size_t>(d); ++i)
          EXPECT_DOUBLE_EQ(c.dim_f1[i], oracle_f1(pairs, i, c.tau[i]));
        ++instances;
      }
    }
  }
  EXPECT_EQ(instances, 3600);
}

TEST(Calibration, ParallelMatchesSerial) {
  Rng rng(5);
  const auto pairs = random_pairs(rng, 40, 10, false);
  const auto a = calibrate_thresholds(pairs, 1);
  const auto b = calibrate_thresholds(pairs, 4);
  EXPECT_EQ(a.tau, b.tau);
  EXPECT_EQ(a.micro_ef1, b.micro_ef1);
  EXPECT_GE(a.sweep_best_micro_ef1, a.micro_ef1);
}

TEST(Calibration, Contracts) {
  EXPECT_THROW(calibrate_thresholds({}), ContractError);
  EXPECT_THROW(calibrate_thresholds({{{0.1, 0.2}, {1, 0}}, {{0.1}, {1}}}), ContractError);
  EXPECT_THROW(calibrate_thresholds({{{1.5}, {1}}}), ContractError);
}

TEST(Calibration, MicroEf1PoolsCells) {
  // Cells: (1,1) tp, (1,0) fp, (0,1) fn, (0,0) tn -> 2*1 / (2*1 + 1 + 1).
  const std::vector<CalibrationPair> pairs = {{{0.9, 0.9}, {1, 0}}, {{0.1, 0.1}, {1, 0}}};
  EXPECT_DOUBLE_EQ(micro_ef1(pairs, {0.5, 0.5}), 0.5);
}

TEST(Mean, AveragesRows) {
  const auto m = mean_scores({{1, 0, 0}, {0, 1, 0.5}});
  EXPECT_DOUBLE_EQ(m.ep, 0.5);
  EXPECT_DOUBLE_EQ(m.er, 0.5);
  EXPECT_DOUBLE_EQ(m.ef1, 0.25);
  EXPECT_EQ(mean_scores({}).ef1, 0.0);
}
