// Copyright (c) The BCM Broadcast Authors.
// Licensed under the Apache 2.0 License.

#include <algorithm>

#include <gtest/gtest.h>

#include "bcm/adversary.hpp"
#include "bcm/checker.hpp"
#include "bcm/scenarios.hpp"
#include "gen.hpp"

namespace bcm {
namespace {

TraceEvent ev(std::uint64_t tick, NodeId actor, Action action, std::optional<NodeId> peer = {},
              std::optional<AppMessage> app = {}, std::string detail = {}) {
  TraceEvent e;
  e.tick = tick;
  e.actor = actor;
  e.action = action;
  e.peer = peer;
  e.app = std::move(app);
  e.detail = std::move(detail);
  return e;
}

TraceEvent send(std::uint64_t tick, NodeId from, NodeId to, ProtocolMessage msg, AppMessage app) {
  TraceEvent e = ev(tick, from, Action::Send, to, app);
  e.message = std::move(msg);
  return e;
}

std::set<std::string> failing(const std::vector<Verdict>& verdicts) {
  std::set<std::string> out;
  for (const Verdict& v : verdicts) {
    if (!v.holds) out.insert(v.property);
  }
  return out;
}

const Verdict& verdict(const std::vector<Verdict>& verdicts, const std::string& name) {
  for (const Verdict& v : verdicts) {
    if (v.property == name) return v;
  }
  throw std::out_of_range(name);
}

struct Golden {
  ScenarioConfig config;
  std::vector<TraceEvent> trace;
  MessageId m1, m2;
};

const Golden& golden() {
  static const Golden g = [] {
    const GoldenScenario s = golden_handoff_scenario();
    return Golden{s.config, run(s.config).trace, s.m1, s.m2};
  }();
  return g;
}

std::size_t find_delivery(const std::vector<TraceEvent>& trace, NodeId node, const MessageId& id) {
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const TraceEvent& e = trace[i];
    if ((e.action == Action::BcmHDeliver || e.action == Action::BcmSDeliver) && e.actor == node &&
        message_id(*e.app) == id) {
      return i;
    }
  }
  throw std::out_of_range("no delivery");
}

/// Exchanges the records of two deliveries at one node, keeping tick order intact.
std::vector<TraceEvent> swap_deliveries(std::vector<TraceEvent> trace, NodeId node,
                                        const MessageId& a, const MessageId& b) {
  const std::size_t i = find_delivery(trace, node, a);
  const std::size_t j = find_delivery(trace, node, b);
  std::swap(trace[i].app, trace[j].app);
  std::swap(trace[i].peer, trace[j].peer);
  std::swap(trace[i].detail, trace[j].detail);
  return trace;
}

std::vector<TraceEvent> erase_delivery(std::vector<TraceEvent> trace, NodeId node,
                                       const MessageId& id) {
  trace.erase(trace.begin() + static_cast<std::ptrdiff_t>(find_delivery(trace, node, id)));
  return trace;
}

std::vector<TraceEvent> append(std::vector<TraceEvent> trace, TraceEvent e) {
  e.tick = trace.back().tick;
  trace.push_back(std::move(e));
  return trace;
}

TEST(PropertyNames, ThirteenInReportOrder) {
  const auto& names = property_names();
  ASSERT_EQ(names.size(), 13u);
  EXPECT_EQ(names.front(), "BCM-Validity 1");
  EXPECT_EQ(names.back(), "BCM-Safety");
  const std::vector<Verdict> v = check_all(golden().trace, golden().config);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v[i].property, names[i]);
}

TEST(CheckAll, GoldenTraceHoldsEverything) {
  const std::vector<Verdict> v = check_all(golden().trace, golden().config);
  EXPECT_TRUE(all_hold(v));
  for (const Verdict& x : v) EXPECT_TRUE(x.counterexample.empty()) << x.property;
}

TEST(Validity1, ForgedStationDelivery) {
  const AppMessage forged{mss(3), 99, "forged"};
  const auto trace =
      append(golden().trace, ev(0, mss(1), Action::BcmSDeliver, mss(3), forged, "global"));
  const auto v = check_all(trace, golden().config);
  EXPECT_EQ(failing(v), (std::set<std::string>{"BCM-Validity 1"}));
  EXPECT_EQ(verdict(v, "BCM-Validity 1").counterexample.back().app, forged);
}

TEST(Validity2, HostDeliveryWithoutStationSend) {
  const AppMessage forged{mss(3), 77, "x"};
  const auto trace = append(golden().trace, ev(0, mh(2), Action::BcmHDeliver, mss(1), forged));
  EXPECT_EQ(failing(check_all(trace, golden().config)),
            (std::set<std::string>{"BCM-Validity 2"}));
}

TEST(Validity3, DeliveryOfNeverBroadcastHostMessage) {
  const AppMessage ghost{mh(2), 9, "ghost"};
  auto trace = append(golden().trace, send(0, mss(1), mh(2), Ready{ghost, mh(2)}, ghost));
  trace = append(trace, ev(0, mh(2), Action::BcmHDeliver, mss(1), ghost));
  const auto bad = failing(check_all(trace, golden().config));
  EXPECT_TRUE(bad.count("BCM-Validity 3"));
  EXPECT_FALSE(bad.count("BCM-Validity 2"));
}

TEST(Integrity1, DuplicateDeliveryAtStaticHost) {
  const auto& g = golden();
  const std::size_t i = find_delivery(g.trace, mh(2), g.m1);
  const auto v = check_all(append(g.trace, g.trace[i]), g.config);
  EXPECT_EQ(failing(v), (std::set<std::string>{"BCM-Integrity 1", "BCM-Safety"}));
  EXPECT_EQ(verdict(v, "BCM-Integrity 1").counterexample.size(), 2u);
}

TEST(Integrity2, DuplicateDeliveryAtMovedHost) {
  const auto& g = golden();
  const std::size_t i = find_delivery(g.trace, mh(1), g.m1);
  EXPECT_EQ(failing(check_all(append(g.trace, g.trace[i]), g.config)),
            (std::set<std::string>{"BCM-Integrity 1", "BCM-Integrity 2", "BCM-Safety"}));
}

TEST(Termination1, BroadcasterNeverDeliversOwnMessage) {
  const auto& g = golden();
  const auto trace = erase_delivery(g.trace, mh(5), {mh(5), 1});
  const auto bad = failing(check_all(trace, g.config));
  EXPECT_TRUE(bad.count("BCM-Termination 1"));
  EXPECT_TRUE(bad.count("BCM-Termination 3"));
}

TEST(Termination2, StationMissesHostMessage) {
  const auto& g = golden();
  const auto trace = erase_delivery(g.trace, mss(3), g.m1);
  const auto bad = failing(check_all(trace, g.config));
  EXPECT_TRUE(bad.count("BCM-Termination 2"));
  EXPECT_FALSE(bad.count("BCM-Termination 3"));
}

TEST(Termination3, CorrectHostMissesHostMessage) {
  const auto& g = golden();
  const auto trace = erase_delivery(g.trace, mh(6), g.m1);
  EXPECT_EQ(failing(check_all(trace, g.config)), (std::set<std::string>{"BCM-Termination 3"}));
}

ScenarioConfig two_stations_one_host() {
  ScenarioConfig c;
  c.n_mss = 2;
  c.n_mh = 1;
  c.initial_assignment = {{1, 1}};
  return c;
}

TEST(Termination4, HostMissesMessageDeliveredAtDestinationDuringTransit) {
  const AppMessage a{mss(1), 1, "a"};
  const std::vector<TraceEvent> trace = {
      ev(1, mh(1), Action::HandoffStart, mss(1)),
      ev(2, mss(1), Action::BcmSBroadcast, {}, a),
      ev(2, mss(1), Action::BcmSDeliver, mss(1), a, "global"),
      ev(3, mss(2), Action::BcmSDeliver, mss(1), a, "global"),
      ev(4, mh(1), Action::GroupJoin, mss(2), {}, "telepoint=s2"),
  };
  const auto v = check_all(trace, two_stations_one_host());
  EXPECT_EQ(failing(v), (std::set<std::string>{"BCM-Termination 4"}));
  EXPECT_EQ(verdict(v, "BCM-Termination 4").counterexample.size(), 3u);
}

TEST(Termination4, HoldsOnceTheHostDelivers) {
  const AppMessage a{mss(1), 1, "a"};
  const std::vector<TraceEvent> trace = {
      ev(1, mh(1), Action::HandoffStart, mss(1)),
      ev(2, mss(1), Action::BcmSBroadcast, {}, a),
      ev(2, mss(1), Action::BcmSDeliver, mss(1), a, "global"),
      ev(3, mss(2), Action::BcmSDeliver, mss(1), a, "global"),
      ev(4, mh(1), Action::GroupJoin, mss(2), {}, "telepoint=s2"),
      send(5, mss(2), mh(1), ForwardGlobal{a, 1}, a),
      ev(6, mh(1), Action::BcmHDeliver, mss(2), a),
  };
  EXPECT_TRUE(all_hold(check_all(trace, two_stations_one_host())));
}

TEST(Causality1, SecondBroadcastDeliveredFirstAfterHandoff) {
  const auto& g = golden();
  const auto trace = swap_deliveries(g.trace, mss(3), g.m1, g.m2);
  const auto bad = failing(check_all(trace, g.config));
  EXPECT_TRUE(bad.count("BCM-Causality 1"));
  EXPECT_TRUE(bad.count("BCM-Causality 3"));
}

TEST(Causality2, JoinedHostDeliversNewStationMessageFirst) {
  const AppMessage a{mss(1), 1, "a"};
  const AppMessage b{mss(2), 1, "b"};
  const std::vector<TraceEvent> trace = {
      ev(1, mh(1), Action::HandoffStart, mss(1)),
      ev(2, mss(1), Action::BcmSBroadcast, {}, a),
      ev(2, mss(1), Action::BcmSDeliver, mss(1), a, "global"),
      ev(3, mss(2), Action::BcmSDeliver, mss(1), a, "global"),
      ev(4, mss(2), Action::GroupJoin, mh(1)),
      ev(4, mh(1), Action::GroupJoin, mss(2), {}, "telepoint=s2"),
      ev(5, mss(2), Action::BcmSBroadcast, {}, b),
      ev(5, mss(2), Action::BcmSDeliver, mss(2), b, "global"),
      ev(6, mss(1), Action::BcmSDeliver, mss(2), b, "global"),
      send(6, mss(2), mh(1), ForwardGlobal{b, 2}, b),
      send(6, mss(2), mh(1), ForwardGlobal{a, 1}, a),
      ev(7, mh(1), Action::BcmHDeliver, mss(2), b),
      ev(8, mh(1), Action::BcmHDeliver, mss(2), a),
  };
  const auto v = check_all(trace, two_stations_one_host());
  EXPECT_EQ(failing(v), (std::set<std::string>{"BCM-Causality 2", "BCM-Causality 3"}));
  std::vector<TraceEvent> fixed = trace;
  std::swap(fixed[11].app, fixed[12].app);
  EXPECT_TRUE(all_hold(check_all(fixed, two_stations_one_host())));
}

TEST(Causality3, FifoRelatedStationMessagesSwappedAtStation) {
  const auto& g = golden();
  const auto trace = swap_deliveries(g.trace, mss(1), {mss(3), 1}, {mss(3), 2});
  EXPECT_EQ(failing(check_all(trace, g.config)), (std::set<std::string>{"BCM-Causality 3"}));
}

ScenarioConfig group_of_four() {
  ScenarioConfig c;
  c.n_mss = 1;
  c.n_mh = 4;
  for (std::uint32_t h = 1; h <= 4; ++h) c.initial_assignment[h] = 1;
  c.byzantine_set = {1};
  return c;
}

TEST(Safety, CorrectHostDeliversEquivocatedId) {
  const AppMessage a{mh(1), 1, "a"};
  const AppMessage b{mh(1), 1, "b"};
  std::vector<TraceEvent> trace = {
      ev(0, mh(1), Action::BrBroadcast, {}, a),
      send(0, mh(1), mh(2), Init{a}, a),
      send(0, mh(1), mh(3), Init{b}, b),
      send(3, mss(1), mh(2), Ready{a, mh(1)}, a),
      ev(4, mh(2), Action::BcmHDeliver, mss(1), a),
  };
  const auto v = check_all(trace, group_of_four());
  EXPECT_TRUE(failing(v).count("BCM-Safety"));
  EXPECT_EQ(equivocated_ids(trace), (std::set<MessageId>{{mh(1), 1}}));
}

TEST(Safety, PayloadDiffersFromCorrectOrigin) {
  ScenarioConfig c = group_of_four();
  c.byzantine_set.clear();
  const AppMessage x{mh(2), 1, "x"};
  const AppMessage y{mh(2), 1, "y"};
  const std::vector<TraceEvent> trace = {
      ev(0, mh(2), Action::BcmHBroadcast, {}, x),
      send(3, mss(1), mh(3), Ready{y, mh(2)}, y),
      ev(4, mh(3), Action::BcmHDeliver, mss(1), y),
  };
  EXPECT_TRUE(failing(check_all(trace, c)).count("BCM-Safety"));
}

TEST(Safety, FaultyReceiverIsNotObliged) {
  const AppMessage a{mh(1), 1, "a"};
  const std::vector<TraceEvent> trace = {
      ev(0, mh(1), Action::BrBroadcast, {}, a),
      send(0, mh(1), mh(2), Init{a}, a),
      send(0, mh(1), mh(3), Init{AppMessage{mh(1), 1, "b"}}, AppMessage{mh(1), 1, "b"}),
      ev(4, mh(1), Action::BcmHDeliver, mss(1), a),
  };
  EXPECT_FALSE(failing(check_all(trace, group_of_four())).count("BCM-Safety"));
}

TEST(WellFormed, RejectsBackwardTicks) {
  std::vector<TraceEvent> trace = {ev(5, mh(1), Action::HandoffStart, mss(1)),
                                   ev(4, mh(1), Action::HandoffStart, mss(1))};
  EXPECT_THROW(check_all(trace, two_stations_one_host()), MalformedTrace);
}

TEST(WellFormed, RejectsDeliveryWithoutApp) {
  const std::vector<TraceEvent> trace = {ev(1, mh(1), Action::BcmHDeliver, mss(1))};
  EXPECT_THROW(check_all(trace, two_stations_one_host()), MalformedTrace);
}

TEST(WellFormed, RejectsStationMembershipWithoutHost) {
  const std::vector<TraceEvent> trace = {ev(1, mss(1), Action::GroupJoin)};
  EXPECT_THROW(check_all(trace, two_stations_one_host()), MalformedTrace);
}

TEST(Report, CsvAndJsonLayout) {
  const auto& g = golden();
  const auto v = check_all(erase_delivery(g.trace, mh(6), g.m1), g.config);
  const std::string csv = verdict_report(v);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "property,holds,counterexample_events");
  EXPECT_NE(csv.find("\nBCM-Validity 1,true,0\n"), std::string::npos);
  EXPECT_NE(csv.find("\nBCM-Termination 3,false,1\n"), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 14);
  const std::string json = verdict_summary_json(v);
  EXPECT_EQ(json.find("{\n  \"all_hold\": false"), 0u);
}

TEST(Oracle, HandoffBroadcastsAreOrdered) {
  const auto& g = golden();
  const CausalOracle o = build_oracle(g.trace);
  EXPECT_TRUE(o.precedes(g.m1, g.m2));
  EXPECT_FALSE(o.precedes(g.m2, g.m1));
  EXPECT_TRUE(o.precedes({mss(3), 1}, {mss(3), 2}));
  EXPECT_TRUE(is_strict_partial_order(o));
  EXPECT_TRUE(causal_order_offenders(g.trace, o).empty());
}

TEST(OracleProperty, StrictPartialOrderOnRandomRuns) {
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    const ScenarioConfig c = random_compliant_scenario(seed);
    const RunResult r = run(c);
    const CausalOracle o = build_oracle(r.trace);
    EXPECT_TRUE(is_strict_partial_order(o)) << seed;
    for (const auto& [id, past] : o.causal_past) {
      for (const MessageId& m : past) EXPECT_FALSE(o.precedes(id, m)) << seed;
    }
  }
}

TEST(Oracle, DetectsDeliberateCycle) {
  CausalOracle o;
  o.causal_past[{mh(1), 1}] = {{mh(2), 1}};
  o.causal_past[{mh(2), 1}] = {{mh(3), 1}};
  o.causal_past[{mh(3), 1}] = {};
  EXPECT_FALSE(is_strict_partial_order(o));
  o.causal_past[{mh(1), 1}].insert({mh(3), 1});
  EXPECT_TRUE(is_strict_partial_order(o));
  o.causal_past[{mh(3), 1}] = {{mh(3), 1}};
  EXPECT_FALSE(is_strict_partial_order(o));
}

TEST(Offenders, CausalViolatorIsTheOnlyOffender) {
  ScenarioConfig c;
  c.n_mss = 1;
  c.n_mh = 4;
  for (std::uint32_t h = 1; h <= 4; ++h) c.initial_assignment[h] = 1;
  c.byzantine_set = {4};
  c.adversary_strategy[4] = CausalViolator{};
  c.workload = {{0, WorkloadKind::AppBroadcast, mh(2), "one", 0},
                {10, WorkloadKind::AppBroadcast, mh(2), "two", 0}};
  const RunResult r = run(c);
  EXPECT_EQ(causal_order_offenders(r.trace, build_oracle(r.trace)), (std::set<NodeId>{mh(4)}));
  EXPECT_TRUE(all_hold(check_all(r.trace, c)));
}

TEST(LostMessages, OnlyTheViolationWindowMessage) {
  const LossScenario l = loss_under_violation_scenario();
  const RunResult r = run(l.config);
  EXPECT_EQ(lost_messages(r.trace), (std::set<MessageId>{l.lost}));
  EXPECT_TRUE(lost_messages(golden().trace).empty());
}

TEST(EquivocatedIds, RepeatedSamePayloadIsNotEquivocation) {
  const AppMessage a{mh(1), 1, "a"};
  const std::vector<TraceEvent> trace = {ev(0, mh(1), Action::BrBroadcast, {}, a),
                                         send(0, mh(1), mh(2), Init{a}, a),
                                         send(0, mh(1), mh(3), Init{a}, a)};
  EXPECT_TRUE(equivocated_ids(trace).empty());
}

TEST(TCompliant, Examples) {
  EXPECT_TRUE(t_compliant(0, 0));
  EXPECT_TRUE(t_compliant(4, 1));
  EXPECT_FALSE(t_compliant(3, 1));
  EXPECT_TRUE(t_compliant(30, 9));
  EXPECT_FALSE(t_compliant(30, 10));
}

TEST(Timeline, LossScenarioViolatesOnlyTheJoinedGroup) {
  const LossScenario l = loss_under_violation_scenario();
  const TConditionTimeline tl = t_condition_timeline(run(l.config).trace, l.config);
  ASSERT_TRUE(tl.first_violation.at(1));
  EXPECT_GT(*tl.first_violation.at(1), 50u);
  EXPECT_LT(*tl.first_violation.at(1), 80u);
  EXPECT_EQ(tl.groups.at(1).front().nmh, 9u);
  EXPECT_EQ(tl.groups.at(1).front().t, 2u);
  EXPECT_EQ(tl.groups.at(1).back().nmh, 11u);
  EXPECT_EQ(tl.groups.at(1).back().t, 4u);
}

TEST(Timeline, GoldenRunStaysCompliant) {
  const TConditionTimeline tl = t_condition_timeline(golden().trace, golden().config);
  for (const auto& [s, first] : tl.first_violation) EXPECT_FALSE(first) << s;
  EXPECT_EQ(tl.groups.at(2).back().nmh, 4u);
  EXPECT_EQ(tl.groups.at(1).back().nmh, 3u);
}

TEST(Thresholds, PublishedExampleAndAlreadyViolated) {
  EXPECT_EQ(violation_thresholds(30, 7), (Thresholds{9, 3}));
  EXPECT_THROW(violation_thresholds(9, 3), AlreadyViolated);
  EXPECT_THROW(violation_thresholds(0, 0), AlreadyViolated);
}

TEST(ThresholdsProperty, MatchBruteForceOnMultiplesOfThree) {
  for (std::uint64_t nmh = 3; nmh <= 300; nmh += 3) {
    for (std::uint64_t t = 0; 3 * t < nmh; ++t) {
      std::uint64_t k2 = 0;
      while (3 * t < nmh - k2) ++k2;
      std::uint64_t k3 = 0;
      while (3 * (t + k3) < nmh) ++k3;
      EXPECT_EQ(violation_thresholds(nmh, t), (Thresholds{k2, k3})) << nmh << "," << t;
    }
  }
}

TEST(GrowingJoins, ExamplesAndBruteForce) {
  EXPECT_EQ(joins_to_violate_growing(30, 7), 5u);
  EXPECT_EQ(joins_to_violate_growing(3, 0), 2u);
  for (std::uint64_t nmh = 1; nmh <= 200; ++nmh) {
    for (std::uint64_t t = 0; 3 * t < nmh; ++t) {
      std::uint64_t j = 0;
      while (2 * (t + j) < nmh - t) ++j;
      EXPECT_EQ(joins_to_violate_growing(nmh, t), j) << nmh << "," << t;
    }
  }
}

}  // namespace
}  // namespace bcm
