// Copyright (c) The BCM Broadcast Authors.
// Licensed under the Apache 2.0 License.

#include <gtest/gtest.h>

#include "bcm/adversary.hpp"
#include "bcm/checker.hpp"
#include "bcm/net_sim.hpp"

namespace bcm {
namespace {

MhState host() { return make_mh(1, 1, 1, {mh(1), mh(2), mh(3)}); }

MhTransition wrapped(AdversaryStrategy s) { return wrap(mh_step, std::move(s)); }

std::size_t count_action(const Effects& fx, Action a) {
  std::size_t n = 0;
  for (const TraceEvent& e : fx.trace) n += e.action == a ? 1 : 0;
  return n;
}

const Ready kReady{AppMessage{mh(2), 1, "r"}, mh(2)};

TEST(StrategyName, OnePerAlternative) {
  EXPECT_EQ(strategy_name(Crash{}), "crash");
  EXPECT_EQ(strategy_name(Silent{}), "silent");
  EXPECT_EQ(strategy_name(DuplicateBroadcast{}), "duplicate");
  EXPECT_EQ(strategy_name(Equivocate{}), "equivocate");
  EXPECT_EQ(strategy_name(RefuseEcho{}), "refuse_echo");
  EXPECT_EQ(strategy_name(ArbitraryInject{}), "arbitrary_inject");
  EXPECT_EQ(strategy_name(CausalViolator{}), "causal_violator");
}

TEST(Crash, BehavesHonestlyUntilCrashTick) {
  const MhTransition t = wrapped(Crash{10});
  EXPECT_EQ(t(host(), AppBroadcastInput{"x"}, 9).effects.count_sends("Init"), 4u);
  const MhStep after = t(host(), AppBroadcastInput{"x"}, 10);
  EXPECT_TRUE(after.effects.sends.empty());
  EXPECT_TRUE(after.effects.trace.empty());
}

TEST(Silent, NeitherBroadcastsNorEchoesNorDelivers) {
  const MhTransition t = wrapped(Silent{});
  EXPECT_TRUE(t(host(), AppBroadcastInput{"x"}, 0).effects.sends.empty());
  EXPECT_TRUE(
      t(host(), ReceiveInput{mh(2), Init{AppMessage{mh(2), 1, "y"}}}, 0).effects.sends.empty());
  const MhStep r = t(host(), ReceiveInput{mss(1), kReady}, 0);
  EXPECT_EQ(count_action(r.effects, Action::BcmHDeliver), 0u);
}

TEST(Silent, StillFollowsHandoff) {
  const MhTransition t = wrapped(Silent{});
  const MhStep step = t(host(), StartHandoffInput{2}, 0);
  EXPECT_EQ(step.effects.count_sends("Disconnect"), 1u);
  EXPECT_FALSE(step.state.telepoint);
}

TEST(Duplicate, RepeatsTheSameInit) {
  const MhStep step = wrapped(DuplicateBroadcast{"d", 3})(host(), AppBroadcastInput{"ignored"}, 0);
  EXPECT_EQ(step.effects.count_sends("Init"), 12u);
  EXPECT_EQ(count_action(step.effects, Action::BrBroadcast), 3u);
  for (const Outgoing& o : step.effects.sends) {
    EXPECT_EQ(std::get<Init>(o.msg).app, (AppMessage{mh(1), 1, "d"}));
  }
}

TEST(Equivocate, SplitsPayloadsBySide) {
  const MhStep step = wrapped(Equivocate{"a", "b", {2}, true})(host(), AppBroadcastInput{"x"}, 0);
  std::map<NodeId, Payload> got;
  for (const Outgoing& o : step.effects.sends) got[o.to] = std::get<Init>(o.msg).app.payload;
  EXPECT_EQ(got, (std::map<NodeId, Payload>{{mh(1), "b"}, {mh(2), "a"}, {mh(3), "b"}, {mss(1), "a"}}));
  EXPECT_EQ(step.state.seq, 1u);
  const std::set<MessageId> eq = equivocated_ids(step.effects.trace);
  EXPECT_EQ(eq, (std::set<MessageId>{{mh(1), 1}}));
}

TEST(RefuseEcho, DropsEchoSendsAndRecords) {
  const MhStep step =
      wrapped(RefuseEcho{})(host(), ReceiveInput{mh(2), Init{AppMessage{mh(2), 1, "y"}}}, 0);
  EXPECT_EQ(step.effects.count_sends("Echo"), 0u);
  EXPECT_EQ(count_action(step.effects, Action::Send), 0u);
  const MhStep r = wrapped(RefuseEcho{})(host(), ReceiveInput{mss(1), kReady}, 0);
  EXPECT_EQ(count_action(r.effects, Action::BcmHDeliver), 1u);
}

TEST(ArbitraryInject, EmitsScheduledInit) {
  ArbitraryInject ai;
  ai.schedule = {{5, 7, "forged"}};
  const MhTransition t = wrapped(ai);
  const MhStep step = t(host(), InjectInput{0}, 5);
  EXPECT_EQ(step.effects.count_sends("Init"), 4u);
  EXPECT_EQ(std::get<Init>(step.effects.sends[0].msg).app, (AppMessage{mh(1), 7, "forged"}));
  EXPECT_TRUE(t(host(), InjectInput{1}, 5).effects.sends.empty());
}

TEST(CausalViolator, SwapsConsecutiveDeliveryRecords) {
  const MhTransition t = wrapped(CausalViolator{});
  MhStep step = t(host(), ReceiveInput{mss(1), kReady}, 1);
  EXPECT_EQ(count_action(step.effects, Action::BcmHDeliver), 0u);
  const Ready second{AppMessage{mh(3), 1, "s"}, mh(3)};
  step = t(step.state, ReceiveInput{mss(1), second}, 2);
  std::vector<Payload> order;
  for (const TraceEvent& e : step.effects.trace) {
    if (e.action == Action::BcmHDeliver) order.push_back(e.app->payload);
  }
  EXPECT_EQ(order, (std::vector<Payload>{"s", "r"}));
}

ScenarioConfig group_of_four(AdversaryStrategy s) {
  ScenarioConfig c;
  c.n_mss = 1;
  c.n_mh = 4;
  for (std::uint32_t h = 1; h <= 4; ++h) c.initial_assignment[h] = 1;
  c.byzantine_set = {4};
  c.adversary_strategy[4] = std::move(s);
  c.workload = {{0, WorkloadKind::AppBroadcast, mh(1), "one", 0},
                {10, WorkloadKind::AppBroadcast, mh(2), "two", 0}};
  return c;
}

TEST(AdversaryInSimulation, CompliantGroupToleratesEachStrategy) {
  const std::vector<AdversaryStrategy> all = {
      Crash{0}, Silent{}, DuplicateBroadcast{"d", 2}, Equivocate{"a", "b", {1}, false},
      RefuseEcho{}, ArbitraryInject{{{3, 1, "x"}}}, CausalViolator{}};
  for (const AdversaryStrategy& s : all) {
    const ScenarioConfig c = group_of_four(s);
    const RunResult r = run(c);
    std::set<std::pair<NodeId, MessageId>> delivered;
    for (const TraceEvent& e : r.trace) {
      if ((e.action == Action::BcmHDeliver || e.action == Action::BcmSDeliver) && e.app) {
        delivered.insert({e.actor, message_id(*e.app)});
      }
    }
    for (NodeId n : {mh(1), mh(2), mh(3), mss(1)}) {
      EXPECT_TRUE(delivered.count({n, {mh(1), 1}})) << strategy_name(s) << " " << to_string(n);
      EXPECT_TRUE(delivered.count({n, {mh(2), 1}})) << strategy_name(s) << " " << to_string(n);
    }
    EXPECT_TRUE(all_hold(check_all(r.trace, c))) << strategy_name(s);
  }
}

}  // namespace
}  // namespace bcm
