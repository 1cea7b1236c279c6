// Copyright (c) The BCM Broadcast Authors.
// Licensed under the Apache 2.0 License.

#include <gtest/gtest.h>

#include "bcm/mss_node.hpp"

namespace bcm {
namespace {

std::size_t count_action(const Effects& fx, Action a) {
  std::size_t n = 0;
  for (const TraceEvent& e : fx.trace) n += e.action == a ? 1 : 0;
  return n;
}

bool has_detail(const Effects& fx, const std::string& detail) {
  for (const TraceEvent& e : fx.trace) {
    if (e.detail == detail) return true;
  }
  return false;
}

Echo echo_of(const AppMessage& app) { return {app.origin.index, app.seq, app}; }

// Station s1 of three with hosts h1..h4; h1's Init already received.
MssStep with_init(const AppMessage& app) {
  return on_init_mss(make_mss(1, 3, {1, 2, 3, 4}), app.origin, Init{app}, 10);
}

TEST(Quorum, MatchesSmallestCountAboveTwoThirds) {
  for (std::uint64_t n = 1; n <= 200; ++n) {
    std::uint64_t oracle = 0;
    while (3 * oracle <= 2 * n) ++oracle;
    EXPECT_EQ(quorum_threshold(n), oracle) << n;
  }
  EXPECT_EQ(quorum_threshold(4), 3u);
  EXPECT_EQ(quorum_threshold(30), 21u);
}

TEST(QuorumProperty, TwoQuorumsShareACorrectVoterWhenCompliant) {
  for (std::uint64_t n = 1; n <= 200; ++n) {
    for (std::uint64_t t = 0; 3 * t < n; ++t) {
      EXPECT_GT(2 * quorum_threshold(n), n + t) << n << "," << t;
      EXPECT_LE(quorum_threshold(n), n - t) << n << "," << t;
    }
  }
}

TEST(MakeMss, WindowsFollowWirelessLatency) {
  const MssState s = make_mss(2, 3, {1}, 4);
  EXPECT_EQ(s.id, mss(2));
  EXPECT_EQ(s.echo_window, 8u);
  EXPECT_EQ(s.s_deliv, (StationVector{0, 0, 0}));
}

TEST(StationInit, RejectsForeignAndNonMemberInits) {
  const MssState s = make_mss(1, 1, {1, 2});
  MssStep step = on_init_mss(s, mh(2), Init{AppMessage{mh(1), 1, "x"}});
  EXPECT_TRUE(has_detail(step.effects, "init origin mismatch"));
  step = on_init_mss(s, mh(7), Init{AppMessage{mh(7), 1, "x"}});
  EXPECT_TRUE(has_detail(step.effects, "init from non-member"));
  EXPECT_TRUE(step.state.pending_echo.empty());
}

TEST(StationInit, OpensEchoWindowWithTimer) {
  const MssStep step = with_init({mh(1), 1, "x"});
  ASSERT_EQ(step.effects.timers.size(), 1u);
  EXPECT_EQ(step.effects.timers[0].tick, 12u);
  EXPECT_EQ(step.state.pending_echo.at({mh(1), 1}).eligible, (std::set<std::uint32_t>{1, 2, 3, 4}));
}

TEST(StationEcho, FullEchoSetDeliversAndRelays) {
  const AppMessage app{mh(1), 1, "x"};
  MssStep step = with_init(app);
  for (std::uint32_t h : {1u, 2u, 3u}) {
    step = on_echo(step.state, mh(h), echo_of(app), 11);
    EXPECT_EQ(count_action(step.effects, Action::BrDeliver), 0u);
  }
  step = on_echo(step.state, mh(4), echo_of(app), 11);
  EXPECT_EQ(count_action(step.effects, Action::BrDeliver), 1u);
  EXPECT_EQ(count_action(step.effects, Action::BcmSDeliver), 1u);
  EXPECT_EQ(step.effects.count_sends("Ready"), 4u);
  EXPECT_EQ(step.effects.count_sends("GlobalBcast"), 3u);
  EXPECT_EQ(step.state.sn, 1u);
  EXPECT_EQ(step.state.deliv_from_h.at(1), 1u);
  EXPECT_TRUE(step.state.sdelivered.count({mh(1), 1}));
}

TEST(StationEcho, DeadlineDeliversWithQuorum) {
  const AppMessage app{mh(1), 1, "x"};
  MssStep step = with_init(app);
  for (std::uint32_t h : {1u, 2u, 3u}) step = on_echo(step.state, mh(h), echo_of(app), 11);
  step = on_echo_deadline(step.state, {mh(1), 1}, 12);
  EXPECT_EQ(count_action(step.effects, Action::BrDeliver), 1u);
}

TEST(StationEcho, DeadlineWithoutQuorumDisregards) {
  const AppMessage app{mh(1), 1, "x"};
  MssStep step = with_init(app);
  for (std::uint32_t h : {1u, 2u}) step = on_echo(step.state, mh(h), echo_of(app), 11);
  step = on_echo_deadline(step.state, {mh(1), 1}, 12);
  EXPECT_EQ(count_action(step.effects, Action::BrDeliver), 0u);
  EXPECT_TRUE(has_detail(step.effects, "insufficient echoes 2/4"));
  step = on_echo(step.state, mh(3), echo_of(app), 13);
  EXPECT_TRUE(has_detail(step.effects, "echo after decision"));
}

TEST(StationEcho, ConflictingEchoesBlockDelivery) {
  const AppMessage a{mh(1), 1, "a"};
  const AppMessage b{mh(1), 1, "b"};
  MssStep step = with_init(a);
  step = on_echo(step.state, mh(2), echo_of(a), 11);
  step = on_echo(step.state, mh(3), echo_of(b), 11);
  EXPECT_TRUE(has_detail(step.effects, "equivocation detected"));
  EXPECT_TRUE(step.state.decided.count({mh(1), 1}));
  step = on_echo(step.state, mh(4), echo_of(a), 11);
  EXPECT_EQ(count_action(step.effects, Action::BrDeliver), 0u);
}

TEST(StationEcho, IgnoresNonMembersAndDuplicates) {
  const AppMessage app{mh(1), 1, "x"};
  MssStep step = with_init(app);
  step = on_echo(step.state, mh(9), echo_of(app), 11);
  EXPECT_TRUE(has_detail(step.effects, "echo from non-member"));
  step = on_echo(step.state, mh(2), echo_of(app), 11);
  step = on_echo(step.state, mh(2), echo_of(app), 11);
  EXPECT_TRUE(has_detail(step.effects, "duplicate echo"));
}

TEST(StationEcho, LaterSequenceWaitsForEarlierOne) {
  const AppMessage first{mh(1), 1, "a"};
  const AppMessage second{mh(1), 2, "b"};
  MssStep step = on_init_mss(make_mss(1, 1, {1}), mh(1), Init{first});
  step = on_init_mss(step.state, mh(1), Init{second});
  step = on_echo(step.state, mh(1), echo_of(second));
  EXPECT_EQ(count_action(step.effects, Action::BrDeliver), 1u);
  EXPECT_EQ(count_action(step.effects, Action::BcmSDeliver), 0u);
  step = on_echo(step.state, mh(1), echo_of(first));
  std::vector<std::uint64_t> order;
  for (const TraceEvent& e : step.effects.trace) {
    if (e.action == Action::BcmSDeliver) order.push_back(e.app->seq);
  }
  EXPECT_EQ(order, (std::vector<std::uint64_t>{1, 2}));
}

GlobalBcast global(std::uint32_t sender, std::uint64_t sn, CausalBarrier cb, Payload p) {
  return {AppMessage{mss(sender), sn, std::move(p)}, sender, sn, std::move(cb), {0, 0, 0}};
}

TEST(StationGlobal, WaitsForCausalBarrier) {
  MssStep step = on_global(make_mss(1, 3, {1, 2}), global(2, 1, {{3, 1}}, "late"), 5);
  EXPECT_EQ(count_action(step.effects, Action::CDeliver), 0u);
  EXPECT_EQ(step.state.recv_from_s.size(), 1u);
  step = on_global(step.state, global(3, 1, {}, "early"), 6);
  std::vector<Payload> order;
  for (const TraceEvent& e : step.effects.trace) {
    if (e.action == Action::BcmSDeliver) order.push_back(e.app->payload);
  }
  EXPECT_EQ(order, (std::vector<Payload>{"early", "late"}));
  EXPECT_EQ(step.effects.count_sends("ForwardGlobal"), 4u);
  EXPECT_EQ(step.state.s_deliv, (StationVector{0, 1, 1}));
  EXPECT_EQ(step.state.cb, (CausalBarrier{{2, 1}}));
}

TEST(StationGlobal, FifoPerSenderAndStaleDropped) {
  MssStep step = on_global(make_mss(1, 2, {}), global(2, 2, {}, "second"), 1);
  EXPECT_EQ(count_action(step.effects, Action::CDeliver), 0u);
  step = on_global(step.state, global(2, 1, {}, "first"), 2);
  EXPECT_EQ(count_action(step.effects, Action::CDeliver), 2u);
  step = on_global(step.state, global(2, 1, {}, "first"), 3);
  EXPECT_TRUE(has_detail(step.effects, "stale global"));
}

TEST(StationBroadcast, CarriesBarrierThenClearsIt) {
  MssStep step = on_global(make_mss(1, 2, {1}), global(2, 1, {}, "g"), 1);
  step = bcm_sbroadcast(step.state, "mine", 2);
  const GlobalBcast* sent = nullptr;
  for (const Outgoing& o : step.effects.sends) {
    if (o.to == mss(2)) sent = &std::get<GlobalBcast>(o.msg);
  }
  ASSERT_NE(sent, nullptr);
  EXPECT_EQ(sent->cb, (CausalBarrier{{2, 1}}));
  EXPECT_EQ(sent->app, (AppMessage{mss(1), 1, "mine"}));
  EXPECT_TRUE(step.state.cb.empty());
}

TEST(StationHandoff, DisconnectRemovesMemberAndNotifiesDestination) {
  const MssStep step = on_disconnect(make_mss(1, 2, {1, 2}), mh(1), Disconnect{2, {0, 0}}, 4);
  EXPECT_EQ(step.state.mh_set, (std::set<std::uint32_t>{2}));
  ASSERT_EQ(step.effects.sends.size(), 1u);
  EXPECT_EQ(step.effects.sends[0].to, mss(2));
  EXPECT_EQ(std::get<Removed>(step.effects.sends[0].msg).mh, mh(1));
  EXPECT_EQ(count_action(step.effects, Action::GroupLeave), 1u);
}

TEST(StationHandoff, AdmitsAfterRequestAndRemovedInEitherOrder) {
  const Removed removed{1, mh(5), {0, 0}, 0};
  const RequestMsg request{1, {0, 0}};
  MssStep a = on_request_msg(make_mss(2, 2, {3}), mh(5), request);
  a = on_removed(a.state, removed);
  MssStep b = on_removed(make_mss(2, 2, {3}), removed);
  EXPECT_EQ(b.state.held_removed.size(), 1u);
  b = on_request_msg(b.state, mh(5), request);
  for (const MssStep* s : {&a, &b}) {
    EXPECT_EQ(s->state.mh_set, (std::set<std::uint32_t>{3, 5}));
    EXPECT_EQ(count_action(s->effects, Action::GroupJoin), 1u);
    EXPECT_EQ(s->effects.count_sends("Accept"), 1u);
    EXPECT_EQ(s->effects.count_sends("ForwardCatchup"), 1u);
  }
}

TEST(StationHandoff, CatchupForwardsRetainedMessagesTheHostLacks) {
  MssStep step = on_global(make_mss(2, 2, {3}), global(1, 1, {}, "g1"), 1);
  step = on_global(step.state, global(1, 2, {}, "g2"), 2);
  ASSERT_EQ(step.state.deliv_mes.size(), 2u);
  step = on_request_msg(step.state, mh(5), RequestMsg{1, {1, 0}});
  step = on_removed(step.state, Removed{1, mh(5), {1, 0}, 0});
  ASSERT_EQ(step.effects.count_sends("ForwardCatchup"), 1u);
  for (const Outgoing& o : step.effects.sends) {
    if (const auto* c = std::get_if<ForwardCatchup>(&o.msg)) {
      EXPECT_EQ(c->app->payload, "g2");
    }
  }
}

TEST(StationHandoff, AcceptCompletesHandoff) {
  MssStep step = on_disconnect(make_mss(1, 2, {1}), mh(1), Disconnect{2, {0, 0}});
  step = on_accept(step.state, mss(2), Accept{mh(1)});
  EXPECT_EQ(count_action(step.effects, Action::HandoffComplete), 1u);
  EXPECT_TRUE(step.state.moving.empty());
  step = on_accept(step.state, mss(2), Accept{mh(1)});
  EXPECT_TRUE(has_detail(step.effects, "accept for unknown host"));
}

TEST(StationGc, RetainsUntilEveryStationReportsForwarding) {
  MssStep step = on_global(make_mss(1, 2, {}), global(2, 1, {}, "g"), 1);
  EXPECT_EQ(step.state.deliv_mes.size(), 1u);
  step = bcm_sbroadcast(step.state, "own", 50);
  bool kept = false;
  for (const DelivEntry& e : step.state.deliv_mes) kept |= e.origin_mss == 2 && e.sn == 1;
  EXPECT_TRUE(kept);
  GlobalBcast next = global(2, 2, {{1, 1}}, "h");
  next.forwarded = {1, 1};
  step = on_global(step.state, next, 100);
  step = bcm_sbroadcast(step.state, "own2", 200);
  for (const DelivEntry& e : step.state.deliv_mes) EXPECT_FALSE(e.origin_mss == 2 && e.sn == 1);
}

}  // namespace
}  // namespace bcm
