// Copyright (c) The BCM Broadcast Authors.
// Licensed under the Apache 2.0 License.

#include "bcm/scenarios.hpp"

#include <algorithm>
#include <random>

#include "bcm/checker.hpp"

namespace bcm {

namespace {

using Pred = std::function<bool(const TraceEvent&)>;

Pred with_app(const MessageId& id) {
  return [id](const TraceEvent& e) { return e.app && message_id(*e.app) == id; };
}

Pred with_tag(const std::string& tag) {
  return [tag](const TraceEvent& e) { return e.message && message_tag(*e.message) == tag; };
}

Pred with_peer(NodeId peer) {
  return [peer](const TraceEvent& e) { return e.peer && *e.peer == peer; };
}

Pred detail_prefix(const std::string& prefix) {
  return [prefix](const TraceEvent& e) { return e.detail.rfind(prefix, 0) == 0; };
}

Pred all_of(std::vector<Pred> preds) {
  return [preds = std::move(preds)](const TraceEvent& e) {
    return std::all_of(preds.begin(), preds.end(), [&](const Pred& p) { return p(e); });
  };
}

Milestone step(int n, std::string text, NodeId actor, Action action, std::vector<Pred> extra = {},
               std::vector<int> after = {}) {
  Pred base = [actor, action](const TraceEvent& e) {
    return e.actor == actor && e.action == action;
  };
  extra.insert(extra.begin(), base);
  if (after.empty() && n > 1) after = {n - 1};
  return {n, std::move(text), all_of(std::move(extra)), std::move(after)};
}

WorkloadItem host_bcast(std::uint64_t tick, std::uint32_t h, std::string payload) {
  return {tick, WorkloadKind::AppBroadcast, mh(h), std::move(payload), 0};
}

WorkloadItem station_bcast(std::uint64_t tick, std::uint32_t s, std::string payload) {
  return {tick, WorkloadKind::MssAppBroadcast, mss(s), std::move(payload), 0};
}

WorkloadItem handoff(std::uint64_t tick, std::uint32_t h, std::uint32_t dest) {
  return {tick, WorkloadKind::StartHandoff, mh(h), {}, dest};
}

class Draw {
 public:
  explicit Draw(std::uint64_t seed) : rng_(seed) {}
  std::uint64_t between(std::uint64_t lo, std::uint64_t hi) {
    const double u = uniform01(rng_);
    return lo + std::min<std::uint64_t>(hi - lo, static_cast<std::uint64_t>(u * (hi - lo + 1)));
  }
  bool chance(double p) { return uniform01(rng_) < p; }

 private:
  std::mt19937_64 rng_;
};

bool groups_compliant(const std::map<std::uint32_t, std::uint32_t>& assign,
                      const std::set<std::uint32_t>& byz, std::uint32_t n_mss) {
  std::vector<std::uint64_t> n(n_mss + 1, 0);
  std::vector<std::uint64_t> t(n_mss + 1, 0);
  for (const auto& [h, s] : assign) {
    ++n[s];
    t[s] += byz.count(h);
  }
  for (std::uint32_t s = 1; s <= n_mss; ++s) {
    if (!t_compliant(n[s], t[s])) return false;
  }
  return true;
}

AdversaryStrategy random_strategy(Draw& d, std::uint32_t h, std::uint32_t n_mh, std::size_t kind) {
  switch (kind) {
    case 0:
      return Crash{d.between(0, 150)};
    case 1:
      return Silent{};
    case 2:
      return DuplicateBroadcast{"dup" + std::to_string(h),
                                static_cast<std::uint32_t>(d.between(2, 4))};
    case 3: {
      Equivocate e{"eq_a" + std::to_string(h), "eq_b" + std::to_string(h), {}, d.chance(0.5)};
      for (std::uint32_t x = 1; x <= n_mh; ++x) {
        if (d.chance(0.5)) e.side_a.insert(x);
      }
      return e;
    }
    case 4:
      return RefuseEcho{};
    case 5: {
      ArbitraryInject a;
      const std::uint64_t n = d.between(1, 3);
      for (std::uint64_t i = 0; i < n; ++i) {
        a.schedule.push_back({d.between(0, 200), d.between(1, 4), "inj" + std::to_string(i)});
      }
      return a;
    }
    default:
      return CausalViolator{};
  }
}

}  // namespace

GoldenScenario golden_handoff_scenario() {
  GoldenScenario g;
  ScenarioConfig& c = g.config;
  c.n_mss = 3;
  c.n_mh = 7;
  for (std::uint32_t h = 1; h <= 4; ++h) c.initial_assignment[h] = 1;
  for (std::uint32_t h = 5; h <= 7; ++h) c.initial_assignment[h] = 2;
  c.seed = 437;
  c.channel_latency = 1;
  c.mss_latency = 10;
  c.transit_delay = 3;
  c.latency_overrides = {{mss(3), mss(2), 40}};
  c.global_compliance = true;
  c.workload = {station_bcast(0, 3, "m_a"), station_bcast(4, 3, "m_b"), host_bcast(8, 5, "m0"),
                host_bcast(11, 1, "m1"),    handoff(16, 1, 2),           host_bcast(29, 1, "m2")};

  const NodeId hi = mh(1);
  const NodeId sj = mss(1);
  const NodeId sk = mss(2);
  g.m1 = {hi, 1};
  g.m2 = {hi, 2};
  const MessageId ma{mss(3), 1};
  const auto m1 = with_app(g.m1);
  const auto m2 = with_app(g.m2);

  g.milestones = {
      step(1, "h_i bcm-Hbroadcasts m1", hi, Action::BcmHBroadcast, {m1}),
      step(2, "h_i br-broadcasts m1", hi, Action::BrBroadcast, {m1}),
      step(3, "s_j br-delivers m1 after the echo quorum", sj, Action::BrDeliver, {m1}),
      step(4, "s_j c-delivers m1", sj, Action::CDeliver, {m1}),
      step(5, "s_j bcm-Sdelivers m1", sj, Action::BcmSDeliver, {m1}),
      step(6, "s_j sends READY(m1) to its group", sj, Action::Send, {m1, with_tag("Ready")}),
      step(7, "h_i receives READY(m1)", hi, Action::Receive, {m1, with_tag("Ready")}),
      step(8, "h_i bcm-Hdelivers m1", hi, Action::BcmHDeliver, {m1}),
      step(9, "h_i sends disconnect to s_j", hi, Action::Send, {with_tag("Disconnect")}),
      step(10, "h_i clears its telepoint", hi, Action::HandoffStart, {}),
      step(11, "h_i clears its view", hi, Action::GroupLeave, {detail_prefix("view=none")}),
      step(12, "h_i leaves the radio range of s_j", hi, Action::GroupLeave, {detail_prefix("radio")}),
      step(13, "s_j removes h_i from its group", sj, Action::GroupLeave, {with_peer(hi)}),
      step(14, "s_j sends removed to s_k", sj, Action::Send, {with_tag("Removed"), with_peer(sk)}),
      step(15, "h_i sets its telepoint to s_k", hi, Action::GroupJoin, {detail_prefix("telepoint=s2")}),
      step(16, "h_i sets its view to the group of s_k", hi, Action::GroupJoin,
           {detail_prefix("view=")}),
      step(17, "h_i sends requestMsg to s_k", hi, Action::Send, {with_tag("RequestMsg")}),
      step(18, "s_k adds h_i to its group", sk, Action::GroupJoin, {with_peer(hi)}),
      step(19, "s_k sends accept to s_j", sk, Action::Send, {with_tag("Accept"), with_peer(sj)}),
      step(20, "s_k forwards its retained messages to h_i", sk, Action::Send,
           {with_tag("ForwardCatchup"), with_peer(hi), [](const TraceEvent& e) { return e.app.has_value(); }}),
      step(21, "h_i bcm-Hdelivers the retained messages", hi, Action::BcmHDeliver,
           {with_tag("ForwardCatchup")}),
      step(22, "h_i bcm-Hbroadcasts m2", hi, Action::BcmHBroadcast, {m2}),
      step(23, "h_i br-broadcasts m2", hi, Action::BrBroadcast, {m2}),
      step(24, "s_k br-delivers m2 and holds it", sk, Action::BrDeliver, {m2}),
      step(25, "s_k receives the global message m1 depends on", sk, Action::Receive,
           {with_app(ma), with_tag("GlobalBcast")}),
      step(26, "s_k c-delivers m1", sk, Action::CDeliver, {m1}),
      step(27, "s_k bcm-Sdelivers m1", sk, Action::BcmSDeliver, {m1}),
      step(28, "s_k forwards m1 to its group", sk, Action::Send, {m1, with_tag("ForwardGlobal")}),
      step(29, "h_i ignores the second copy of m1", hi, Action::Disregard,
           {m1, with_tag("ForwardGlobal")}),
      step(30, "s_k c-delivers m2", sk, Action::CDeliver, {m2}),
      step(31, "s_k bcm-Sdelivers m2", sk, Action::BcmSDeliver, {m2}),
      step(32, "s_k sends READY(m2) to its group", sk, Action::Send, {m2, with_tag("Ready")}),
      step(33, "h_i bcm-Hdelivers m2", hi, Action::BcmHDeliver, {m2}),
      step(34, "s_k bcm-Sbroadcasts m2", sk, Action::BcmSBroadcast, {m2}, {32}),
      step(35, "s_k c-broadcasts m2", sk, Action::CBroadcast, {m2}),
      step(36, "s_j c-delivers m2", sj, Action::CDeliver, {m2}, {35, 33}),
      step(37, "s_j bcm-Sdelivers m2", sj, Action::BcmSDeliver, {m2}),
  };
  return g;
}

MilestoneMatch match_milestones(const std::vector<TraceEvent>& trace,
                                const std::vector<Milestone>& milestones) {
  MilestoneMatch out;
  out.positions.assign(milestones.size(), std::nullopt);
  for (std::size_t k = 0; k < milestones.size(); ++k) {
    const Milestone& m = milestones[k];
    std::size_t from = 0;
    for (int a : m.after) {
      const auto& p = out.positions.at(static_cast<std::size_t>(a - 1));
      if (!p) {
        out.failure = "step " + std::to_string(m.step) + " depends on unmatched step " +
                      std::to_string(a);
        return out;
      }
      from = std::max(from, *p + 1);
    }
    for (std::size_t i = from; i < trace.size(); ++i) {
      if (m.matches(trace[i])) {
        out.positions[k] = i;
        break;
      }
    }
    if (!out.positions[k]) {
      out.failure = "step " + std::to_string(m.step) + " (" + m.description + ") not found";
      return out;
    }
  }
  out.ok = true;
  return out;
}

ScenarioConfig local_broadcast_scenario(std::uint32_t nmh) {
  ScenarioConfig c;
  c.n_mss = 1;
  c.n_mh = nmh;
  for (std::uint32_t h = 1; h <= nmh; ++h) c.initial_assignment[h] = 1;
  c.workload = {host_bcast(0, 1, "local")};
  return c;
}

ScenarioConfig global_broadcast_scenario(std::uint32_t n_mss, std::uint32_t n_mh,
                                         std::uint32_t nmh_j) {
  ScenarioConfig c;
  c.n_mss = n_mss;
  c.n_mh = n_mh;
  for (std::uint32_t h = 1; h <= n_mh; ++h) {
    c.initial_assignment[h] = h <= nmh_j || n_mss == 1 ? 1 : 2 + (h - nmh_j - 1) % (n_mss - 1);
  }
  c.workload = {host_bcast(0, 1, "global")};
  return c;
}

LossScenario loss_under_violation_scenario() {
  LossScenario l;
  ScenarioConfig& c = l.config;
  c.n_mss = 2;
  c.n_mh = 16;
  for (std::uint32_t h = 1; h <= 9; ++h) c.initial_assignment[h] = 1;
  for (std::uint32_t h = 10; h <= 16; ++h) c.initial_assignment[h] = 2;
  c.byzantine_set = {8, 9, 15, 16};
  for (std::uint32_t b : c.byzantine_set) c.adversary_strategy[b] = Silent{};
  c.global_compliance = true;
  c.workload = {host_bcast(0, 1, "before"), handoff(20, 15, 1), handoff(50, 16, 1),
                host_bcast(80, 1, "lost"),  host_bcast(100, 10, "after")};
  l.delivered_before = {mh(1), 1};
  l.lost = {mh(1), 2};
  l.delivered_after = {mh(10), 1};
  return l;
}

ScenarioConfig byzantine_join_scenario(std::uint32_t nmh, std::uint32_t t, std::uint32_t pool,
                                       double lambda3, std::uint64_t horizon, std::uint64_t seed) {
  ScenarioConfig c;
  c.n_mss = 2;
  c.n_mh = nmh + pool;
  for (std::uint32_t h = 1; h <= nmh; ++h) c.initial_assignment[h] = 1;
  for (std::uint32_t h = nmh + 1; h <= nmh + pool; ++h) c.initial_assignment[h] = 2;
  for (std::uint32_t h = nmh - t + 1; h <= nmh + pool; ++h) c.byzantine_set.insert(h);
  c.mobility_model = MobilityModel{{0.0, 0.0, lambda3, 0.0}, horizon, 1};
  c.seed = seed;
  return c;
}

ScenarioConfig random_compliant_scenario(std::uint64_t seed, const RandomLimits& lim) {
  Draw d(seed);
  ScenarioConfig c;
  c.seed = seed;
  c.global_compliance = true;
  c.n_mss = static_cast<std::uint32_t>(d.between(lim.min_mss, lim.max_mss));
  c.n_mh = static_cast<std::uint32_t>(d.between(lim.min_mh, lim.max_mh));
  const std::uint64_t max_byz = (c.n_mh + 2) / 3 - 1;
  const std::uint64_t nb = d.between(0, max_byz);
  std::vector<std::uint32_t> hosts(c.n_mh);
  for (std::uint32_t h = 1; h <= c.n_mh; ++h) hosts[h - 1] = h;
  for (std::uint64_t i = 0; i < nb; ++i) {
    const std::size_t j = i + d.between(0, hosts.size() - 1 - i);
    std::swap(hosts[i], hosts[j]);
    c.byzantine_set.insert(hosts[i]);
  }
  bool placed = false;
  for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
    for (std::uint32_t h = 1; h <= c.n_mh; ++h) {
      c.initial_assignment[h] = static_cast<std::uint32_t>(d.between(1, c.n_mss));
    }
    placed = groups_compliant(c.initial_assignment, c.byzantine_set, c.n_mss);
  }
  if (!placed) {
    for (std::uint32_t h = 1; h <= c.n_mh; ++h) c.initial_assignment[h] = 1;
  }
  c.channel_latency = d.between(1, 3);
  c.mss_latency = d.between(1, 10);
  c.transit_delay = d.between(1, 5);

  for (std::uint32_t b : c.byzantine_set) {
    const std::size_t kind = d.between(0, 7);
    if (kind < 7) c.adversary_strategy[b] = random_strategy(d, b, c.n_mh, kind);
  }

  std::map<std::uint32_t, std::uint32_t> where = c.initial_assignment;
  std::uint64_t tick = d.between(5, 40);
  const std::uint64_t n_handoffs = d.between(0, lim.max_handoffs);
  for (std::uint64_t i = 0; i < n_handoffs; ++i) {
    for (int attempt = 0; attempt < 20; ++attempt) {
      const auto h = static_cast<std::uint32_t>(d.between(1, c.n_mh));
      const auto dest = static_cast<std::uint32_t>(d.between(1, c.n_mss));
      if (dest == where[h]) continue;
      auto left = where;
      left.erase(h);
      auto joined = where;
      joined[h] = dest;
      if (!groups_compliant(left, c.byzantine_set, c.n_mss) ||
          !groups_compliant(joined, c.byzantine_set, c.n_mss)) {
        continue;
      }
      c.workload.push_back(handoff(tick, h, dest));
      where = joined;
      break;
    }
    tick += lim.handoff_gap + d.between(0, 30);
  }
  const std::uint64_t last = tick + 30;
  const std::uint64_t n_bcast = d.between(lim.min_broadcasts, lim.max_broadcasts);
  for (std::uint64_t i = 0; i < n_bcast; ++i) {
    const std::uint64_t at = d.between(0, last);
    const std::string payload = "m" + std::to_string(i);
    if (d.chance(0.15)) {
      c.workload.push_back(
          station_bcast(at, static_cast<std::uint32_t>(d.between(1, c.n_mss)), payload));
    } else {
      c.workload.push_back(host_bcast(at, static_cast<std::uint32_t>(d.between(1, c.n_mh)), payload));
    }
  }
  std::stable_sort(c.workload.begin(), c.workload.end(),
                   [](const WorkloadItem& a, const WorkloadItem& b) { return a.tick < b.tick; });
  return c;
}

}  // namespace bcm
