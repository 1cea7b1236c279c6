// Copyright (c) The BCM Broadcast Authors.
// Licensed under the Apache 2.0 License.

#include "bcm/checker.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

namespace bcm {

namespace {

bool is_delivery(const TraceEvent& e) {
  return e.action == Action::BcmHDeliver || e.action == Action::BcmSDeliver;
}

/// A broadcast invocation by the message's own origin.
bool is_origin_broadcast(const TraceEvent& e) {
  if (!e.app || e.app->origin != e.actor) return false;
  return e.action == Action::BcmHBroadcast || e.action == Action::BrBroadcast ||
         e.action == Action::BcmSBroadcast;
}

struct Delivery {
  std::size_t pos = 0;
  AppMessage app;
};

/// Indexed view of a trace.
struct TraceIndex {
  const std::vector<TraceEvent>& ev;
  const ScenarioConfig& cfg;
  std::map<NodeId, std::vector<Delivery>> deliveries;
  std::map<NodeId, std::map<MessageId, std::size_t>> first_delivery;
  std::set<MessageId> lost;
  std::set<MessageId> equivocated;

  TraceIndex(const std::vector<TraceEvent>& trace, const ScenarioConfig& config)
      : ev(trace), cfg(config) {
    for (std::size_t i = 0; i < ev.size(); ++i) {
      const TraceEvent& e = ev[i];
      if (!is_delivery(e)) continue;
      deliveries[e.actor].push_back({i, *e.app});
      first_delivery[e.actor].emplace(message_id(*e.app), i);
    }
    lost = lost_messages(trace);
    equivocated = equivocated_ids(trace);
  }

  bool faulty(NodeId n) const { return n.is_mh() && cfg.byzantine_set.count(n.index); }

  std::optional<std::size_t> delivered_at(NodeId n, const MessageId& id) const {
    auto it = first_delivery.find(n);
    if (it == first_delivery.end()) return std::nullopt;
    auto jt = it->second.find(id);
    if (jt == it->second.end()) return std::nullopt;
    return jt->second;
  }

  std::vector<NodeId> correct_hosts() const {
    std::vector<NodeId> out;
    for (std::uint32_t h = 1; h <= cfg.n_mh; ++h) {
      if (!cfg.byzantine_set.count(h)) out.push_back(mh(h));
    }
    return out;
  }

  std::vector<NodeId> stations() const {
    std::vector<NodeId> out;
    for (std::uint32_t s = 1; s <= cfg.n_mss; ++s) out.push_back(mss(s));
    return out;
  }
};

class VerdictBuilder {
 public:
  explicit VerdictBuilder(std::string name) { v_.property = std::move(name); }
  /// Records the first counterexample only.
  void fail(std::initializer_list<const TraceEvent*> events) {
    if (!v_.holds) return;
    v_.holds = false;
    for (const TraceEvent* e : events) {
      if (e) v_.counterexample.push_back(*e);
    }
  }
  bool failed() const { return !v_.holds; }
  Verdict done() { return std::move(v_); }

 private:
  Verdict v_;
};

bool same_app(const std::optional<AppMessage>& a, const AppMessage& b) {
  return a && a->origin == b.origin && a->seq == b.seq && a->payload == b.payload;
}

Verdict validity1(const TraceIndex& ix) {
  VerdictBuilder v("BCM-Validity 1");
  for (std::size_t i = 0; i < ix.ev.size() && !v.failed(); ++i) {
    const TraceEvent& e = ix.ev[i];
    if (e.action != Action::BcmSDeliver || !e.peer || !e.peer->is_mss()) continue;
    bool found = false;
    for (std::size_t j = 0; j < i && !found; ++j) {
      const TraceEvent& b = ix.ev[j];
      found = b.action == Action::BcmSBroadcast && b.actor == *e.peer && same_app(b.app, *e.app);
    }
    if (!found) v.fail({&e});
  }
  return v.done();
}

Verdict validity2(const TraceIndex& ix) {
  VerdictBuilder v("BCM-Validity 2");
  for (std::size_t i = 0; i < ix.ev.size() && !v.failed(); ++i) {
    const TraceEvent& e = ix.ev[i];
    if (e.action != Action::BcmHDeliver || ix.faulty(e.actor) || !e.peer) continue;
    bool found = false;
    for (std::size_t j = 0; j < i && !found; ++j) {
      const TraceEvent& s = ix.ev[j];
      found = s.action == Action::Send && s.actor == *e.peer && s.peer == e.actor &&
              same_app(s.app, *e.app);
    }
    if (!found) v.fail({&e});
  }
  return v.done();
}

Verdict validity3(const TraceIndex& ix) {
  VerdictBuilder v("BCM-Validity 3");
  for (std::size_t i = 0; i < ix.ev.size() && !v.failed(); ++i) {
    const TraceEvent& e = ix.ev[i];
    if (!is_delivery(e) || ix.faulty(e.actor) || !e.app->origin.is_mh()) continue;
    bool found = false;
    for (std::size_t j = 0; j < i && !found; ++j) {
      const TraceEvent& b = ix.ev[j];
      found = (b.action == Action::BcmHBroadcast || b.action == Action::BrBroadcast) &&
              b.actor == e.app->origin && same_app(b.app, *e.app);
    }
    if (!found) v.fail({&e});
  }
  return v.done();
}

/// Second delivery of one id at one node, if any.
void multiplicity(const TraceIndex& ix, NodeId node, VerdictBuilder& v) {
  auto it = ix.deliveries.find(node);
  if (it == ix.deliveries.end()) return;
  std::map<MessageId, std::size_t> seen;
  for (const Delivery& d : it->second) {
    auto [pos, fresh] = seen.emplace(message_id(d.app), d.pos);
    if (!fresh) v.fail({&ix.ev[pos->second], &ix.ev[d.pos]});
  }
}

Verdict integrity1(const TraceIndex& ix) {
  VerdictBuilder v("BCM-Integrity 1");
  for (NodeId n : ix.correct_hosts()) multiplicity(ix, n, v);
  for (NodeId n : ix.stations()) multiplicity(ix, n, v);
  return v.done();
}

Verdict integrity2(const TraceIndex& ix) {
  VerdictBuilder v("BCM-Integrity 2");
  std::set<NodeId> moved;
  for (const TraceEvent& e : ix.ev) {
    if (e.action == Action::HandoffStart && e.actor.is_mh()) moved.insert(e.actor);
  }
  for (NodeId n : moved) {
    if (!ix.faulty(n)) multiplicity(ix, n, v);
  }
  return v.done();
}

Verdict termination1(const TraceIndex& ix) {
  VerdictBuilder v("BCM-Termination 1");
  for (const TraceEvent& e : ix.ev) {
    if (v.failed()) break;
    const bool host = e.action == Action::BcmHBroadcast && !ix.faulty(e.actor);
    const bool station = e.action == Action::BcmSBroadcast;
    if (!(host || station) || !e.app) continue;
    if (!ix.delivered_at(e.actor, message_id(*e.app))) v.fail({&e});
  }
  return v.done();
}

Verdict termination2(const TraceIndex& ix) {
  VerdictBuilder v("BCM-Termination 2");
  for (const TraceEvent& e : ix.ev) {
    if (v.failed()) break;
    if (e.action != Action::BcmSDeliver || !e.app->origin.is_mh()) continue;
    for (NodeId s : ix.stations()) {
      if (!ix.delivered_at(s, message_id(*e.app))) v.fail({&e});
    }
  }
  return v.done();
}

Verdict termination3(const TraceIndex& ix) {
  VerdictBuilder v("BCM-Termination 3");
  for (const TraceEvent& e : ix.ev) {
    if (v.failed()) break;
    if (e.action != Action::BcmHDeliver || ix.faulty(e.actor) || !e.app->origin.is_mh()) continue;
    for (NodeId h : ix.correct_hosts()) {
      if (!ix.delivered_at(h, message_id(*e.app))) v.fail({&e});
    }
  }
  return v.done();
}

/// Transit windows of one host: (HandoffStart position, reattach position, destination).
struct Transit {
  NodeId host;
  std::size_t start = 0;
  std::size_t attach = 0;
  std::uint32_t dest = 0;
};

std::vector<Transit> transits(const TraceIndex& ix) {
  std::vector<Transit> out;
  std::map<NodeId, std::size_t> open;
  for (std::size_t i = 0; i < ix.ev.size(); ++i) {
    const TraceEvent& e = ix.ev[i];
    if (!e.actor.is_mh()) continue;
    if (e.action == Action::HandoffStart) open[e.actor] = i;
    if (e.action == Action::GroupJoin && e.detail.rfind("telepoint=", 0) == 0) {
      auto it = open.find(e.actor);
      if (it == open.end()) continue;
      out.push_back({e.actor, it->second, i, parse_node_id(e.detail.substr(10)).index});
      open.erase(it);
    }
  }
  return out;
}

Verdict termination4(const TraceIndex& ix) {
  VerdictBuilder v("BCM-Termination 4");
  for (const Transit& tr : transits(ix)) {
    if (ix.faulty(tr.host)) continue;
    for (std::size_t i = tr.start + 1; i < tr.attach && !v.failed(); ++i) {
      const TraceEvent& b = ix.ev[i];
      if (b.action != Action::BcmSBroadcast) continue;
      const MessageId id = message_id(*b.app);
      const auto at_dest = ix.delivered_at(mss(tr.dest), id);
      if (!at_dest || *at_dest >= tr.attach) continue;
      if (!ix.delivered_at(tr.host, id)) v.fail({&b, &ix.ev[*at_dest], &ix.ev[tr.attach]});
    }
  }
  return v.done();
}

/// Requires `first` before `second` at every node that delivered both.
void ordered_everywhere(const TraceIndex& ix, const MessageId& first, const MessageId& second,
                        const std::vector<NodeId>& nodes, VerdictBuilder& v) {
  for (NodeId n : nodes) {
    const auto a = ix.delivered_at(n, first);
    const auto b = ix.delivered_at(n, second);
    if (a && b && *b < *a) v.fail({&ix.ev[*b], &ix.ev[*a]});
  }
}

std::vector<NodeId> obliged_nodes(const TraceIndex& ix) {
  std::vector<NodeId> nodes = ix.correct_hosts();
  for (NodeId s : ix.stations()) nodes.push_back(s);
  return nodes;
}

Verdict causality1(const TraceIndex& ix) {
  VerdictBuilder v("BCM-Causality 1");
  const std::vector<NodeId> nodes = obliged_nodes(ix);
  const std::vector<Transit> moves = transits(ix);
  for (const Transit& tr : moves) {
    if (ix.faulty(tr.host)) continue;
    std::vector<MessageId> before;
    std::vector<MessageId> after;
    for (std::size_t i = 0; i < ix.ev.size(); ++i) {
      const TraceEvent& e = ix.ev[i];
      if (e.action != Action::BcmHBroadcast || e.actor != tr.host) continue;
      if (i < tr.start) before.push_back(message_id(*e.app));
      if (i > tr.attach) after.push_back(message_id(*e.app));
    }
    for (const MessageId& m1 : before) {
      for (const MessageId& m2 : after) {
        if (m1 != m2) ordered_everywhere(ix, m1, m2, nodes, v);
      }
    }
  }
  return v.done();
}

Verdict causality2(const TraceIndex& ix) {
  VerdictBuilder v("BCM-Causality 2");
  std::map<NodeId, std::vector<std::size_t>> starts;
  for (std::size_t i = 0; i < ix.ev.size(); ++i) {
    const TraceEvent& e = ix.ev[i];
    if (e.action == Action::HandoffStart && e.actor.is_mh()) starts[e.actor].push_back(i);
  }
  for (std::size_t pa = 0; pa < ix.ev.size() && !v.failed(); ++pa) {
    const TraceEvent& join = ix.ev[pa];
    if (join.action != Action::GroupJoin || !join.actor.is_mss() || !join.peer) continue;
    const NodeId host = *join.peer;
    if (ix.faulty(host)) continue;
    std::optional<std::size_t> p0;
    std::size_t next_start = ix.ev.size();
    for (std::size_t s : starts[host]) {
      if (s < pa) p0 = s;
      if (s > pa) {
        next_start = s;
        break;
      }
    }
    if (!p0) continue;
    std::vector<MessageId> m1s;
    std::vector<MessageId> m2s;
    for (std::size_t i = *p0 + 1; i < next_start; ++i) {
      const TraceEvent& b = ix.ev[i];
      if (b.action != Action::BcmSBroadcast) continue;
      const MessageId id = message_id(*b.app);
      if (i < pa) {
        const auto at_k = ix.delivered_at(join.actor, id);
        if (at_k && *at_k < pa) m1s.push_back(id);
      } else if (b.actor == join.actor) {
        m2s.push_back(id);
      }
    }
    for (const MessageId& m1 : m1s) {
      for (const MessageId& m2 : m2s) {
        if (m1 != m2) ordered_everywhere(ix, m1, m2, {host}, v);
      }
    }
  }
  return v.done();
}

Verdict causality3(const TraceIndex& ix, const CausalOracle& oracle) {
  VerdictBuilder v("BCM-Causality 3");
  for (NodeId n : obliged_nodes(ix)) {
    auto it = ix.deliveries.find(n);
    if (it == ix.deliveries.end()) continue;
    for (const Delivery& d : it->second) {
      auto past = oracle.causal_past.find(message_id(d.app));
      if (past == oracle.causal_past.end()) continue;
      for (const MessageId& m1 : past->second) {
        const auto a = ix.delivered_at(n, m1);
        if (a && *a > d.pos) v.fail({&ix.ev[d.pos], &ix.ev[*a]});
      }
    }
  }
  return v.done();
}

Verdict safety(const TraceIndex& ix) {
  VerdictBuilder v("BCM-Safety");
  std::map<MessageId, Payload> first_payload;
  for (const TraceEvent& e : ix.ev) {
    if (!e.app || !e.app->origin.is_mh()) continue;
    if (!ix.faulty(e.app->origin)) {
      if (is_origin_broadcast(e)) first_payload.emplace(message_id(*e.app), e.app->payload);
      continue;
    }
    // A faulty origin's own records are not trusted; its first Init fixes the payload.
    if (e.action == Action::Send && e.actor == e.app->origin && e.message &&
        std::holds_alternative<Init>(*e.message)) {
      first_payload.emplace(message_id(*e.app), e.app->payload);
    }
  }
  for (NodeId n : obliged_nodes(ix)) {
    auto it = ix.deliveries.find(n);
    if (it == ix.deliveries.end()) continue;
    std::set<MessageId> seen;
    for (const Delivery& d : it->second) {
      const MessageId id = message_id(d.app);
      if (!d.app.origin.is_mh()) continue;
      const TraceEvent* e = &ix.ev[d.pos];
      if (ix.equivocated.count(id)) v.fail({e});
      auto fp = first_payload.find(id);
      if (fp != first_payload.end() && fp->second != d.app.payload) v.fail({e});
      if (!seen.insert(id).second) v.fail({e});
    }
  }
  return v.done();
}

void check_well_formed(const std::vector<TraceEvent>& trace) {
  std::uint64_t last = 0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const TraceEvent& e = trace[i];
    const std::string where = "event " + std::to_string(i) + ": ";
    if (e.tick < last) throw MalformedTrace(where + "tick goes backwards");
    last = e.tick;
    const bool needs_app = is_delivery(e) || e.action == Action::BcmHBroadcast ||
                           e.action == Action::BcmSBroadcast || e.action == Action::BrBroadcast;
    if (needs_app && !e.app) throw MalformedTrace(where + "record lacks an application message");
    if ((e.action == Action::GroupJoin || e.action == Action::GroupLeave) && e.actor.is_mss() &&
        (!e.peer || !e.peer->is_mh())) {
      throw MalformedTrace(where + "membership record lacks the host");
    }
  }
}

}  // namespace

const std::vector<std::string>& property_names() {
  static const std::vector<std::string> kNames = {
      "BCM-Validity 1",    "BCM-Validity 2",    "BCM-Validity 3",    "BCM-Integrity 1",
      "BCM-Integrity 2",   "BCM-Termination 1", "BCM-Termination 2", "BCM-Termination 3",
      "BCM-Termination 4", "BCM-Causality 1",   "BCM-Causality 2",   "BCM-Causality 3",
      "BCM-Safety"};
  return kNames;
}

bool CausalOracle::precedes(const MessageId& a, const MessageId& b) const {
  auto it = causal_past.find(b);
  return it != causal_past.end() && it->second.count(a);
}

CausalOracle build_oracle(const std::vector<TraceEvent>& trace) {
  CausalOracle oracle;
  std::map<NodeId, std::set<MessageId>> history;
  const std::set<MessageId> equivocated = equivocated_ids(trace);
  for (const TraceEvent& e : trace) {
    if (!e.app) continue;
    const MessageId id = message_id(*e.app);
    if (equivocated.count(id)) continue;
    std::set<MessageId>& hist = history[e.actor];
    if (is_origin_broadcast(e)) {
      if (oracle.causal_past.emplace(id, hist).second) {
        oracle.causal_past[id].erase(id);
      }
      hist.insert(id);
    } else if (e.action == Action::BcmSBroadcast) {
      // Station relaying a host message: its own deliveries precede the relay.
      auto& past = oracle.causal_past[id];
      for (const MessageId& m : hist) {
        if (m != id && !oracle.precedes(id, m)) past.insert(m);
      }
      hist.insert(id);
    } else if (is_delivery(e)) {
      hist.insert(id);
      auto past = oracle.causal_past.find(id);
      if (past != oracle.causal_past.end()) hist.insert(past->second.begin(), past->second.end());
    }
  }
  // Close transitively in case relay pasts grew after dependents were recorded.
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto& [id, past] : oracle.causal_past) {
      std::set<MessageId> add;
      for (const MessageId& m : past) {
        auto it = oracle.causal_past.find(m);
        if (it == oracle.causal_past.end()) continue;
        for (const MessageId& x : it->second) {
          if (x != id && !past.count(x)) add.insert(x);
        }
      }
      if (!add.empty()) {
        past.insert(add.begin(), add.end());
        changed = true;
      }
    }
  }
  return oracle;
}

bool is_strict_partial_order(const CausalOracle& oracle) {
  for (const auto& [id, past] : oracle.causal_past) {
    if (past.count(id)) return false;
    for (const MessageId& m : past) {
      auto it = oracle.causal_past.find(m);
      if (it == oracle.causal_past.end()) continue;
      for (const MessageId& x : it->second) {
        if (!past.count(x)) return false;
      }
    }
  }
  return true;
}

std::set<NodeId> causal_order_offenders(const std::vector<TraceEvent>& trace,
                                        const CausalOracle& oracle) {
  std::map<NodeId, std::map<MessageId, std::size_t>> pos;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (is_delivery(trace[i])) pos[trace[i].actor].emplace(message_id(*trace[i].app), i);
  }
  std::set<NodeId> out;
  for (const auto& [node, seen] : pos) {
    for (const auto& [id, at] : seen) {
      auto past = oracle.causal_past.find(id);
      if (past == oracle.causal_past.end()) continue;
      for (const MessageId& m : past->second) {
        auto it = seen.find(m);
        if (it != seen.end() && it->second > at) out.insert(node);
      }
    }
  }
  return out;
}

std::set<MessageId> lost_messages(const std::vector<TraceEvent>& trace) {
  std::set<MessageId> issued;
  std::set<MessageId> delivered;
  for (const TraceEvent& e : trace) {
    if (is_origin_broadcast(e)) issued.insert(message_id(*e.app));
    if (e.action == Action::BcmSDeliver) delivered.insert(message_id(*e.app));
  }
  std::set<MessageId> lost;
  for (const MessageId& id : issued) {
    if (!delivered.count(id)) lost.insert(id);
  }
  return lost;
}

std::set<MessageId> equivocated_ids(const std::vector<TraceEvent>& trace) {
  std::map<NodeId, std::optional<MessageId>> current;
  std::map<NodeId, std::set<Payload>> payloads;
  std::set<MessageId> out;
  for (const TraceEvent& e : trace) {
    if (!e.actor.is_mh()) continue;
    if (e.action == Action::BrBroadcast && e.app) {
      current[e.actor] = message_id(*e.app);
      payloads[e.actor].clear();
      continue;
    }
    if (e.action != Action::Send || !e.message) continue;
    const auto* init = std::get_if<Init>(&*e.message);
    if (!init || init->app.origin != e.actor) continue;
    const auto& cur = current[e.actor];
    if (!cur || *cur != message_id(init->app)) continue;
    auto& seen = payloads[e.actor];
    seen.insert(init->app.payload);
    if (seen.size() > 1) out.insert(*cur);
  }
  return out;
}

std::vector<Verdict> check_all(const std::vector<TraceEvent>& trace, const ScenarioConfig& config) {
  check_well_formed(trace);
  const TraceIndex ix(trace, config);
  const CausalOracle oracle = build_oracle(trace);
  return {validity1(ix),    validity2(ix),    validity3(ix),    integrity1(ix),
          integrity2(ix),   termination1(ix), termination2(ix), termination3(ix),
          termination4(ix), causality1(ix),   causality2(ix),   causality3(ix, oracle),
          safety(ix)};
}

bool all_hold(const std::vector<Verdict>& verdicts) {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.holds; });
}

std::string verdict_report(const std::vector<Verdict>& verdicts) {
  std::ostringstream out;
  out << "property,holds,counterexample_events\n";
  for (const Verdict& v : verdicts) {
    out << v.property << ',' << (v.holds ? "true" : "false") << ',' << v.counterexample.size()
        << '\n';
  }
  return out.str();
}

std::string verdict_summary_json(const std::vector<Verdict>& verdicts) {
  nlohmann::ordered_json j;
  j["all_hold"] = all_hold(verdicts);
  j["verdicts"] = nlohmann::ordered_json::array();
  for (const Verdict& v : verdicts) {
    nlohmann::ordered_json item{{"property", v.property}, {"holds", v.holds}};
    item["counterexample"] = nlohmann::ordered_json::array();
    for (const TraceEvent& e : v.counterexample) {
      item["counterexample"].push_back(nlohmann::ordered_json::parse(encode(e)));
    }
    j["verdicts"].push_back(item);
  }
  return j.dump(2) + "\n";
}

bool t_compliant(std::uint64_t nmh, std::uint64_t t) { return nmh == 0 || 3 * t < nmh; }

TConditionTimeline t_condition_timeline(const std::vector<TraceEvent>& trace,
                                        const ScenarioConfig& config) {
  TConditionTimeline tl;
  std::map<std::uint32_t, std::set<std::uint32_t>> members;
  for (std::uint32_t s = 1; s <= config.n_mss; ++s) members[s];
  for (const auto& [h, s] : config.initial_assignment) members[s].insert(h);
  const auto record = [&](std::uint32_t s, std::uint64_t tick) {
    const auto& group = members[s];
    std::uint64_t t = 0;
    for (std::uint32_t h : group) t += config.byzantine_set.count(h);
    const TPoint p{tick, group.size(), t, t_compliant(group.size(), t)};
    tl.groups[s].push_back(p);
    auto& first = tl.first_violation[s];
    if (!p.compliant && !first) first = tick;
  };
  for (std::uint32_t s = 1; s <= config.n_mss; ++s) {
    tl.first_violation[s] = std::nullopt;
    record(s, 0);
  }
  for (const TraceEvent& e : trace) {
    if (!e.actor.is_mss() || !e.peer || !e.peer->is_mh()) continue;
    if (e.action == Action::GroupJoin) {
      members[e.actor.index].insert(e.peer->index);
    } else if (e.action == Action::GroupLeave) {
      members[e.actor.index].erase(e.peer->index);
    } else {
      continue;
    }
    record(e.actor.index, e.tick);
  }
  return tl;
}

Thresholds violation_thresholds(std::uint64_t nmh, std::uint64_t t) {
  if (!t_compliant(nmh, t) || nmh == 0) {
    throw AlreadyViolated("t-condition already violated for nmh=" + std::to_string(nmh) +
                          " t=" + std::to_string(t));
  }
  return {nmh - 3 * t, nmh / 3 - t};
}

std::uint64_t joins_to_violate_growing(std::uint64_t nmh, std::uint64_t t) {
  std::uint64_t j = 0;
  while (t_compliant(nmh + j, t + j)) ++j;
  return j;
}

}  // namespace bcm
