// Copyright (c) The BCM Broadcast Authors.
// Licensed under the Apache 2.0 License.

#include "bcm/net_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <queue>
#include <sstream>

#include <json.hpp>

namespace bcm {

namespace {

using json = nlohmann::ordered_json;

struct DeliverEv {
  NodeId from;
  NodeId to;
  ProtocolMessage msg;
  /// Station the sending host was in range of, for host-originated messages.
  std::optional<std::uint32_t> via;
};
struct RadioEv {
  std::uint32_t host = 0;
  std::uint32_t station = 0;
};
struct AppEv {
  std::uint32_t host = 0;
  Payload payload;
};
struct MssAppEv {
  std::uint32_t station = 0;
  Payload payload;
};
struct HandoffEv {
  std::uint32_t host = 0;
  std::uint32_t dest = 0;
};
struct DeadlineEv {
  std::uint32_t station = 0;
  MessageId id;
};
struct InjectEv {
  std::uint32_t host = 0;
  std::size_t index = 0;
};
struct MobilityEv {
  MobilityClass cls = MobilityClass::HonestJoin;
};

using EventKind =
    std::variant<DeliverEv, RadioEv, AppEv, MssAppEv, HandoffEv, DeadlineEv, InjectEv, MobilityEv>;

struct Event {
  std::uint64_t tick = 0;
  std::uint64_t order = 0;
  std::uint64_t depth = 0;
  EventKind kind;
};

struct Later {
  bool operator()(const Event& a, const Event& b) const {
    return a.tick != b.tick ? a.tick > b.tick : a.order > b.order;
  }
};

constexpr std::uint64_t kMobilitySalt = 0x9E3779B97F4A7C15ULL;

class Simulator {
 public:
  explicit Simulator(const ScenarioConfig& config)
      : cfg_(config), mobility_rng_(config.seed ^ kMobilitySalt) {
    validate(cfg_);
    std::vector<std::set<std::uint32_t>> members(cfg_.n_mss + 1);
    for (const auto& [h, s] : cfg_.initial_assignment) members[s].insert(h);
    location_.assign(cfg_.n_mh + 1, std::nullopt);
    for (const auto& [h, s] : cfg_.initial_assignment) location_[h] = s;
    for (std::uint32_t s = 1; s <= cfg_.n_mss; ++s) {
      stations_.push_back(make_mss(s, cfg_.n_mss, members[s], cfg_.channel_latency));
    }
    for (std::uint32_t h = 1; h <= cfg_.n_mh; ++h) {
      const std::uint32_t s = cfg_.initial_assignment.at(h);
      hosts_.push_back(make_mh(h, cfg_.n_mss, s, radio_view(s)));
      MhTransition t = mh_step;
      auto strat = cfg_.adversary_strategy.find(h);
      if (strat != cfg_.adversary_strategy.end()) t = wrap(t, strat->second);
      transitions_.push_back(std::move(t));
    }
    for (const WorkloadItem& w : cfg_.workload) {
      switch (w.kind) {
        case WorkloadKind::AppBroadcast:
          push(w.tick, 0, AppEv{w.node.index, w.payload});
          break;
        case WorkloadKind::MssAppBroadcast:
          push(w.tick, 0, MssAppEv{w.node.index, w.payload});
          break;
        case WorkloadKind::StartHandoff:
          push(w.tick, 0, HandoffEv{w.node.index, w.dest_mss});
          break;
      }
    }
    for (const auto& [h, strat] : cfg_.adversary_strategy) {
      if (const auto* inj = std::get_if<ArbitraryInject>(&strat)) {
        for (std::size_t i = 0; i < inj->schedule.size(); ++i) {
          push(inj->schedule[i].tick, 0, InjectEv{h, i});
        }
      }
    }
    if (cfg_.mobility_model) {
      for (const MobilityEvent& m : schedule_mobility(cfg_)) push(m.tick, 0, MobilityEv{m.cls});
    }
  }

  RunResult run() {
    while (!queue_.empty()) {
      Event ev = queue_.top();
      if (cfg_.max_ticks && ev.tick > cfg_.max_ticks) break;
      queue_.pop();
      now_ = ev.tick;
      std::visit([&](auto& k) { handle(k, ev.depth); }, ev.kind);
    }
    out_.final_tick = now_;
    out_.mh_states = hosts_;
    out_.mss_states = stations_;
    return std::move(out_);
  }

 private:
  void push(std::uint64_t tick, std::uint64_t depth, EventKind kind) {
    queue_.push(Event{tick, next_order_++, depth, std::move(kind)});
  }

  std::uint64_t latency(NodeId a, NodeId b) const {
    for (const LatencyOverride& o : cfg_.latency_overrides) {
      if (o.src == a && o.dst == b) return o.latency;
    }
    return a.is_mss() && b.is_mss() ? cfg_.mss_latency : cfg_.channel_latency;
  }

  std::vector<NodeId> radio_view(std::uint32_t station) const {
    std::vector<NodeId> view;
    for (std::uint32_t h = 1; h <= cfg_.n_mh; ++h) {
      if (location_[h] == station) view.push_back(mh(h));
    }
    return view;
  }

  void emit(Effects& fx, NodeId actor, std::uint64_t depth) {
    for (TraceEvent& e : fx.trace) out_.trace.push_back(std::move(e));
    for (Outgoing& o : fx.sends) {
      if (o.from != actor) {
        throw std::logic_error("identity integrity: " + to_string(actor) + " sent as " +
                               to_string(o.from));
      }
      account(o.msg, depth + 1);
      if (o.loopback) continue;
      std::optional<std::uint32_t> via;
      if (actor.is_mh()) via = location_[actor.index];
      const std::uint64_t at = now_ + latency(o.from, o.to);
      push(at, depth + 1, DeliverEv{o.from, o.to, std::move(o.msg), via});
    }
    if (actor.is_mss()) {
      for (const TimerRequest& t : fx.timers) {
        const auto key = std::make_pair(actor.index, t.id);
        push(std::max(t.tick, now_), echo_depth_[key], DeadlineEv{actor.index, t.id});
      }
    }
  }

  void account(const ProtocolMessage& msg, std::uint64_t step) {
    const auto app = carried_app(msg);
    if (!app) {
      ++out_.accounting.control;
      return;
    }
    BroadcastCounts& c = out_.accounting.per_broadcast[message_id(*app)];
    c.steps = std::max(c.steps, step);
    std::visit(
        [&](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, Init>) ++c.init;
          else if constexpr (std::is_same_v<T, Echo>) ++c.echo;
          else if constexpr (std::is_same_v<T, Ready>) ++c.ready;
          else if constexpr (std::is_same_v<T, GlobalBcast>) ++c.global;
          else if constexpr (std::is_same_v<T, ForwardGlobal>) ++c.forward;
          else if constexpr (std::is_same_v<T, ForwardCatchup>) ++c.catchup;
          else ++out_.accounting.control;
        },
        msg);
  }

  void step_host(std::uint32_t h, const MhInput& input, std::uint64_t depth) {
    MhStep step = transitions_[h - 1](hosts_[h - 1], input, now_);
    hosts_[h - 1] = std::move(step.state);
    emit(step.effects, mh(h), depth);
  }

  void step_station(std::uint32_t s, MssStep step, std::uint64_t depth) {
    stations_[s - 1] = std::move(step.state);
    emit(step.effects, mss(s), depth);
  }

  void note(NodeId actor, Action action, std::string detail, const DeliverEv* ev = nullptr) {
    TraceEvent e;
    e.tick = now_;
    e.actor = actor;
    e.action = action;
    e.detail = std::move(detail);
    if (ev) {
      e.peer = ev->from;
      e.message = ev->msg;
      e.app = carried_app(ev->msg);
    }
    out_.trace.push_back(std::move(e));
  }

  void notify_views(std::uint32_t station) {
    const std::vector<NodeId> view = radio_view(station);
    for (NodeId h : view) step_host(h.index, ViewChangeInput{view}, 0);
  }

  void handle(DeliverEv& ev, std::uint64_t depth) {
    if (ev.to.is_mh()) {
      const auto here = location_[ev.to.index];
      const bool in_range = here && (ev.from.is_mss() ? *here == ev.from.index : ev.via == here);
      if (!in_range) {
        ++out_.dropped;
        note(ev.to, Action::Disregard, "dropped: out of range", &ev);
        return;
      }
      note(ev.to, Action::Receive, {}, &ev);
      step_host(ev.to.index, ReceiveInput{ev.from, ev.msg}, depth);
      return;
    }
    note(ev.to, Action::Receive, {}, &ev);
    if (const auto* e = std::get_if<Echo>(&ev.msg)) bump_echo_depth(ev.to.index, e->app, depth);
    if (const auto* i = std::get_if<Init>(&ev.msg)) bump_echo_depth(ev.to.index, i->app, depth);
    step_station(ev.to.index, mss_receive(stations_[ev.to.index - 1], ev.from, ev.msg, now_),
                 depth);
  }

  void bump_echo_depth(std::uint32_t station, const AppMessage& app, std::uint64_t depth) {
    auto& d = echo_depth_[std::make_pair(station, message_id(app))];
    d = std::max(d, depth);
  }

  void handle(RadioEv& ev, std::uint64_t depth) {
    location_[ev.host] = ev.station;
    step_host(ev.host, RadioDetectedInput{ev.station, radio_view(ev.station)}, depth);
    notify_views(ev.station);
  }

  void handle(AppEv& ev, std::uint64_t depth) {
    step_host(ev.host, AppBroadcastInput{ev.payload}, depth);
  }

  void handle(MssAppEv& ev, std::uint64_t depth) {
    step_station(ev.station, bcm_sbroadcast(stations_[ev.station - 1], ev.payload, now_), depth);
  }

  void handle(HandoffEv& ev, std::uint64_t depth) { start_handoff(ev.host, ev.dest, depth); }

  void handle(DeadlineEv& ev, std::uint64_t depth) {
    step_station(ev.station, on_echo_deadline(stations_[ev.station - 1], ev.id, now_), depth);
  }

  void handle(InjectEv& ev, std::uint64_t depth) {
    step_host(ev.host, InjectInput{ev.index}, depth);
  }

  void handle(MobilityEv& ev, std::uint64_t depth) {
    const std::uint32_t target = cfg_.mobility_model->target_mss;
    const bool byz = ev.cls == MobilityClass::ByzantineLeave || ev.cls == MobilityClass::ByzantineJoin;
    const bool leave = ev.cls == MobilityClass::ByzantineLeave || ev.cls == MobilityClass::HonestLeave;
    std::vector<std::uint32_t> candidates;
    for (std::uint32_t h = 1; h <= cfg_.n_mh; ++h) {
      if (cfg_.byzantine_set.count(h) != static_cast<std::size_t>(byz)) continue;
      if (!location_[h] || !hosts_[h - 1].telepoint) continue;
      if ((*location_[h] == target) == leave) candidates.push_back(h);
    }
    if (candidates.empty() || cfg_.n_mss < 2) {
      ++out_.skipped_mobility;
      return;
    }
    const std::uint32_t h = candidates[pick(candidates.size())];
    std::uint32_t dest = target;
    if (leave) {
      dest = static_cast<std::uint32_t>(pick(cfg_.n_mss - 1)) + 1;
      if (dest >= target) ++dest;
    }
    start_handoff(h, dest, depth);
  }

  std::size_t pick(std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(uniform01(mobility_rng_) * n));
  }

  void start_handoff(std::uint32_t h, std::uint32_t dest, std::uint64_t depth) {
    const auto here = location_[h];
    if (here && *here == dest) {
      note(mh(h), Action::Disregard, "handoff to current station");
      return;
    }
    step_host(h, StartHandoffInput{dest}, depth);
    if (hosts_[h - 1].telepoint || !here) return;
    location_[h].reset();
    note(mh(h), Action::GroupLeave, "radio left=" + to_string(mss(*here)) +
                                        " dest=" + to_string(mss(dest)));
    notify_views(*here);
    push(now_ + cfg_.transit_delay, 0, RadioEv{h, dest});
  }

  const ScenarioConfig& cfg_;
  std::mt19937_64 mobility_rng_;
  std::vector<MhState> hosts_;
  std::vector<MhTransition> transitions_;
  std::vector<MssState> stations_;
  std::vector<std::optional<std::uint32_t>> location_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::map<std::pair<std::uint32_t, MessageId>, std::uint64_t> echo_depth_;
  std::uint64_t next_order_ = 0;
  std::uint64_t now_ = 0;
  RunResult out_;
};

// JSON helpers.

json node_json(NodeId id) { return to_string(id); }

NodeId node_from(const json& j, const std::string& field) {
  if (!j.is_string()) throw InvalidConfig(field, "expected a node id string");
  try {
    return parse_node_id(j.get<std::string>());
  } catch (const std::exception&) {
    throw InvalidConfig(field, "bad node id '" + j.get<std::string>() + "'");
  }
}

template <typename T>
T get_field(const json& j, const std::string& key, const std::string& path, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InvalidConfig(path + key, "wrong type");
  }
}

json strategy_json(const AdversaryStrategy& strategy) {
  json j;
  j["name"] = strategy_name(strategy);
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Crash>) {
          j["at_tick"] = s.at_tick;
        } else if constexpr (std::is_same_v<T, DuplicateBroadcast>) {
          j["payload"] = s.payload;
          j["times"] = s.times;
        } else if constexpr (std::is_same_v<T, Equivocate>) {
          j["payload_a"] = s.payload_a;
          j["payload_b"] = s.payload_b;
          j["side_a"] = s.side_a;
          j["mss_gets_a"] = s.mss_gets_a;
        } else if constexpr (std::is_same_v<T, ArbitraryInject>) {
          j["schedule"] = json::array();
          for (const InjectEntry& e : s.schedule) {
            j["schedule"].push_back({{"tick", e.tick}, {"seq", e.seq}, {"payload", e.payload}});
          }
        }
      },
      strategy);
  return j;
}

AdversaryStrategy strategy_from(const json& j, const std::string& path) {
  if (!j.is_object()) throw InvalidConfig(path, "expected an object");
  const std::string name = get_field<std::string>(j, "name", path + ".", "");
  const std::string p = path + ".";
  if (name == "crash") return Crash{get_field<std::uint64_t>(j, "at_tick", p, 0)};
  if (name == "silent") return Silent{};
  if (name == "duplicate") {
    return DuplicateBroadcast{get_field<std::string>(j, "payload", p, "dup"),
                              get_field<std::uint32_t>(j, "times", p, 2)};
  }
  if (name == "equivocate") {
    return Equivocate{get_field<std::string>(j, "payload_a", p, "a"),
                      get_field<std::string>(j, "payload_b", p, "b"),
                      get_field<std::set<std::uint32_t>>(j, "side_a", p, {}),
                      get_field<bool>(j, "mss_gets_a", p, false)};
  }
  if (name == "refuse_echo") return RefuseEcho{};
  if (name == "arbitrary_inject") {
    ArbitraryInject a;
    if (j.contains("schedule")) {
      if (!j["schedule"].is_array()) throw InvalidConfig(p + "schedule", "expected an array");
      for (std::size_t i = 0; i < j["schedule"].size(); ++i) {
        const json& e = j["schedule"][i];
        const std::string ep = p + "schedule[" + std::to_string(i) + "].";
        a.schedule.push_back({get_field<std::uint64_t>(e, "tick", ep, 0),
                              get_field<std::uint64_t>(e, "seq", ep, 1),
                              get_field<std::string>(e, "payload", ep, "")});
      }
    }
    return a;
  }
  if (name == "causal_violator") return CausalViolator{};
  throw InvalidConfig(p + "name", "unknown strategy '" + name + "'");
}

const char* kind_name(WorkloadKind k) {
  switch (k) {
    case WorkloadKind::AppBroadcast: return "app_broadcast";
    case WorkloadKind::MssAppBroadcast: return "mss_app_broadcast";
    case WorkloadKind::StartHandoff: return "start_handoff";
  }
  return "";
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& path) {
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw InvalidConfig(path + k, "unknown field");
  }
}

}  // namespace

void validate(const ScenarioConfig& c) {
  if (c.n_mss == 0) throw InvalidConfig("n_mss", "must be at least 1");
  if (c.n_mh == 0) throw InvalidConfig("n_mh", "must be at least 1");
  if (c.initial_assignment.size() != c.n_mh) {
    throw InvalidConfig("initial_assignment", "must assign every host exactly once");
  }
  for (const auto& [h, s] : c.initial_assignment) {
    if (h == 0 || h > c.n_mh) {
      throw InvalidConfig("initial_assignment", "host index " + std::to_string(h) + " out of range");
    }
    if (s == 0 || s > c.n_mss) {
      throw InvalidConfig("initial_assignment", "station index " + std::to_string(s) + " out of range");
    }
  }
  for (std::uint32_t b : c.byzantine_set) {
    if (b == 0 || b > c.n_mh) throw InvalidConfig("byzantine_set", "host index out of range");
  }
  if (c.global_compliance && 3 * c.byzantine_set.size() >= c.n_mh) {
    throw InvalidConfig("byzantine_set", "t < n_mh / 3 is declared but does not hold");
  }
  for (const auto& [h, strat] : c.adversary_strategy) {
    if (!c.byzantine_set.count(h)) {
      throw InvalidConfig("adversary_strategy", "h" + std::to_string(h) + " is not in byzantine_set");
    }
    if (const auto* e = std::get_if<Equivocate>(&strat)) {
      for (std::uint32_t x : e->side_a) {
        if (x == 0 || x > c.n_mh) throw InvalidConfig("adversary_strategy", "side_a index out of range");
      }
    }
  }
  for (std::size_t i = 0; i < c.workload.size(); ++i) {
    const WorkloadItem& w = c.workload[i];
    const std::string f = "workload[" + std::to_string(i) + "]";
    const bool want_mss = w.kind == WorkloadKind::MssAppBroadcast;
    const std::uint32_t limit = want_mss ? c.n_mss : c.n_mh;
    if (w.node.is_mss() != want_mss || w.node.index == 0 || w.node.index > limit) {
      throw InvalidConfig(f + ".node", "node " + to_string(w.node) + " invalid for this kind");
    }
    if (w.kind == WorkloadKind::StartHandoff && (w.dest_mss == 0 || w.dest_mss > c.n_mss)) {
      throw InvalidConfig(f + ".dest_mss", "station index out of range");
    }
  }
  if (c.mobility_model) {
    const MobilityModel& m = *c.mobility_model;
    for (double r : m.poisson_rates) {
      if (!(r >= 0)) throw InvalidConfig("mobility_model.poisson_rates", "rates must be non-negative");
    }
    if (m.horizon_ticks == 0) throw InvalidConfig("mobility_model.horizon_ticks", "must be positive");
    if (m.target_mss == 0 || m.target_mss > c.n_mss) {
      throw InvalidConfig("mobility_model.target_mss", "station index out of range");
    }
  }
  if (c.channel_latency == 0) throw InvalidConfig("channel_latency", "must be at least 1");
  if (c.mss_latency == 0) throw InvalidConfig("mss_latency", "must be at least 1");
  if (c.transit_delay == 0) throw InvalidConfig("transit_delay", "must be at least 1");
  for (const LatencyOverride& o : c.latency_overrides) {
    const auto in_range = [&](NodeId n) {
      return n.index >= 1 && n.index <= (n.is_mss() ? c.n_mss : c.n_mh);
    };
    if (!in_range(o.src) || !in_range(o.dst) || o.latency == 0) {
      throw InvalidConfig("latency_overrides", "bad override " + to_string(o.src) + "->" +
                                                   to_string(o.dst));
    }
  }
}

std::uint64_t count_local_broadcast(const MessageAccounting& accounting, const MessageId& id) {
  auto it = accounting.per_broadcast.find(id);
  if (it == accounting.per_broadcast.end() || it->second.ready == 0) {
    throw IncompleteBroadcast("no Ready sent for " + to_string(id));
  }
  const BroadcastCounts& c = it->second;
  return c.init + c.echo + c.ready;
}

std::uint64_t count_global_broadcast(const MessageAccounting& accounting, const MessageId& id) {
  auto it = accounting.per_broadcast.find(id);
  if (it == accounting.per_broadcast.end() || it->second.global == 0) {
    throw IncompleteBroadcast("no GlobalBcast sent for " + to_string(id));
  }
  const BroadcastCounts& c = it->second;
  return c.init + c.echo + c.global + c.forward;
}

std::string accounting_csv(const MessageAccounting& accounting) {
  std::ostringstream out;
  out << "broadcast_id,init,echo,ready,global,forward,catchup,steps\n";
  for (const auto& [id, c] : accounting.per_broadcast) {
    out << to_string(id) << ',' << c.init << ',' << c.echo << ',' << c.ready << ',' << c.global
        << ',' << c.forward << ',' << c.catchup << ',' << c.steps << '\n';
  }
  return out.str();
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double exponential(std::mt19937_64& rng, double rate) {
  return -std::log1p(-uniform01(rng)) / rate;
}

std::vector<MobilityEvent> schedule_mobility(const ScenarioConfig& config) {
  std::vector<MobilityEvent> events;
  if (!config.mobility_model) return events;
  const MobilityModel& m = *config.mobility_model;
  const double horizon = static_cast<double>(m.horizon_ticks);
  std::mt19937_64 rng(config.seed);
  for (std::size_t c = 0; c < 4; ++c) {
    const double per_tick = m.poisson_rates[c] / horizon;
    if (per_tick <= 0) continue;
    for (double t = exponential(rng, per_tick); t < horizon; t += exponential(rng, per_tick)) {
      events.push_back({static_cast<std::uint64_t>(t), static_cast<MobilityClass>(c + 1)});
    }
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const MobilityEvent& a, const MobilityEvent& b) { return a.tick < b.tick; });
  return events;
}

RunResult run(const ScenarioConfig& config) {
  Simulator sim(config);
  return sim.run();
}

std::string scenario_to_json(const ScenarioConfig& c) {
  json j;
  j["n_mss"] = c.n_mss;
  j["n_mh"] = c.n_mh;
  json assign = json::object();
  for (const auto& [h, s] : c.initial_assignment) assign[to_string(mh(h))] = to_string(mss(s));
  j["initial_assignment"] = assign;
  j["byzantine_set"] = c.byzantine_set;
  json strat = json::object();
  for (const auto& [h, s] : c.adversary_strategy) strat[to_string(mh(h))] = strategy_json(s);
  j["adversary_strategy"] = strat;
  j["workload"] = json::array();
  for (const WorkloadItem& w : c.workload) {
    json item{{"tick", w.tick}, {"kind", kind_name(w.kind)}, {"node", node_json(w.node)}};
    if (w.kind == WorkloadKind::StartHandoff) {
      item["dest_mss"] = w.dest_mss;
    } else {
      item["payload"] = w.payload;
    }
    j["workload"].push_back(item);
  }
  if (c.mobility_model) {
    j["mobility_model"] = {{"poisson_rates", c.mobility_model->poisson_rates},
                           {"horizon_ticks", c.mobility_model->horizon_ticks},
                           {"target_mss", c.mobility_model->target_mss}};
  }
  j["seed"] = c.seed;
  j["channel_latency"] = c.channel_latency;
  j["mss_latency"] = c.mss_latency;
  j["transit_delay"] = c.transit_delay;
  j["latency_overrides"] = json::array();
  for (const LatencyOverride& o : c.latency_overrides) {
    j["latency_overrides"].push_back(
        {{"src", node_json(o.src)}, {"dst", node_json(o.dst)}, {"latency", o.latency}});
  }
  j["global_compliance"] = c.global_compliance;
  j["max_ticks"] = c.max_ticks;
  return j.dump(2) + "\n";
}

ScenarioConfig scenario_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidConfig("document", e.what());
  }
  if (!j.is_object()) throw InvalidConfig("document", "expected an object");
  check_keys(j,
             {"n_mss", "n_mh", "initial_assignment", "byzantine_set", "adversary_strategy",
              "workload", "mobility_model", "seed", "channel_latency", "mss_latency",
              "transit_delay", "latency_overrides", "global_compliance", "max_ticks"},
             "");
  ScenarioConfig c;
  c.n_mss = get_field<std::uint32_t>(j, "n_mss", "", 1);
  c.n_mh = get_field<std::uint32_t>(j, "n_mh", "", 1);
  if (!j.contains("initial_assignment") || !j["initial_assignment"].is_object()) {
    throw InvalidConfig("initial_assignment", "expected an object mapping hosts to stations");
  }
  for (const auto& [k, v] : j["initial_assignment"].items()) {
    const NodeId h = node_from(json(k), "initial_assignment");
    const NodeId s = node_from(v, "initial_assignment." + k);
    if (!h.is_mh() || !s.is_mss()) throw InvalidConfig("initial_assignment." + k, "expected hN: sM");
    c.initial_assignment[h.index] = s.index;
  }
  c.byzantine_set = get_field<std::set<std::uint32_t>>(j, "byzantine_set", "", {});
  if (j.contains("adversary_strategy")) {
    if (!j["adversary_strategy"].is_object()) {
      throw InvalidConfig("adversary_strategy", "expected an object");
    }
    for (const auto& [k, v] : j["adversary_strategy"].items()) {
      const NodeId h = node_from(json(k), "adversary_strategy");
      c.adversary_strategy[h.index] = strategy_from(v, "adversary_strategy." + k);
    }
  }
  if (j.contains("workload")) {
    if (!j["workload"].is_array()) throw InvalidConfig("workload", "expected an array");
    for (std::size_t i = 0; i < j["workload"].size(); ++i) {
      const json& w = j["workload"][i];
      const std::string p = "workload[" + std::to_string(i) + "].";
      if (!w.is_object()) throw InvalidConfig(p.substr(0, p.size() - 1), "expected an object");
      check_keys(w, {"tick", "kind", "node", "payload", "dest_mss"}, p);
      WorkloadItem item;
      item.tick = get_field<std::uint64_t>(w, "tick", p, 0);
      const std::string kind = get_field<std::string>(w, "kind", p, "");
      if (kind == "app_broadcast") item.kind = WorkloadKind::AppBroadcast;
      else if (kind == "mss_app_broadcast") item.kind = WorkloadKind::MssAppBroadcast;
      else if (kind == "start_handoff") item.kind = WorkloadKind::StartHandoff;
      else throw InvalidConfig(p + "kind", "unknown kind '" + kind + "'");
      if (!w.contains("node")) throw InvalidConfig(p + "node", "missing");
      item.node = node_from(w["node"], p + "node");
      item.payload = get_field<std::string>(w, "payload", p, "");
      item.dest_mss = get_field<std::uint32_t>(w, "dest_mss", p, 0);
      c.workload.push_back(item);
    }
  }
  if (j.contains("mobility_model") && !j["mobility_model"].is_null()) {
    const json& m = j["mobility_model"];
    if (!m.is_object()) throw InvalidConfig("mobility_model", "expected an object");
    check_keys(m, {"poisson_rates", "horizon_ticks", "target_mss"}, "mobility_model.");
    MobilityModel model;
    model.poisson_rates =
        get_field<std::array<double, 4>>(m, "poisson_rates", "mobility_model.", {});
    model.horizon_ticks = get_field<std::uint64_t>(m, "horizon_ticks", "mobility_model.", 1000);
    model.target_mss = get_field<std::uint32_t>(m, "target_mss", "mobility_model.", 1);
    c.mobility_model = model;
  }
  c.seed = get_field<std::uint64_t>(j, "seed", "", 0);
  c.channel_latency = get_field<std::uint64_t>(j, "channel_latency", "", 1);
  c.mss_latency = get_field<std::uint64_t>(j, "mss_latency", "", 1);
  c.transit_delay = get_field<std::uint64_t>(j, "transit_delay", "", 1);
  if (j.contains("latency_overrides")) {
    if (!j["latency_overrides"].is_array()) {
      throw InvalidConfig("latency_overrides", "expected an array");
    }
    for (std::size_t i = 0; i < j["latency_overrides"].size(); ++i) {
      const json& o = j["latency_overrides"][i];
      const std::string p = "latency_overrides[" + std::to_string(i) + "].";
      if (!o.is_object() || !o.contains("src") || !o.contains("dst")) {
        throw InvalidConfig(p.substr(0, p.size() - 1), "expected {src, dst, latency}");
      }
      c.latency_overrides.push_back({node_from(o["src"], p + "src"), node_from(o["dst"], p + "dst"),
                                     get_field<std::uint64_t>(o, "latency", p, 1)});
    }
  }
  c.global_compliance = get_field<bool>(j, "global_compliance", "", false);
  c.max_ticks = get_field<std::uint64_t>(j, "max_ticks", "", 0);
  validate(c);
  return c;
}

std::string config_hash(const ScenarioConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : scenario_to_json(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string write_trace(const ScenarioConfig& config, const std::vector<TraceEvent>& trace) {
  std::string out = json{{"config_hash", config_hash(config)}, {"seed", config.seed}}.dump();
  out += '\n';
  for (const TraceEvent& e : trace) {
    out += encode(e);
    out += '\n';
  }
  return out;
}

std::vector<TraceEvent> read_trace(const std::string& text, TraceHeader* header) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw MalformedTrace("empty trace");
  try {
    const json h = json::parse(line);
    if (!h.is_object() || !h.contains("config_hash") || !h.contains("seed")) {
      throw MalformedTrace("line 1: header lacks config_hash or seed");
    }
    if (header) {
      header->config_hash = h["config_hash"].get<std::string>();
      header->seed = h["seed"].get<std::uint64_t>();
    }
  } catch (const json::exception& e) {
    throw MalformedTrace(std::string("line 1: ") + e.what());
  }
  std::vector<TraceEvent> events;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      events.push_back(decode_event(line));
    } catch (const DecodeError& e) {
      throw MalformedTrace("line " + std::to_string(n) + ": " + e.what());
    }
  }
  return events;
}

}  // namespace bcm
