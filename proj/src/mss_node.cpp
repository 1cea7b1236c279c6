// Copyright (c) The BCM Broadcast Authors.
// Licensed under the Apache 2.0 License.

#include "bcm/mss_node.hpp"

#include <algorithm>

namespace bcm {

namespace {

class Station {
 public:
  Station(MssState& s, Effects& fx, std::uint64_t now) : s_(s), fx_(fx), now_(now) {}

  void init(NodeId from, const Init& msg) {
    const AppMessage& app = msg.app;
    if (!app.origin.is_mh() || from != app.origin) {
      disregard("init origin mismatch", app, msg, from);
      return;
    }
    const std::uint32_t idx = app.origin.index;
    if (!s_.mh_set.count(idx)) {
      disregard("init from non-member", app, msg, from);
      return;
    }
    const MessageId id = message_id(app);
    if (s_.decided.count(id) || app.seq <= lookup(s_.know_bcast, idx)) {
      disregard("duplicate init", app, msg, from);
      return;
    }
    EchoSlot& slot = s_.pending_echo[id];
    if (slot.init) {
      if (slot.init->payload == app.payload) {
        disregard("duplicate init", app, msg, from);
        return;
      }
      slot.conflict = true;
      disregard("conflicting init", app, msg, from);
    } else {
      slot.init = app;
      slot.eligible = s_.mh_set;
      slot.deadline = now_ + s_.echo_window;
      for (const auto& [echoer, payload] : slot.echoes) {
        if (payload != app.payload) slot.conflict = true;
      }
      fx_.timers.push_back({slot.deadline, id});
    }
    maybe_decide(id, false);
  }

  void echo(NodeId from, const Echo& msg) {
    if (!from.is_mh() || !s_.mh_set.count(from.index)) {
      disregard("echo from non-member", msg.app, msg, from);
      return;
    }
    const MessageId id{mh(msg.origin_index), msg.seq};
    if (message_id(msg.app) != id) {
      disregard("malformed echo", msg.app, msg, from);
      return;
    }
    if (s_.decided.count(id)) {
      disregard("echo after decision", msg.app, msg, from);
      return;
    }
    EchoSlot& slot = s_.pending_echo[id];
    auto prior = slot.echoes.find(from.index);
    if (prior != slot.echoes.end()) {
      if (prior->second == msg.app.payload) {
        disregard("duplicate echo", msg.app, msg, from);
        return;
      }
      slot.conflict = true;
    }
    for (const auto& [echoer, payload] : slot.echoes) {
      if (payload != msg.app.payload) slot.conflict = true;
    }
    if (slot.init && slot.init->payload != msg.app.payload) slot.conflict = true;
    slot.echoes[from.index] = msg.app.payload;
    maybe_decide(id, false);
  }

  void deadline(const MessageId& id) {
    auto it = s_.pending_echo.find(id);
    if (it == s_.pending_echo.end() || !it->second.init) return;
    maybe_decide(id, true);
  }

  void maybe_decide(const MessageId& id, bool window_closed) {
    auto it = s_.pending_echo.find(id);
    if (it == s_.pending_echo.end()) return;
    EchoSlot& slot = it->second;
    if (slot.conflict) {
      const AppMessage app = slot.init.value_or(AppMessage{id.origin, id.seq, {}});
      s_.pending_echo.erase(it);
      s_.decided.insert(id);
      fx_.note(s_.id, Action::Disregard, "equivocation detected", app);
      return;
    }
    if (!slot.init) return;
    std::size_t voters = 0;
    std::size_t votes = 0;
    for (std::uint32_t member : slot.eligible) {
      if (!s_.mh_set.count(member)) continue;
      ++voters;
      votes += slot.echoes.count(member);
    }
    if (votes < voters && !window_closed) return;
    const AppMessage app = *slot.init;
    s_.pending_echo.erase(it);
    s_.decided.insert(id);
    if (voters > 0 && votes >= quorum_threshold(voters)) {
      br_deliver(app);
    } else {
      fx_.note(s_.id, Action::Disregard,
               "insufficient echoes " + std::to_string(votes) + "/" + std::to_string(voters), app);
    }
  }

  void br_deliver(const AppMessage& app) {
    auto& known = s_.know_bcast[app.origin.index];
    known = std::max(known, app.seq);
    fx_.note(s_.id, Action::BrDeliver, {}, app);
    handoff(app);
  }

  void handoff(const AppMessage& app) {
    if (local_ready(app)) {
      deliver_local(app);
    } else {
      s_.recv_from_h.push_back({app});
    }
  }

  bool local_ready(const AppMessage& app) const {
    const std::uint32_t idx = app.origin.index;
    if (app.seq != lookup(s_.deliv_from_h, idx) + 1) return false;
    auto deps = s_.host_deps.find(idx);
    if (deps == s_.host_deps.end()) return true;
    for (std::size_t k = 0; k < deps->second.size(); ++k) {
      if (s_.s_deliv[k] < deps->second[k]) return false;
    }
    return true;
  }

  void deliver_local(const AppMessage& app) {
    const std::uint32_t idx = app.origin.index;
    fx_.note(s_.id, Action::CDeliver, "local", app);
    s_.deliv_from_h[idx] = app.seq;
    auto& known = s_.know_bcast[idx];
    known = std::max(known, app.seq);
    s_.sdelivered.insert(message_id(app));
    fx_.note(s_.id, Action::BcmSDeliver, "local", app);
    for (std::uint32_t member : s_.mh_set) fx_.send(s_.id, mh(member), Ready{app, app.origin});
    ++s_.forwarded[self() - 1];
    fx_.note(s_.id, Action::BcmSBroadcast, {}, app);
    c_broadcast(app);
  }

  void station_broadcast(const Payload& payload) {
    AppMessage app{s_.id, ++s_.app_seq, payload};
    fx_.note(s_.id, Action::BcmSBroadcast, {}, app);
    c_broadcast(app);
  }

  void c_broadcast(const AppMessage& app) {
    ++s_.sn;
    GlobalBcast msg{app, self(), s_.sn, s_.cb, forwarded_report(s_, now_)};
    fx_.note(s_.id, Action::CBroadcast, {}, app, msg);
    for (std::uint32_t k = 1; k <= s_.n_mss; ++k) fx_.send(s_.id, mss(k), msg, k == self());
    s_.cb.clear();
    fx_.note(s_.id, Action::Receive, "loopback", app, msg, s_.id);
    deliver_global(msg);
  }

  void global(const GlobalBcast& msg) {
    if (msg.sn <= s_.s_deliv[msg.sender_mss - 1]) {
      disregard("stale global", msg.app, msg, mss(msg.sender_mss));
      return;
    }
    if (deliverable(msg)) {
      deliver_global(msg);
    } else {
      s_.recv_from_s.push_back(msg);
    }
  }

  bool deliverable(const GlobalBcast& msg) const {
    if (msg.sn != s_.s_deliv[msg.sender_mss - 1] + 1) return false;
    for (const auto& [station, sn] : msg.cb.entries()) {
      if (s_.s_deliv[station - 1] < sn) return false;
    }
    return true;
  }

  void deliver_global(const GlobalBcast& msg) {
    const std::uint32_t sender = msg.sender_mss;
    if (sender != self()) {
      s_.cb.remove_covered_by(msg.cb);
      s_.cb.insert(sender, msg.sn);
    }
    fx_.note(s_.id, Action::CDeliver, sender == self() ? "loopback" : "global", msg.app, msg,
             mss(sender));
    s_.s_deliv[sender - 1] = msg.sn;
    s_.deliv_mes.push_back({msg.app, sender, msg.sn});
    s_.recv_forward[sender - 1] = msg.forwarded;
    record_history();
    for (auto it = s_.handed_over.begin(); it != s_.handed_over.end();) {
      it = it->second.dest == sender ? s_.handed_over.erase(it) : std::next(it);
    }
    sdeliver_global(msg.app, sender);
  }

  void sdeliver_global(const AppMessage& app, std::uint32_t origin_mss) {
    if (app.origin.is_mh()) {
      auto& got = s_.deliv_from_h[app.origin.index];
      got = std::max(got, app.seq);
      auto& known = s_.know_bcast[app.origin.index];
      known = std::max(known, app.seq);
    }
    // Own relayed host message: already bcm-Sdelivered and announced with Ready.
    if (origin_mss == self() && app.origin.is_mh()) return;
    if (!s_.sdelivered.insert(message_id(app)).second) {
      fx_.note(s_.id, Action::Disregard, "duplicate global", app);
      ++s_.forwarded[origin_mss - 1];
      return;
    }
    fx_.note(s_.id, Action::BcmSDeliver, "global", app, std::nullopt, mss(origin_mss));
    for (std::uint32_t member : s_.mh_set) fx_.send(s_.id, mh(member), ForwardGlobal{app, origin_mss});
    ++s_.forwarded[origin_mss - 1];
  }

  void drain() {
    bool progress = true;
    while (progress) {
      progress = false;
      for (auto it = s_.recv_from_s.begin(); it != s_.recv_from_s.end(); ++it) {
        if (deliverable(*it)) {
          GlobalBcast msg = std::move(*it);
          s_.recv_from_s.erase(it);
          deliver_global(msg);
          progress = true;
          break;
        }
      }
      if (progress) continue;
      for (auto it = s_.recv_from_h.begin(); it != s_.recv_from_h.end(); ++it) {
        if (local_ready(it->app)) {
          AppMessage app = std::move(it->app);
          s_.recv_from_h.erase(it);
          deliver_local(app);
          progress = true;
          break;
        }
      }
    }
  }

  void gc() {
    StationVector min_f(s_.n_mss, 0);
    for (std::uint32_t k = 0; k < s_.n_mss; ++k) {
      std::uint64_t m = UINT64_MAX;
      for (const auto& row : s_.recv_forward) m = std::min(m, k < row.size() ? row[k] : 0);
      min_f[k] = m;
    }
    auto needed = [&](const DelivEntry& e) {
      const std::size_t k = e.origin_mss - 1;
      if (min_f[k] < e.sn) return true;
      for (const auto& [h, v] : s_.connecting) if (v[k] < e.sn) return true;
      for (const auto& [h, r] : s_.held_removed) if (r.h_deliv[k] < e.sn) return true;
      for (const auto& [h, d] : s_.early_leave) if (d.h_deliv[k] < e.sn) return true;
      for (const auto& [h, m] : s_.moving) if (m.h_deliv[k] < e.sn) return true;
      return false;
    };
    std::erase_if(s_.deliv_mes, [&](const DelivEntry& e) { return !needed(e); });
  }

  void disconnect(NodeId from, const Disconnect& msg) {
    const std::uint32_t idx = from.index;
    if (from.is_mh() && s_.mh_set.count(idx)) {
      s_.mh_set.erase(idx);
      s_.recent_members.erase(idx);
      s_.moving[idx] = {msg.dest_mss, msg.h_deliv};
      fx_.note(s_.id, Action::GroupLeave, to_string(from), std::nullopt, msg, from);
      fx_.send(s_.id, mss(msg.dest_mss), Removed{self(), from, msg.h_deliv, known_entry(idx)});
      std::vector<MessageId> open;
      for (const auto& [id, slot] : s_.pending_echo) open.push_back(id);
      for (const auto& id : open) maybe_decide(id, false);
      return;
    }
    if (from.is_mh() && s_.connecting.count(idx)) {
      s_.connecting.erase(idx);
      s_.early_leave[idx] = msg;
      fx_.note(s_.id, Action::Disregard, "left before admission", std::nullopt, msg, from);
      return;
    }
    disregard("disconnect from non-member", std::nullopt, msg, from);
  }

  void request(NodeId from, const RequestMsg& msg) {
    const std::uint32_t idx = from.index;
    if (!from.is_mh() || s_.mh_set.count(idx) || s_.connecting.count(idx)) {
      disregard("repeated request", std::nullopt, msg, from);
      return;
    }
    s_.connecting[idx] = msg.h_deliv;
    auto held = s_.held_removed.find(idx);
    if (held != s_.held_removed.end()) {
      Removed r = held->second;
      admit(r);
    }
  }

  void removed(const Removed& msg) {
    const std::uint32_t idx = msg.mh.index;
    auto& known = s_.know_bcast[idx];
    known = std::max(known, msg.know_bcast_entry);
    auto early = s_.early_leave.find(idx);
    if (early != s_.early_leave.end()) {
      Disconnect d = early->second;
      s_.early_leave.erase(early);
      fx_.send(s_.id, mss(msg.src_mss), Accept{msg.mh});
      s_.moving[idx] = {d.dest_mss, d.h_deliv};
      fx_.send(s_.id, mss(d.dest_mss), Removed{self(), msg.mh, d.h_deliv, known});
      return;
    }
    if (s_.connecting.count(idx)) {
      admit(msg);
      return;
    }
    if (s_.mh_set.count(idx)) {
      disregard("removed for member", std::nullopt, msg, mss(msg.src_mss));
      return;
    }
    s_.held_removed[idx] = msg;
  }

  void admit(const Removed& msg) {
    const std::uint32_t idx = msg.mh.index;
    s_.connecting.erase(idx);
    s_.held_removed.erase(idx);
    s_.mh_set.insert(idx);
    s_.recent_members[idx] = {now_, msg.h_deliv};
    s_.host_deps[idx] = msg.h_deliv;
    fx_.note(s_.id, Action::GroupJoin, to_string(msg.mh), std::nullopt, msg, msg.mh);
    fx_.send(s_.id, mss(msg.src_mss), Accept{msg.mh});
    std::vector<NodeId> view;
    for (std::uint32_t member : s_.mh_set) view.push_back(mh(member));
    bool sent = false;
    for (const DelivEntry& e : s_.deliv_mes) {
      if (msg.h_deliv[e.origin_mss - 1] < e.sn) {
        fx_.send(s_.id, msg.mh, ForwardCatchup{e.app, e.origin_mss, view});
        sent = true;
      }
    }
    if (!sent) fx_.send(s_.id, msg.mh, ForwardCatchup{std::nullopt, self(), view});
  }

  void accept(NodeId from, const Accept& msg) {
    auto it = s_.moving.find(msg.mh.index);
    if (it == s_.moving.end()) {
      disregard("accept for unknown host", std::nullopt, msg, from);
      return;
    }
    if (it->second.dest != self()) s_.handed_over[msg.mh.index] = it->second;
    s_.moving.erase(it);
    fx_.note(s_.id, Action::HandoffComplete, to_string(msg.mh), std::nullopt, msg, from);
  }

  void settle() {
    drain();
    gc();
  }

 private:
  std::uint32_t self() const { return s_.id.index; }

  static std::uint64_t lookup(const std::map<std::uint32_t, std::uint64_t>& m, std::uint32_t k) {
    auto it = m.find(k);
    return it == m.end() ? 0 : it->second;
  }

  std::uint64_t known_entry(std::uint32_t idx) const {
    std::uint64_t k = lookup(s_.know_bcast, idx);
    for (const auto& [id, slot] : s_.pending_echo) {
      if (id.origin.index == idx && slot.init) k = std::max(k, id.seq);
    }
    return k;
  }

  void record_history() {
    s_.sdeliv_history.emplace_back(now_, s_.s_deliv);
    while (s_.sdeliv_history.size() >= 2 &&
           s_.sdeliv_history[1].first + s_.settle_ticks <= now_) {
      s_.sdeliv_history.pop_front();
    }
    for (auto it = s_.recent_members.begin(); it != s_.recent_members.end();) {
      it = it->second.first + s_.settle_ticks <= now_ ? s_.recent_members.erase(it) : std::next(it);
    }
  }

  void disregard(const std::string& why, std::optional<AppMessage> app, ProtocolMessage msg,
                 NodeId from) {
    fx_.note(s_.id, Action::Disregard, why, std::move(app), std::move(msg), from);
  }

  MssState& s_;
  Effects& fx_;
  std::uint64_t now_;
};

template <typename F>
MssStep run(const MssState& state, std::uint64_t now, F&& body) {
  MssStep step{state, Effects(now)};
  Station st(step.state, step.effects, now);
  body(st);
  return step;
}

}  // namespace

MssState make_mss(std::uint32_t index, std::uint32_t n_mss, std::set<std::uint32_t> members,
                  std::uint64_t wireless_latency) {
  MssState s;
  s.id = mss(index);
  s.n_mss = n_mss;
  s.mh_set = std::move(members);
  s.s_deliv.assign(n_mss, 0);
  s.forwarded.assign(n_mss, 0);
  s.recv_forward.assign(n_mss, StationVector(n_mss, 0));
  s.echo_window = 2 * wireless_latency;
  s.settle_ticks = 2 * wireless_latency + 1;
  return s;
}

std::uint64_t quorum_threshold(std::uint64_t nmh) { return (2 * nmh) / 3 + 1; }

StationVector forwarded_report(const MssState& s, std::uint64_t now) {
  StationVector r = s.forwarded;
  const StationVector* lagged = nullptr;
  for (const auto& [tick, snapshot] : s.sdeliv_history) {
    if (tick + s.settle_ticks <= now) lagged = &snapshot;
  }
  for (std::size_t k = 0; k < r.size(); ++k) {
    r[k] = std::min(r[k], lagged ? (*lagged)[k] : 0);
    for (const auto& [h, rec] : s.recent_members) {
      if (rec.first + s.settle_ticks > now) r[k] = std::min(r[k], rec.second[k]);
    }
    for (const auto& [h, m] : s.moving) r[k] = std::min(r[k], m.h_deliv[k]);
    for (const auto& [h, m] : s.handed_over) r[k] = std::min(r[k], m.h_deliv[k]);
  }
  return r;
}

MssStep on_init_mss(const MssState& state, NodeId from, const Init& msg, std::uint64_t now) {
  return run(state, now, [&](Station& st) { st.init(from, msg); st.settle(); });
}

MssStep on_echo(const MssState& state, NodeId from, const Echo& msg, std::uint64_t now) {
  return run(state, now, [&](Station& st) { st.echo(from, msg); st.settle(); });
}

MssStep on_echo_deadline(const MssState& state, const MessageId& id, std::uint64_t now) {
  return run(state, now, [&](Station& st) { st.deadline(id); st.settle(); });
}

MssStep br_deliver_handoff(const MssState& state, const AppMessage& app, std::uint64_t now) {
  return run(state, now, [&](Station& st) { st.handoff(app); st.settle(); });
}

MssStep bcm_sdeliver_local(const MssState& state, const AppMessage& app, std::uint64_t now) {
  return run(state, now, [&](Station& st) { st.deliver_local(app); st.settle(); });
}

MssStep bcm_sbroadcast(const MssState& state, const Payload& payload, std::uint64_t now) {
  return run(state, now, [&](Station& st) { st.station_broadcast(payload); st.settle(); });
}

MssStep c_broadcast(const MssState& state, const AppMessage& app, std::uint64_t now) {
  return run(state, now, [&](Station& st) { st.c_broadcast(app); });
}

MssStep on_global(const MssState& state, const GlobalBcast& msg, std::uint64_t now) {
  return run(state, now, [&](Station& st) { st.global(msg); st.settle(); });
}

MssStep gc_deliv_mes(const MssState& state, std::uint64_t now) {
  return run(state, now, [&](Station& st) { st.gc(); });
}

MssStep bcm_sdeliver_global(const MssState& state, const AppMessage& app, std::uint32_t origin_mss,
                            std::uint64_t now) {
  return run(state, now, [&](Station& st) { st.sdeliver_global(app, origin_mss); });
}

MssStep on_disconnect(const MssState& state, NodeId from, const Disconnect& msg, std::uint64_t now) {
  return run(state, now, [&](Station& st) { st.disconnect(from, msg); st.settle(); });
}

MssStep on_request_msg(const MssState& state, NodeId from, const RequestMsg& msg,
                       std::uint64_t now) {
  return run(state, now, [&](Station& st) { st.request(from, msg); st.settle(); });
}

MssStep on_removed(const MssState& state, const Removed& msg, std::uint64_t now) {
  return run(state, now, [&](Station& st) { st.removed(msg); st.settle(); });
}

MssStep on_accept(const MssState& state, NodeId from, const Accept& msg, std::uint64_t now) {
  return run(state, now, [&](Station& st) { st.accept(from, msg); st.settle(); });
}

MssStep mss_receive(const MssState& state, NodeId from, const ProtocolMessage& msg,
                    std::uint64_t now) {
  if (const auto* m = std::get_if<Init>(&msg)) return on_init_mss(state, from, *m, now);
  if (const auto* m = std::get_if<Echo>(&msg)) return on_echo(state, from, *m, now);
  if (const auto* m = std::get_if<GlobalBcast>(&msg)) return on_global(state, *m, now);
  if (const auto* m = std::get_if<Disconnect>(&msg)) return on_disconnect(state, from, *m, now);
  if (const auto* m = std::get_if<RequestMsg>(&msg)) return on_request_msg(state, from, *m, now);
  if (const auto* m = std::get_if<Removed>(&msg)) return on_removed(state, *m, now);
  if (const auto* m = std::get_if<Accept>(&msg)) return on_accept(state, from, *m, now);
  MssStep step{state, Effects(now)};
  step.effects.note(state.id, Action::Disregard, "unexpected message", carried_app(msg), msg, from);
  return step;
}

}  // namespace bcm
