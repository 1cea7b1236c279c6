// Copyright (c) The BCM Broadcast Authors.
// Licensed under the Apache 2.0 License.

#include "bcm/mh_node.hpp"

#include <algorithm>

namespace bcm {

namespace {

std::string view_text(const std::vector<NodeId>& view) {
  std::string out = "[";
  for (std::size_t i = 0; i < view.size(); ++i) {
    if (i) out += ",";
    out += to_string(view[i]);
  }
  return out + "]";
}

bool from_telepoint(const MhState& s, NodeId from) {
  return s.telepoint && from == mss(*s.telepoint);
}

void broadcast_now(MhState& s, const Payload& payload, Effects& fx) {
  if (!s.last_bcast || *s.last_bcast != payload || s.seq == 0) ++s.seq;
  s.last_bcast = payload;
  AppMessage app{s.id, s.seq, payload};
  fx.note(s.id, Action::BcmHBroadcast, {}, app);
  fx.note(s.id, Action::BrBroadcast, {}, app);
  for (NodeId member : *s.view) fx.send(s.id, member, Init{app});
  fx.send(s.id, mss(*s.telepoint), Init{app});
}

MhStep finish(MhState s, Effects fx, std::optional<MhError> err = std::nullopt) {
  return {std::move(s), std::move(fx), err};
}

}  // namespace

MhState make_mh(std::uint32_t index, std::uint32_t n_mss, std::uint32_t station,
                std::vector<NodeId> view) {
  MhState s;
  s.id = mh(index);
  s.n_mss = n_mss;
  s.telepoint = station;
  s.last_mss = station;
  s.h_deliv.assign(n_mss, 0);
  std::sort(view.begin(), view.end());
  s.view = std::move(view);
  s.admitted = true;
  return s;
}

void mh_record_delivery(MhState& s, const AppMessage& app, NodeId from,
                        const ProtocolMessage& carrier, Effects& fx) {
  s.delivered.insert(message_id(app));
  s.delivered_log.push_back(app);
  if (app.origin.is_mh()) {
    auto& last = s.h_deliv_from_h[app.origin.index];
    last = std::max(last, app.seq);
  }
  fx.note(s.id, Action::BcmHDeliver, {}, app, carrier, from);
}

MhStep bcm_hbroadcast(const MhState& state, const Payload& payload, std::uint64_t now) {
  Effects fx(now);
  if (!state.telepoint) return finish(state, std::move(fx), MhError::InTransit);
  MhState s = state;
  if (!s.admitted || !s.view) {
    s.queued.push_back(payload);
    fx.note(s.id, Action::Disregard, "broadcast queued until admitted");
    return finish(std::move(s), std::move(fx));
  }
  broadcast_now(s, payload, fx);
  return finish(std::move(s), std::move(fx));
}

MhStep on_init(const MhState& state, NodeId from, const Init& msg, std::uint64_t now) {
  Effects fx(now);
  MhState s = state;
  const MessageId id = message_id(msg.app);
  if (!s.telepoint) {
    fx.note(s.id, Action::Disregard, "in transit", msg.app, msg, from);
    return finish(std::move(s), std::move(fx));
  }
  auto it = s.h_deliv_from_h.find(id.origin.index);
  const bool seen_seq = it != s.h_deliv_from_h.end() && msg.app.seq <= it->second;
  if (seen_seq || s.delivered.count(id) || s.echoed.count(id)) {
    fx.note(s.id, Action::Disregard, "duplicate init", msg.app, msg, from);
    return finish(std::move(s), std::move(fx));
  }
  s.echoed.insert(id);
  fx.send(s.id, mss(*s.telepoint), Echo{id.origin.index, id.seq, msg.app});
  return finish(std::move(s), std::move(fx));
}

MhStep on_ready(const MhState& state, NodeId from, const Ready& msg, std::uint64_t now) {
  Effects fx(now);
  MhState s = state;
  if (!from_telepoint(s, from)) {
    fx.note(s.id, Action::Disregard, "NotMyStation", msg.app, msg, from);
    return finish(std::move(s), std::move(fx));
  }
  if (s.delivered.count(message_id(msg.app))) {
    fx.note(s.id, Action::Disregard, "duplicate ready", msg.app, msg, from);
    return finish(std::move(s), std::move(fx));
  }
  mh_record_delivery(s, msg.app, from, msg, fx);
  ++s.h_deliv[*s.telepoint - 1];
  return finish(std::move(s), std::move(fx));
}

MhStep on_forward_global(const MhState& state, NodeId from, const ForwardGlobal& msg,
                         std::uint64_t now) {
  Effects fx(now);
  MhState s = state;
  if (!from_telepoint(s, from)) {
    fx.note(s.id, Action::Disregard, "NotMyStation", msg.app, msg, from);
    return finish(std::move(s), std::move(fx));
  }
  if (s.delivered.count(message_id(msg.app))) {
    fx.note(s.id, Action::Disregard, "duplicate forward", msg.app, msg, from);
    return finish(std::move(s), std::move(fx));
  }
  mh_record_delivery(s, msg.app, from, msg, fx);
  ++s.h_deliv[msg.origin_mss - 1];
  return finish(std::move(s), std::move(fx));
}

MhStep on_forward_catchup(const MhState& state, NodeId from, const ForwardCatchup& msg,
                          std::uint64_t now) {
  Effects fx(now);
  MhState s = state;
  if (!from_telepoint(s, from)) {
    fx.note(s.id, Action::Disregard, "NotMyStation", msg.app, msg, from);
    return finish(std::move(s), std::move(fx));
  }
  if (msg.app) {
    if (s.delivered.count(message_id(*msg.app))) {
      fx.note(s.id, Action::Disregard, "duplicate catch-up", msg.app, msg, from);
    } else {
      mh_record_delivery(s, *msg.app, from, msg, fx);
      ++s.h_deliv[msg.origin_mss - 1];
    }
  }
  std::vector<NodeId> view = s.view.value_or(std::vector<NodeId>{});
  for (NodeId member : msg.group_view) {
    if (std::find(view.begin(), view.end(), member) == view.end()) view.push_back(member);
  }
  std::sort(view.begin(), view.end());
  s.view = std::move(view);
  if (!s.admitted) {
    s.admitted = true;
    while (!s.queued.empty()) {
      Payload p = std::move(s.queued.front());
      s.queued.pop_front();
      broadcast_now(s, p, fx);
    }
  }
  return finish(std::move(s), std::move(fx));
}

MhStep start_disconnect(const MhState& state, std::uint32_t dest, std::uint64_t now) {
  Effects fx(now);
  if (!state.telepoint) return finish(state, std::move(fx), MhError::InTransit);
  MhState s = state;
  fx.send(s.id, mss(*s.telepoint), Disconnect{dest, s.h_deliv});
  fx.note(s.id, Action::HandoffStart, "telepoint=none dest=" + to_string(mss(dest)));
  fx.note(s.id, Action::GroupLeave, "view=none");
  s.last_mss = *s.telepoint;
  s.telepoint.reset();
  s.view.reset();
  s.admitted = false;
  return finish(std::move(s), std::move(fx));
}

MhStep complete_connect(const MhState& state, std::uint32_t new_mss,
                        std::vector<NodeId> radio_view, std::uint64_t now) {
  Effects fx(now);
  MhState s = state;
  if (s.telepoint) {
    fx.note(s.id, Action::Disregard, "already attached");
    return finish(std::move(s), std::move(fx));
  }
  s.telepoint = new_mss;
  fx.note(s.id, Action::GroupJoin, "telepoint=" + to_string(mss(new_mss)));
  std::sort(radio_view.begin(), radio_view.end());
  fx.note(s.id, Action::GroupJoin, "view=" + view_text(radio_view));
  s.view = std::move(radio_view);
  fx.send(s.id, mss(new_mss), RequestMsg{s.last_mss, s.h_deliv});
  return finish(std::move(s), std::move(fx));
}

MhStep on_view_change(const MhState& state, std::vector<NodeId> radio_view, std::uint64_t now) {
  Effects fx(now);
  MhState s = state;
  if (s.telepoint) {
    std::sort(radio_view.begin(), radio_view.end());
    s.view = std::move(radio_view);
  }
  return finish(std::move(s), std::move(fx));
}

MhStep mh_step(const MhState& state, const MhInput& input, std::uint64_t now) {
  return std::visit(
      [&](const auto& in) -> MhStep {
        using T = std::decay_t<decltype(in)>;
        if constexpr (std::is_same_v<T, AppBroadcastInput>) {
          MhStep step = bcm_hbroadcast(state, in.payload, now);
          if (step.error) {
            step.effects.note(state.id, Action::Disregard, "broadcast rejected: in transit",
                              AppMessage{state.id, 0, in.payload});
          }
          return step;
        } else if constexpr (std::is_same_v<T, ReceiveInput>) {
          if (const auto* m = std::get_if<Init>(&in.msg)) return on_init(state, in.from, *m, now);
          if (const auto* m = std::get_if<Ready>(&in.msg)) return on_ready(state, in.from, *m, now);
          if (const auto* m = std::get_if<ForwardGlobal>(&in.msg)) {
            return on_forward_global(state, in.from, *m, now);
          }
          if (const auto* m = std::get_if<ForwardCatchup>(&in.msg)) {
            return on_forward_catchup(state, in.from, *m, now);
          }
          Effects fx(now);
          fx.note(state.id, Action::Disregard, "unexpected message", carried_app(in.msg), in.msg,
                  in.from);
          return {state, std::move(fx), std::nullopt};
        } else if constexpr (std::is_same_v<T, StartHandoffInput>) {
          MhStep step = start_disconnect(state, in.dest, now);
          if (step.error) step.effects.note(state.id, Action::Disregard, "handoff rejected: in transit");
          return step;
        } else if constexpr (std::is_same_v<T, RadioDetectedInput>) {
          return complete_connect(state, in.mss, in.radio_view, now);
        } else if constexpr (std::is_same_v<T, ViewChangeInput>) {
          return on_view_change(state, in.radio_view, now);
        } else {
          return {state, Effects(now), std::nullopt};
        }
      },
      input);
}

}  // namespace bcm
