// Copyright (c) The BCM Broadcast Authors.
// Licensed under the Apache 2.0 License.

#include "bcm/adversary.hpp"

#include <algorithm>

namespace bcm {

namespace {

bool can_broadcast(const MhState& s) { return s.telepoint && s.admitted && s.view; }

void drop_sends(Effects& fx, const std::string& tag) {
  std::erase_if(fx.sends, [&](const Outgoing& o) { return message_tag(o.msg) == tag; });
  std::erase_if(fx.trace, [&](const TraceEvent& e) {
    return e.action == Action::Send && e.message && message_tag(*e.message) == tag;
  });
}

void send_inits(const MhState& s, const AppMessage& app, Effects& fx) {
  for (NodeId member : *s.view) fx.send(s.id, member, Init{app});
  fx.send(s.id, mss(*s.telepoint), Init{app});
}

MhStep silent(const MhTransition& base, const MhState& state, const MhInput& input,
              std::uint64_t now) {
  if (std::holds_alternative<AppBroadcastInput>(input) ||
      std::holds_alternative<InjectInput>(input)) {
    return {state, Effects(now), std::nullopt};
  }
  if (const auto* rx = std::get_if<ReceiveInput>(&input)) {
    MhState s = state;
    if (const auto* fc = std::get_if<ForwardCatchup>(&rx->msg)) {
      if (s.telepoint && rx->from == mss(*s.telepoint)) {
        std::vector<NodeId> view = s.view.value_or(std::vector<NodeId>{});
        for (NodeId m : fc->group_view) {
          if (std::find(view.begin(), view.end(), m) == view.end()) view.push_back(m);
        }
        std::sort(view.begin(), view.end());
        s.view = std::move(view);
        s.admitted = true;
      }
    }
    return {std::move(s), Effects(now), std::nullopt};
  }
  return base(state, input, now);
}

MhStep duplicate(const MhTransition& base, const DuplicateBroadcast& d, const MhState& state,
                 const MhInput& input, std::uint64_t now) {
  if (!std::holds_alternative<AppBroadcastInput>(input)) return base(state, input, now);
  MhStep step = base(state, AppBroadcastInput{d.payload}, now);
  if (step.error || !can_broadcast(state)) return step;
  const AppMessage app{state.id, step.state.seq, d.payload};
  for (std::uint32_t i = 1; i < d.times; ++i) {
    step.effects.note(state.id, Action::BrBroadcast, "duplicate", app);
    send_inits(step.state, app, step.effects);
  }
  return step;
}

MhStep equivocate(const MhTransition& base, const Equivocate& e, const MhState& state,
                  const MhInput& input, std::uint64_t now) {
  if (!std::holds_alternative<AppBroadcastInput>(input) || !can_broadcast(state)) {
    return base(state, input, now);
  }
  MhStep step{state, Effects(now), std::nullopt};
  MhState& s = step.state;
  ++s.seq;
  s.last_bcast = e.payload_a;
  const AppMessage a{s.id, s.seq, e.payload_a};
  const AppMessage b{s.id, s.seq, e.payload_b};
  step.effects.note(s.id, Action::BrBroadcast, "equivocate", a);
  for (NodeId member : *s.view) {
    step.effects.send(s.id, member, Init{e.side_a.count(member.index) ? a : b});
  }
  step.effects.send(s.id, mss(*s.telepoint), Init{e.mss_gets_a ? a : b});
  return step;
}

MhStep inject(const MhTransition& base, const ArbitraryInject& ai, const MhState& state,
              const MhInput& input, std::uint64_t now) {
  const auto* in = std::get_if<InjectInput>(&input);
  if (!in) return base(state, input, now);
  MhStep step{state, Effects(now), std::nullopt};
  if (in->index >= ai.schedule.size() || !can_broadcast(state)) return step;
  const InjectEntry& entry = ai.schedule[in->index];
  const AppMessage app{state.id, entry.seq, entry.payload};
  step.effects.note(state.id, Action::BrBroadcast, "inject", app);
  send_inits(state, app, step.effects);
  return step;
}

MhStep violate_order(const MhTransition& base, const MhState& state, const MhInput& input,
                     std::uint64_t now) {
  MhStep step = base(state, input, now);
  std::vector<TraceEvent> out;
  for (TraceEvent& e : step.effects.trace) {
    if (e.action != Action::BcmHDeliver) {
      out.push_back(std::move(e));
      continue;
    }
    if (!step.state.held_delivery) {
      step.state.held_delivery = std::move(e);
      continue;
    }
    out.push_back(std::move(e));
    TraceEvent held = std::move(*step.state.held_delivery);
    step.state.held_delivery.reset();
    held.tick = now;
    out.push_back(std::move(held));
  }
  step.effects.trace = std::move(out);
  return step;
}

}  // namespace

std::string strategy_name(const AdversaryStrategy& strategy) {
  static const char* kNames[] = {"crash",       "silent",        "duplicate",      "equivocate",
                                 "refuse_echo", "arbitrary_inject", "causal_violator"};
  return kNames[strategy.index()];
}

MhTransition wrap(MhTransition base, AdversaryStrategy strategy) {
  return [base = std::move(base), strategy = std::move(strategy)](
             const MhState& state, const MhInput& input, std::uint64_t now) -> MhStep {
    return std::visit(
        [&](const auto& st) -> MhStep {
          using T = std::decay_t<decltype(st)>;
          if constexpr (std::is_same_v<T, Crash>) {
            if (now >= st.at_tick) return {state, Effects(now), std::nullopt};
            return base(state, input, now);
          } else if constexpr (std::is_same_v<T, Silent>) {
            return silent(base, state, input, now);
          } else if constexpr (std::is_same_v<T, DuplicateBroadcast>) {
            return duplicate(base, st, state, input, now);
          } else if constexpr (std::is_same_v<T, Equivocate>) {
            return equivocate(base, st, state, input, now);
          } else if constexpr (std::is_same_v<T, RefuseEcho>) {
            MhStep step = base(state, input, now);
            drop_sends(step.effects, "Echo");
            return step;
          } else if constexpr (std::is_same_v<T, ArbitraryInject>) {
            return inject(base, st, state, input, now);
          } else {
            return violate_order(base, state, input, now);
          }
        },
        strategy);
  };
}

}  // namespace bcm
