// Copyright (c) The BCM Broadcast Authors.
// Licensed under the Apache 2.0 License.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bcm/core_types.hpp"

namespace bcm {

/// One message handed to the network by a transition.
struct Outgoing {
  NodeId from;
  NodeId to;
  ProtocolMessage msg;
  /// Station-to-self copy already processed inside the same transition.
  bool loopback = false;
};

/// Station request to be woken up at `tick` to close the echo window of `id`.
struct TimerRequest {
  std::uint64_t tick = 0;
  MessageId id;
};

/// Outputs of one transition: sends, trace records and timers, in emission order.
struct Effects {
  std::uint64_t tick = 0;
  std::vector<Outgoing> sends;
  std::vector<TraceEvent> trace;
  std::vector<TimerRequest> timers;

  Effects() = default;
  explicit Effects(std::uint64_t now) : tick(now) {}

  void send(NodeId from, NodeId to, ProtocolMessage msg, bool loopback = false) {
    TraceEvent e;
    e.tick = tick;
    e.actor = from;
    e.action = Action::Send;
    e.peer = to;
    e.app = carried_app(msg);
    e.message = msg;
    trace.push_back(std::move(e));
    sends.push_back({from, to, std::move(msg), loopback});
  }

  void note(NodeId actor, Action action, std::string detail = {},
            std::optional<AppMessage> app = std::nullopt,
            std::optional<ProtocolMessage> message = std::nullopt,
            std::optional<NodeId> peer = std::nullopt) {
    TraceEvent e;
    e.tick = tick;
    e.actor = actor;
    e.action = action;
    e.peer = peer;
    e.message = std::move(message);
    e.app = std::move(app);
    e.detail = std::move(detail);
    trace.push_back(std::move(e));
  }

  std::size_t count_sends(const std::string& tag) const {
    std::size_t n = 0;
    for (const auto& s : sends) n += message_tag(s.msg) == tag ? 1 : 0;
    return n;
  }
};

}  // namespace bcm
