// Copyright (c) The BCM Broadcast Authors.
// Licensed under the Apache 2.0 License.

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <variant>
#include <vector>

#include "bcm/core_types.hpp"
#include "bcm/effects.hpp"

namespace bcm {

/// Local state of a mobile host.
struct MhState {
  NodeId id;
  std::uint32_t n_mss = 0;
  /// Station the host is attached to; empty while in transit.
  std::optional<std::uint32_t> telepoint;
  /// Station the host was last attached to (0 if none).
  std::uint32_t last_mss = 0;
  std::uint64_t seq = 0;
  /// Per-station count of that station's global sequence delivered here.
  StationVector h_deliv;
  /// Radio group of the current station, self included; empty while in transit.
  std::optional<std::vector<NodeId>> view;
  /// Highest seq delivered per origin host.
  std::map<std::uint32_t, std::uint64_t> h_deliv_from_h;
  std::optional<Payload> last_bcast;
  std::vector<AppMessage> delivered_log;
  std::set<MessageId> delivered;
  std::set<MessageId> echoed;
  /// Set once the current station has admitted the host (first catch-up seen).
  bool admitted = false;
  /// Broadcasts requested while attached but not yet admitted.
  std::deque<Payload> queued;
  /// Delivery record withheld by an out-of-order adversary.
  std::optional<TraceEvent> held_delivery;
};

/// Host attached to `station` with an established radio group.
MhState make_mh(std::uint32_t index, std::uint32_t n_mss, std::uint32_t station,
                std::vector<NodeId> view);

enum class MhError { InTransit };

struct MhStep {
  MhState state;
  Effects effects;
  std::optional<MhError> error;
};

struct AppBroadcastInput {
  Payload payload;
};
struct ReceiveInput {
  NodeId from;
  ProtocolMessage msg;
};
struct StartHandoffInput {
  std::uint32_t dest = 0;
};
struct RadioDetectedInput {
  std::uint32_t mss = 0;
  std::vector<NodeId> radio_view;
};
struct ViewChangeInput {
  std::vector<NodeId> radio_view;
};
/// Adversary-scheduled injection; `index` selects the schedule entry.
struct InjectInput {
  std::size_t index = 0;
};

using MhInput = std::variant<AppBroadcastInput, ReceiveInput, StartHandoffInput,
                             RadioDetectedInput, ViewChangeInput, InjectInput>;

using MhTransition = std::function<MhStep(const MhState&, const MhInput&, std::uint64_t now)>;

MhStep bcm_hbroadcast(const MhState& state, const Payload& payload, std::uint64_t now = 0);
MhStep on_init(const MhState& state, NodeId from, const Init& msg, std::uint64_t now = 0);
MhStep on_ready(const MhState& state, NodeId from, const Ready& msg, std::uint64_t now = 0);
MhStep on_forward_catchup(const MhState& state, NodeId from, const ForwardCatchup& msg,
                          std::uint64_t now = 0);
MhStep on_forward_global(const MhState& state, NodeId from, const ForwardGlobal& msg,
                         std::uint64_t now = 0);
MhStep start_disconnect(const MhState& state, std::uint32_t dest, std::uint64_t now = 0);
MhStep complete_connect(const MhState& state, std::uint32_t new_mss,
                        std::vector<NodeId> radio_view, std::uint64_t now = 0);
MhStep on_view_change(const MhState& state, std::vector<NodeId> radio_view, std::uint64_t now = 0);

/// Honest transition function dispatching on the input kind.
MhStep mh_step(const MhState& state, const MhInput& input, std::uint64_t now);

/// Records a fresh delivery of `app` carried by `carrier` from `from`.
void mh_record_delivery(MhState& s, const AppMessage& app, NodeId from,
                        const ProtocolMessage& carrier, Effects& fx);

}  // namespace bcm
