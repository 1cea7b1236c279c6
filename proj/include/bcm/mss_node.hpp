// Copyright (c) The BCM Broadcast Authors.
// Licensed under the Apache 2.0 License.

#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "bcm/core_types.hpp"
#include "bcm/effects.hpp"

namespace bcm {

/// Echo collection for one (origin, seq) identity.
struct EchoSlot {
  std::optional<AppMessage> init;
  /// Members at the time the Init arrived; only they vote.
  std::set<std::uint32_t> eligible;
  /// Echoing host index -> payload it echoed.
  std::map<std::uint32_t, Payload> echoes;
  bool conflict = false;
  std::uint64_t deadline = 0;
};

struct DelivEntry {
  AppMessage app;
  std::uint32_t origin_mss = 0;
  std::uint64_t sn = 0;
};

struct BufferedLocal {
  AppMessage app;
};

/// Handoff bookkeeping for a host that left this group.
struct MovingEntry {
  std::uint32_t dest = 0;
  StationVector h_deliv;
};

/// Local state of a support station.
struct MssState {
  NodeId id;
  std::uint32_t n_mss = 0;
  std::set<std::uint32_t> mh_set;
  std::uint64_t sn = 0;
  CausalBarrier cb;
  std::map<std::uint32_t, MovingEntry> moving;
  std::map<std::uint32_t, StationVector> connecting;
  std::vector<GlobalBcast> recv_from_s;
  std::vector<BufferedLocal> recv_from_h;
  StationVector s_deliv;
  /// Highest seq per host this station knows was issued (delivered, pending or adopted).
  std::map<std::uint32_t, std::uint64_t> know_bcast;
  /// Highest seq per host this station has bcm-Sdelivered.
  std::map<std::uint32_t, std::uint64_t> deliv_from_h;
  /// Delivery vector a joining host brought; its messages wait until s_deliv covers it.
  std::map<std::uint32_t, StationVector> host_deps;
  std::vector<DelivEntry> deliv_mes;
  StationVector forwarded;
  std::vector<StationVector> recv_forward;
  std::map<MessageId, EchoSlot> pending_echo;
  std::set<MessageId> decided;
  /// Application ids already bcm-Sdelivered here.
  std::set<MessageId> sdelivered;
  /// Sequence counter for station-originated application messages.
  std::uint64_t app_seq = 0;

  // Handoff edge cases.
  /// Removed received before the host's RequestMsg.
  std::map<std::uint32_t, Removed> held_removed;
  /// Disconnect received from a host that was attached but not yet admitted.
  std::map<std::uint32_t, Disconnect> early_leave;

  // Bookkeeping for the forwarded report attached to GlobalBcast.
  std::uint64_t echo_window = 2;
  std::uint64_t settle_ticks = 3;
  std::deque<std::pair<std::uint64_t, StationVector>> sdeliv_history;
  std::map<std::uint32_t, std::pair<std::uint64_t, StationVector>> recent_members;
  std::map<std::uint32_t, MovingEntry> handed_over;
};

/// Station `index` with initial members; windows derive from the wireless latency.
MssState make_mss(std::uint32_t index, std::uint32_t n_mss, std::set<std::uint32_t> members,
                  std::uint64_t wireless_latency = 1);

struct MssStep {
  MssState state;
  Effects effects;
};

std::uint64_t quorum_threshold(std::uint64_t nmh);

MssStep on_init_mss(const MssState& state, NodeId from, const Init& msg, std::uint64_t now = 0);
MssStep on_echo(const MssState& state, NodeId from, const Echo& msg, std::uint64_t now = 0);
/// Closes the echo window of `id` if it is still open.
MssStep on_echo_deadline(const MssState& state, const MessageId& id, std::uint64_t now = 0);
MssStep br_deliver_handoff(const MssState& state, const AppMessage& app, std::uint64_t now = 0);
MssStep bcm_sdeliver_local(const MssState& state, const AppMessage& app, std::uint64_t now = 0);
/// Station-originated application broadcast.
MssStep bcm_sbroadcast(const MssState& state, const Payload& payload, std::uint64_t now = 0);
MssStep c_broadcast(const MssState& state, const AppMessage& app, std::uint64_t now = 0);
MssStep on_global(const MssState& state, const GlobalBcast& msg, std::uint64_t now = 0);
MssStep gc_deliv_mes(const MssState& state, std::uint64_t now = 0);
MssStep bcm_sdeliver_global(const MssState& state, const AppMessage& app, std::uint32_t origin_mss,
                            std::uint64_t now = 0);
MssStep on_disconnect(const MssState& state, NodeId from, const Disconnect& msg,
                      std::uint64_t now = 0);
MssStep on_request_msg(const MssState& state, NodeId from, const RequestMsg& msg,
                       std::uint64_t now = 0);
MssStep on_removed(const MssState& state, const Removed& msg, std::uint64_t now = 0);
MssStep on_accept(const MssState& state, NodeId from, const Accept& msg, std::uint64_t now = 0);

/// Dispatches a received protocol message.
MssStep mss_receive(const MssState& state, NodeId from, const ProtocolMessage& msg,
                    std::uint64_t now);

/// Forwarded counts this station can vouch for, as attached to its next GlobalBcast.
StationVector forwarded_report(const MssState& state, std::uint64_t now);

}  // namespace bcm
