// Copyright (c) The BCM Broadcast Authors.
// Licensed under the Apache 2.0 License.

#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace bcm {

enum class NodeKind : std::uint8_t { Mh, Mss };

/// Identity of a mobile host (h1, h2, ...) or a support station (s1, s2, ...).
/// Indices are 1-based.
struct NodeId {
  NodeKind kind = NodeKind::Mh;
  std::uint32_t index = 0;

  auto operator<=>(const NodeId&) const = default;
  bool is_mh() const { return kind == NodeKind::Mh; }
  bool is_mss() const { return kind == NodeKind::Mss; }
};

inline NodeId mh(std::uint32_t index) { return {NodeKind::Mh, index}; }
inline NodeId mss(std::uint32_t index) { return {NodeKind::Mss, index}; }

std::string to_string(NodeId id);
/// Parses "h3" or "s1"; throws std::invalid_argument otherwise.
NodeId parse_node_id(const std::string& text);

/// Application payload, opaque bytes.
using Payload = std::string;

struct AppMessage {
  NodeId origin;
  std::uint64_t seq = 0;
  Payload payload;

  bool operator==(const AppMessage&) const = default;
};

/// Identity of an application message: (origin, seq). Payload is excluded.
struct MessageId {
  NodeId origin;
  std::uint64_t seq = 0;

  auto operator<=>(const MessageId&) const = default;
};

MessageId message_id(const AppMessage& app);
std::string to_string(const MessageId& id);

/// Set of (station index, sequence number) pairs, at most one per station.
class CausalBarrier {
 public:
  CausalBarrier() = default;
  CausalBarrier(std::initializer_list<std::pair<const std::uint32_t, std::uint64_t>> entries)
      : entries_(entries) {}

  /// Keeps the larger sequence number when the station is already present.
  void insert(std::uint32_t station, std::uint64_t sn);
  /// Drops every entry covered by an entry of `other` (same station, sn <= other's).
  void remove_covered_by(const CausalBarrier& other);
  void clear() { entries_.clear(); }
  bool empty() const { return entries_.empty(); }
  std::optional<std::uint64_t> get(std::uint32_t station) const;
  const std::map<std::uint32_t, std::uint64_t>& entries() const { return entries_; }

  bool operator==(const CausalBarrier&) const = default;

 private:
  std::map<std::uint32_t, std::uint64_t> entries_;
};

/// Per-station maximum of both barriers.
CausalBarrier barrier_merge(const CausalBarrier& a, const CausalBarrier& b);

/// Per-station counter vector, indexed by station index minus one.
using StationVector = std::vector<std::uint64_t>;

struct Init {
  AppMessage app;
  bool operator==(const Init&) const = default;
};
struct Echo {
  std::uint32_t origin_index = 0;
  std::uint64_t seq = 0;
  AppMessage app;
  bool operator==(const Echo&) const = default;
};
struct Ready {
  AppMessage app;
  NodeId origin;
  bool operator==(const Ready&) const = default;
};
struct GlobalBcast {
  AppMessage app;
  std::uint32_t sender_mss = 0;
  std::uint64_t sn = 0;
  CausalBarrier cb;
  StationVector forwarded;
  bool operator==(const GlobalBcast&) const = default;
};
struct ForwardGlobal {
  AppMessage app;
  std::uint32_t origin_mss = 0;
  bool operator==(const ForwardGlobal&) const = default;
};
struct ForwardCatchup {
  std::optional<AppMessage> app;
  std::uint32_t origin_mss = 0;
  std::vector<NodeId> group_view;
  bool operator==(const ForwardCatchup&) const = default;
};
struct Disconnect {
  std::uint32_t dest_mss = 0;
  StationVector h_deliv;
  bool operator==(const Disconnect&) const = default;
};
struct RequestMsg {
  std::uint32_t src_mss = 0;
  StationVector h_deliv;
  bool operator==(const RequestMsg&) const = default;
};
struct Removed {
  std::uint32_t src_mss = 0;
  NodeId mh;
  StationVector h_deliv;
  std::uint64_t know_bcast_entry = 0;
  bool operator==(const Removed&) const = default;
};
struct Accept {
  NodeId mh;
  bool operator==(const Accept&) const = default;
};

using ProtocolMessage = std::variant<Init, Echo, Ready, GlobalBcast, ForwardGlobal, ForwardCatchup,
                                     Disconnect, RequestMsg, Removed, Accept>;

/// Tag name of the active alternative ("Init", "Echo", ...).
std::string message_tag(const ProtocolMessage& msg);
/// Application message carried by the protocol message, if any.
std::optional<AppMessage> carried_app(const ProtocolMessage& msg);

enum class Action : std::uint8_t {
  Send,
  Receive,
  BrBroadcast,
  BrDeliver,
  CDeliver,
  CBroadcast,
  BcmHBroadcast,
  BcmHDeliver,
  BcmSBroadcast,
  BcmSDeliver,
  Disregard,
  HandoffStart,
  HandoffComplete,
  GroupJoin,
  GroupLeave,
};

std::string to_string(Action action);
Action parse_action(const std::string& text);

struct TraceEvent {
  std::uint64_t tick = 0;
  NodeId actor;
  Action action = Action::Send;
  std::optional<NodeId> peer;
  std::optional<ProtocolMessage> message;
  std::optional<AppMessage> app;
  std::string detail;

  bool operator==(const TraceEvent&) const = default;
};

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One-line canonical text form: tag first, then named fields in declaration order.
std::string encode(const ProtocolMessage& msg);
ProtocolMessage decode_message(const std::string& line);

std::string encode(const TraceEvent& event);
TraceEvent decode_event(const std::string& line);

}  // namespace bcm
