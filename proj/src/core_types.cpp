// Copyright (c) The BCM Broadcast Authors.
// Licensed under the Apache 2.0 License.

#include "bcm/core_types.hpp"

#include <array>
#include <json.hpp>

namespace bcm {

using Json = nlohmann::ordered_json;

std::string to_string(NodeId id) {
  return (id.is_mh() ? "h" : "s") + std::to_string(id.index);
}

NodeId parse_node_id(const std::string& text) {
  if (text.size() < 2 || (text[0] != 'h' && text[0] != 's')) {
    throw std::invalid_argument("bad node id: " + text);
  }
  std::uint32_t index = 0;
  for (std::size_t i = 1; i < text.size(); ++i) {
    if (text[i] < '0' || text[i] > '9') throw std::invalid_argument("bad node id: " + text);
    index = index * 10 + static_cast<std::uint32_t>(text[i] - '0');
  }
  if (index == 0) throw std::invalid_argument("node index must be >= 1: " + text);
  return text[0] == 'h' ? mh(index) : mss(index);
}

MessageId message_id(const AppMessage& app) { return {app.origin, app.seq}; }

std::string to_string(const MessageId& id) {
  return "<" + to_string(id.origin) + "," + std::to_string(id.seq) + ">";
}

void CausalBarrier::insert(std::uint32_t station, std::uint64_t sn) {
  auto [it, fresh] = entries_.emplace(station, sn);
  if (!fresh && it->second < sn) it->second = sn;
}

void CausalBarrier::remove_covered_by(const CausalBarrier& other) {
  for (const auto& [station, sn] : other.entries_) {
    auto it = entries_.find(station);
    if (it != entries_.end() && it->second <= sn) entries_.erase(it);
  }
}

std::optional<std::uint64_t> CausalBarrier::get(std::uint32_t station) const {
  auto it = entries_.find(station);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

CausalBarrier barrier_merge(const CausalBarrier& a, const CausalBarrier& b) {
  CausalBarrier out = a;
  for (const auto& [station, sn] : b.entries()) out.insert(station, sn);
  return out;
}

std::string message_tag(const ProtocolMessage& msg) {
  static const std::array<const char*, 10> kTags = {
      "Init",           "Echo",       "Ready",      "GlobalBcast", "ForwardGlobal",
      "ForwardCatchup", "Disconnect", "RequestMsg", "Removed",     "Accept"};
  return kTags[msg.index()];
}

std::optional<AppMessage> carried_app(const ProtocolMessage& msg) {
  return std::visit(
      [](const auto& m) -> std::optional<AppMessage> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ForwardCatchup>) {
          return m.app;
        } else if constexpr (requires { m.app; }) {
          return m.app;
        } else {
          return std::nullopt;
        }
      },
      msg);
}

namespace {

constexpr std::array<const char*, 15> kActionNames = {
    "Send",          "Receive",     "BrBroadcast",   "BrDeliver",    "CDeliver",
    "CBroadcast",    "BcmHBroadcast", "BcmHDeliver", "BcmSBroadcast", "BcmSDeliver",
    "Disregard",     "HandoffStart", "HandoffComplete", "GroupJoin",  "GroupLeave"};

// Printable ASCII other than '%' is kept; every other byte becomes %XX.
std::string escape_payload(const Payload& payload) {
  static const char* kHex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : payload) {
    if (c >= 0x20 && c <= 0x7e && c != '%') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xf]);
    }
  }
  return out;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  throw DecodeError("bad escape digit");
}

Payload unescape_payload(const std::string& text) {
  Payload out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '%') {
      out.push_back(text[i]);
      continue;
    }
    if (i + 2 >= text.size()) throw DecodeError("truncated escape in payload");
    out.push_back(static_cast<char>(hex_value(text[i + 1]) * 16 + hex_value(text[i + 2])));
    i += 2;
  }
  return out;
}

Json node_json(NodeId id) { return to_string(id); }
NodeId node_from(const Json& j) { return parse_node_id(j.get<std::string>()); }

Json app_json(const AppMessage& app) {
  Json j;
  j["origin"] = node_json(app.origin);
  j["seq"] = app.seq;
  j["payload"] = escape_payload(app.payload);
  return j;
}

AppMessage app_from(const Json& j) {
  return {node_from(j.at("origin")), j.at("seq").get<std::uint64_t>(),
          unescape_payload(j.at("payload").get<std::string>())};
}

Json barrier_json(const CausalBarrier& cb) {
  Json arr = Json::array();
  for (const auto& [station, sn] : cb.entries()) arr.push_back(Json::array({station, sn}));
  return arr;
}

CausalBarrier barrier_from(const Json& j) {
  CausalBarrier cb;
  for (const auto& e : j) cb.insert(e.at(0).get<std::uint32_t>(), e.at(1).get<std::uint64_t>());
  return cb;
}

Json view_json(const std::vector<NodeId>& view) {
  Json arr = Json::array();
  for (NodeId id : view) arr.push_back(node_json(id));
  return arr;
}

std::vector<NodeId> view_from(const Json& j) {
  std::vector<NodeId> out;
  for (const auto& e : j) out.push_back(node_from(e));
  return out;
}

Json message_json(const ProtocolMessage& msg) {
  Json j;
  j["tag"] = message_tag(msg);
  std::visit(
      [&j](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Init>) {
          j["app"] = app_json(m.app);
        } else if constexpr (std::is_same_v<T, Echo>) {
          j["origin_index"] = m.origin_index;
          j["seq"] = m.seq;
          j["app"] = app_json(m.app);
        } else if constexpr (std::is_same_v<T, Ready>) {
          j["app"] = app_json(m.app);
          j["origin"] = node_json(m.origin);
        } else if constexpr (std::is_same_v<T, GlobalBcast>) {
          j["app"] = app_json(m.app);
          j["sender_mss"] = m.sender_mss;
          j["sn"] = m.sn;
          j["cb"] = barrier_json(m.cb);
          j["forwarded"] = m.forwarded;
        } else if constexpr (std::is_same_v<T, ForwardGlobal>) {
          j["app"] = app_json(m.app);
          j["origin_mss"] = m.origin_mss;
        } else if constexpr (std::is_same_v<T, ForwardCatchup>) {
          j["app"] = m.app ? app_json(*m.app) : Json(nullptr);
          j["origin_mss"] = m.origin_mss;
          j["group_view"] = view_json(m.group_view);
        } else if constexpr (std::is_same_v<T, Disconnect>) {
          j["dest_mss"] = m.dest_mss;
          j["h_deliv"] = m.h_deliv;
        } else if constexpr (std::is_same_v<T, RequestMsg>) {
          j["src_mss"] = m.src_mss;
          j["h_deliv"] = m.h_deliv;
        } else if constexpr (std::is_same_v<T, Removed>) {
          j["src_mss"] = m.src_mss;
          j["mh"] = node_json(m.mh);
          j["h_deliv"] = m.h_deliv;
          j["know_bcast_entry"] = m.know_bcast_entry;
        } else if constexpr (std::is_same_v<T, Accept>) {
          j["mh"] = node_json(m.mh);
        }
      },
      msg);
  return j;
}

ProtocolMessage message_from(const Json& j) {
  const std::string tag = j.at("tag").get<std::string>();
  if (tag == "Init") return Init{app_from(j.at("app"))};
  if (tag == "Echo") {
    return Echo{j.at("origin_index").get<std::uint32_t>(), j.at("seq").get<std::uint64_t>(),
                app_from(j.at("app"))};
  }
  if (tag == "Ready") return Ready{app_from(j.at("app")), node_from(j.at("origin"))};
  if (tag == "GlobalBcast") {
    return GlobalBcast{app_from(j.at("app")), j.at("sender_mss").get<std::uint32_t>(),
                       j.at("sn").get<std::uint64_t>(), barrier_from(j.at("cb")),
                       j.at("forwarded").get<StationVector>()};
  }
  if (tag == "ForwardGlobal") {
    return ForwardGlobal{app_from(j.at("app")), j.at("origin_mss").get<std::uint32_t>()};
  }
  if (tag == "ForwardCatchup") {
    std::optional<AppMessage> app;
    if (!j.at("app").is_null()) app = app_from(j.at("app"));
    return ForwardCatchup{app, j.at("origin_mss").get<std::uint32_t>(), view_from(j.at("group_view"))};
  }
  if (tag == "Disconnect") {
    return Disconnect{j.at("dest_mss").get<std::uint32_t>(), j.at("h_deliv").get<StationVector>()};
  }
  if (tag == "RequestMsg") {
    return RequestMsg{j.at("src_mss").get<std::uint32_t>(), j.at("h_deliv").get<StationVector>()};
  }
  if (tag == "Removed") {
    return Removed{j.at("src_mss").get<std::uint32_t>(), node_from(j.at("mh")),
                   j.at("h_deliv").get<StationVector>(), j.at("know_bcast_entry").get<std::uint64_t>()};
  }
  if (tag == "Accept") return Accept{node_from(j.at("mh"))};
  throw DecodeError("unknown message tag: " + tag);
}

template <typename F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const DecodeError&) {
    throw;
  } catch (const std::exception& e) {
    throw DecodeError(e.what());
  }
}

}  // namespace

std::string to_string(Action action) { return kActionNames[static_cast<std::size_t>(action)]; }

Action parse_action(const std::string& text) {
  for (std::size_t i = 0; i < kActionNames.size(); ++i) {
    if (text == kActionNames[i]) return static_cast<Action>(i);
  }
  throw DecodeError("unknown action: " + text);
}

std::string encode(const ProtocolMessage& msg) { return message_json(msg).dump(); }

ProtocolMessage decode_message(const std::string& line) {
  return guarded([&] { return message_from(Json::parse(line)); });
}

std::string encode(const TraceEvent& event) {
  Json j;
  j["tick"] = event.tick;
  j["actor"] = node_json(event.actor);
  j["action"] = to_string(event.action);
  j["peer"] = event.peer ? node_json(*event.peer) : Json(nullptr);
  j["message"] = event.message ? message_json(*event.message) : Json(nullptr);
  j["app"] = event.app ? app_json(*event.app) : Json(nullptr);
  j["detail"] = event.detail;
  return j.dump();
}

TraceEvent decode_event(const std::string& line) {
  return guarded([&] {
    const Json j = Json::parse(line);
    TraceEvent e;
    e.tick = j.at("tick").get<std::uint64_t>();
    e.actor = node_from(j.at("actor"));
    e.action = parse_action(j.at("action").get<std::string>());
    if (!j.at("peer").is_null()) e.peer = node_from(j.at("peer"));
    if (!j.at("message").is_null()) e.message = message_from(j.at("message"));
    if (!j.at("app").is_null()) e.app = app_from(j.at("app"));
    e.detail = j.at("detail").get<std::string>();
    return e;
  });
}

}  // namespace bcm
