// Copyright (c) The BCM Broadcast Authors.
// Licensed under the Apache 2.0 License.

#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "bcm/core_types.hpp"
#include "bcm/mh_node.hpp"

namespace bcm {

/// Stops emitting anything from `at_tick` on.
struct Crash {
  std::uint64_t at_tick = 0;
  bool operator==(const Crash&) const = default;
};
/// Never echoes, never delivers, never broadcasts; still follows handoff steps.
struct Silent {
  bool operator==(const Silent&) const = default;
};
/// Broadcasts `payload` and repeats the same Init `times` times in total.
struct DuplicateBroadcast {
  Payload payload;
  std::uint32_t times = 2;
  bool operator==(const DuplicateBroadcast&) const = default;
};
/// Sends payload_a to the hosts in side_a and payload_b to every other host.
struct Equivocate {
  Payload payload_a;
  Payload payload_b;
  std::set<std::uint32_t> side_a;
  bool mss_gets_a = false;
  bool operator==(const Equivocate&) const = default;
};
/// Receives Inits but never echoes them.
struct RefuseEcho {
  bool operator==(const RefuseEcho&) const = default;
};
struct InjectEntry {
  std::uint64_t tick = 0;
  std::uint64_t seq = 0;
  Payload payload;
  bool operator==(const InjectEntry&) const = default;
};
/// Emits adversary-chosen Init messages at scheduled ticks.
struct ArbitraryInject {
  std::vector<InjectEntry> schedule;
  bool operator==(const ArbitraryInject&) const = default;
};
/// Records its own deliveries in swapped pairs.
struct CausalViolator {
  bool operator==(const CausalViolator&) const = default;
};

using AdversaryStrategy = std::variant<Crash, Silent, DuplicateBroadcast, Equivocate, RefuseEcho,
                                       ArbitraryInject, CausalViolator>;

std::string strategy_name(const AdversaryStrategy& strategy);

/// Transition function applying `strategy` on top of `base`.
MhTransition wrap(MhTransition base, AdversaryStrategy strategy);

}  // namespace bcm
