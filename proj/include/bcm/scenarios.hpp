// Copyright (c) The BCM Broadcast Authors.
// Licensed under the Apache 2.0 License.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bcm/core_types.hpp"
#include "bcm/net_sim.hpp"

namespace bcm {

struct Milestone {
  int step = 0;
  std::string description;
  std::function<bool(const TraceEvent&)> matches;
  /// Steps that must be matched earlier in the trace; defaults to the previous step.
  std::vector<int> after;
};

struct GoldenScenario {
  ScenarioConfig config;
  std::vector<Milestone> milestones;
  /// First and second broadcast of the handing-off host.
  MessageId m1;
  MessageId m2;
};

/// Handoff walk-through: h1 broadcasts m1 at s1, moves to s2, then broadcasts m2.
GoldenScenario golden_handoff_scenario();

struct MilestoneMatch {
  /// Trace position per step (index step - 1).
  std::vector<std::optional<std::size_t>> positions;
  bool ok = false;
  std::string failure;
};

MilestoneMatch match_milestones(const std::vector<TraceEvent>& trace,
                                const std::vector<Milestone>& milestones);

/// One station, `nmh` hosts, h1 broadcasts once.
ScenarioConfig local_broadcast_scenario(std::uint32_t nmh);
/// h1 broadcasts from s1, which holds `nmh_j` of the `n_mh` hosts.
ScenarioConfig global_broadcast_scenario(std::uint32_t n_mss, std::uint32_t n_mh,
                                         std::uint32_t nmh_j);

/// Silent Byzantine joins push s1 past the t-condition before h1's second broadcast.
struct LossScenario {
  ScenarioConfig config;
  MessageId delivered_before;
  MessageId lost;
  MessageId delivered_after;
};
LossScenario loss_under_violation_scenario();

/// Group of `nmh` hosts with `t` Byzantine members at s1 and a pool of Byzantine hosts at s2,
/// with Byzantine joins to s1 at `lambda3` per horizon.
ScenarioConfig byzantine_join_scenario(std::uint32_t nmh, std::uint32_t t, std::uint32_t pool,
                                       double lambda3, std::uint64_t horizon, std::uint64_t seed);

struct RandomLimits {
  std::uint32_t min_mss = 2, max_mss = 4;
  std::uint32_t min_mh = 6, max_mh = 20;
  std::uint32_t min_broadcasts = 1, max_broadcasts = 10;
  std::uint32_t max_handoffs = 5;
  /// Minimum spacing between handoffs.
  std::uint64_t handoff_gap = 30;
};

/// Random scenario whose every group satisfies the t-condition at all ticks.
ScenarioConfig random_compliant_scenario(std::uint64_t seed, const RandomLimits& limits = {});

}  // namespace bcm
