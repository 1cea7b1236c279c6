// Copyright (c) The BCM Broadcast Authors.
// Licensed under the Apache 2.0 License.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "bcm/core_types.hpp"
#include "bcm/net_sim.hpp"

namespace bcm {

struct Verdict {
  std::string property;
  bool holds = true;
  /// Minimal offending events; non-empty iff the property fails.
  std::vector<TraceEvent> counterexample;
};

/// The thirteen property names in report order.
const std::vector<std::string>& property_names();

/// One verdict per property, evaluated on a complete (quiescent) trace.
std::vector<Verdict> check_all(const std::vector<TraceEvent>& trace, const ScenarioConfig& config);
bool all_hold(const std::vector<Verdict>& verdicts);
std::string verdict_report(const std::vector<Verdict>& verdicts);
std::string verdict_summary_json(const std::vector<Verdict>& verdicts);

/// Ground-truth precedence built from broadcast and delivery records only.
struct CausalOracle {
  /// Ids the broadcaster had delivered or broadcast before broadcasting each id.
  std::map<MessageId, std::set<MessageId>> causal_past;
  bool precedes(const MessageId& a, const MessageId& b) const;
};

CausalOracle build_oracle(const std::vector<TraceEvent>& trace);
/// Irreflexive and transitive over all recorded ids.
bool is_strict_partial_order(const CausalOracle& oracle);
/// Nodes whose delivery records contradict the oracle.
std::set<NodeId> causal_order_offenders(const std::vector<TraceEvent>& trace,
                                        const CausalOracle& oracle);

/// Application ids no station ever bcm-Sdelivered.
std::set<MessageId> lost_messages(const std::vector<TraceEvent>& trace);
/// Ids whose single broadcast invocation carried two or more payloads.
std::set<MessageId> equivocated_ids(const std::vector<TraceEvent>& trace);

bool t_compliant(std::uint64_t nmh, std::uint64_t t);

struct TPoint {
  std::uint64_t tick = 0;
  std::uint64_t nmh = 0;
  std::uint64_t t = 0;
  bool compliant = true;
};

struct TConditionTimeline {
  std::map<std::uint32_t, std::vector<TPoint>> groups;
  std::map<std::uint32_t, std::optional<std::uint64_t>> first_violation;
};

TConditionTimeline t_condition_timeline(const std::vector<TraceEvent>& trace,
                                        const ScenarioConfig& config);

class AlreadyViolated : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct Thresholds {
  std::uint64_t leave_k2 = 0;
  std::uint64_t join_k3 = 0;
  bool operator==(const Thresholds&) const = default;
};

/// leave_k2 = nmh - 3t and join_k3 = floor(nmh / 3) - t, counted against the pre-event group size.
Thresholds violation_thresholds(std::uint64_t nmh, std::uint64_t t);
/// Byzantine joins needed when every join also enlarges the group.
std::uint64_t joins_to_violate_growing(std::uint64_t nmh, std::uint64_t t);

}  // namespace bcm
