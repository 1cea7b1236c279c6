// Copyright (c) The BCM Broadcast Authors.
// Licensed under the Apache 2.0 License.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "bcm/adversary.hpp"
#include "bcm/core_types.hpp"
#include "bcm/mh_node.hpp"
#include "bcm/mss_node.hpp"

namespace bcm {

/// Configuration rejected by validation; `field` names the offending entry.
class InvalidConfig : public std::runtime_error {
 public:
  InvalidConfig(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class IncompleteBroadcast : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class WorkloadKind { AppBroadcast, MssAppBroadcast, StartHandoff };

struct WorkloadItem {
  std::uint64_t tick = 0;
  WorkloadKind kind = WorkloadKind::AppBroadcast;
  NodeId node;
  Payload payload;
  std::uint32_t dest_mss = 0;
  bool operator==(const WorkloadItem&) const = default;
};

/// Mobility event classes: Byzantine leave, honest leave, Byzantine join, honest join.
enum class MobilityClass : std::uint8_t { ByzantineLeave = 1, HonestLeave, ByzantineJoin, HonestJoin };

struct MobilityModel {
  /// Mean events per horizon for classes e1..e4.
  std::array<double, 4> poisson_rates{};
  std::uint64_t horizon_ticks = 1000;
  /// Group whose membership the events change.
  std::uint32_t target_mss = 1;
  bool operator==(const MobilityModel&) const = default;
};

struct LatencyOverride {
  NodeId src;
  NodeId dst;
  std::uint64_t latency = 1;
  bool operator==(const LatencyOverride&) const = default;
};

struct ScenarioConfig {
  std::uint32_t n_mss = 1;
  std::uint32_t n_mh = 1;
  std::map<std::uint32_t, std::uint32_t> initial_assignment;
  std::set<std::uint32_t> byzantine_set;
  std::map<std::uint32_t, AdversaryStrategy> adversary_strategy;
  std::vector<WorkloadItem> workload;
  std::optional<MobilityModel> mobility_model;
  std::uint64_t seed = 0;
  /// Wireless (host to station and host to host) latency.
  std::uint64_t channel_latency = 1;
  /// Station to station latency.
  std::uint64_t mss_latency = 1;
  /// Ticks between leaving one radio range and detecting the next.
  std::uint64_t transit_delay = 1;
  std::vector<LatencyOverride> latency_overrides;
  /// Declares t < n_mh / 3 over the whole system.
  bool global_compliance = false;
  /// Stop processing events after this tick (0 means run to quiescence).
  std::uint64_t max_ticks = 0;
  bool operator==(const ScenarioConfig&) const = default;
};

/// Throws InvalidConfig when the configuration is inconsistent.
void validate(const ScenarioConfig& config);

struct BroadcastCounts {
  std::uint64_t init = 0;
  std::uint64_t echo = 0;
  std::uint64_t ready = 0;
  std::uint64_t global = 0;
  std::uint64_t forward = 0;
  std::uint64_t catchup = 0;
  /// Longest hop chain of any message carrying this id.
  std::uint64_t steps = 0;
  bool operator==(const BroadcastCounts&) const = default;
};

struct MessageAccounting {
  std::map<MessageId, BroadcastCounts> per_broadcast;
  /// Handoff messages and view-only catch-ups, which carry no application id.
  std::uint64_t control = 0;
  bool operator==(const MessageAccounting&) const = default;
};

/// Init + Echo + Ready of a handoff-free intra-group broadcast.
std::uint64_t count_local_broadcast(const MessageAccounting& accounting, const MessageId& id);
/// Init + Echo + GlobalBcast + ForwardGlobal of a system-wide broadcast.
std::uint64_t count_global_broadcast(const MessageAccounting& accounting, const MessageId& id);
std::string accounting_csv(const MessageAccounting& accounting);

struct MobilityEvent {
  std::uint64_t tick = 0;
  MobilityClass cls = MobilityClass::HonestJoin;
  bool operator==(const MobilityEvent&) const = default;
};

/// Poisson event streams for the configured classes, sorted by tick.
std::vector<MobilityEvent> schedule_mobility(const ScenarioConfig& config);

/// Uniform draw in [0, 1) from the top 53 bits.
double uniform01(std::mt19937_64& rng);
double exponential(std::mt19937_64& rng, double rate);

struct RunResult {
  std::vector<TraceEvent> trace;
  MessageAccounting accounting;
  std::vector<MhState> mh_states;
  std::vector<MssState> mss_states;
  std::uint64_t dropped = 0;
  std::uint64_t final_tick = 0;
  /// Mobility events that found no eligible host.
  std::uint64_t skipped_mobility = 0;
};

RunResult run(const ScenarioConfig& config);

// Scenario and trace files.

std::string scenario_to_json(const ScenarioConfig& config);
/// Throws InvalidConfig naming the field on malformed input.
ScenarioConfig scenario_from_json(const std::string& text);
/// FNV-1a over the canonical scenario document, as 16 hex digits.
std::string config_hash(const ScenarioConfig& config);

struct TraceHeader {
  std::string config_hash;
  std::uint64_t seed = 0;
};

class MalformedTrace : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string write_trace(const ScenarioConfig& config, const std::vector<TraceEvent>& trace);
std::vector<TraceEvent> read_trace(const std::string& text, TraceHeader* header = nullptr);

}  // namespace bcm
