// Copyright (c) The BCM Broadcast Authors.
// Licensed under the Apache 2.0 License.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace bcm {

struct RateSpec {
  double k = 0;
  double tau = 1;
  double tau1 = 1;
};

struct GroupProfile {
  std::uint64_t nmh = 0;
  std::uint64_t t = 0;
  double epsilon = 0;
  std::uint64_t m_threshold = 0;
};

/// (k / tau) * tau1. Throws std::invalid_argument when a window is not positive.
double rate(const RateSpec& spec);

double poisson_pmf(std::uint64_t k, double mean);
/// P(X >= k_min) for X ~ Poisson(mean).
double poisson_tail(std::uint64_t k_min, double mean);

/// Product of the four independent event-class probabilities.
double joint_event_prob(const std::array<std::uint64_t, 4>& counts,
                        const std::array<double, 4>& means);

/// Number of non-empty combinations of the four event classes.
std::uint64_t event_combinations();
/// Combinations of size 1..4.
std::array<std::uint64_t, 4> event_combinations_by_size();

/// pmf(M, tau * epsilon) scaled by P(k3 >= k3_min).
double loss_probability(const GroupProfile& profile, double tau, double lambda3,
                        std::uint64_t k3_min);
/// P(at least M messages) scaled by P(k3 >= k3_min).
double loss_probability_at_least(const GroupProfile& profile, double tau, double lambda3,
                                 std::uint64_t k3_min);

/// Byzantine leaves k1, honest leaves k2 and Byzantine joins k3 break the t-condition.
bool mixed_events_violate(std::uint64_t nmh, std::uint64_t t, std::uint64_t k1, std::uint64_t k2,
                          std::uint64_t k3);
/// Probability of the (k1, k2, k3) combination with no honest joins.
double mixed_events_prob(std::uint64_t k1, std::uint64_t k2, std::uint64_t k3,
                         const std::array<double, 3>& means);

struct Table1Row {
  std::uint64_t k3 = 0;
  double tail = 0;
  double p_m12 = 0;
  double p_m14 = 0;
  double p_m16 = 0;
};

/// Rows k3 = 1..10 with lambda3 = 8, epsilon = 10, tau = 1.
std::vector<Table1Row> emit_table1();
/// Published values of the same grid, six decimals.
const std::vector<Table1Row>& table1_reference();
std::string table1_csv(const std::vector<Table1Row>& rows);

struct Fig7Cell {
  double rate = 0;
  std::uint64_t k3 = 0;
  double tail = 0;
};

std::vector<Fig7Cell> emit_fig7_sweep(const std::vector<double>& rates,
                                      const std::vector<std::uint64_t>& k3_values);
std::string fig7_csv(const std::vector<Fig7Cell>& cells);

}  // namespace bcm
