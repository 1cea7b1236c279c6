// Copyright (c) The BCM Broadcast Authors.
// Licensed under the Apache 2.0 License.

#include "bcm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace bcm {

namespace {

struct Neumaier {
  double sum = 0.0;
  double comp = 0.0;
  void add(double v) {
    const double t = sum + v;
    comp += std::fabs(sum) >= std::fabs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

/// Compensated sum of pmf(0..k_end-1, mean).
double pmf_prefix(std::uint64_t k_end, double mean) {
  Neumaier acc;
  for (std::uint64_t i = 0; i < k_end; ++i) acc.add(poisson_pmf(i, mean));
  return acc.value();
}

/// Compensated sum of pmf(k_min.., mean), stopping once terms no longer register.
double pmf_upper(std::uint64_t k_min, double mean) {
  Neumaier acc;
  double term = poisson_pmf(k_min, mean);
  for (std::uint64_t i = k_min; term > 0.0; ++i) {
    acc.add(term);
    if (term < acc.value() * 1e-17) break;
    term *= mean / static_cast<double>(i + 1);
  }
  return acc.value();
}

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

double rate(const RateSpec& spec) {
  if (!(spec.tau > 0) || !(spec.tau1 > 0)) {
    throw std::invalid_argument("rate: tau and tau1 must be positive");
  }
  return spec.k / spec.tau * spec.tau1;
}

double poisson_pmf(std::uint64_t k, double mean) {
  if (mean < 0) throw std::invalid_argument("poisson_pmf: negative mean");
  if (mean == 0) return k == 0 ? 1.0 : 0.0;
  const double kd = static_cast<double>(k);
  return std::exp(kd * std::log(mean) - mean - std::lgamma(kd + 1.0));
}

double poisson_tail(std::uint64_t k_min, double mean) {
  if (mean < 0) throw std::invalid_argument("poisson_tail: negative mean");
  if (k_min == 0) return 1.0;
  // Above the mean the upper sum avoids cancellation in 1 - prefix.
  if (static_cast<double>(k_min) > mean) return std::clamp(pmf_upper(k_min, mean), 0.0, 1.0);
  return std::clamp(1.0 - pmf_prefix(k_min, mean), 0.0, 1.0);
}

double joint_event_prob(const std::array<std::uint64_t, 4>& counts,
                        const std::array<double, 4>& means) {
  double p = 1.0;
  for (std::size_t i = 0; i < 4; ++i) p *= poisson_pmf(counts[i], means[i]);
  return p;
}

std::array<std::uint64_t, 4> event_combinations_by_size() {
  std::array<std::uint64_t, 4> out{};
  std::uint64_t c = 1;
  for (std::uint64_t r = 1; r <= 4; ++r) {
    c = c * (4 - r + 1) / r;
    out[r - 1] = c;
  }
  return out;
}

std::uint64_t event_combinations() {
  std::uint64_t total = 0;
  for (std::uint64_t c : event_combinations_by_size()) total += c;
  return total;
}

double loss_probability(const GroupProfile& profile, double tau, double lambda3,
                        std::uint64_t k3_min) {
  return poisson_pmf(profile.m_threshold, tau * profile.epsilon) *
         poisson_tail(k3_min, tau * lambda3);
}

double loss_probability_at_least(const GroupProfile& profile, double tau, double lambda3,
                                 std::uint64_t k3_min) {
  return poisson_tail(profile.m_threshold, tau * profile.epsilon) *
         poisson_tail(k3_min, tau * lambda3);
}

bool mixed_events_violate(std::uint64_t nmh, std::uint64_t t, std::uint64_t k1, std::uint64_t k2,
                          std::uint64_t k3) {
  if (k1 > t) return false;
  if (3 * k2 >= 2 * nmh) return false;
  if (k1 + k2 > nmh) return false;
  const auto need = static_cast<std::int64_t>((nmh - k1 - k2) / 3) -
                    static_cast<std::int64_t>(t) - static_cast<std::int64_t>(k1);
  return static_cast<std::int64_t>(k3) >= need;
}

double mixed_events_prob(std::uint64_t k1, std::uint64_t k2, std::uint64_t k3,
                         const std::array<double, 3>& means) {
  return joint_event_prob({k1, k2, k3, 0}, {means[0], means[1], means[2], 0.0});
}

std::vector<Table1Row> emit_table1() {
  constexpr double kLambda3 = 8.0;
  constexpr double kEpsilon = 10.0;
  std::vector<Table1Row> rows;
  for (std::uint64_t k3 = 1; k3 <= 10; ++k3) {
    Table1Row r;
    r.k3 = k3;
    r.tail = poisson_tail(k3, kLambda3);
    r.p_m12 = loss_probability({0, 0, kEpsilon, 12}, 1.0, kLambda3, k3);
    r.p_m14 = loss_probability({0, 0, kEpsilon, 14}, 1.0, kLambda3, k3);
    r.p_m16 = loss_probability({0, 0, kEpsilon, 16}, 1.0, kLambda3, k3);
    rows.push_back(r);
  }
  return rows;
}

const std::vector<Table1Row>& table1_reference() {
  static const std::vector<Table1Row> kRows = {
      {1, 0.999665, 0.094749, 0.052060, 0.021692}, {2, 0.996981, 0.094494, 0.051920, 0.021633},
      {3, 0.986246, 0.093477, 0.051361, 0.021400}, {4, 0.957620, 0.090764, 0.049870, 0.020779},
      {5, 0.900368, 0.085337, 0.046889, 0.019537}, {6, 0.808764, 0.076655, 0.042118, 0.017549},
      {7, 0.686626, 0.065079, 0.035757, 0.014899}, {8, 0.547039, 0.051849, 0.028488, 0.011870},
      {9, 0.407453, 0.038618, 0.021219, 0.008841}, {10, 0.283376, 0.026858, 0.014757, 0.006149},
  };
  return kRows;
}

std::string table1_csv(const std::vector<Table1Row>& rows) {
  std::string out = "k3,P(E>=k3),P(M=12),P(M=14),P(M=16)\n";
  for (const Table1Row& r : rows) {
    out += std::to_string(r.k3) + "," + fmt6(r.tail) + "," + fmt6(r.p_m12) + "," +
           fmt6(r.p_m14) + "," + fmt6(r.p_m16) + "\n";
  }
  return out;
}

std::vector<Fig7Cell> emit_fig7_sweep(const std::vector<double>& rates,
                                      const std::vector<std::uint64_t>& k3_values) {
  std::vector<Fig7Cell> cells;
  for (double lambda : rates) {
    for (std::uint64_t k3 : k3_values) cells.push_back({lambda, k3, poisson_tail(k3, lambda)});
  }
  return cells;
}

std::string fig7_csv(const std::vector<Fig7Cell>& cells) {
  std::string out = "rate,k3,P(E>=k3)\n";
  for (const Fig7Cell& c : cells) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", c.rate);
    out += std::string(buf) + "," + std::to_string(c.k3) + "," + fmt6(c.tail) + "\n";
  }
  return out;
}

}  // namespace bcm
