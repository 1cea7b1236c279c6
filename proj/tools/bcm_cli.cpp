// Copyright (c) The BCM Broadcast Authors.
// Licensed under the Apache 2.0 License.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "bcm/analysis.hpp"
#include "bcm/checker.hpp"
#include "bcm/net_sim.hpp"
#include "bcm/scenarios.hpp"

namespace {

using namespace bcm;

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& path, const std::string& data) {
  if (path.empty() || path == "-") {
    std::cout << data;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path);
  out << data;
}

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("BCM_SEED");
  if (!v || !*v) return std::nullopt;
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw UsageError("BCM_SEED is not a number");
  }
}

int cmd_run(const std::string& scenario, std::optional<std::uint64_t> seed,
            const std::string& trace_out, const std::string& accounting_out) {
  ScenarioConfig c = scenario_from_json(slurp(scenario));
  if (seed) c.seed = *seed;
  else if (auto e = env_seed()) c.seed = *e;
  const RunResult r = run(c);
  emit(trace_out, write_trace(c, r.trace));
  if (!accounting_out.empty()) emit(accounting_out, accounting_csv(r.accounting));
  std::cerr << "run: " << r.trace.size() << " events, final tick " << r.final_tick << ", "
            << r.dropped << " dropped\n";
  return kOk;
}

int cmd_replay(const std::string& trace_out, const std::string& scenario_out) {
  const GoldenScenario g = golden_handoff_scenario();
  const RunResult r = run(g.config);
  emit(trace_out, write_trace(g.config, r.trace));
  if (!scenario_out.empty()) emit(scenario_out, scenario_to_json(g.config));
  const MilestoneMatch m = match_milestones(r.trace, g.milestones);
  for (std::size_t k = 0; k < g.milestones.size(); ++k) {
    std::cerr << "step " << g.milestones[k].step << ": " << g.milestones[k].description;
    if (m.positions[k]) std::cerr << " @ tick " << r.trace[*m.positions[k]].tick;
    std::cerr << "\n";
  }
  if (!m.ok) {
    std::cerr << "replay-437: " << m.failure << "\n";
    return kFailed;
  }
  return kOk;
}

int cmd_check(const std::string& trace_path, const std::string& scenario,
              const std::string& report_out, const std::string& summary_out) {
  const ScenarioConfig c = scenario_from_json(slurp(scenario));
  TraceHeader header;
  const std::vector<TraceEvent> trace = read_trace(slurp(trace_path), &header);
  const std::string expected = config_hash(c);
  if (header.config_hash != expected) {
    std::cerr << "check: warning: trace header hash " << header.config_hash
              << " does not match scenario hash " << expected << "\n";
  }
  const std::vector<Verdict> verdicts = check_all(trace, c);
  emit(report_out, verdict_report(verdicts));
  if (!summary_out.empty()) emit(summary_out, verdict_summary_json(verdicts));
  for (const Verdict& v : verdicts) {
    if (v.holds) continue;
    std::cerr << v.property << " fails:\n";
    for (const TraceEvent& e : v.counterexample) std::cerr << "  " << encode(e) << "\n";
  }
  return all_hold(verdicts) ? kOk : kFailed;
}

int cmd_table1(const std::string& out, bool verify) {
  const std::vector<Table1Row> rows = emit_table1();
  emit(out, table1_csv(rows));
  if (!verify) return kOk;
  const std::vector<Table1Row>& ref = table1_reference();
  int mismatches = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double got[] = {rows[i].tail, rows[i].p_m12, rows[i].p_m14, rows[i].p_m16};
    const double want[] = {ref[i].tail, ref[i].p_m12, ref[i].p_m14, ref[i].p_m16};
    for (int col = 0; col < 4; ++col) {
      if (std::fabs(got[col] - want[col]) > 1e-6) {
        ++mismatches;
        std::cerr << "table1: row k3=" << rows[i].k3 << " column " << col << ": " << got[col]
                  << " vs " << want[col] << "\n";
      }
    }
  }
  std::cerr << "table1: " << (40 - mismatches) << "/40 values within 1e-6\n";
  return mismatches == 0 ? kOk : kFailed;
}

int cmd_fig7(const std::vector<double>& rates, const std::vector<std::uint64_t>& k3s,
             const std::string& out) {
  emit(out, fig7_csv(emit_fig7_sweep(rates, k3s)));
  return kOk;
}

struct SweepTotals {
  std::uint64_t runs = 0;
  std::uint64_t all_hold = 0;
  std::map<std::string, std::uint64_t> holds;
  std::uint64_t events = 0;
  std::uint64_t messages = 0;
  std::uint64_t dropped = 0;
  std::vector<std::uint64_t> failing_seeds;
};

int cmd_sweep(const std::string& scenario, std::uint64_t seed_from, std::uint64_t seed_to,
              unsigned workers, const std::string& summary_out) {
  if (seed_to < seed_from) throw UsageError("--seed-to must not be below --seed-from");
  const ScenarioConfig base = scenario_from_json(slurp(scenario));
  const std::uint64_t n = seed_to - seed_from + 1;
  std::vector<SweepTotals> per_run(n);
  std::atomic<std::uint64_t> next{0};
  auto worker = [&] {
    for (std::uint64_t i = next++; i < n; i = next++) {
      ScenarioConfig c = base;
      c.seed = seed_from + i;
      const RunResult r = run(c);
      const std::vector<Verdict> v = check_all(r.trace, c);
      SweepTotals& t = per_run[i];
      t.runs = 1;
      t.events = r.trace.size();
      t.dropped = r.dropped;
      for (const auto& [id, counts] : r.accounting.per_broadcast) {
        t.messages += counts.init + counts.echo + counts.ready + counts.global + counts.forward +
                      counts.catchup;
      }
      t.messages += r.accounting.control;
      for (const Verdict& x : v) t.holds[x.property] += x.holds ? 1 : 0;
      if (all_hold(v)) ++t.all_hold;
      else t.failing_seeds.push_back(c.seed);
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < std::max(1u, workers); ++w) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();

  SweepTotals total;
  for (const SweepTotals& t : per_run) {
    total.runs += t.runs;
    total.all_hold += t.all_hold;
    total.events += t.events;
    total.messages += t.messages;
    total.dropped += t.dropped;
    for (const auto& [k, v] : t.holds) total.holds[k] += v;
    total.failing_seeds.insert(total.failing_seeds.end(), t.failing_seeds.begin(),
                               t.failing_seeds.end());
  }
  nlohmann::ordered_json j;
  j["runs"] = total.runs;
  j["all_hold"] = total.all_hold;
  j["events"] = total.events;
  j["messages"] = total.messages;
  j["dropped"] = total.dropped;
  j["holds"] = nlohmann::ordered_json::object();
  for (const std::string& p : property_names()) j["holds"][p] = total.holds[p];
  j["failing_seeds"] = total.failing_seeds;
  emit(summary_out, j.dump(2) + "\n");
  return total.all_hold == total.runs ? kOk : kFailed;
}

int cmd_thresholds(std::uint64_t nmh, std::uint64_t t) {
  const Thresholds th = violation_thresholds(nmh, t);
  std::cout << "leave_k2," << th.leave_k2 << "\njoin_k3," << th.join_k3 << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BCM broadcast simulator, checker and analysis"};
  app.require_subcommand(1, 1);

  std::string scenario, trace_out, accounting_out, trace_path, report_out, summary_out, out,
      scenario_out;
  std::optional<std::uint64_t> seed;
  bool verify = false;
  std::vector<double> rates{2, 4, 6, 8, 10, 12};
  std::vector<std::uint64_t> k3s{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::uint64_t seed_from = 0, seed_to = 99, nmh = 0, t = 0;
  unsigned workers = 1;

  auto* run_cmd = app.add_subcommand("run", "run a scenario file");
  run_cmd->add_option("--scenario", scenario, "scenario file")->required();
  run_cmd->add_option("--seed", seed, "seed override (default: BCM_SEED, then the file)");
  run_cmd->add_option("--trace-out", trace_out, "trace file (default: stdout)");
  run_cmd->add_option("--accounting-out", accounting_out, "message accounting file");

  auto* replay_cmd = app.add_subcommand("replay-437", "run the built-in handoff walk-through");
  replay_cmd->add_option("--trace-out", trace_out, "trace file (default: stdout)");
  replay_cmd->add_option("--scenario-out", scenario_out, "write the scenario file used");

  auto* check_cmd = app.add_subcommand("check", "verify the BCM properties on a trace");
  check_cmd->add_option("--trace", trace_path, "trace file")->required();
  check_cmd->add_option("--scenario", scenario, "scenario file")->required();
  check_cmd->add_option("--report-out", report_out, "verdict table (default: stdout)");
  check_cmd->add_option("--summary-out", summary_out, "machine-readable summary");

  auto* table_cmd = app.add_subcommand("table1", "emit the loss-probability table");
  table_cmd->add_option("--out", out, "output file (default: stdout)");
  table_cmd->add_flag("--verify", verify, "compare against the published values");

  auto* fig_cmd = app.add_subcommand("fig7", "emit the join-probability grid");
  fig_cmd->add_option("--rates", rates, "join rates")->delimiter(',');
  fig_cmd->add_option("--k3s", k3s, "join counts")->delimiter(',');
  fig_cmd->add_option("--out", out, "output file (default: stdout)");

  auto* sweep_cmd = app.add_subcommand("sweep", "run and check a scenario over a seed range");
  sweep_cmd->add_option("--scenario", scenario, "scenario file")->required();
  sweep_cmd->add_option("--seed-from", seed_from, "first seed");
  sweep_cmd->add_option("--seed-to", seed_to, "last seed (inclusive)");
  sweep_cmd->add_option("--workers", workers, "worker threads")->check(CLI::Range(1u, 256u));
  sweep_cmd->add_option("--summary-out", summary_out, "summary file (default: stdout)");

  auto* thr_cmd = app.add_subcommand("thresholds", "minimal event counts that break the t-condition");
  thr_cmd->add_option("--nmh", nmh, "group size")->required();
  thr_cmd->add_option("--t", t, "Byzantine members")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*run_cmd) return cmd_run(scenario, seed, trace_out, accounting_out);
    if (*replay_cmd) return cmd_replay(trace_out, scenario_out);
    if (*check_cmd) return cmd_check(trace_path, scenario, report_out, summary_out);
    if (*table_cmd) return cmd_table1(out, verify);
    if (*fig_cmd) return cmd_fig7(rates, k3s, out);
    if (*sweep_cmd) return cmd_sweep(scenario, seed_from, seed_to, workers, summary_out);
    if (*thr_cmd) return cmd_thresholds(nmh, t);
  } catch (const InvalidConfig& e) {
    std::cerr << "invalid scenario: " << e.what() << "\n";
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << e.what() << "\n";
    return kUsage;
  } catch (const AlreadyViolated& e) {
    std::cerr << e.what() << "\n";
    return kUsage;
  } catch (const MalformedTrace& e) {
    std::cerr << "malformed trace: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
