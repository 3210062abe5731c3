// Copyright 2026 The nugget Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "nugget/analysis.hpp"
#include "nugget/error.hpp"
#include "nugget/harness.hpp"
#include "nugget/io.hpp"
#include "nugget/marker.hpp"
#include "nugget/profile.hpp"
#include "nugget/selection.hpp"
#include "oracles.hpp"

using namespace nugget;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kInterval = 2000;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void fail(const std::string& why) {
    if (pass) detail.str("");
    else detail << "; ";
    pass = false;
    detail << why;
  }
};

struct Analysed {
  profile::ProfileSet profiles;
  analysis::BlockTrace trace;
  std::string bytes;
};

const Analysed& analysed(const testing::FixtureInfo& f) {
  static std::map<std::string, Analysed> cache;
  if (auto it = cache.find(f.name); it != cache.end()) return it->second;
  const auto& base = testing::base_build(f);
  const auto run = testing::run_analysis(f, kInterval);
  Analysed a{profile::parse_profile(run.profile_bytes, base.table), analysis::read_trace(run.trace_path),
             run.profile_bytes};
  return cache.emplace(f.name, std::move(a)).first->second;
}

std::vector<const testing::FixtureInfo*> single_threaded() {
  std::vector<const testing::FixtureInfo*> out;
  for (const auto& f : testing::all_fixtures()) {
    if (!f.multithreaded) out.push_back(&f);
  }
  return out;
}

void conservation(Outcome& o) {
  std::size_t fixtures = 0, intervals = 0;
  bool threaded = false;
  for (const auto& f : testing::all_fixtures()) {
    const auto& base = testing::base_build(f);
    const auto& a = analysed(f);
    std::map<std::uint64_t, std::uint64_t> totals;
    for (auto bb : a.trace.blocks) ++totals[bb];
    std::uint64_t expected = 0, lmax = 0;
    for (const auto& [bb, n] : totals) expected += n * base.table.inst_count(bb);
    for (const auto& e : base.table.entries()) lmax = std::max(lmax, e.inst_count);
    std::uint64_t sum = 0;
    for (const auto& iv : a.profiles.intervals()) {
      sum += iv.actual_size;
      if (!iv.partial && (iv.actual_size < kInterval || iv.actual_size >= kInterval + lmax)) {
        o.fail(f.name + " interval " + std::to_string(iv.interval_id) + " has size " +
               std::to_string(iv.actual_size));
      }
    }
    if (sum != expected) o.fail(f.name + ": " + std::to_string(sum) + " != " + std::to_string(expected));
    ++fixtures;
    intervals += a.profiles.size();
    threaded = threaded || f.multithreaded;
  }
  if (fixtures < 10 || !threaded) o.fail("fixture set too small");
  if (o.pass) o.detail << fixtures << " fixtures, " << intervals << " intervals";
}

void replay_equivalence(Outcome& o) {
  std::size_t n = 0;
  for (const auto* f : single_threaded()) {
    const auto& a = analysed(*f);
    if (analysis::replay_to_profile_bytes(a.trace, testing::base_build(*f).table, kInterval) != a.bytes) {
      o.fail(f->name + " differs");
    }
    ++n;
  }
  if (o.pass) o.detail << n << " single-threaded fixtures byte-identical";
}

void binary_independence(Outcome& o) {
  std::size_t n = 0;
  for (const auto* f : single_threaded()) {
    const auto o0 = testing::run_analysis(*f, kInterval, "-O0", {}, "_accept");
    const auto o2 = testing::run_analysis(*f, kInterval, "-O2", {}, "_accept");
    if (o0.profile_bytes != o2.profile_bytes) o.fail(f->name + " differs between -O0 and -O2");
    ++n;
  }
  if (o.pass) o.detail << n << " fixtures identical at -O0 and -O2";
}

void marker_exactness(Outcome& o) {
  std::size_t exact = 0, relaxed = 0;
  for (const auto* f : single_threaded()) {
    const auto& table = testing::base_build(*f).table;
    const auto& a = analysed(*f);
    for (std::size_t i = 0; i < a.profiles.size(); ++i) {
      const auto boundary = a.profiles.end_position(i);
      const auto m = marker::derive_end_marker(a.profiles, i);
      if (testing::replay_to(a.trace, table, m.bb_id, m.required_count) != boundary) {
        o.fail(f->name + " interval " + std::to_string(i) + " exact marker off");
      }
      ++exact;
      for (std::uint64_t d : {kInterval / 4, kInterval}) {
        const auto r = marker::derive_relaxed_marker(a.profiles, i, d);
        const auto at = testing::replay_to(a.trace, table, r.bb_id, r.required_count);
        if (at > boundary || at + d < boundary) {
          o.fail(f->name + " interval " + std::to_string(i) + " relaxed marker outside bound");
        }
        ++relaxed;
      }
    }
  }
  if (o.pass) o.detail << exact << " exact and " << relaxed << " relaxed markers";
}

struct Cli {
  std::string out;
  testing::CliResult operator()(std::vector<std::string> args, const std::vector<std::string>& program = {}) const {
    args.push_back("--out-dir");
    args.push_back(out);
    if (!program.empty()) {
      args.push_back("--");
      args.insert(args.end(), program.begin(), program.end());
    }
    auto r = testing::run_cli(args);
    if (r.status != 0 && r.status != 3) throw std::runtime_error(args.front() + " failed: " + r.err);
    return r;
  }
};

void phase_recovery(Outcome& o) {
  const auto& f = testing::fixture("phases");
  const auto& table = testing::base_build(f).table;
  const std::vector<std::string> phase_fns{"phase_a", "phase_b", "phase_c"};
  const std::vector<double> shares{0.5, 0.3, 0.2};
  constexpr std::uint64_t S = 40'000'000;
  constexpr double kIntervals = 100.0;

  // Loop body length of each phase sets its iteration count.
  std::vector<std::string> args;
  auto phase_of_block = [&](std::uint64_t bb) -> int {
    const auto& fn = table.at(bb).function_name;
    for (std::size_t p = 0; p < phase_fns.size(); ++p) {
      if (fn.starts_with(phase_fns[p])) return static_cast<int>(p);
    }
    return -1;
  };
  for (std::size_t p = 0; p < phase_fns.size(); ++p) {
    std::uint64_t body = 0;
    for (const auto& e : table.entries()) {
      if (phase_of_block(e.bb_id) == static_cast<int>(p)) body = std::max(body, e.inst_count);
    }
    args.push_back(std::to_string(std::llround(shares[p] * kIntervals * static_cast<double>(S) /
                                                static_cast<double>(body))));
  }

  const auto dir = testing::scratch("accept_phases");
  const Cli cli{(dir / "out").string()};
  cli({"prepare", (testing::fixture_dir() / "phases.c").string()});
  cli({"analyze", "--interval-size", std::to_string(S)}, args);
  cli({"select", "--method", "kmeans", "--seed", "1"});
  cli({"nugget"});
  const auto v = cli({"validate", "--reps", "21"}, args);

  const auto profiles = profile::read_profile(dir / "out" / "nugget.profile", table);
  const auto sel = selection::read_selection(dir / "out" / "selection.json");
  // Each interval's phase: the phase function that executed most of its
  // instructions.
  std::map<std::uint64_t, int> phase;
  for (const auto& iv : profiles.intervals()) {
    std::vector<std::uint64_t> mass(phase_fns.size(), 0);
    for (const auto& [bb, s] : iv.blocks) {
      if (const int p = phase_of_block(bb); p >= 0) mass[p] += s.count * table.inst_count(bb);
    }
    phase[iv.interval_id] = static_cast<int>(std::max_element(mass.begin(), mass.end()) - mass.begin());
  }

  if (sel.k_used != 3u) o.fail("k_used = " + std::to_string(sel.k_used.value_or(0)));
  std::size_t impure = 0;
  for (const auto& [id, rep] : sel.cluster_by_interval) impure += phase.at(id) != phase.at(rep);
  if (impure > 0) o.fail(std::to_string(impure) + " intervals clustered with another phase");
  std::set<int> rep_phases;
  for (const auto& c : sel.chosen) {
    const int p = phase.at(c.interval_id);
    rep_phases.insert(p);
    if (std::abs(c.weight - shares[static_cast<std::size_t>(p)]) > 0.01) {
      o.fail(phase_fns[static_cast<std::size_t>(p)] + " weight " + std::to_string(c.weight));
    }
  }
  if (rep_phases.size() != sel.chosen.size()) o.fail("two representatives from one phase");

  if (v.status != 0) {
    o.fail("validation incomplete");
    return;
  }
  const auto report = harness::report_from_json(io::read_file(dir / "out" / "report.json"));
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu intervals, k=%u, error %+.2f%% (truth %.1f ms, predicted %.1f ms)",
                profiles.size(), sel.k_used.value_or(0), report.prediction_error * 100.0,
                static_cast<double>(report.ground_truth_ns) / 1e6, report.predicted_total_ns / 1e6);
  if (std::abs(report.prediction_error) >= 0.05) o.fail(std::string("prediction ") + buf);
  if (o.pass) o.detail << buf;
}

void clustering_oracles(Outcome& o) {
  selection::Rng rng(0x5eed);
  double worst_gap = 0.0, worst_sil = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = 3 + rng.below(6);
    const std::size_t dims = 1 + rng.below(4);
    testing::Points pts(n, std::vector<double>(dims));
    for (auto& p : pts) {
      for (auto& x : p) x = rng.unit();
    }
    const auto r = selection::kmeans(pts, 2, static_cast<std::uint64_t>(inst));
    const double best = testing::brute_force_wcss2(pts);
    const double got = testing::wcss_direct(pts, r.assignments);
    worst_gap = std::max(worst_gap, got - best);
    if (got > best + 1e-12) o.fail("instance " + std::to_string(inst) + " above the optimum");

    // random labelling with at least two clusters
    std::vector<std::size_t> labels(n);
    do {
      for (auto& l : labels) l = rng.below(3);
    } while (std::set<std::size_t>(labels.begin(), labels.end()).size() < 2);
    for (const auto& lab : {r.assignments, labels}) {
      const double diff = std::abs(selection::silhouette(pts, lab) - testing::silhouette_direct(pts, lab));
      worst_sil = std::max(worst_sil, diff);
      if (diff > 1e-12) o.fail("instance " + std::to_string(inst) + " silhouette off by " + std::to_string(diff));
    }
  }
  if (o.pass) o.detail << "100 instances, max WCSS excess " << worst_gap << ", max silhouette diff " << worst_sil;
}

void overhead(Outcome& o) {
  const std::map<std::string, std::vector<std::string>> inputs{
      {"loops", {"12000"}},       {"recursion", {"35"}},   {"branchy", {"500000"}},
      {"sort", {"1500000"}},      {"matmul", {"600"}},     {"strings", {"1500000"}},
      {"interp", {"10000000"}},   {"list", {"2000000"}},   {"sieve", {"20000000"}},
      {"multi", {"3000000"}},     {"phases", {"400000", "240000", "160000"}},
  };
  std::ostringstream all;
  for (const auto& [name, args] : inputs) {
    const auto& f = testing::fixture(name);
    const auto& base = testing::base_build(f);
    const auto dir = testing::scratch("accept_overhead_" + name);
    analysis::AnalysisConfig config;
    config.interval_size = 100'000'000;
    ir::write_module(analysis::instrument_for_analysis(base.module, base.table, config), dir / "analysis.ll");
    io::write_file_atomic(dir / "analysis_rt.c", analysis::emit_runtime_support(config, base.table.size()));
    harness::compile_binary(dir / "analysis.ll", {dir / "analysis_rt.c"}, harness::default_toolchain(),
                            dir / "analysis.bin");
    harness::ProcessOptions po;
    po.env[std::string(analysis::kProfilePathEnv)] = (dir / "nugget.profile").string();
    const auto plain = harness::run_and_time(testing::base_binary(f), args, 3);
    const auto inst = harness::run_and_time(dir / "analysis.bin", args, 3, po);
    const double ratio = static_cast<double>(inst.median_ns) / static_cast<double>(plain.median_ns);
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s %.2fx", name.c_str(), ratio);
    all << (all.tellp() > 0 ? ", " : "") << buf;
    if (ratio > 10.0) o.fail(std::string(buf) + " exceeds 10x");
  }
  if (o.pass) o.detail << all.str();
}

void report_arithmetic(Outcome& o) {
  const auto dir = testing::scratch("accept_report");
  const Cli cli{(dir / "out").string()};
  const std::vector<std::string> args{"40", "24", "16"};
  cli({"prepare", (testing::fixture_dir() / "phases.c").string()});
  cli({"analyze", "--interval-size", "4000"}, args);
  cli({"select", "--method", "random", "--samples", "4", "--seed", "5"});
  cli({"nugget"});
  if (cli({"validate", "--reps", "3"}, args).status != 0) {
    o.fail("validation incomplete");
    return;
  }
  const auto r = harness::report_from_json(io::read_file(dir / "out" / "report.json"));

  // recomputed here from the stored fields only
  double per = 0.0;
  for (const auto& n : r.nuggets) per += n.weight * static_cast<double>(n.roi_ns);
  double predicted = static_cast<double>(r.full_intervals) * per;
  if (r.partial_size > 0) predicted += static_cast<double>(r.partial_size) / static_cast<double>(r.interval_size) * per;
  const double truth = static_cast<double>(r.ground_truth_ns);
  if (predicted != r.predicted_total_ns) o.fail("predicted total does not recompute");
  if ((predicted - truth) / truth != r.prediction_error) o.fail("prediction error does not recompute");
  if (cli({"report"}).status != 0) o.fail("report subcommand rejects the stored arithmetic");

  // same per-platform error on a second platform: speedup error is 0
  selection::Rng rng(99);
  double worst_def = 0.0;
  for (int i = 0; i < 50; ++i) {
    auto b = r;
    b.ground_truth_ns = r.ground_truth_ns / 2 + rng.below(r.ground_truth_ns);
    b.predicted_total_ns = static_cast<double>(b.ground_truth_ns) * (1.0 + r.prediction_error);
    b.prediction_error = harness::prediction_error(b.predicted_total_ns, static_cast<double>(b.ground_truth_ns));
    if (b.prediction_error == r.prediction_error && harness::speedup_error(r, b) != 0.0) {
      o.fail("ratio identity broken");
    }
    // any second platform: compare with the ratio definition
    b.predicted_total_ns *= 0.8 + 0.4 * rng.unit();
    b.prediction_error = harness::prediction_error(b.predicted_total_ns, static_cast<double>(b.ground_truth_ns));
    const double ps = r.predicted_total_ns / b.predicted_total_ns;
    const double ts = truth / static_cast<double>(b.ground_truth_ns);
    const double def = (ps - ts) / ts;
    worst_def = std::max(worst_def, std::abs(harness::speedup_error(r, b) - def));
  }
  if (worst_def > 1e-12) o.fail("speedup error departs from its definition by " + std::to_string(worst_def));
  if (harness::speedup_error(r, r) != 0.0) o.fail("identical reports give a non-zero speedup error");
  if (o.pass) o.detail << r.nuggets.size() << " nuggets rechecked exactly, ratio identity holds";
}

void determinism(Outcome& o) {
  const std::vector<std::string> fixtures{"interp", "multi", "phases"};
  std::size_t files = 0;
  for (const auto& name : fixtures) {
    const auto& f = testing::fixture(name);
    std::vector<fs::path> outs;
    for (const auto* run : {"a", "b"}) {
      const auto dir = testing::scratch("accept_determinism_" + name + "_" + run);
      const Cli cli{(dir / "out").string()};
      std::vector<std::string> prepare{"prepare"};
      for (const auto& s : f.sources) prepare.push_back((testing::fixture_dir() / s).string());
      cli(prepare);
      cli({"analyze", "--interval-size", std::to_string(kInterval)}, f.args);
      cli({"select", "--method", "kmeans", "--seed", "3"});
      cli({"nugget", "--warmup-intervals", "1"});
      outs.push_back(dir / "out");
    }
    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(outs[0])) {
      const auto n = e.path().filename().string();
      if (n == "base.ll" || n == "bbid.map" || n == "nugget.profile" || n == "selection.json" ||
          n == "nuggets.json" || n == "analysis.ll" || (n.starts_with("nugget_") && n.ends_with(".ll"))) {
        names.insert(n);
      }
    }
    if (names.size() < 7) o.fail(name + ": missing artifacts");
    for (const auto& n : names) {
      if (!fs::exists(outs[1] / n) || io::read_file(outs[0] / n) != io::read_file(outs[1] / n)) {
        o.fail(name + ": " + n + " differs");
      }
      ++files;
    }
  }
  if (o.pass) o.detail << files << " artifacts identical across two runs";
}

}  // namespace

int main(int argc, char** argv) {
  // optional arguments: criterion numbers to run
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoul(argv[i]));
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"conservation", conservation},
      {"replay equivalence", replay_equivalence},
      {"binary independence", binary_independence},
      {"marker exactness", marker_exactness},
      {"phase recovery", phase_recovery},
      {"clustering oracles", clustering_oracles},
      {"analysis overhead", overhead},
      {"report arithmetic", report_arithmetic},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.contains(i + 1)) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.fail(std::string("error: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %zu %s: %s (%s) [%.1f s]\n", i + 1, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL",
                o.detail.str().c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
