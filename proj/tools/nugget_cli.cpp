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

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nugget/analysis.hpp"
#include "nugget/error.hpp"
#include "nugget/harness.hpp"
#include "nugget/io.hpp"
#include "nugget/ir.hpp"
#include "nugget/marker.hpp"
#include "nugget/nugget_emit.hpp"
#include "nugget/profile.hpp"
#include "nugget/selection.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;
using namespace nugget;

namespace {

constexpr int kPipelineFailure = 1;

struct Options {
  fs::path out_dir = "nugget-out";
  std::string toolchain_config;
  std::vector<std::string> sources;
  std::string workload;
  std::uint64_t interval_size = 100'000'000;
  bool thread_safe = false;
  bool trace = false;
  std::string method = "kmeans";
  std::uint64_t seed = 0;
  std::size_t samples = 50;
  unsigned max_clusters = 50;
  unsigned warmup_intervals = 0;
  std::uint64_t search_distance = 0;
  std::string action = "timer";
  unsigned reps = 3;
  std::vector<std::string> program_args;
  std::string report_a;
  std::string report_b;
};

harness::Toolchain toolchain(const Options& o) {
  return o.toolchain_config.empty() ? harness::default_toolchain() : harness::load_toolchain(o.toolchain_config);
}

fs::path artifact(const Options& o, const std::string& name) { return o.out_dir / name; }

void require(const fs::path& p, const char* stage) {
  if (!fs::exists(p)) {
    throw Error(Errc::Io, p.string() + " not found; run '" + std::string(stage) + "' first");
  }
}

profile::ProfileSet load_profiles(const Options& o, ir::BlockTable* table_out = nullptr) {
  require(artifact(o, "bbid.map"), "prepare");
  require(artifact(o, "nugget.profile"), "analyze");
  auto table = ir::read_bbid_map(artifact(o, "bbid.map"));
  if (table_out != nullptr) *table_out = table;
  return profile::read_profile(artifact(o, "nugget.profile"), table);
}

std::string workload_name(const Options& o) {
  require(artifact(o, "prepare.json"), "prepare");
  return Json::parse(io::read_file(artifact(o, "prepare.json"))).at("workload").get<std::string>();
}

int cmd_prepare(const Options& o) {
  fs::create_directories(o.out_dir);
  std::vector<fs::path> sources(o.sources.begin(), o.sources.end());
  const auto base = artifact(o, "base.ll");
  harness::build_base_ir(sources, toolchain(o), artifact(o, "work"), base);
  const auto module = ir::read_module(base);
  const auto table = ir::build_block_table(module);
  ir::write_bbid_map(table, artifact(o, "bbid.map"));

  Json j;
  j["workload"] = o.workload.empty() ? sources.front().stem().string() : o.workload;
  j["sources"] = o.sources;
  j["blocks"] = table.size();
  j["static_instructions"] = table.total_instructions();
  io::write_file_atomic(artifact(o, "prepare.json"), j.dump(2) + "\n");
  std::cout << "base IR: " << base.string() << " (" << table.size() << " blocks)\n";
  return 0;
}

int cmd_analyze(const Options& o) {
  require(artifact(o, "base.ll"), "prepare");
  const auto module = ir::read_module(artifact(o, "base.ll"));
  const auto table = ir::read_bbid_map(artifact(o, "bbid.map"));
  analysis::AnalysisConfig config;
  config.interval_size = o.interval_size;
  config.thread_safe = o.thread_safe;

  ir::write_module(analysis::instrument_for_analysis(module, table, config), artifact(o, "analysis.ll"));
  io::write_file_atomic(artifact(o, "analysis_rt.c"), analysis::emit_runtime_support(config, table.size()));
  const auto tc = toolchain(o);
  harness::compile_binary(artifact(o, "analysis.ll"), {artifact(o, "analysis_rt.c")}, tc, artifact(o, "analysis.bin"));

  harness::ProcessOptions run;
  run.env[config.profile_path_env] = fs::absolute(artifact(o, "nugget.profile")).string();
  if (o.trace) run.env[std::string(analysis::kTracePathEnv)] = fs::absolute(artifact(o, "trace.bin")).string();
  harness::run_and_time(artifact(o, "analysis.bin"), o.program_args, 1, run);

  const auto profiles = profile::read_profile(artifact(o, "nugget.profile"), table);
  Json j;
  j["interval_size"] = profiles.interval_size();
  j["blocks"] = table.size();
  j["intervals"] = profiles.size();
  j["full_intervals"] = profiles.full_count();
  j["partial_size"] = profiles.has_partial() ? profiles.intervals().back().actual_size : 0;
  j["total_instructions"] = profile::total_instructions(profiles);
  j["thread_safe"] = o.thread_safe;
  io::write_file_atomic(artifact(o, "analysis.json"), j.dump(2) + "\n");
  std::cout << profiles.size() << " intervals, " << profile::total_instructions(profiles) << " IR instructions\n";
  return 0;
}

int cmd_select(const Options& o) {
  const auto profiles = load_profiles(o);
  const auto method = selection::parse_method(o.method);
  const auto result = method == selection::Method::Random ? selection::select_random(profiles, o.samples, o.seed)
                                                          : selection::select_kmeans(profiles, o.max_clusters, o.seed);
  selection::write_selection(result, artifact(o, "selection.json"));
  std::cout << result.chosen.size() << " intervals selected";
  if (result.k_used) std::cout << " (k=" << *result.k_used << ")";
  std::cout << "\n";
  return 0;
}

int cmd_nugget(const Options& o) {
  ir::BlockTable table;
  const auto profiles = load_profiles(o, &table);
  require(artifact(o, "selection.json"), "select");
  const auto sel = selection::read_selection(artifact(o, "selection.json"));
  const auto specs = marker::build_nugget_spec(profiles, sel, o.warmup_intervals, o.search_distance);
  marker::write_specs(specs, artifact(o, "nuggets.json"));

  const auto module = ir::read_module(artifact(o, "base.ll"));
  const auto action = emit::parse_action(o.action);
  // atomic marker counters when the analysis ran thread-safe
  bool thread_safe = o.thread_safe;
  if (fs::exists(artifact(o, "analysis.json"))) {
    thread_safe = thread_safe || Json::parse(io::read_file(artifact(o, "analysis.json"))).value("thread_safe", false);
  }
  const auto tc = toolchain(o);
  io::write_file_atomic(artifact(o, "marker_rt.c"), emit::marker_runtime_source());

  Json markers = Json::array();
  for (const auto& spec : specs) {
    const auto build = emit::instrument_nugget(module, table, spec, action, thread_safe);
    const auto stem = "nugget_" + std::to_string(spec.interval_id);
    ir::write_module(build.module_out, artifact(o, stem + ".ll"));
    harness::compile_binary(artifact(o, stem + ".ll"), {artifact(o, "marker_rt.c")}, tc, artifact(o, stem + ".bin"));
    const auto symbols = harness::symbol_table(artifact(o, stem + ".bin"), tc);
    Json entry;
    entry["interval_id"] = spec.interval_id;
    entry["binary"] = stem + ".bin";
    Json syms = Json::object();
    for (const auto& [kind, name] : build.marker_symbols) {
      const auto it = symbols.find(name);
      if (it == symbols.end()) throw Error(Errc::ToolchainFailure, name + " missing from " + stem + ".bin");
      syms[name] = it->second;
    }
    entry["symbols"] = std::move(syms);
    markers.push_back(std::move(entry));
  }
  io::write_file_atomic(artifact(o, "markers.json"), Json{{"action", emit::action_name(action)}, {"nuggets", markers}}.dump(2) + "\n");
  std::cout << specs.size() << " nuggets built\n";
  return 0;
}

int cmd_validate(const Options& o) {
  const auto profiles = load_profiles(o);
  require(artifact(o, "selection.json"), "select");
  require(artifact(o, "nuggets.json"), "nugget");
  const auto sel = selection::read_selection(artifact(o, "selection.json"));
  const auto specs = marker::read_specs(artifact(o, "nuggets.json"));
  const auto tc = toolchain(o);

  harness::compile_binary(artifact(o, "base.ll"), {}, tc, artifact(o, "base.bin"));
  std::vector<fs::path> bins, rois;
  for (const auto& spec : specs) {
    const auto stem = "nugget_" + std::to_string(spec.interval_id);
    require(artifact(o, stem + ".bin"), "nugget");
    bins.push_back(artifact(o, stem + ".bin"));
    rois.push_back(fs::absolute(artifact(o, stem + ".roi")));
  }
  const auto runs = harness::measure_interleaved(artifact(o, "base.bin"), bins, rois, o.program_args, o.reps);

  harness::ValidationReport report;
  report.workload = workload_name(o);
  report.machine = harness::machine_descriptor();
  report.selection_method = std::string(selection::method_name(sel.method));
  report.selection_seed = sel.seed;
  report.interval_size = profiles.interval_size();
  report.full_intervals = profiles.full_count();
  report.partial_size = profiles.has_partial() ? profiles.intervals().back().actual_size : 0;
  report.ground_truth_ns = runs.truth.median_ns;
  report.ground_truth_samples_ns = runs.truth.samples_ns;
  report.complete = true;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& run = runs.nuggets[i];
    report.nuggets.push_back({specs[i].interval_id, specs[i].weight, run.median_roi_ns, run.ok ? "OK" : "MARKER_MISSED"});
    report.complete = report.complete && run.ok;
  }
  if (report.complete) {
    report.predicted_total_ns = harness::recheck_predicted_total(report);
    report.prediction_error = harness::prediction_error(report.predicted_total_ns,
                                                        static_cast<double>(report.ground_truth_ns));
  }
  io::write_file_atomic(artifact(o, "report.json"), harness::report_to_json(report));
  io::write_file_atomic(artifact(o, "report.csv"), harness::report_to_csv(report));
  if (!report.complete) {
    std::cerr << "nugget: at least one end marker was missed; report is incomplete\n";
    return emit::kMarkerMissedStatus;
  }
  std::printf("truth %.3f ms, predicted %.3f ms, error %+.2f%%\n", report.ground_truth_ns / 1e6,
              report.predicted_total_ns / 1e6, report.prediction_error * 100.0);
  return 0;
}

int cmd_speedup(const Options& o) {
  const auto a = harness::report_from_json(io::read_file(o.report_a));
  const auto b = harness::report_from_json(io::read_file(o.report_b));
  const double err = harness::speedup_error(a, b);
  Json j;
  j["workload"] = a.workload;
  j["predicted_speedup"] = a.predicted_total_ns / b.predicted_total_ns;
  j["true_speedup"] = static_cast<double>(a.ground_truth_ns) / static_cast<double>(b.ground_truth_ns);
  j["speedup_error"] = err;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_report(const Options& o) {
  require(artifact(o, "report.json"), "validate");
  const auto r = harness::report_from_json(io::read_file(artifact(o, "report.json")));
  std::printf("workload %s on %s\n", r.workload.c_str(), r.machine.c_str());
  std::printf("%-10s %-10s %-14s %s\n", "interval", "weight", "roi_ns", "status");
  for (const auto& n : r.nuggets) {
    std::printf("%-10llu %-10.6f %-14llu %s\n", static_cast<unsigned long long>(n.interval_id), n.weight,
                static_cast<unsigned long long>(n.roi_ns), n.status.c_str());
  }
  if (!r.complete) {
    std::printf("incomplete report\n");
    return emit::kMarkerMissedStatus;
  }
  const double predicted = harness::recheck_predicted_total(r);
  const double error = harness::recheck_prediction_error(r);
  std::printf("truth %llu ns, predicted %.1f ns, error %+.4f%%\n", static_cast<unsigned long long>(r.ground_truth_ns),
              predicted, error * 100.0);
  if (predicted != r.predicted_total_ns || error != r.prediction_error) {
    std::fprintf(stderr, "nugget: stored prediction does not match its inputs\n");
    return kPipelineFailure;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nugget: interval analysis, sample selection and nugget validation"};
  app.require_subcommand(1);
  Options o;

  auto out_dir = [&](CLI::App* sub) {
    sub->add_option("--out-dir", o.out_dir, "Artifact directory")->capture_default_str();
    sub->add_option("--toolchain-config", o.toolchain_config, "JSON file with command templates");
  };
  auto program_args = [&](CLI::App* sub) {
    sub->add_option("args", o.program_args, "Program arguments (after --)");
  };

  auto* prepare = app.add_subcommand("prepare", "Build the base IR and block table");
  out_dir(prepare);
  prepare->add_option("sources", o.sources, "Source files")->required();
  prepare->add_option("--workload", o.workload, "Workload name (default: first source's stem)");

  auto* analyze = app.add_subcommand("analyze", "Run the analysis build and record interval profiles");
  out_dir(analyze);
  analyze->add_option("--interval-size", o.interval_size, "IR instructions per interval")
      ->check(CLI::Range(std::uint64_t{1}, std::numeric_limits<std::uint64_t>::max()))
      ->capture_default_str();
  analyze->add_flag("--thread-safe", o.thread_safe, "Serialize hook calls across threads");
  analyze->add_flag("--trace", o.trace, "Also record the block trace");
  program_args(analyze);

  auto* select = app.add_subcommand("select", "Choose representative intervals");
  out_dir(select);
  select->add_option("--method", o.method)->check(CLI::IsMember({"random", "kmeans"}))->capture_default_str();
  select->add_option("--seed", o.seed)->capture_default_str();
  select->add_option("--samples", o.samples, "Sample count for random selection")->capture_default_str();
  select->add_option("--max-clusters", o.max_clusters, "Upper bound on k")->capture_default_str();

  auto* nug = app.add_subcommand("nugget", "Derive markers and build nugget binaries");
  out_dir(nug);
  nug->add_option("--warmup-intervals", o.warmup_intervals)->capture_default_str();
  nug->add_flag("--thread-safe", o.thread_safe, "Atomic marker counters (default: as in the analysis run)");
  nug->add_option("--search-distance", o.search_distance, "Relaxed end-marker search distance")
      ->capture_default_str();
  nug->add_option("--action", o.action, "ROI action")->check(CLI::IsMember({"timer", "announce"}))
      ->capture_default_str();

  auto* validate = app.add_subcommand("validate", "Time the full run and every nugget, write the report");
  out_dir(validate);
  validate->add_option("--reps", o.reps, "Repetitions per timing")
      ->check(CLI::Range(1u, 1000u))
      ->capture_default_str();
  program_args(validate);

  auto* speedup = app.add_subcommand("speedup", "Speedup prediction error of two reports");
  speedup->add_option("report_a", o.report_a)->required()->check(CLI::ExistingFile);
  speedup->add_option("report_b", o.report_b)->required()->check(CLI::ExistingFile);

  auto* report = app.add_subcommand("report", "Print and re-check a validation report");
  out_dir(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*prepare) return cmd_prepare(o);
    if (*analyze) return cmd_analyze(o);
    if (*select) return cmd_select(o);
    if (*nug) return cmd_nugget(o);
    if (*validate) return cmd_validate(o);
    if (*speedup) return cmd_speedup(o);
    if (*report) return cmd_report(o);
  } catch (const Error& e) {
    std::cerr << "nugget: " << e.what() << "\n";
    return kPipelineFailure;
  } catch (const std::exception& e) {
    std::cerr << "nugget: " << e.what() << "\n";
    return kPipelineFailure;
  }
  return kPipelineFailure;
}
