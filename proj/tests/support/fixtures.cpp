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

#include "fixtures.hpp"

#include <map>
#include <stdexcept>

#include "nugget/analysis.hpp"
#include "nugget/io.hpp"

namespace nugget::testing {

namespace fs = std::filesystem;

const std::vector<FixtureInfo>& all_fixtures() {
  static const std::vector<FixtureInfo> list = {
      {"loops", {"loops.c"}, {"120"}},
      {"recursion", {"recursion.c"}, {"16"}},
      {"branchy", {"branchy.c"}, {"2000"}},
      {"sort", {"sort.c"}, {"3000"}},
      {"matmul", {"matmul.c"}, {"20"}},
      {"strings", {"strings.c"}, {"400"}},
      {"interp", {"interp.c"}, {"3000"}},
      {"list", {"list.c"}, {"800"}},
      {"sieve", {"sieve.c"}, {"20000"}},
      {"multi", {"multi_main.c", "multi_lib.c"}, {"500"}},
      {"phases", {"phases.c"}, {"40", "24", "16"}},
      {"threads", {"threads.c"}, {"3000"}, true},
  };
  return list;
}

const FixtureInfo& fixture(const std::string& name) {
  for (const auto& f : all_fixtures()) {
    if (f.name == name) return f;
  }
  throw std::invalid_argument("no fixture " + name);
}

fs::path fixture_dir() { return NUGGET_FIXTURE_DIR; }

fs::path scratch(const std::string& name) {
  const auto dir = fs::path(NUGGET_SCRATCH_DIR) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const BaseBuild& base_build(const FixtureInfo& f) {
  static std::map<std::string, BaseBuild> cache;
  if (auto it = cache.find(f.name); it != cache.end()) return it->second;
  const auto dir = scratch("base_" + f.name);
  std::vector<fs::path> sources;
  for (const auto& s : f.sources) sources.push_back(fixture_dir() / s);
  BaseBuild b;
  b.base_ll = dir / "base.ll";
  harness::build_base_ir(sources, harness::default_toolchain(), dir / "work", b.base_ll);
  b.module = ir::read_module(b.base_ll);
  b.table = ir::build_block_table(b.module);
  return cache.emplace(f.name, std::move(b)).first->second;
}

AnalysisRun run_analysis(const FixtureInfo& f, std::uint64_t interval_size, const std::string& opt,
                         const std::vector<std::string>& args_override, const std::string& tag) {
  const auto& base = base_build(f);
  std::string opt_tag = opt;
  for (auto& c : opt_tag) {
    if (c == '-') c = '_';
  }
  const auto dir = scratch("analysis_" + f.name + "_" + std::to_string(interval_size) + opt_tag + tag);
  analysis::AnalysisConfig config;
  config.interval_size = interval_size;
  config.thread_safe = f.multithreaded;
  ir::write_module(analysis::instrument_for_analysis(base.module, base.table, config), dir / "analysis.ll");
  io::write_file_atomic(dir / "analysis_rt.c", analysis::emit_runtime_support(config, base.table.size()));

  AnalysisRun run;
  run.binary = dir / "analysis.bin";
  run.profile_path = dir / "nugget.profile";
  run.trace_path = dir / "trace.bin";
  harness::compile_binary(dir / "analysis.ll", {dir / "analysis_rt.c"}, harness::default_toolchain(), run.binary,
                          opt);
  harness::ProcessOptions po;
  po.env[std::string(analysis::kProfilePathEnv)] = run.profile_path.string();
  po.env[std::string(analysis::kTracePathEnv)] = run.trace_path.string();
  harness::run_and_time(run.binary, args_override.empty() ? f.args : args_override, 1, po);
  run.profile_bytes = io::read_file(run.profile_path);
  return run;
}

fs::path base_binary(const FixtureInfo& f) {
  const auto& base = base_build(f);
  const auto out = base.base_ll.parent_path() / "base.bin";
  if (!fs::exists(out)) harness::compile_binary(base.base_ll, {}, harness::default_toolchain(), out);
  return out;
}

CliResult run_cli(const std::vector<std::string>& args) {
  static unsigned serial = 0;
  const auto out = fs::path(NUGGET_SCRATCH_DIR) / ("cli_" + std::to_string(serial++) + ".out");
  fs::create_directories(out.parent_path());
  harness::ProcessOptions po;
  po.stdout_path = out;
  std::vector<std::string> argv{NUGGET_CLI_PATH};
  argv.insert(argv.end(), args.begin(), args.end());
  const auto r = harness::run_process(argv, po);
  CliResult c{r.exit_status, io::read_file(out), r.stderr_text};
  fs::remove(out);
  return c;
}

}  // namespace nugget::testing
