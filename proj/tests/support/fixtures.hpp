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

#pragma once

// Builds the C fixtures under tests/fixtures through the real toolchain and
// runs their analysis builds. Results are cached per process.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nugget/harness.hpp"
#include "nugget/ir.hpp"
#include "nugget/profile.hpp"

namespace nugget::testing {

struct FixtureInfo {
  std::string name;
  std::vector<std::string> sources;  // relative to the fixture directory
  std::vector<std::string> args;
  bool multithreaded = false;
};

/// Every program fixture with a small default input.
const std::vector<FixtureInfo>& all_fixtures();
const FixtureInfo& fixture(const std::string& name);

std::filesystem::path fixture_dir();
/// A fresh per-name directory under the build tree's scratch area.
std::filesystem::path scratch(const std::string& name);

struct BaseBuild {
  std::filesystem::path base_ll;
  ir::Module module;
  ir::BlockTable table;
};

/// Base IR for a fixture, built once per process.
const BaseBuild& base_build(const FixtureInfo& f);

struct AnalysisRun {
  std::filesystem::path binary;
  std::filesystem::path profile_path;
  std::filesystem::path trace_path;
  std::string profile_bytes;
};

/// Compiles the analysis build of `f` with the given backend flag and runs
/// it once with tracing on.
AnalysisRun run_analysis(const FixtureInfo& f, std::uint64_t interval_size, const std::string& opt = "-O2",
                         const std::vector<std::string>& args_override = {}, const std::string& tag = {});

/// Base-IR binary without hooks.
std::filesystem::path base_binary(const FixtureInfo& f);

struct CliResult {
  int status = -1;
  std::string out;
  std::string err;
};

/// Runs the nugget command-line tool.
CliResult run_cli(const std::vector<std::string>& args);

}  // namespace nugget::testing
