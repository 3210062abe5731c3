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

// Analysis instrumentation: a hook call at the end of every block, the
// runtime that turns hook calls into interval records, and a reference
// implementation of the same state machine for replaying block traces.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nugget/ir.hpp"
#include "nugget/profile.hpp"

namespace nugget::analysis {

inline constexpr std::string_view kHookSymbol = "__nugget_bb_hook";
inline constexpr std::string_view kInitSymbol = "__nugget_init";
inline constexpr std::string_view kFiniSymbol = "__nugget_fini";
inline constexpr std::string_view kProfilePathEnv = "NUGGET_PROFILE_PATH";
inline constexpr std::string_view kTracePathEnv = "NUGGET_TRACE_PATH";
inline constexpr std::string_view kDefaultProfilePath = "./nugget.profile";
inline constexpr std::string_view kTraceMagic = "NUGTRAC1";

struct AnalysisConfig {
  std::uint64_t interval_size = 100'000'000;
  std::string profile_path_env = std::string(kProfilePathEnv);
  bool thread_safe = false;
};

std::string hook_call_line(std::uint64_t bb_id, std::uint64_t inst_count);

/// Adds one hook call per block, runtime declarations, and an init call at
/// the start of `main` when the module defines it.
ir::Module instrument_for_analysis(ir::Module module, const ir::BlockTable& table, const AnalysisConfig& config);

/// The runtime compilation unit (C source) with the configuration baked in.
std::string emit_runtime_support(const AnalysisConfig& config, std::uint64_t block_count);

/// Reference implementation of the hook state machine.
class HookState {
 public:
  explicit HookState(std::uint64_t interval_size);

  /// One hook call. Returns the interval record closed by this call, if any;
  /// a single call closes at most one interval.
  std::optional<profile::IntervalProfile> step(std::uint64_t bb_id, std::uint64_t inst_count);
  /// Closes the trailing partial interval, if any hook ran since the last
  /// boundary.
  std::optional<profile::IntervalProfile> finalize();

  std::uint64_t global_counter() const { return counter_; }
  std::uint64_t interval_id() const { return interval_id_; }
  std::uint64_t boundary() const { return boundary_; }
  std::uint64_t interval_start() const { return interval_start_; }
  const std::map<std::uint64_t, profile::BlockSample>& current() const { return current_; }

 private:
  profile::IntervalProfile close(bool partial);

  std::uint64_t interval_size_;
  std::uint64_t counter_ = 0;
  std::uint64_t interval_id_ = 0;
  std::uint64_t interval_start_ = 0;
  std::uint64_t boundary_;
  std::map<std::uint64_t, profile::BlockSample> current_;
};

/// A recorded sequence of executed block ids.
struct BlockTrace {
  std::uint64_t block_count = 0;
  std::vector<std::uint32_t> blocks;
};

BlockTrace parse_trace(std::string_view bytes);
BlockTrace read_trace(const std::filesystem::path& path);

/// Runs the trace through HookState and returns every emitted record,
/// including the final partial one.
std::vector<profile::IntervalProfile> replay(const BlockTrace& trace, const ir::BlockTable& table,
                                             std::uint64_t interval_size);

/// Encoded profile bytes the runtime would have written for `trace`.
std::string replay_to_profile_bytes(const BlockTrace& trace, const ir::BlockTable& table,
                                    std::uint64_t interval_size);

}  // namespace nugget::analysis
