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

// Nugget emission: the base module plus marker hooks in the marker blocks
// only, an init call in main, and assembly-visible labels for
// program-counter tracking in simulators.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "nugget/ir.hpp"
#include "nugget/marker.hpp"

namespace nugget::emit {

inline constexpr std::string_view kMarkerHookSymbol = "__nugget_marker_hook";
inline constexpr std::string_view kMarkerInitSymbol = "__nugget_marker_init";
inline constexpr std::string_view kRoiOutEnv = "NUGGET_ROI_OUT";
inline constexpr std::string_view kDefaultRoiOut = "./nugget.roi";
inline constexpr std::string_view kEventOutEnv = "NUGGET_EVENT_OUT";
/// Process exit status of a nugget whose end marker never fired.
inline constexpr int kMarkerMissedStatus = 3;

enum class RoiAction { Timer = 0, Announce = 1 };

std::string_view action_name(RoiAction a);
RoiAction parse_action(std::string_view name);

/// Bit values of the kind mask passed to the marker hook.
std::uint64_t kind_bit(marker::Kind k);

/// `__nugget_mark_<kind>_<interval_id>`
std::string marker_symbol(marker::Kind kind, std::uint64_t interval_id);

struct NuggetBuild {
  marker::NuggetSpec spec;
  RoiAction roi_action = RoiAction::Timer;
  ir::Module module_out;
  std::map<marker::Kind, std::string> marker_symbols;
};

/// `thread_safe` makes the marker counters atomic read-modify-writes; leave
/// it off for single-threaded programs, where the locked add is pure cost.
NuggetBuild instrument_nugget(const ir::Module& module, const ir::BlockTable& table, const marker::NuggetSpec& spec,
                              RoiAction action, bool thread_safe = false);

/// The marker runtime compilation unit (C source).
std::string marker_runtime_source();

struct RoiRecord {
  std::uint64_t interval_id = 0;
  std::uint64_t roi_ns = 0;
  std::string status;  // "OK" or "MARKER_MISSED"

  bool ok() const { return status == "OK"; }
  bool operator==(const RoiRecord&) const = default;
};

RoiRecord parse_roi_line(std::string_view line);

}  // namespace nugget::emit
