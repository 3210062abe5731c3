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

// Markers locate a point in execution as (block, number of times the block
// must have executed since program start). Interval end markers come from
// the count-stamp vector (last block entered) and the cumulative IRBB
// vectors (how often it ran by then).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nugget/profile.hpp"
#include "nugget/selection.hpp"

namespace nugget::marker {

enum class Kind { Warmup, Start, End };

std::string_view kind_name(Kind k);
Kind parse_kind(std::string_view name);

struct Marker {
  std::uint64_t bb_id = 0;
  std::uint64_t required_count = 0;
  Kind kind = Kind::End;
  bool relaxed = false;
  /// IR instructions between the marker's firing point and the true
  /// interval end; zero for exact markers.
  std::uint64_t slack = 0;

  bool operator==(const Marker&) const = default;
};

/// Alternative relaxed-marker ranking by executions since program start,
/// kept for comparison with the interval-local ranking that is used.
struct RelaxedDiagnostics {
  std::uint64_t cumulative_rank_bb_id = 0;
  std::uint64_t cumulative_rank_required_count = 0;
  std::uint64_t cumulative_rank_slack = 0;

  bool operator==(const RelaxedDiagnostics&) const = default;
};

struct NuggetSpec {
  std::uint64_t interval_id = 0;
  std::optional<Marker> warmup;
  std::optional<Marker> start;  // absent for interval 0: the ROI starts at program entry
  Marker end;
  double weight = 0.0;
  std::optional<RelaxedDiagnostics> diagnostics;

  bool operator==(const NuggetSpec&) const = default;
};

Marker derive_end_marker(const profile::ProfileSet& profiles, std::size_t interval);

/// Trades up to `search_distance` IR instructions of precision for a
/// less frequently executed marker block. Distance 0 gives the exact marker.
Marker derive_relaxed_marker(const profile::ProfileSet& profiles, std::size_t interval,
                             std::uint64_t search_distance, RelaxedDiagnostics* diagnostics = nullptr);

/// Counter position at which `m` fires, given the profile it came from.
std::uint64_t marker_position(const profile::ProfileSet& profiles, const Marker& m);

std::vector<NuggetSpec> build_nugget_spec(const profile::ProfileSet& profiles,
                                          const selection::SelectionResult& selection, unsigned warmup_intervals,
                                          std::uint64_t search_distance);

std::string to_json(const std::vector<NuggetSpec>& specs);
std::vector<NuggetSpec> specs_from_json(std::string_view text);
void write_specs(const std::vector<NuggetSpec>& specs, const std::filesystem::path& path);
std::vector<NuggetSpec> read_specs(const std::filesystem::path& path);

}  // namespace nugget::marker
