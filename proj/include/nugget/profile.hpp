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

// Interval profiles: the binary file written by the analysis runtime and the
// validated in-memory view used by selection and marker derivation.
//
// File layout (little-endian):
//   header  : "NUGPROF1", interval_size u64, block_count u64
//   record  : interval_id u64, actual_size u64, flags u32 (bit0 = partial),
//             entry_count u32, entry_count x (bb_id u64, bbv u64, cstamp u64)
// Records run to end of file. Entries are sorted by bb_id.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "nugget/ir.hpp"

namespace nugget::profile {

inline constexpr std::string_view kMagic = "NUGPROF1";
inline constexpr std::uint32_t kPartialFlag = 1;

struct BlockSample {
  std::uint64_t count = 0;   // entries into the block during the interval
  std::uint64_t cstamp = 0;  // global counter after the block's last entry

  bool operator==(const BlockSample&) const = default;
};

struct IntervalProfile {
  std::uint64_t interval_id = 0;
  std::uint64_t actual_size = 0;
  bool partial = false;
  /// Sparse IRBB vector and count-stamp vector, keyed by bb_id. Sharing one
  /// map keeps the two key sets identical.
  std::map<std::uint64_t, BlockSample> blocks;

  std::uint64_t bbv(std::uint64_t bb_id) const;

  bool operator==(const IntervalProfile&) const = default;
};

class ProfileSet {
 public:
  ProfileSet() = default;
  /// Validates every interval against `table`; throws CorruptRecord or
  /// BlockTableMismatch.
  ProfileSet(std::uint64_t interval_size, std::vector<IntervalProfile> intervals, ir::BlockTable table);

  std::uint64_t interval_size() const { return interval_size_; }
  const std::vector<IntervalProfile>& intervals() const { return intervals_; }
  const IntervalProfile& interval(std::size_t index) const;
  const ir::BlockTable& block_table() const { return table_; }
  std::size_t size() const { return intervals_.size(); }

  /// Number of non-partial intervals.
  std::size_t full_count() const;
  bool has_partial() const { return !intervals_.empty() && intervals_.back().partial; }

  /// Global counter value at the start / end of interval `index`.
  std::uint64_t start_position(std::size_t index) const;
  std::uint64_t end_position(std::size_t index) const;

  bool operator==(const ProfileSet&) const = default;

 private:
  std::uint64_t interval_size_ = 0;
  std::vector<IntervalProfile> intervals_;
  ir::BlockTable table_;
  std::vector<std::uint64_t> ends_;
};

std::string encode_profile(std::uint64_t interval_size, std::uint64_t block_count,
                           const std::vector<IntervalProfile>& intervals);
std::string encode_profile(const ProfileSet& profiles);
void write_profile(const ProfileSet& profiles, const std::filesystem::path& path);

/// Decodes without semantic checks (only framing).
struct RawProfile {
  std::uint64_t interval_size = 0;
  std::uint64_t block_count = 0;
  std::vector<IntervalProfile> intervals;
};
RawProfile decode_profile(std::string_view bytes);

ProfileSet parse_profile(std::string_view bytes, const ir::BlockTable& table);
ProfileSet read_profile(const std::filesystem::path& path, const ir::BlockTable& table);

/// Executions of `bb_id` from program start through interval `through_interval`.
std::uint64_t cumulative_count(const ProfileSet& profiles, std::uint64_t bb_id, std::size_t through_interval);

std::uint64_t total_instructions(const ProfileSet& profiles);

}  // namespace nugget::profile
