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

// Hand-built profiles for tests that do not need a real program.

#include <cstdint>
#include <map>
#include <vector>

#include "nugget/ir.hpp"
#include "nugget/profile.hpp"

namespace nugget::testing {

inline ir::BlockTable make_table(const std::vector<std::uint64_t>& lens) {
  std::vector<ir::BlockEntry> e;
  for (std::size_t i = 0; i < lens.size(); ++i) e.push_back({i, "f", "b" + std::to_string(i), lens[i]});
  return ir::BlockTable(e);
}

/// Each interval is given as block -> entry count. Stamps are laid out in
/// block-id order, so the highest block id entered is the last block.
inline profile::ProfileSet make_profiles(const ir::BlockTable& table,
                                         const std::vector<std::map<std::uint64_t, std::uint64_t>>& counts,
                                         std::uint64_t interval_size, bool last_partial = false) {
  std::vector<profile::IntervalProfile> out;
  std::uint64_t pos = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    profile::IntervalProfile p;
    p.interval_id = i;
    p.partial = last_partial && i + 1 == counts.size();
    for (const auto& [bb, n] : counts[i]) {
      pos += n * table.inst_count(bb);
      p.actual_size += n * table.inst_count(bb);
      p.blocks[bb] = {n, pos};
    }
    out.push_back(std::move(p));
  }
  return profile::ProfileSet(interval_size, std::move(out), table);
}

}  // namespace nugget::testing
