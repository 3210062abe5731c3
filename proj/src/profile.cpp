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

#include "nugget/profile.hpp"

#include <algorithm>
#include <cstring>
#include <set>

#include "nugget/error.hpp"
#include "nugget/io.hpp"

namespace nugget::profile {
namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  bool done() const { return pos_ == bytes_.size(); }

  template <typename T>
  T get(const char* what, std::uint64_t interval) {
    if (bytes_.size() - pos_ < sizeof(T)) {
      throw Error(Errc::CorruptRecord, "interval " + std::to_string(interval) + ": truncated " + what);
    }
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

[[noreturn]] void corrupt(std::uint64_t interval, const std::string& why) {
  throw Error(Errc::CorruptRecord, "interval " + std::to_string(interval) + ": " + why);
}

}  // namespace

std::uint64_t IntervalProfile::bbv(std::uint64_t bb_id) const {
  const auto it = blocks.find(bb_id);
  return it == blocks.end() ? 0 : it->second.count;
}

ProfileSet::ProfileSet(std::uint64_t interval_size, std::vector<IntervalProfile> intervals, ir::BlockTable table)
    : interval_size_(interval_size), intervals_(std::move(intervals)), table_(std::move(table)) {
  if (interval_size_ == 0) throw Error(Errc::CorruptRecord, "interval size is zero");
  ends_.reserve(intervals_.size());
  std::uint64_t start = 0;
  for (std::size_t i = 0; i < intervals_.size(); ++i) {
    const auto& iv = intervals_[i];
    if (iv.interval_id != i) corrupt(i, "expected interval id " + std::to_string(i) + ", found " +
                                            std::to_string(iv.interval_id));
    if (iv.partial && i + 1 != intervals_.size()) corrupt(i, "partial interval is not the last one");
    if (iv.actual_size == 0 || iv.blocks.empty()) corrupt(i, "empty interval");

    std::uint64_t work = 0;
    std::uint64_t last_stamp = 0;
    std::set<std::uint64_t> stamps;
    for (const auto& [bb, s] : iv.blocks) {
      if (bb >= table_.size()) {
        throw Error(Errc::BlockTableMismatch, "interval " + std::to_string(i) + " references bb_id " +
                                                  std::to_string(bb) + " beyond table of " +
                                                  std::to_string(table_.size()));
      }
      if (s.count == 0) corrupt(i, "bb " + std::to_string(bb) + " has zero count");
      if (s.cstamp <= start || s.cstamp > start + iv.actual_size) {
        corrupt(i, "cstamp of bb " + std::to_string(bb) + " outside the interval");
      }
      if (!stamps.insert(s.cstamp).second) corrupt(i, "duplicate cstamp " + std::to_string(s.cstamp));
      last_stamp = std::max(last_stamp, s.cstamp);
      work += s.count * table_.inst_count(bb);
    }
    if (work != iv.actual_size) {
      corrupt(i, "bbv instruction sum " + std::to_string(work) + " != actual_size " +
                     std::to_string(iv.actual_size));
    }
    if (last_stamp != start + iv.actual_size) corrupt(i, "last cstamp does not close the interval");
    start += iv.actual_size;
    ends_.push_back(start);
  }
}

const IntervalProfile& ProfileSet::interval(std::size_t index) const {
  if (index >= intervals_.size()) {
    throw Error(Errc::IndexOutOfRange, "interval " + std::to_string(index) + " of " +
                                           std::to_string(intervals_.size()));
  }
  return intervals_[index];
}

std::size_t ProfileSet::full_count() const {
  return has_partial() ? intervals_.size() - 1 : intervals_.size();
}

std::uint64_t ProfileSet::start_position(std::size_t index) const {
  return end_position(index) - interval(index).actual_size;
}

std::uint64_t ProfileSet::end_position(std::size_t index) const {
  interval(index);
  return ends_[index];
}

std::string encode_profile(std::uint64_t interval_size, std::uint64_t block_count,
                           const std::vector<IntervalProfile>& intervals) {
  std::string out(kMagic);
  put_u64(out, interval_size);
  put_u64(out, block_count);
  for (const auto& iv : intervals) {
    put_u64(out, iv.interval_id);
    put_u64(out, iv.actual_size);
    put_u32(out, iv.partial ? kPartialFlag : 0);
    put_u32(out, static_cast<std::uint32_t>(iv.blocks.size()));
    for (const auto& [bb, s] : iv.blocks) {
      put_u64(out, bb);
      put_u64(out, s.count);
      put_u64(out, s.cstamp);
    }
  }
  return out;
}

std::string encode_profile(const ProfileSet& profiles) {
  return encode_profile(profiles.interval_size(), profiles.block_table().size(), profiles.intervals());
}

void write_profile(const ProfileSet& profiles, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_profile(profiles));
}

RawProfile decode_profile(std::string_view bytes) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
    throw Error(Errc::BadMagic, "profile does not start with NUGPROF1");
  }
  Reader in(bytes.substr(kMagic.size()));
  RawProfile raw;
  raw.interval_size = in.get<std::uint64_t>("header", 0);
  raw.block_count = in.get<std::uint64_t>("header", 0);
  while (!in.done()) {
    const std::uint64_t index = raw.intervals.size();
    IntervalProfile iv;
    iv.interval_id = in.get<std::uint64_t>("record header", index);
    iv.actual_size = in.get<std::uint64_t>("record header", index);
    const auto flags = in.get<std::uint32_t>("record header", index);
    if ((flags & ~kPartialFlag) != 0) corrupt(index, "unknown flag bits");
    iv.partial = (flags & kPartialFlag) != 0;
    const auto entries = in.get<std::uint32_t>("record header", index);
    std::uint64_t prev = 0;
    for (std::uint32_t e = 0; e < entries; ++e) {
      const auto bb = in.get<std::uint64_t>("entry", index);
      BlockSample s;
      s.count = in.get<std::uint64_t>("entry", index);
      s.cstamp = in.get<std::uint64_t>("entry", index);
      if (e > 0 && bb <= prev) corrupt(index, "entries not strictly sorted by bb_id");
      prev = bb;
      iv.blocks.emplace(bb, s);
    }
    raw.intervals.push_back(std::move(iv));
  }
  return raw;
}

ProfileSet parse_profile(std::string_view bytes, const ir::BlockTable& table) {
  auto raw = decode_profile(bytes);
  if (raw.block_count != table.size()) {
    throw Error(Errc::BlockTableMismatch, "profile covers " + std::to_string(raw.block_count) +
                                              " blocks, table has " + std::to_string(table.size()));
  }
  return ProfileSet(raw.interval_size, std::move(raw.intervals), table);
}

ProfileSet read_profile(const std::filesystem::path& path, const ir::BlockTable& table) {
  return parse_profile(io::read_file(path), table);
}

std::uint64_t cumulative_count(const ProfileSet& profiles, std::uint64_t bb_id, std::size_t through_interval) {
  profiles.interval(through_interval);
  std::uint64_t total = 0;
  for (std::size_t i = 0; i <= through_interval; ++i) total += profiles.intervals()[i].bbv(bb_id);
  return total;
}

std::uint64_t total_instructions(const ProfileSet& profiles) {
  std::uint64_t total = 0;
  for (const auto& iv : profiles.intervals()) total += iv.actual_size;
  return total;
}

}  // namespace nugget::profile
