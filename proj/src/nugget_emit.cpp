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

#include "nugget/nugget_emit.hpp"

#include <array>
#include <charconv>

#include "nugget/error.hpp"
#include "runtime_assets.hpp"

namespace nugget::emit {
namespace {

constexpr std::uint64_t kFlagHasStart = 1;
constexpr std::uint64_t kFlagThreadSafe = 2;

struct Site {
  std::uint64_t mask = 0;
  std::array<std::uint64_t, 3> thresholds{};  // warmup, start, end
};

std::size_t kind_slot(marker::Kind k) {
  switch (k) {
    case marker::Kind::Warmup: return 0;
    case marker::Kind::Start: return 1;
    case marker::Kind::End: return 2;
  }
  return 2;
}

}  // namespace

std::string_view action_name(RoiAction a) { return a == RoiAction::Timer ? "timer" : "announce"; }

RoiAction parse_action(std::string_view name) {
  if (name == "timer") return RoiAction::Timer;
  if (name == "announce") return RoiAction::Announce;
  throw Error(Errc::InvalidArgument, "unknown ROI action '" + std::string(name) + "'");
}

std::uint64_t kind_bit(marker::Kind k) { return std::uint64_t{1} << kind_slot(k); }

std::string marker_symbol(marker::Kind kind, std::uint64_t interval_id) {
  return "__nugget_mark_" + std::string(marker::kind_name(kind)) + "_" + std::to_string(interval_id);
}

NuggetBuild instrument_nugget(const ir::Module& module, const ir::BlockTable& table, const marker::NuggetSpec& spec,
                              RoiAction action, bool thread_safe) {
  NuggetBuild build;
  build.spec = spec;
  build.roi_action = action;
  build.module_out = module;
  auto& out = build.module_out;

  std::vector<marker::Marker> markers;
  if (spec.warmup) markers.push_back(*spec.warmup);
  if (spec.start) markers.push_back(*spec.start);
  markers.push_back(spec.end);

  std::map<std::uint64_t, Site> sites;
  for (const auto& m : markers) {
    table.at(m.bb_id);
    if (m.required_count == 0) {
      throw Error(Errc::InvalidArgument, std::string(marker::kind_name(m.kind)) + " marker has required_count 0");
    }
    auto& site = sites[m.bb_id];
    site.mask |= kind_bit(m.kind);
    site.thresholds[kind_slot(m.kind)] = m.required_count;
  }

  auto* main_fn = out.find_function("main");
  if (main_fn == nullptr || !main_fn->is_definition) {
    throw Error(Errc::MissingEntry, "nugget emission needs a definition of main");
  }

  std::uint64_t site_index = 0;
  for (const auto& [bb_id, site] : sites) {
    const auto loc = ir::locate_block(out, bb_id);
    auto& fn = out.functions[loc.function_index];
    auto& block = fn.blocks[loc.block_index];
    const auto& entry = table.at(bb_id);
    if (entry.function_name != fn.name || entry.block_label != block.label) {
      throw Error(Errc::BlockTableMismatch, "bb " + std::to_string(bb_id) + " is " + fn.name + ":" + block.label +
                                                " in the module but " + entry.function_name + ":" +
                                                entry.block_label + " in the table");
    }
    const std::string call = "call preserve_mostcc void @" + std::string(kMarkerHookSymbol) + "(i64 " + std::to_string(site_index) +
                             ", i64 " + std::to_string(site.mask) + ", i64 " + std::to_string(site.thresholds[0]) +
                             ", i64 " + std::to_string(site.thresholds[1]) + ", i64 " +
                             std::to_string(site.thresholds[2]) + ")";
    block = ir::insert_call_before_terminator(std::move(block), call);
    ++site_index;
  }

  for (const auto& m : markers) {
    auto symbol = marker_symbol(m.kind, spec.interval_id);
    out = ir::attach_block_label_symbol(std::move(out), m.bb_id, symbol);
    build.marker_symbols[m.kind] = std::move(symbol);
  }

  main_fn = out.find_function("main");
  const std::uint64_t flags = (spec.start ? kFlagHasStart : 0) | (thread_safe ? kFlagThreadSafe : 0);
  main_fn->blocks.front() = ir::insert_at_block_start(
      std::move(main_fn->blocks.front()), "call void @" + std::string(kMarkerInitSymbol) + "(i64 " +
                                              std::to_string(spec.interval_id) + ", i64 " +
                                              std::to_string(static_cast<int>(action)) + ", i64 " +
                                              std::to_string(flags) + ")");

  ir::strip_memory_attributes(out);
  ir::add_declarations(out, {
                                "declare preserve_mostcc void @" + std::string(kMarkerHookSymbol) + "(i64, i64, i64, i64, i64) nounwind",
                                "declare void @" + std::string(kMarkerInitSymbol) + "(i64, i64, i64) nounwind",
                            });
  return build;
}

std::string marker_runtime_source() { return std::string(assets::kMarkerRuntime); }

RoiRecord parse_roi_line(std::string_view line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
  const auto t1 = line.find('\t');
  const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
  if (t2 == std::string_view::npos) throw Error(Errc::MissingRoi, "malformed ROI record '" + std::string(line) + "'");
  RoiRecord r;
  auto num = [&](std::string_view s, std::uint64_t& v) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      throw Error(Errc::MissingRoi, "malformed ROI record '" + std::string(line) + "'");
    }
  };
  num(line.substr(0, t1), r.interval_id);
  num(line.substr(t1 + 1, t2 - t1 - 1), r.roi_ns);
  r.status = std::string(line.substr(t2 + 1));
  if (r.status != "OK" && r.status != "MARKER_MISSED") {
    throw Error(Errc::MissingRoi, "unknown ROI status '" + r.status + "'");
  }
  return r;
}

}  // namespace nugget::emit
