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

#include "nugget/analysis.hpp"

#include "nugget/error.hpp"
#include "nugget/io.hpp"
#include "runtime_assets.hpp"

namespace nugget::analysis {

std::string hook_call_line(std::uint64_t bb_id, std::uint64_t inst_count) {
  return "call void @" + std::string(kHookSymbol) + "(i64 " + std::to_string(bb_id) + ", i64 " +
         std::to_string(inst_count) + ")";
}

ir::Module instrument_for_analysis(ir::Module module, const ir::BlockTable& table, const AnalysisConfig& config) {
  if (config.interval_size == 0) throw Error(Errc::InvalidArgument, "interval size must be at least 1");

  std::uint64_t bb_id = 0;
  for (auto& fn : module.functions) {
    if (!fn.is_definition) continue;
    for (auto& block : fn.blocks) {
      const auto& entry = table.at(bb_id);
      if (entry.function_name != fn.name || entry.block_label != block.label) {
        throw Error(Errc::BlockTableMismatch, "table entry " + std::to_string(bb_id) + " (" +
                                                  entry.function_name + ":" + entry.block_label +
                                                  ") does not match module block " + fn.name + ":" + block.label);
      }
      block = ir::insert_call_before_terminator(std::move(block), hook_call_line(bb_id, entry.inst_count));
      ++bb_id;
    }
  }
  if (bb_id != table.size()) {
    throw Error(Errc::BlockTableMismatch, "module has " + std::to_string(bb_id) + " blocks, table has " +
                                              std::to_string(table.size()));
  }

  if (auto* main_fn = module.find_function("main"); main_fn != nullptr && main_fn->is_definition) {
    main_fn->blocks.front() = ir::insert_at_block_start(std::move(main_fn->blocks.front()),
                                                        "call void @" + std::string(kInitSymbol) + "()");
  }
  ir::strip_memory_attributes(module);
  ir::add_declarations(module, {
                                   "declare void @" + std::string(kHookSymbol) + "(i64, i64) nounwind",
                                   "declare void @" + std::string(kInitSymbol) + "() nounwind",
                                   "declare void @" + std::string(kFiniSymbol) + "() nounwind",
                               });
  return module;
}

std::string emit_runtime_support(const AnalysisConfig& config, std::uint64_t block_count) {
  if (config.interval_size == 0) throw Error(Errc::InvalidArgument, "interval size must be at least 1");
  std::string out;
  out += "#define NUGGET_INTERVAL_SIZE " + std::to_string(config.interval_size) + "ull\n";
  out += "#define NUGGET_BLOCK_COUNT " + std::to_string(block_count) + "ull\n";
  out += "#define NUGGET_THREAD_SAFE " + std::string(config.thread_safe ? "1" : "0") + "\n";
  out += "#define NUGGET_PROFILE_ENV \"" + config.profile_path_env + "\"\n";
  out += assets::kAnalysisRuntime;
  return out;
}

HookState::HookState(std::uint64_t interval_size) : interval_size_(interval_size), boundary_(interval_size) {
  if (interval_size == 0) throw Error(Errc::InvalidArgument, "interval size must be at least 1");
}

profile::IntervalProfile HookState::close(bool partial) {
  profile::IntervalProfile record;
  record.interval_id = interval_id_;
  record.actual_size = counter_ - interval_start_;
  record.partial = partial;
  record.blocks = std::move(current_);
  current_.clear();
  interval_id_ += 1;
  interval_start_ = counter_;
  boundary_ = counter_ + interval_size_;
  return record;
}

std::optional<profile::IntervalProfile> HookState::step(std::uint64_t bb_id, std::uint64_t inst_count) {
  counter_ += inst_count;
  auto& sample = current_[bb_id];
  sample.count += 1;
  sample.cstamp = counter_;
  if (counter_ >= boundary_) return close(false);
  return std::nullopt;
}

std::optional<profile::IntervalProfile> HookState::finalize() {
  if (current_.empty()) return std::nullopt;
  return close(true);
}

BlockTrace parse_trace(std::string_view bytes) {
  if (bytes.size() < 16 || bytes.substr(0, kTraceMagic.size()) != kTraceMagic) {
    throw Error(Errc::BadMagic, "trace does not start with NUGTRAC1");
  }
  auto byte = [&](std::size_t i) { return static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])); };
  BlockTrace trace;
  for (std::size_t i = 0; i < 8; ++i) trace.block_count |= byte(8 + i) << (8 * i);
  const auto body = bytes.size() - 16;
  if (body % 4 != 0) throw Error(Errc::CorruptRecord, "trace body is not a whole number of u32 ids");
  trace.blocks.reserve(body / 4);
  for (std::size_t off = 16; off < bytes.size(); off += 4) {
    std::uint32_t id = 0;
    for (std::size_t i = 0; i < 4; ++i) id |= static_cast<std::uint32_t>(byte(off + i)) << (8 * i);
    trace.blocks.push_back(id);
  }
  return trace;
}

BlockTrace read_trace(const std::filesystem::path& path) { return parse_trace(io::read_file(path)); }

std::vector<profile::IntervalProfile> replay(const BlockTrace& trace, const ir::BlockTable& table,
                                             std::uint64_t interval_size) {
  if (trace.block_count != table.size()) {
    throw Error(Errc::BlockTableMismatch, "trace covers " + std::to_string(trace.block_count) +
                                              " blocks, table has " + std::to_string(table.size()));
  }
  HookState state(interval_size);
  std::vector<profile::IntervalProfile> out;
  for (const auto bb : trace.blocks) {
    if (auto record = state.step(bb, table.inst_count(bb))) out.push_back(std::move(*record));
  }
  if (auto record = state.finalize()) out.push_back(std::move(*record));
  return out;
}

std::string replay_to_profile_bytes(const BlockTrace& trace, const ir::BlockTable& table,
                                    std::uint64_t interval_size) {
  return profile::encode_profile(interval_size, table.size(), replay(trace, table, interval_size));
}

}  // namespace nugget::analysis
