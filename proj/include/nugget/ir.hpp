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

// A pragmatic model of LLVM textual IR: enough structure to enumerate
// basic blocks, count instructions, and splice new instruction lines in.
// Instructions are kept as opaque text and re-emitted byte-for-byte.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace nugget::ir {

struct BasicBlock {
  /// Label as written (without the trailing ':'), or the slot number LLVM
  /// would assign when the block is unlabeled.
  std::string label;
  bool implicit_label = false;
  /// Raw label line including any trailing "; preds" comment. Empty when
  /// implicit_label is set.
  std::string label_line;
  /// One entry per instruction. Multi-line instructions (switch tables,
  /// landingpad clauses) keep their embedded newlines.
  std::vector<std::string> instructions;
  std::size_t terminator_index = 0;

  const std::string& terminator() const { return instructions.at(terminator_index); }
};

struct Function {
  std::string name;
  bool is_definition = false;
  /// The `define ... {` or `declare ...` line.
  std::string header;
  std::vector<BasicBlock> blocks;
};

/// A top-level entry is either an opaque line (globals, metadata, attribute
/// groups, comments) or a reference into Module::functions.
struct FunctionRef {
  std::size_t index;
};
using TopLevel = std::variant<std::string, FunctionRef>;

struct Module {
  std::string source_path;
  std::vector<Function> functions;
  std::vector<TopLevel> layout;

  const Function* find_function(std::string_view name) const;
  Function* find_function(std::string_view name);
};

struct BlockEntry {
  std::uint64_t bb_id = 0;
  std::string function_name;
  std::string block_label;
  std::uint64_t inst_count = 0;

  bool operator==(const BlockEntry&) const = default;
};

struct BlockLocation {
  std::size_t function_index;
  std::size_t block_index;
};

class BlockTable {
 public:
  BlockTable() = default;
  explicit BlockTable(std::vector<BlockEntry> entries);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const BlockEntry& at(std::uint64_t bb_id) const;
  const std::vector<BlockEntry>& entries() const { return entries_; }
  std::uint64_t inst_count(std::uint64_t bb_id) const { return at(bb_id).inst_count; }
  std::uint64_t total_instructions() const;

  bool operator==(const BlockTable&) const = default;

 private:
  std::vector<BlockEntry> entries_;
};

// Instruction classification on the opaque text.
std::string_view opcode_of(std::string_view instruction);
bool is_terminator(std::string_view instruction);
bool is_debug_intrinsic(std::string_view instruction);
std::uint64_t count_instructions(const BasicBlock& block);

Module parse_module(std::string_view text, std::string source_path = {});
Module read_module(const std::filesystem::path& path);
std::string emit_module(const Module& module);
void write_module(const Module& module, const std::filesystem::path& path);

/// Dense ids in module order: definitions in function order, blocks in
/// block order.
BlockTable build_block_table(const Module& module);
BlockLocation locate_block(const Module& module, std::uint64_t bb_id);

/// Inserts `call_line` as the new penultimate instruction. A `musttail`
/// call must stay adjacent to its return, so in that case the line goes in
/// front of the musttail call instead.
BasicBlock insert_call_before_terminator(BasicBlock block, std::string call_line);
/// Inserts `line` after any phi / landingpad / EH-pad instructions.
BasicBlock insert_at_block_start(BasicBlock block, std::string line);

/// Gives block `bb_id` an assembly-visible global label named `symbol`.
Module attach_block_label_symbol(Module module, std::uint64_t bb_id, std::string_view symbol);
std::string label_asm_line(std::string_view symbol);

/// Adds `declare` lines that are not already present, in front of the
/// first function.
void add_declarations(Module& module, const std::vector<std::string>& declare_lines);

/// Drops memory-effect and speculation attributes from attribute groups.
/// Instrumented functions call into the runtime, so attributes such as
/// readnone would no longer hold.
void strip_memory_attributes(Module& module);

void write_bbid_map(const BlockTable& table, const std::filesystem::path& path);
std::string format_bbid_map(const BlockTable& table);
BlockTable parse_bbid_map(std::string_view text);
BlockTable read_bbid_map(const std::filesystem::path& path);

}  // namespace nugget::ir
