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

#include "nugget/ir.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <unordered_set>

#include "nugget/error.hpp"
#include "nugget/io.hpp"

namespace nugget::ir {
namespace {

constexpr std::string_view kWhitespace = " \t";

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(kWhitespace);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(kWhitespace);
  return s.substr(b, e - b + 1);
}

std::string_view rtrim(std::string_view s) {
  const auto e = s.find_last_not_of(" \t\r");
  if (e == std::string_view::npos) return {};
  return s.substr(0, e + 1);
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(rtrim(text.substr(pos, nl - pos)));
    pos = nl + 1;
  }
  return lines;
}

// Net bracket depth of a line, ignoring anything inside double quotes.
int bracket_delta(std::string_view line) {
  int depth = 0;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '\\') ++i;
      else if (c == '"') quoted = false;
      continue;
    }
    switch (c) {
      case '"': quoted = true; break;
      case '(': case '[': case '{': ++depth; break;
      case ')': case ']': case '}': --depth; break;
      case ';': return depth;  // trailing comment
      default: break;
    }
  }
  return depth;
}

bool is_clause_line(std::string_view trimmed) {
  return trimmed == "cleanup" || trimmed.starts_with("catch ") || trimmed.starts_with("filter ");
}

const std::regex& label_regex() {
  static const std::regex re(R"re(^\s*("(?:[^"\\]|\\.)*"|[-a-zA-Z$._0-9]+):(\s*;.*)?$)re");
  return re;
}

std::optional<std::uint64_t> parse_u64(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

// If `instruction` defines a numbered value (%N = ...), returns N.
std::optional<std::uint64_t> defined_slot(std::string_view instruction) {
  auto s = trim(instruction);
  if (!s.starts_with('%')) return std::nullopt;
  const auto end = s.find_first_of(" \t=");
  if (end == std::string_view::npos) return std::nullopt;
  return parse_u64(s.substr(1, end - 1));
}

std::string function_name_of(std::string_view header) {
  static const std::regex re(R"re(@("(?:[^"\\]|\\.)*"|[-a-zA-Z$._0-9]+)\()re");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(header.begin(), header.end(), m, re)) {
    throw Error(Errc::MalformedIR, "cannot find function name in: " + std::string(header));
  }
  return m[1].str();
}

// First slot number free for the entry block: one past the highest
// numbered parameter.
std::uint64_t first_free_slot(std::string_view header) {
  const auto open = header.find('(');
  if (open == std::string_view::npos) return 0;
  std::uint64_t next = 0;
  static const std::regex re(R"re(%([0-9]+)\b)re");
  const std::string params(header.substr(open));
  for (auto it = std::sregex_iterator(params.begin(), params.end(), re); it != std::sregex_iterator();
       ++it) {
    if (auto n = parse_u64((*it)[1].str())) next = std::max(next, *n + 1);
  }
  return next;
}

std::string indent(std::string line) {
  if (!line.empty() && line.front() != ' ' && line.front() != '\t') line.insert(0, "  ");
  return line;
}

struct FunctionParser {
  const std::vector<std::string_view>& lines;
  std::size_t pos;

  Function parse(std::string_view header) {
    Function fn;
    fn.header = std::string(header);
    fn.name = function_name_of(header);
    fn.is_definition = true;
    if (!trim(header).ends_with('{')) {
      throw Error(Errc::MalformedIR, "definition of @" + fn.name + " does not open a body");
    }

    std::uint64_t next_slot = first_free_slot(header);
    std::unordered_set<std::string> labels;
    bool terminated = true;
    bool closed = false;

    auto require_terminated = [&] {
      if (!fn.blocks.empty() && !terminated) {
        throw Error(Errc::MalformedIR, "block '" + fn.blocks.back().label + "' in @" + fn.name +
                                           " has no terminator");
      }
    };

    while (pos < lines.size()) {
      const std::string_view raw = lines[pos++];
      const std::string_view t = trim(raw);
      if (t == "}") {
        closed = true;
        break;
      }
      if (t.empty() || t.starts_with(';')) continue;
      if (t.starts_with("define ") || t.starts_with("declare ")) {
        throw Error(Errc::MalformedIR, "unbalanced braces: body of @" + fn.name + " is not closed");
      }

      std::match_results<std::string_view::const_iterator> m;
      if (std::regex_match(raw.begin(), raw.end(), m, label_regex())) {
        require_terminated();
        BasicBlock block;
        block.label = m[1].str();
        block.label_line = std::string(raw);
        if (!labels.insert(block.label).second) {
          throw Error(Errc::MalformedIR, "duplicate block label '" + block.label + "' in @" + fn.name);
        }
        if (auto n = parse_u64(block.label)) next_slot = *n + 1;
        fn.blocks.push_back(std::move(block));
        terminated = false;
        continue;
      }

      std::string inst(raw);
      int depth = bracket_delta(raw);
      while (depth > 0 && pos < lines.size()) {
        inst += '\n';
        inst += lines[pos];
        depth += bracket_delta(lines[pos]);
        ++pos;
      }
      while (pos < lines.size() && is_clause_line(trim(lines[pos]))) {
        inst += '\n';
        inst += lines[pos++];
      }

      if (terminated) {
        // Instruction with no preceding label starts an implicitly numbered block.
        BasicBlock block;
        block.label = std::to_string(next_slot++);
        block.implicit_label = true;
        fn.blocks.push_back(std::move(block));
        terminated = false;
      }
      if (auto n = defined_slot(inst)) next_slot = *n + 1;
      auto& block = fn.blocks.back();
      block.instructions.push_back(std::move(inst));
      if (is_terminator(block.instructions.back())) {
        block.terminator_index = block.instructions.size() - 1;
        terminated = true;
      }
    }

    if (!closed) throw Error(Errc::MalformedIR, "unbalanced braces: body of @" + fn.name + " is not closed");
    require_terminated();
    if (fn.blocks.empty()) throw Error(Errc::MalformedIR, "definition of @" + fn.name + " has no blocks");
    return fn;
  }
};

}  // namespace

const Function* Module::find_function(std::string_view name) const {
  for (const auto& f : functions) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

Function* Module::find_function(std::string_view name) {
  return const_cast<Function*>(std::as_const(*this).find_function(name));
}

BlockTable::BlockTable(std::vector<BlockEntry> entries) : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].bb_id != i) {
      throw Error(Errc::InvalidArgument, "block ids must be dense and sorted; entry " + std::to_string(i) +
                                             " has id " + std::to_string(entries_[i].bb_id));
    }
    if (entries_[i].inst_count == 0) {
      throw Error(Errc::InvalidArgument, "block " + std::to_string(i) + " has zero instructions");
    }
  }
}

const BlockEntry& BlockTable::at(std::uint64_t bb_id) const {
  if (bb_id >= entries_.size()) {
    throw Error(Errc::UnknownBlock, "bb_id " + std::to_string(bb_id) + " not in table of " +
                                        std::to_string(entries_.size()) + " blocks");
  }
  return entries_[bb_id];
}

std::uint64_t BlockTable::total_instructions() const {
  std::uint64_t total = 0;
  for (const auto& e : entries_) total += e.inst_count;
  return total;
}

std::string_view opcode_of(std::string_view instruction) {
  auto s = trim(instruction);
  if (s.starts_with('%')) {
    std::size_t i = 1;
    if (i < s.size() && s[i] == '"') {
      for (++i; i < s.size() && s[i] != '"'; ++i) {
        if (s[i] == '\\') ++i;
      }
      ++i;
    } else {
      while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '=') ++i;
    }
    const auto eq = s.find('=', i);
    if (eq == std::string_view::npos) return {};
    s = trim(s.substr(eq + 1));
  }
  auto word = [](std::string_view& rest) {
    const auto e = rest.find_first_of(" \t\n");
    auto w = rest.substr(0, e);
    rest = e == std::string_view::npos ? std::string_view{} : trim(rest.substr(e));
    return w;
  };
  auto op = word(s);
  if (op == "tail" || op == "musttail" || op == "notail") op = word(s);
  return op;
}

bool is_terminator(std::string_view instruction) {
  static constexpr std::array<std::string_view, 11> kTerminators = {
      "ret", "br", "switch", "indirectbr", "invoke", "resume",
      "unreachable", "cleanupret", "catchret", "catchswitch", "callbr"};
  const auto op = opcode_of(instruction);
  return std::find(kTerminators.begin(), kTerminators.end(), op) != kTerminators.end();
}

bool is_debug_intrinsic(std::string_view instruction) {
  return opcode_of(instruction) == "call" && instruction.find("@llvm.dbg.") != std::string_view::npos;
}

std::uint64_t count_instructions(const BasicBlock& block) {
  return static_cast<std::uint64_t>(std::count_if(block.instructions.begin(), block.instructions.end(),
                                                  [](const std::string& i) { return !is_debug_intrinsic(i); }));
}

Module parse_module(std::string_view text, std::string source_path) {
  Module module;
  module.source_path = std::move(source_path);
  const auto lines = split_lines(text);
  FunctionParser parser{lines, 0};
  while (parser.pos < lines.size()) {
    const std::string_view line = lines[parser.pos++];
    const auto t = trim(line);
    if (line.starts_with("define ")) {
      module.functions.push_back(parser.parse(line));
      module.layout.emplace_back(FunctionRef{module.functions.size() - 1});
    } else if (line.starts_with("declare ")) {
      Function fn;
      fn.name = function_name_of(line);
      fn.header = std::string(line);
      module.functions.push_back(std::move(fn));
      module.layout.emplace_back(FunctionRef{module.functions.size() - 1});
    } else if (t == "}") {
      throw Error(Errc::MalformedIR, "unbalanced braces: stray '}' at line " + std::to_string(parser.pos));
    } else {
      module.layout.emplace_back(std::string(line));
    }
  }
  return module;
}

Module read_module(const std::filesystem::path& path) {
  return parse_module(io::read_file(path), path.string());
}

std::string emit_module(const Module& module) {
  std::string out;
  for (const auto& item : module.layout) {
    if (const auto* line = std::get_if<std::string>(&item)) {
      out += *line;
      out += '\n';
      continue;
    }
    const auto& fn = module.functions.at(std::get<FunctionRef>(item).index);
    out += fn.header;
    out += '\n';
    if (!fn.is_definition) continue;
    for (std::size_t b = 0; b < fn.blocks.size(); ++b) {
      const auto& block = fn.blocks[b];
      if (b > 0) out += '\n';
      if (!block.implicit_label) {
        out += block.label_line;
        out += '\n';
      }
      for (const auto& inst : block.instructions) {
        out += inst;
        out += '\n';
      }
    }
    out += "}\n";
  }
  return out;
}

void write_module(const Module& module, const std::filesystem::path& path) {
  io::write_file_atomic(path, emit_module(module));
}

BlockTable build_block_table(const Module& module) {
  std::vector<BlockEntry> entries;
  for (const auto& fn : module.functions) {
    if (!fn.is_definition) continue;
    for (const auto& block : fn.blocks) {
      entries.push_back({entries.size(), fn.name, block.label, count_instructions(block)});
    }
  }
  return BlockTable(std::move(entries));
}

BlockLocation locate_block(const Module& module, std::uint64_t bb_id) {
  std::uint64_t next = 0;
  for (std::size_t f = 0; f < module.functions.size(); ++f) {
    const auto& fn = module.functions[f];
    if (!fn.is_definition) continue;
    if (bb_id < next + fn.blocks.size()) return {f, static_cast<std::size_t>(bb_id - next)};
    next += fn.blocks.size();
  }
  throw Error(Errc::UnknownBlock, "bb_id " + std::to_string(bb_id) + " not in module of " + std::to_string(next) +
                                      " blocks");
}

BasicBlock insert_call_before_terminator(BasicBlock block, std::string call_line) {
  std::size_t pos = block.terminator_index;
  auto is_musttail = [](std::string_view inst) {
    return trim(inst).find("musttail call") != std::string_view::npos;
  };
  if (pos >= 1 && is_musttail(block.instructions[pos - 1])) {
    pos -= 1;
  } else if (pos >= 2 && opcode_of(block.instructions[pos - 1]) == "bitcast" &&
             is_musttail(block.instructions[pos - 2])) {
    pos -= 2;
  }
  block.instructions.insert(block.instructions.begin() + static_cast<std::ptrdiff_t>(pos),
                            indent(std::move(call_line)));
  block.terminator_index += 1;
  return block;
}

BasicBlock insert_at_block_start(BasicBlock block, std::string line) {
  std::size_t pos = 0;
  while (pos < block.instructions.size()) {
    const auto op = opcode_of(block.instructions[pos]);
    if (op == "catchswitch") {
      throw Error(Errc::UnsupportedIR, "cannot insert into catchswitch block '" + block.label + "'");
    }
    if (op != "phi" && op != "landingpad" && op != "catchpad" && op != "cleanuppad") break;
    ++pos;
  }
  block.instructions.insert(block.instructions.begin() + static_cast<std::ptrdiff_t>(pos),
                            indent(std::move(line)));
  block.terminator_index += 1;
  return block;
}

std::string label_asm_line(std::string_view symbol) {
  std::string s(symbol);
  return "call void asm sideeffect \".globl " + s + "\\0A" + s + ":\", \"~{memory}\"() noduplicate";
}

Module attach_block_label_symbol(Module module, std::uint64_t bb_id, std::string_view symbol) {
  const auto loc = locate_block(module, bb_id);
  auto& block = module.functions[loc.function_index].blocks[loc.block_index];
  block = insert_at_block_start(std::move(block), label_asm_line(symbol));
  return module;
}

void add_declarations(Module& module, const std::vector<std::string>& declare_lines) {
  std::size_t insert_at = module.layout.size();
  for (std::size_t i = 0; i < module.layout.size(); ++i) {
    if (std::holds_alternative<FunctionRef>(module.layout[i])) {
      insert_at = i;
      break;
    }
  }
  std::vector<TopLevel> fresh;
  for (const auto& line : declare_lines) {
    const auto name = function_name_of(line);
    if (module.find_function(name) != nullptr) continue;
    Function fn;
    fn.name = name;
    fn.header = line;
    module.functions.push_back(std::move(fn));
    fresh.emplace_back(FunctionRef{module.functions.size() - 1});
  }
  if (fresh.empty()) return;
  fresh.emplace_back(std::string());
  module.layout.insert(module.layout.begin() + static_cast<std::ptrdiff_t>(insert_at), fresh.begin(), fresh.end());
}

void strip_memory_attributes(Module& module) {
  static const std::set<std::string, std::less<>> kDrop = {
      "readnone", "readonly", "writeonly", "argmemonly", "inaccessiblememonly",
      "inaccessiblemem_or_argmemonly", "speculatable", "nosync", "nofree", "willreturn"};
  for (auto& item : module.layout) {
    auto* line = std::get_if<std::string>(&item);
    if (line == nullptr || !line->starts_with("attributes #")) continue;
    const auto open = line->find('{');
    const auto close = line->rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open) continue;

    // Split the group body on whitespace outside quotes and parentheses.
    std::vector<std::string> tokens;
    std::string cur;
    bool quoted = false;
    int parens = 0;
    for (std::size_t i = open + 1; i < close; ++i) {
      const char c = (*line)[i];
      if (c == '"') quoted = !quoted;
      if (!quoted && c == '(') ++parens;
      if (!quoted && c == ')') --parens;
      if (!quoted && parens == 0 && (c == ' ' || c == '\t')) {
        if (!cur.empty()) tokens.push_back(std::move(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));

    std::string body;
    for (const auto& tok : tokens) {
      if (kDrop.contains(tok) || tok.starts_with("memory(")) continue;
      body += ' ';
      body += tok;
    }
    *line = line->substr(0, open + 1) + body + " " + line->substr(close);
  }
}

std::string format_bbid_map(const BlockTable& table) {
  std::string out;
  for (const auto& e : table.entries()) {
    out += std::to_string(e.bb_id);
    out += '\t';
    out += e.function_name;
    out += '\t';
    out += e.block_label;
    out += '\t';
    out += std::to_string(e.inst_count);
    out += '\n';
  }
  return out;
}

void write_bbid_map(const BlockTable& table, const std::filesystem::path& path) {
  io::write_file_atomic(path, format_bbid_map(table));
}

BlockTable parse_bbid_map(std::string_view text) {
  std::vector<BlockEntry> entries;
  std::size_t line_no = 0;
  for (auto line : split_lines(text)) {
    ++line_no;
    if (line.empty()) continue;
    std::array<std::string_view, 4> fields;
    std::size_t start = 0;
    for (std::size_t f = 0; f < 4; ++f) {
      const auto tab = f < 3 ? line.find('\t', start) : std::string_view::npos;
      if (f < 3 && tab == std::string_view::npos) {
        throw Error(Errc::InvalidArgument, "bbid.map line " + std::to_string(line_no) + ": expected 4 fields");
      }
      fields[f] = line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start);
      start = tab + 1;
    }
    const auto id = parse_u64(fields[0]);
    const auto count = parse_u64(fields[3]);
    if (!id || !count) {
      throw Error(Errc::InvalidArgument, "bbid.map line " + std::to_string(line_no) + ": bad number");
    }
    entries.push_back({*id, std::string(fields[1]), std::string(fields[2]), *count});
  }
  return BlockTable(std::move(entries));
}

BlockTable read_bbid_map(const std::filesystem::path& path) {
  return parse_bbid_map(io::read_file(path));
}

}  // namespace nugget::ir
