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

// Pipeline orchestration: external toolchain invocation, timed runs,
// extrapolation of sample timings to whole-program predictions, and the
// validation report.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "nugget/nugget_emit.hpp"
#include "nugget/profile.hpp"
#include "nugget/selection.hpp"

namespace nugget::harness {

/// Command templates. Placeholders: {input}, {inputs} (expands to one
/// argument per file), {output}, {opt}.
struct Toolchain {
  std::vector<std::string> source_to_ir;
  std::vector<std::string> ir_link;
  std::vector<std::string> ir_optimize;
  std::vector<std::string> compile_runtime;
  std::vector<std::string> compile;
  std::vector<std::string> symbols;
  std::string backend_opt = "-O2";
};

Toolchain default_toolchain();
Toolchain toolchain_from_json(std::string_view text);
Toolchain load_toolchain(const std::filesystem::path& path);
std::string toolchain_to_json(const Toolchain& tc);

std::vector<std::string> expand_template(const std::vector<std::string>& tmpl, const std::vector<std::string>& inputs,
                                         const std::string& output, const std::string& opt = {});

struct ProcessOptions {
  std::map<std::string, std::string> env;
  /// Child stdout goes here; /dev/null when empty.
  std::filesystem::path stdout_path;
  bool capture_stderr = true;
};

struct ProcessResult {
  int exit_status = -1;  // -1 when killed by a signal
  int signal = 0;
  std::string stderr_text;
  std::uint64_t wall_ns = 0;
};

ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& options = {});

/// Runs a toolchain step; throws ToolchainFailure naming the tool when it
/// cannot be started or exits non-zero.
void run_tool(const std::string& step, const std::vector<std::string>& argv);

/// Source files -> per-source IR -> one linked module -> optimized textual
/// IR at `out_path`.
void build_base_ir(const std::vector<std::filesystem::path>& sources, const Toolchain& tc,
                   const std::filesystem::path& work_dir, const std::filesystem::path& out_path);

/// Compiles IR plus C runtime sources into an executable. `opt` overrides
/// the toolchain's backend optimization flag when non-empty.
void compile_binary(const std::filesystem::path& ir_path, const std::vector<std::filesystem::path>& runtime_sources,
                    const Toolchain& tc, const std::filesystem::path& out_path, const std::string& opt = {});

/// Symbol name -> address, from the toolchain's symbol dump of `binary`.
std::map<std::string, std::uint64_t> symbol_table(const std::filesystem::path& binary, const Toolchain& tc);

struct Timing {
  std::vector<std::uint64_t> samples_ns;
  std::uint64_t median_ns = 0;
};

std::uint64_t median(std::vector<std::uint64_t> values);

/// Sequential timed runs; throws NonZeroExit on failure.
Timing run_and_time(const std::filesystem::path& binary, const std::vector<std::string>& args, unsigned repetitions,
                    const ProcessOptions& options = {});

struct NuggetRun {
  std::vector<emit::RoiRecord> records;  // one per repetition
  std::uint64_t median_roi_ns = 0;
  bool ok = false;
};

/// Runs a nugget binary; success is exit status 0 with an OK ROI record.
NuggetRun run_nugget(const std::filesystem::path& binary, const std::vector<std::string>& args,
                     unsigned repetitions, const std::filesystem::path& roi_path, const ProcessOptions& options = {});

struct Measurements {
  Timing truth;
  std::vector<NuggetRun> nuggets;  // parallel to the nugget binaries
};

/// Round-robin timing: each repetition runs the full binary once, then every
/// nugget once, so slow drift on the host spreads over all of them.
Measurements measure_interleaved(const std::filesystem::path& full_binary,
                                 const std::vector<std::filesystem::path>& nugget_binaries,
                                 const std::vector<std::filesystem::path>& roi_paths,
                                 const std::vector<std::string>& args, unsigned repetitions);

struct NuggetRow {
  std::uint64_t interval_id = 0;
  double weight = 0.0;
  std::uint64_t roi_ns = 0;
  std::string status;

  bool operator==(const NuggetRow&) const = default;
};

/// predicted = N_full * sum(w_i * t_i), plus (partial_size / S) * sum(w_i * t_i)
/// for a trailing partial interval.
double extrapolate_runtime(const selection::SelectionResult& selection,
                           const std::map<std::uint64_t, double>& roi_ns, const profile::ProfileSet& profiles);

/// Same formula on plain numbers; the ProfileSet overload feeds it.
double extrapolate_runtime(const std::vector<NuggetRow>& rows, std::uint64_t full_intervals,
                           std::uint64_t partial_size, std::uint64_t interval_size);

double prediction_error(double predicted, double truth);

struct ValidationReport {
  std::string workload;
  std::uint64_t ground_truth_ns = 0;
  std::vector<std::uint64_t> ground_truth_samples_ns;
  std::vector<NuggetRow> nuggets;
  std::uint64_t interval_size = 0;
  std::uint64_t full_intervals = 0;
  std::uint64_t partial_size = 0;
  double predicted_total_ns = 0.0;
  double prediction_error = 0.0;
  bool complete = false;
  std::string machine;
  std::string selection_method;
  std::uint64_t selection_seed = 0;

  bool operator==(const ValidationReport&) const = default;
};

double speedup_error(const ValidationReport& a, const ValidationReport& b);

std::string machine_descriptor();

std::string report_to_json(const ValidationReport& r);
ValidationReport report_from_json(std::string_view text);
std::string report_to_csv(const ValidationReport& r);

/// Recomputes the prediction from the report's own fields.
double recheck_predicted_total(const ValidationReport& r);
double recheck_prediction_error(const ValidationReport& r);

}  // namespace nugget::harness
