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

#include "nugget/harness.hpp"

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <spawn.h>
#include <sys/utsname.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "nugget/error.hpp"
#include "nugget/io.hpp"

extern char** environ;

namespace nugget::harness {
namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::uint64_t now_ns() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
          .count());
}

std::string join(const std::vector<std::string>& argv) {
  std::string s;
  for (const auto& a : argv) {
    if (!s.empty()) s += ' ';
    s += a;
  }
  return s;
}

class TempFile {
 public:
  TempFile() {
    std::string tmpl = (fs::temp_directory_path() / "nugget-XXXXXX").string();
    const int fd = ::mkstemp(tmpl.data());
    if (fd < 0) throw Error(Errc::Io, "cannot create temporary file");
    ::close(fd);
    path_ = tmpl;
  }
  ~TempFile() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  TempFile(const TempFile&) = delete;
  TempFile& operator=(const TempFile&) = delete;

  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::vector<std::string> json_strings(const Json& j, const char* key) {
  std::vector<std::string> out;
  for (const auto& v : j.at(key)) out.push_back(v.get<std::string>());
  return out;
}

}  // namespace

Toolchain default_toolchain() {
  Toolchain tc;
  tc.source_to_ir = {"clang", "-O2", "-Xclang", "-disable-llvm-passes", "-c", "-emit-llvm", "{input}", "-o",
                     "{output}"};
  tc.ir_link = {"ld.lld", "-r", "--plugin-opt=emit-llvm", "{inputs}", "-o", "{output}"};
  tc.ir_optimize = {"clang", "-O2", "-S", "-emit-llvm", "-Wno-override-module", "{input}", "-o", "{output}"};
  tc.compile_runtime = {"clang", "-O2", "-c", "{input}", "-o", "{output}"};
  tc.compile = {"clang",        "{opt}",    "-Xclang", "-disable-llvm-passes", "-Wno-override-module",
                "{inputs}",     "-o",       "{output}", "-lm",                  "-lpthread",
                "-lstdc++"};
  tc.symbols = {"nm", "{input}"};
  tc.backend_opt = "-O2";
  return tc;
}

Toolchain toolchain_from_json(std::string_view text) {
  try {
    const auto j = Json::parse(text);
    auto tc = default_toolchain();
    if (j.contains("source_to_ir")) tc.source_to_ir = json_strings(j, "source_to_ir");
    if (j.contains("ir_link")) tc.ir_link = json_strings(j, "ir_link");
    if (j.contains("ir_optimize")) tc.ir_optimize = json_strings(j, "ir_optimize");
    if (j.contains("compile_runtime")) tc.compile_runtime = json_strings(j, "compile_runtime");
    if (j.contains("compile")) tc.compile = json_strings(j, "compile");
    if (j.contains("symbols")) tc.symbols = json_strings(j, "symbols");
    if (j.contains("backend_opt")) tc.backend_opt = j.at("backend_opt").get<std::string>();
    return tc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("toolchain config: ") + e.what());
  }
}

Toolchain load_toolchain(const fs::path& path) { return toolchain_from_json(io::read_file(path)); }

std::string toolchain_to_json(const Toolchain& tc) {
  Json j;
  j["source_to_ir"] = tc.source_to_ir;
  j["ir_link"] = tc.ir_link;
  j["ir_optimize"] = tc.ir_optimize;
  j["compile_runtime"] = tc.compile_runtime;
  j["compile"] = tc.compile;
  j["symbols"] = tc.symbols;
  j["backend_opt"] = tc.backend_opt;
  return j.dump(2) + "\n";
}

std::vector<std::string> expand_template(const std::vector<std::string>& tmpl, const std::vector<std::string>& inputs,
                                         const std::string& output, const std::string& opt) {
  std::vector<std::string> argv;
  for (const auto& arg : tmpl) {
    if (arg == "{inputs}") {
      argv.insert(argv.end(), inputs.begin(), inputs.end());
      continue;
    }
    if (arg == "{opt}" && opt.empty()) continue;
    std::string s = arg;
    auto replace = [&](std::string_view key, const std::string& value) {
      for (auto pos = s.find(key); pos != std::string::npos; pos = s.find(key, pos + value.size())) {
        s.replace(pos, key.size(), value);
      }
    };
    replace("{input}", inputs.empty() ? std::string() : inputs.front());
    replace("{output}", output);
    replace("{opt}", opt);
    argv.push_back(std::move(s));
  }
  if (argv.empty()) throw Error(Errc::InvalidArgument, "empty command template");
  return argv;
}

ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& options) {
  if (argv.empty()) throw Error(Errc::InvalidArgument, "empty command line");

  std::vector<std::string> env_storage;
  for (char** e = environ; *e != nullptr; ++e) {
    const std::string_view kv(*e);
    const auto eq = kv.find('=');
    if (eq != std::string_view::npos && options.env.contains(std::string(kv.substr(0, eq)))) continue;
    env_storage.emplace_back(kv);
  }
  for (const auto& [k, v] : options.env) env_storage.push_back(k + "=" + v);
  std::vector<char*> envp;
  for (auto& s : env_storage) envp.push_back(s.data());
  envp.push_back(nullptr);

  std::vector<std::string> arg_storage(argv);
  std::vector<char*> args;
  for (auto& s : arg_storage) args.push_back(s.data());
  args.push_back(nullptr);

  std::optional<TempFile> err_file;
  if (options.capture_stderr) err_file.emplace();
  const std::string out_path = options.stdout_path.empty() ? "/dev/null" : options.stdout_path.string();

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, out_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (err_file) {
    posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, err_file->path().c_str(), O_WRONLY | O_TRUNC, 0644);
  }

  ProcessResult result;
  pid_t pid = 0;
  const auto t0 = now_ns();
  const int rc = ::posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), envp.data());
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) {
    throw Error(Errc::ToolchainFailure, "cannot start '" + argv[0] + "': " + std::strerror(rc));
  }
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) throw Error(Errc::Io, "waitpid failed for " + argv[0]);
  }
  result.wall_ns = now_ns() - t0;
  if (WIFEXITED(status)) {
    result.exit_status = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    result.signal = WTERMSIG(status);
  }
  if (err_file) result.stderr_text = io::read_file(err_file->path());
  return result;
}

void run_tool(const std::string& step, const std::vector<std::string>& argv) {
  ProcessResult r;
  try {
    r = run_process(argv);
  } catch (const Error& e) {
    throw Error(Errc::ToolchainFailure, step + ": tool '" + argv.front() + "' could not be run (" + e.what() + ")");
  }
  if (r.exit_status != 0) {
    throw Error(Errc::ToolchainFailure, step + ": tool '" + argv.front() + "' failed with " +
                                            (r.signal != 0 ? "signal " + std::to_string(r.signal)
                                                           : "status " + std::to_string(r.exit_status)) +
                                            "\n  command: " + join(argv) + "\n" + r.stderr_text);
  }
}

void build_base_ir(const std::vector<fs::path>& sources, const Toolchain& tc, const fs::path& work_dir,
                   const fs::path& out_path) {
  if (sources.empty()) throw Error(Errc::InvalidArgument, "no source files given");
  fs::create_directories(work_dir);
  std::vector<std::string> irs;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (!fs::exists(sources[i])) throw Error(Errc::Io, "missing source " + sources[i].string());
    const auto ir = work_dir / (std::to_string(i) + "_" + sources[i].stem().string() + ".bc");
    run_tool("source-to-IR", expand_template(tc.source_to_ir, {sources[i].string()}, ir.string()));
    irs.push_back(ir.string());
  }
  const auto linked = work_dir / "linked.bc";
  run_tool("IR link", expand_template(tc.ir_link, irs, linked.string()));
  const auto tmp = fs::path(out_path.string() + ".partial");
  run_tool("IR optimize", expand_template(tc.ir_optimize, {linked.string()}, tmp.string()));
  // The ModuleID comment records the work directory; drop it so the base IR
  // depends only on the sources.
  auto text = io::read_file(tmp);
  if (text.starts_with("; ModuleID = ")) text.erase(0, text.find('\n') + 1);
  io::write_file_atomic(out_path, text);
  fs::remove(tmp);
}

void compile_binary(const fs::path& ir_path, const std::vector<fs::path>& runtime_sources, const Toolchain& tc,
                    const fs::path& out_path, const std::string& opt) {
  std::vector<std::string> inputs{ir_path.string()};
  for (const auto& src : runtime_sources) {
    auto obj = out_path;
    obj += "." + src.stem().string() + ".o";
    run_tool("runtime compile", expand_template(tc.compile_runtime, {src.string()}, obj.string()));
    inputs.push_back(obj.string());
  }
  run_tool("compile", expand_template(tc.compile, inputs, out_path.string(), opt.empty() ? tc.backend_opt : opt));
}

std::map<std::string, std::uint64_t> symbol_table(const fs::path& binary, const Toolchain& tc) {
  TempFile out;
  const auto argv = expand_template(tc.symbols, {binary.string()}, {});
  ProcessOptions opts;
  opts.stdout_path = out.path();
  const auto r = run_process(argv, opts);
  if (r.exit_status != 0) {
    throw Error(Errc::ToolchainFailure, "symbols: tool '" + argv.front() + "' failed\n" + r.stderr_text);
  }
  std::map<std::string, std::uint64_t> symbols;
  std::istringstream in(io::read_file(out.path()));
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string addr, type, name;
    if (!(fields >> addr >> type >> name)) continue;
    try {
      symbols[name] = std::stoull(addr, nullptr, 16);
    } catch (const std::exception&) {
      // undefined symbols carry no address
    }
  }
  return symbols;
}

std::uint64_t median(std::vector<std::uint64_t> values) {
  if (values.empty()) throw Error(Errc::InvalidArgument, "median of no samples");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return values[n / 2 - 1] + (values[n / 2] - values[n / 2 - 1]) / 2;
}

Timing run_and_time(const fs::path& binary, const std::vector<std::string>& args, unsigned repetitions,
                    const ProcessOptions& options) {
  if (repetitions == 0) throw Error(Errc::InvalidArgument, "repetitions must be at least 1");
  std::vector<std::string> argv{binary.string()};
  argv.insert(argv.end(), args.begin(), args.end());
  Timing t;
  for (unsigned i = 0; i < repetitions; ++i) {
    const auto r = run_process(argv, options);
    if (r.exit_status != 0) {
      throw Error(Errc::NonZeroExit, binary.string() + " exited with " +
                                         (r.signal != 0 ? "signal " + std::to_string(r.signal)
                                                        : "status " + std::to_string(r.exit_status)) +
                                         "\n" + r.stderr_text);
    }
    t.samples_ns.push_back(r.wall_ns);
  }
  t.median_ns = median(t.samples_ns);
  return t;
}

NuggetRun run_nugget(const fs::path& binary, const std::vector<std::string>& args, unsigned repetitions,
                     const fs::path& roi_path, const ProcessOptions& options) {
  if (repetitions == 0) throw Error(Errc::InvalidArgument, "repetitions must be at least 1");
  std::vector<std::string> argv{binary.string()};
  argv.insert(argv.end(), args.begin(), args.end());
  ProcessOptions opts = options;
  opts.env[std::string(emit::kRoiOutEnv)] = roi_path.string();

  NuggetRun run;
  run.ok = true;
  std::vector<std::uint64_t> times;
  for (unsigned i = 0; i < repetitions; ++i) {
    std::error_code ec;
    fs::remove(roi_path, ec);
    const auto r = run_process(argv, opts);
    if (r.exit_status != 0 && r.exit_status != emit::kMarkerMissedStatus) {
      throw Error(Errc::NonZeroExit, binary.string() + " exited with " +
                                         (r.signal != 0 ? "signal " + std::to_string(r.signal)
                                                        : "status " + std::to_string(r.exit_status)) +
                                         "\n" + r.stderr_text);
    }
    if (!fs::exists(roi_path)) throw Error(Errc::MissingRoi, binary.string() + " wrote no ROI record");
    const auto text = io::read_file(roi_path);
    auto last = std::string_view(text);
    while (!last.empty() && last.back() == '\n') last.remove_suffix(1);
    last = last.substr(last.rfind('\n') == std::string_view::npos ? 0 : last.rfind('\n') + 1);
    auto record = emit::parse_roi_line(last);
    if (!record.ok() || r.exit_status != 0) {
      run.ok = false;
      record.status = "MARKER_MISSED";
    }
    times.push_back(record.roi_ns);
    run.records.push_back(std::move(record));
  }
  run.median_roi_ns = median(times);
  return run;
}

Measurements measure_interleaved(const fs::path& full_binary, const std::vector<fs::path>& nugget_binaries,
                                 const std::vector<fs::path>& roi_paths, const std::vector<std::string>& args,
                                 unsigned repetitions) {
  if (repetitions == 0) throw Error(Errc::InvalidArgument, "repetitions must be at least 1");
  if (roi_paths.size() != nugget_binaries.size()) throw Error(Errc::InvalidArgument, "one ROI path per nugget");
  Measurements m;
  m.nuggets.resize(nugget_binaries.size());
  for (auto& n : m.nuggets) n.ok = true;
  for (unsigned rep = 0; rep < repetitions; ++rep) {
    m.truth.samples_ns.push_back(run_and_time(full_binary, args, 1).samples_ns.front());
    for (std::size_t i = 0; i < nugget_binaries.size(); ++i) {
      auto one = run_nugget(nugget_binaries[i], args, 1, roi_paths[i]);
      m.nuggets[i].ok = m.nuggets[i].ok && one.ok;
      m.nuggets[i].records.push_back(std::move(one.records.front()));
    }
  }
  m.truth.median_ns = median(m.truth.samples_ns);
  for (auto& n : m.nuggets) {
    std::vector<std::uint64_t> times;
    for (const auto& r : n.records) times.push_back(r.roi_ns);
    n.median_roi_ns = median(times);
  }
  return m;
}

double extrapolate_runtime(const std::vector<NuggetRow>& rows, std::uint64_t full_intervals,
                           std::uint64_t partial_size, std::uint64_t interval_size) {
  if (interval_size == 0) throw Error(Errc::InvalidArgument, "interval size is zero");
  double per_interval = 0.0;
  for (const auto& row : rows) per_interval += row.weight * static_cast<double>(row.roi_ns);
  double predicted = static_cast<double>(full_intervals) * per_interval;
  if (partial_size > 0) {
    predicted += static_cast<double>(partial_size) / static_cast<double>(interval_size) * per_interval;
  }
  return predicted;
}

double extrapolate_runtime(const selection::SelectionResult& selection, const std::map<std::uint64_t, double>& roi_ns,
                           const profile::ProfileSet& profiles) {
  double per_interval = 0.0;
  for (const auto& c : selection.chosen) {
    const auto it = roi_ns.find(c.interval_id);
    if (it == roi_ns.end()) {
      throw Error(Errc::MissingRoi, "no ROI time for interval " + std::to_string(c.interval_id));
    }
    per_interval += c.weight * it->second;
  }
  double predicted = static_cast<double>(profiles.full_count()) * per_interval;
  if (profiles.has_partial()) {
    predicted += static_cast<double>(profiles.intervals().back().actual_size) /
                 static_cast<double>(profiles.interval_size()) * per_interval;
  }
  return predicted;
}

double prediction_error(double predicted, double truth) {
  if (truth == 0.0) throw Error(Errc::ZeroTruth, "ground truth runtime is zero");
  return (predicted - truth) / truth;
}

double speedup_error(const ValidationReport& a, const ValidationReport& b) {
  if (a.workload != b.workload) {
    throw Error(Errc::WorkloadMismatch, "reports cover '" + a.workload + "' and '" + b.workload + "'");
  }
  const bool same_selection =
      a.nuggets.size() == b.nuggets.size() &&
      std::equal(a.nuggets.begin(), a.nuggets.end(), b.nuggets.begin(), [](const NuggetRow& x, const NuggetRow& y) {
        return x.interval_id == y.interval_id && x.weight == y.weight;
      });
  if (!same_selection || a.selection_method != b.selection_method || a.selection_seed != b.selection_seed) {
    throw Error(Errc::WorkloadMismatch, "reports use different selections");
  }
  if (!a.complete || !b.complete) throw Error(Errc::MissingRoi, "speedup needs complete reports");
  // (pA/pB - tA/tB) / (tA/tB) == (1 + errA) / (1 + errB) - 1; this form is
  // exactly zero whenever the two platforms' errors are equal.
  const double ea = prediction_error(a.predicted_total_ns, static_cast<double>(a.ground_truth_ns));
  const double eb = prediction_error(b.predicted_total_ns, static_cast<double>(b.ground_truth_ns));
  return (1.0 + ea) / (1.0 + eb) - 1.0;
}

std::string machine_descriptor() {
  std::string desc;
  utsname u{};
  if (::uname(&u) == 0) desc = std::string(u.sysname) + " " + u.release + " " + u.machine;
  std::ifstream cpu("/proc/cpuinfo");
  std::string line;
  while (std::getline(cpu, line)) {
    if (line.starts_with("model name")) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) desc += ";" + line.substr(colon + 2);
      break;
    }
  }
  desc += "; cpus=" + std::to_string(::sysconf(_SC_NPROCESSORS_ONLN));
  return desc;
}

double recheck_predicted_total(const ValidationReport& r) {
  return extrapolate_runtime(r.nuggets, r.full_intervals, r.partial_size, r.interval_size);
}

double recheck_prediction_error(const ValidationReport& r) {
  return prediction_error(recheck_predicted_total(r), static_cast<double>(r.ground_truth_ns));
}

std::string report_to_json(const ValidationReport& r) {
  Json j;
  j["workload"] = r.workload;
  j["machine"] = r.machine;
  j["selection"] = {{"method", r.selection_method}, {"seed", r.selection_seed}};
  j["interval_size"] = r.interval_size;
  j["full_intervals"] = r.full_intervals;
  j["partial_size"] = r.partial_size;
  j["ground_truth_ns"] = r.ground_truth_ns;
  j["ground_truth_samples_ns"] = r.ground_truth_samples_ns;
  j["nuggets"] = Json::array();
  for (const auto& n : r.nuggets) {
    j["nuggets"].push_back(
        {{"interval_id", n.interval_id}, {"weight", n.weight}, {"roi_ns", n.roi_ns}, {"status", n.status}});
  }
  j["predicted_total_ns"] = r.predicted_total_ns;
  j["prediction_error"] = r.prediction_error;
  j["complete"] = r.complete;
  return j.dump(2) + "\n";
}

ValidationReport report_from_json(std::string_view text) {
  try {
    const auto j = Json::parse(text);
    ValidationReport r;
    r.workload = j.at("workload").get<std::string>();
    r.machine = j.at("machine").get<std::string>();
    r.selection_method = j.at("selection").at("method").get<std::string>();
    r.selection_seed = j.at("selection").at("seed").get<std::uint64_t>();
    r.interval_size = j.at("interval_size").get<std::uint64_t>();
    r.full_intervals = j.at("full_intervals").get<std::uint64_t>();
    r.partial_size = j.at("partial_size").get<std::uint64_t>();
    r.ground_truth_ns = j.at("ground_truth_ns").get<std::uint64_t>();
    r.ground_truth_samples_ns = j.at("ground_truth_samples_ns").get<std::vector<std::uint64_t>>();
    for (const auto& n : j.at("nuggets")) {
      r.nuggets.push_back({n.at("interval_id").get<std::uint64_t>(), n.at("weight").get<double>(),
                           n.at("roi_ns").get<std::uint64_t>(), n.at("status").get<std::string>()});
    }
    r.predicted_total_ns = j.at("predicted_total_ns").get<double>();
    r.prediction_error = j.at("prediction_error").get<double>();
    r.complete = j.at("complete").get<bool>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("report document: ") + e.what());
  }
}

std::string report_to_csv(const ValidationReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "workload,interval_id,weight,roi_ns,status\n";
  for (const auto& n : r.nuggets) {
    out << r.workload << ',' << n.interval_id << ',' << n.weight << ',' << n.roi_ns << ',' << n.status << '\n';
  }
  return out.str();
}

}  // namespace nugget::harness
