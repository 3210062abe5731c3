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

#include "nugget/marker.hpp"

#include <json.hpp>

#include "nugget/error.hpp"
#include "nugget/io.hpp"

namespace nugget::marker {
namespace {

using Json = nlohmann::ordered_json;

struct Candidate {
  std::uint64_t bb_id;
  std::uint64_t rank;  // lower is preferred
  std::uint64_t cstamp;
};

// Lowest rank wins; ties go to the later stamp, then the lower block id.
bool better(const Candidate& a, const Candidate& b) {
  if (a.rank != b.rank) return a.rank < b.rank;
  if (a.cstamp != b.cstamp) return a.cstamp > b.cstamp;
  return a.bb_id < b.bb_id;
}

Json marker_json(const std::optional<Marker>& m) {
  if (!m) return nullptr;
  return Json{{"kind", kind_name(m->kind)},
              {"bb_id", m->bb_id},
              {"required_count", m->required_count},
              {"relaxed", m->relaxed},
              {"slack", m->slack}};
}

std::optional<Marker> marker_from(const Json& j) {
  if (j.is_null()) return std::nullopt;
  Marker m;
  m.kind = parse_kind(j.at("kind").get<std::string>());
  m.bb_id = j.at("bb_id").get<std::uint64_t>();
  m.required_count = j.at("required_count").get<std::uint64_t>();
  m.relaxed = j.at("relaxed").get<bool>();
  m.slack = j.at("slack").get<std::uint64_t>();
  return m;
}

Marker with_kind(Marker m, Kind k) {
  m.kind = k;
  return m;
}

}  // namespace

std::string_view kind_name(Kind k) {
  switch (k) {
    case Kind::Warmup: return "warmup";
    case Kind::Start: return "start";
    case Kind::End: return "end";
  }
  return "end";
}

Kind parse_kind(std::string_view name) {
  if (name == "warmup") return Kind::Warmup;
  if (name == "start") return Kind::Start;
  if (name == "end") return Kind::End;
  throw Error(Errc::InvalidArgument, "unknown marker kind '" + std::string(name) + "'");
}

Marker derive_end_marker(const profile::ProfileSet& profiles, std::size_t interval) {
  const auto& iv = profiles.interval(interval);
  std::uint64_t last_bb = 0;
  std::uint64_t last_stamp = 0;
  for (const auto& [bb, s] : iv.blocks) {
    if (s.cstamp > last_stamp) {
      last_stamp = s.cstamp;
      last_bb = bb;
    }
  }
  Marker m;
  m.bb_id = last_bb;
  m.required_count = profile::cumulative_count(profiles, last_bb, interval);
  m.kind = Kind::End;
  return m;
}

Marker derive_relaxed_marker(const profile::ProfileSet& profiles, std::size_t interval,
                             std::uint64_t search_distance, RelaxedDiagnostics* diagnostics) {
  const auto& iv = profiles.interval(interval);
  const std::uint64_t boundary = profiles.end_position(interval);
  const std::uint64_t floor = boundary > search_distance ? boundary - search_distance : 0;

  std::optional<Candidate> local;
  std::optional<Candidate> cumulative;
  for (const auto& [bb, s] : iv.blocks) {
    if (s.cstamp < floor) continue;
    const Candidate by_local{bb, s.count, s.cstamp};
    if (!local || better(by_local, *local)) local = by_local;
    if (diagnostics != nullptr) {
      const Candidate by_cum{bb, profile::cumulative_count(profiles, bb, interval), s.cstamp};
      if (!cumulative || better(by_cum, *cumulative)) cumulative = by_cum;
    }
  }
  // The interval's last block always qualifies (its stamp is the boundary).
  Marker m;
  m.bb_id = local->bb_id;
  m.required_count = profile::cumulative_count(profiles, local->bb_id, interval);
  m.kind = Kind::End;
  m.slack = boundary - local->cstamp;
  m.relaxed = m.slack != 0;
  if (diagnostics != nullptr) {
    diagnostics->cumulative_rank_bb_id = cumulative->bb_id;
    diagnostics->cumulative_rank_required_count = cumulative->rank;
    diagnostics->cumulative_rank_slack = boundary - cumulative->cstamp;
  }
  return m;
}

std::uint64_t marker_position(const profile::ProfileSet& profiles, const Marker& m) {
  std::uint64_t seen = 0;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const auto& iv = profiles.intervals()[i];
    const auto it = iv.blocks.find(m.bb_id);
    if (it == iv.blocks.end()) continue;
    seen += it->second.count;
    if (seen == m.required_count) return it->second.cstamp;
    if (seen > m.required_count) break;
  }
  throw Error(Errc::InvalidArgument, "marker (bb " + std::to_string(m.bb_id) + ", count " +
                                         std::to_string(m.required_count) +
                                         ") does not close an interval's last entry of its block");
}

std::vector<NuggetSpec> build_nugget_spec(const profile::ProfileSet& profiles,
                                          const selection::SelectionResult& selection, unsigned warmup_intervals,
                                          std::uint64_t search_distance) {
  std::vector<NuggetSpec> specs;
  for (const auto& choice : selection.chosen) {
    const auto i = static_cast<std::size_t>(choice.interval_id);
    NuggetSpec spec;
    spec.interval_id = choice.interval_id;
    spec.weight = choice.weight;
    if (search_distance > 0) {
      RelaxedDiagnostics diag;
      spec.end = derive_relaxed_marker(profiles, i, search_distance, &diag);
      spec.diagnostics = diag;
    } else {
      spec.end = derive_end_marker(profiles, i);
    }
    if (i > 0) spec.start = with_kind(derive_end_marker(profiles, i - 1), Kind::Start);
    if (warmup_intervals > 0 && i >= warmup_intervals + 1) {
      spec.warmup = with_kind(derive_end_marker(profiles, i - warmup_intervals - 1), Kind::Warmup);
    }
    specs.push_back(std::move(spec));
  }
  return specs;
}

std::string to_json(const std::vector<NuggetSpec>& specs) {
  Json arr = Json::array();
  for (const auto& s : specs) {
    Json j;
    j["interval_id"] = s.interval_id;
    j["weight"] = s.weight;
    j["warmup"] = marker_json(s.warmup);
    j["start"] = marker_json(s.start);
    j["end"] = marker_json(s.end);
    if (s.diagnostics) {
      j["diagnostics"] = {{"cumulative_rank_bb_id", s.diagnostics->cumulative_rank_bb_id},
                          {"cumulative_rank_required_count", s.diagnostics->cumulative_rank_required_count},
                          {"cumulative_rank_slack", s.diagnostics->cumulative_rank_slack}};
    } else {
      j["diagnostics"] = nullptr;
    }
    arr.push_back(std::move(j));
  }
  return Json{{"nuggets", std::move(arr)}}.dump(2) + "\n";
}

std::vector<NuggetSpec> specs_from_json(std::string_view text) {
  try {
    const auto doc = Json::parse(text);
    std::vector<NuggetSpec> specs;
    for (const auto& j : doc.at("nuggets")) {
      NuggetSpec s;
      s.interval_id = j.at("interval_id").get<std::uint64_t>();
      s.weight = j.at("weight").get<double>();
      s.warmup = marker_from(j.at("warmup"));
      s.start = marker_from(j.at("start"));
      auto end = marker_from(j.at("end"));
      if (!end) throw Error(Errc::InvalidArgument, "nugget " + std::to_string(s.interval_id) + " has no end marker");
      s.end = *end;
      if (j.contains("diagnostics") && !j.at("diagnostics").is_null()) {
        const auto& d = j.at("diagnostics");
        s.diagnostics = RelaxedDiagnostics{d.at("cumulative_rank_bb_id").get<std::uint64_t>(),
                                           d.at("cumulative_rank_required_count").get<std::uint64_t>(),
                                           d.at("cumulative_rank_slack").get<std::uint64_t>()};
      }
      specs.push_back(std::move(s));
    }
    return specs;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("nugget spec document: ") + e.what());
  }
}

void write_specs(const std::vector<NuggetSpec>& specs, const std::filesystem::path& path) {
  io::write_file_atomic(path, to_json(specs));
}

std::vector<NuggetSpec> read_specs(const std::filesystem::path& path) { return specs_from_json(io::read_file(path)); }

}  // namespace nugget::marker
