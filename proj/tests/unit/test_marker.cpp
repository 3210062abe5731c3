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

#include <doctest.h>

#include "error_code.hpp"
#include "fixtures.hpp"
#include "nugget/analysis.hpp"
#include "nugget/marker.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace nugget;

namespace {

profile::IntervalProfile iv(std::uint64_t id, std::uint64_t size, std::map<std::uint64_t, profile::BlockSample> b) {
  profile::IntervalProfile p;
  p.interval_id = id;
  p.actual_size = size;
  p.blocks = std::move(b);
  return p;
}

using testing::replay_to;

}  // namespace

TEST_CASE("derive_end_marker") {
  // blocks: A = 0 (len 25), B = 1 (len 24), C = 2 (len 1)
  const auto table = testing::make_table({25, 24, 1});
  const profile::ProfileSet p(900,
                              {iv(0, 900, {{2, {900, 900}}}),
                               iv(1, 98, {{0, {2, 950}}, {1, {2, 998}}})},
                              table);
  SUBCASE("last stamp wins") {
    const auto m = marker::derive_end_marker(p, 1);
    CHECK(m.bb_id == 1);
    CHECK(m.required_count == 2);
    CHECK(m.slack == 0);
    CHECK_FALSE(m.relaxed);
    CHECK(m.kind == marker::Kind::End);
    CHECK(marker::marker_position(p, m) == 998);
  }
  SUBCASE("required count is cumulative") {
    const auto t = testing::make_table({1, 1});
    const auto q = testing::make_profiles(t, {{{0, 2}, {1, 1}}, {{0, 3}}, {{0, 1}, {1, 1}}}, 3);
    CHECK(marker::derive_end_marker(q, 2).bb_id == 1);
    CHECK(marker::derive_end_marker(q, 2).required_count == 2);
    CHECK(marker::derive_end_marker(q, 1).required_count == 5);
  }
  SUBCASE("out of range") {
    CHECK(testing::error_code([&] { marker::derive_end_marker(p, 2); }) == Errc::IndexOutOfRange);
  }
}

TEST_CASE("derive_relaxed_marker") {
  // X = 0 entered 40 times, Y = 1 twice, Z = 2 closes the interval
  const auto table = testing::make_table({1, 1, 1});
  const profile::ProfileSet p(43, {iv(0, 43, {{0, {40, 41}}, {1, {2, 42}}, {2, {1, 43}}})}, table);
  SUBCASE("distance 0 is the exact marker") {
    CHECK(marker::derive_relaxed_marker(p, 0, 0) == marker::derive_end_marker(p, 0));
  }
  SUBCASE("least frequent candidate") {
    const profile::ProfileSet q(42, {iv(0, 42, {{0, {40, 42}}, {1, {2, 41}}})}, table);
    const auto m = marker::derive_relaxed_marker(q, 0, 5);
    CHECK(m.bb_id == 1);
    CHECK(m.slack == 1);
    CHECK(m.relaxed);
  }
  SUBCASE("ties go to the later stamp") {
    const auto m = marker::derive_relaxed_marker(p, 0, 10);
    CHECK(m.bb_id == 2);  // Z (1 entry) beats Y (2 entries)
    CHECK(m.slack == 0);
    CHECK_FALSE(m.relaxed);
  }
  SUBCASE("diagnostics rank by cumulative count") {
    marker::RelaxedDiagnostics d;
    marker::derive_relaxed_marker(p, 0, 10, &d);
    CHECK(d.cumulative_rank_bb_id == 2);
    CHECK(d.cumulative_rank_required_count == 1);
  }
}

TEST_CASE("relaxed slack stays within the search distance on fixtures") {
  for (const auto* name : {"sort", "strings", "interp"}) {
    const auto& f = testing::fixture(name);
    const auto& base = testing::base_build(f);
    const auto run = testing::run_analysis(f, 1500);
    const auto p = profile::parse_profile(run.profile_bytes, base.table);
    const auto trace = analysis::read_trace(run.trace_path);
    for (std::uint64_t d : {0, 10, 100, 1000}) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        const auto m = marker::derive_relaxed_marker(p, i, d);
        CHECK(m.slack <= d);
        const auto at = replay_to(trace, base.table, m.bb_id, m.required_count);
        CHECK(at + d >= p.end_position(i));
        CHECK(at <= p.end_position(i));
        CHECK(at == p.end_position(i) - m.slack);
      }
    }
  }
}

TEST_CASE("exact markers replay to the interval boundary") {
  const auto& f = testing::fixture("recursion");
  const auto& base = testing::base_build(f);
  const auto run = testing::run_analysis(f, 777);
  const auto p = profile::parse_profile(run.profile_bytes, base.table);
  const auto trace = analysis::read_trace(run.trace_path);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto m = marker::derive_end_marker(p, i);
    CHECK(replay_to(trace, base.table, m.bb_id, m.required_count) == p.end_position(i));
  }
}

TEST_CASE("required counts never decrease for a block") {
  const auto& f = testing::fixture("branchy");
  const auto& base = testing::base_build(f);
  const auto p = profile::parse_profile(testing::run_analysis(f, 300).profile_bytes, base.table);
  std::map<std::uint64_t, std::uint64_t> last;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto m = marker::derive_end_marker(p, i);
    if (auto it = last.find(m.bb_id); it != last.end()) CHECK(m.required_count >= it->second);
    last[m.bb_id] = m.required_count;
  }
}

TEST_CASE("build_nugget_spec") {
  const auto table = testing::make_table({1, 1, 1});
  std::vector<std::map<std::uint64_t, std::uint64_t>> counts;
  for (int i = 0; i < 8; ++i) counts.push_back({{static_cast<std::uint64_t>(i % 3), 4}});
  const auto p = testing::make_profiles(table, counts, 4);
  selection::SelectionResult sel;
  sel.chosen = {{0, 0.25}, {5, 0.75}};

  SUBCASE("interval 0 has neither start nor warmup") {
    const auto specs = marker::build_nugget_spec(p, sel, 1, 0);
    REQUIRE(specs.size() == 2);
    CHECK_FALSE(specs[0].start);
    CHECK_FALSE(specs[0].warmup);
    CHECK(specs[0].weight == 0.25);
  }
  SUBCASE("w = 1, i = 5") {
    const auto specs = marker::build_nugget_spec(p, sel, 1, 0);
    const auto& s = specs[1];
    REQUIRE(s.start);
    REQUIRE(s.warmup);
    CHECK(*s.start == [&] { auto m = marker::derive_end_marker(p, 4); m.kind = marker::Kind::Start; return m; }());
    CHECK(*s.warmup == [&] { auto m = marker::derive_end_marker(p, 3); m.kind = marker::Kind::Warmup; return m; }());
    CHECK(s.end == marker::derive_end_marker(p, 5));
    CHECK(s.weight == 0.75);
  }
  SUBCASE("no warmup when w = 0 or not enough history") {
    CHECK_FALSE(marker::build_nugget_spec(p, sel, 0, 0)[1].warmup);
    CHECK_FALSE(marker::build_nugget_spec(p, sel, 5, 0)[1].warmup);
    CHECK(marker::build_nugget_spec(p, sel, 4, 0)[1].warmup);
  }
  SUBCASE("relaxed end, exact start") {
    const auto specs = marker::build_nugget_spec(p, sel, 0, 3);
    CHECK(specs[1].diagnostics);
    CHECK_FALSE(specs[1].start->relaxed);
  }
  SUBCASE("document round trip") {
    const auto specs = marker::build_nugget_spec(p, sel, 2, 3);
    CHECK(marker::specs_from_json(marker::to_json(specs)) == specs);
  }
}

TEST_CASE("marker boundaries are ordered on a fixture") {
  const auto& f = testing::fixture("matmul");
  const auto& base = testing::base_build(f);
  const auto p = profile::parse_profile(testing::run_analysis(f, 400).profile_bytes, base.table);
  selection::SelectionResult sel;
  for (std::uint64_t i = 0; i < p.full_count(); ++i) sel.chosen.push_back({i, 1.0 / p.full_count()});
  for (const auto& spec : marker::build_nugget_spec(p, sel, 2, 0)) {
    const auto end = marker::marker_position(p, spec.end);
    CHECK(end == p.end_position(spec.interval_id));
    if (spec.start) {
      const auto start = marker::marker_position(p, *spec.start);
      CHECK(start < end);
      CHECK(start == p.start_position(spec.interval_id));
      if (spec.warmup) CHECK(marker::marker_position(p, *spec.warmup) < start);
    }
  }
}
