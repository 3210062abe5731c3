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

// Representative-interval selection: uniform random sampling, or k-means
// over instruction-weighted IRBB vectors with silhouette-based choice of k.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nugget/profile.hpp"

namespace nugget::selection {

enum class Method { Random, KMeans };

std::string_view method_name(Method m);
Method parse_method(std::string_view name);

struct Choice {
  std::uint64_t interval_id = 0;
  double weight = 0.0;

  bool operator==(const Choice&) const = default;
};

struct SelectionResult {
  Method method = Method::Random;
  std::uint64_t seed = 0;
  std::vector<Choice> chosen;
  std::optional<unsigned> k_used;
  std::map<unsigned, double> silhouette_by_k;
  /// KMeans only: interval id -> id of its cluster's representative.
  std::map<std::uint64_t, std::uint64_t> cluster_by_interval;

  bool operator==(const SelectionResult&) const = default;
};

using Point = std::vector<double>;

/// Deterministic 64-bit generator (splitmix64). Bounded draws are computed
/// here rather than through <random> distributions so results do not depend
/// on the standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  /// Uniform real in [0, 1).
  double unit();

 private:
  std::uint64_t state_;
};

/// Non-partial interval indices eligible for selection.
std::vector<std::size_t> candidate_pool(const profile::ProfileSet& profiles);

SelectionResult select_random(const profile::ProfileSet& profiles, std::size_t n, std::uint64_t seed);

/// Dense vector v[b] = bbv[b] * inst_count(b) / actual_size.
Point normalize_bbv(const profile::IntervalProfile& interval, const ir::BlockTable& table);

double squared_distance(const Point& a, const Point& b);

struct KMeansResult {
  std::vector<std::size_t> assignments;
  std::vector<Point> centroids;
  double wcss = 0.0;
  unsigned iterations = 0;
};

struct KMeansOptions {
  unsigned max_iters = 300;
  /// Independent k-means++ restarts; the lowest within-cluster sum of
  /// squares wins (earliest restart on ties).
  unsigned restarts = 10;
};

KMeansResult kmeans(const std::vector<Point>& points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options = {});

double within_cluster_ss(const std::vector<Point>& points, const std::vector<std::size_t>& assignments,
                         std::size_t k);

/// Mean silhouette over all points; points in singleton clusters score 0.
double silhouette(const std::vector<Point>& points, const std::vector<std::size_t>& assignments);

SelectionResult select_kmeans(const profile::ProfileSet& profiles, unsigned max_clusters, std::uint64_t seed,
                              const KMeansOptions& options = {});

std::string to_json(const SelectionResult& result);
SelectionResult from_json(std::string_view text);
void write_selection(const SelectionResult& result, const std::filesystem::path& path);
SelectionResult read_selection(const std::filesystem::path& path);

}  // namespace nugget::selection
