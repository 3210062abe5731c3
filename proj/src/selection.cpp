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

#include "nugget/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <json.hpp>

#include "nugget/error.hpp"
#include "nugget/io.hpp"

namespace nugget::selection {
namespace {

using Json = nlohmann::ordered_json;

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::size_t nearest(const Point& p, const std::vector<Point>& centroids, double* dist = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(p, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist != nullptr) *dist = best_d;
  return best;
}

std::vector<Point> kmeanspp_init(const std::vector<Point>& points, std::size_t k, Rng& rng) {
  std::vector<Point> centroids;
  centroids.push_back(points[rng.below(points.size())]);
  std::vector<double> d2(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) d2[i] = squared_distance(points[i], centroids[0]);
  while (centroids.size() < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = 0;
    if (total <= 0.0) {
      pick = rng.below(points.size());
    } else {
      const double target = rng.unit() * total;
      double cum = 0.0;
      pick = points.size();
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (d2[i] <= 0.0) continue;
        cum += d2[i];
        if (cum > target) {
          pick = i;
          break;
        }
      }
      if (pick == points.size()) {
        // Rounding left the target past the last positive weight.
        for (std::size_t i = points.size(); i-- > 0;) {
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    }
    centroids.push_back(points[pick]);
    for (std::size_t i = 0; i < points.size(); ++i) {
      d2[i] = std::min(d2[i], squared_distance(points[i], centroids.back()));
    }
  }
  return centroids;
}

// Recomputes centroids as cluster means. An empty cluster takes over the
// point farthest from its current centroid.
std::vector<Point> update_centroids(const std::vector<Point>& points, std::vector<std::size_t>& assignments,
                                    std::vector<Point> centroids) {
  const std::size_t k = centroids.size();
  const std::size_t dim = points.front().size();
  for (;;) {
    std::vector<std::size_t> pop(k, 0);
    for (auto a : assignments) ++pop[a];
    const auto empty = std::find(pop.begin(), pop.end(), std::size_t{0});
    if (empty == pop.end()) break;
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (pop[assignments[i]] <= 1) continue;
      const double d = squared_distance(points[i], centroids[assignments[i]]);
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    if (far_d < 0.0) break;  // every cluster is a singleton; nothing to move
    const auto c = static_cast<std::size_t>(empty - pop.begin());
    assignments[far] = c;
    centroids[c] = points[far];
  }
  std::vector<Point> sums(k, Point(dim, 0.0));
  std::vector<std::size_t> pop(k, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto& s = sums[assignments[i]];
    for (std::size_t d = 0; d < dim; ++d) s[d] += points[i][d];
    ++pop[assignments[i]];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (pop[c] == 0) continue;
    for (auto& v : sums[c]) v /= static_cast<double>(pop[c]);
    centroids[c] = std::move(sums[c]);
  }
  return centroids;
}

// Single-point transfers after Lloyd converges: moving x from a to b
// changes WCSS by n_b/(n_b+1)*|x-c_b|^2 - n_a/(n_a-1)*|x-c_a|^2. Lloyd stops
// at any nearest-centroid fixpoint; this pass escapes the ones where a
// transfer still pays, which Lloyd cannot see because it ignores the
// centroid shift.
void hartigan_transfers(const std::vector<Point>& points, KMeansResult& r, std::size_t k, unsigned max_passes) {
  std::vector<std::size_t> pop(k, 0);
  for (auto a : r.assignments) ++pop[a];
  for (unsigned pass = 0; pass < max_passes; ++pass) {
    bool moved = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto a = r.assignments[i];
      if (pop[a] < 2) continue;
      const double na = static_cast<double>(pop[a]);
      const double remove_gain = na / (na - 1.0) * squared_distance(points[i], r.centroids[a]);
      std::size_t best = a;
      double best_cost = remove_gain * (1.0 - 1e-12);
      for (std::size_t b = 0; b < k; ++b) {
        if (b == a) continue;
        const double nb = static_cast<double>(pop[b]);
        const double cost = nb / (nb + 1.0) * squared_distance(points[i], r.centroids[b]);
        if (cost < best_cost) {
          best_cost = cost;
          best = b;
        }
      }
      if (best == a) continue;
      // incremental centroid updates
      const double nb = static_cast<double>(pop[best]);
      for (std::size_t d = 0; d < points[i].size(); ++d) {
        r.centroids[a][d] = (r.centroids[a][d] * na - points[i][d]) / (na - 1.0);
        r.centroids[best][d] = (r.centroids[best][d] * nb + points[i][d]) / (nb + 1.0);
      }
      --pop[a];
      ++pop[best];
      r.assignments[i] = best;
      moved = true;
    }
    if (!moved) break;
  }
  r.centroids = update_centroids(points, r.assignments, std::move(r.centroids));
}

KMeansResult lloyd(const std::vector<Point>& points, std::size_t k, Rng& rng, unsigned max_iters) {
  KMeansResult r;
  r.centroids = kmeanspp_init(points, k, rng);
  r.assignments.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) r.assignments[i] = nearest(points[i], r.centroids);
  for (unsigned it = 0; it < max_iters; ++it) {
    r.iterations = it + 1;
    r.centroids = update_centroids(points, r.assignments, std::move(r.centroids));
    std::vector<std::size_t> next(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) next[i] = nearest(points[i], r.centroids);
    if (next == r.assignments) break;
    r.assignments = std::move(next);
  }
  r.centroids = update_centroids(points, r.assignments, std::move(r.centroids));
  hartigan_transfers(points, r, k, max_iters);
  r.wcss = within_cluster_ss(points, r.assignments, k);
  return r;
}

std::vector<std::vector<double>> distance_matrix(const std::vector<Point>& points) {
  const std::size_t n = points.size();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      d[i][j] = d[j][i] = std::sqrt(squared_distance(points[i], points[j]));
    }
  }
  return d;
}

double silhouette_from(const std::vector<std::vector<double>>& dist, const std::vector<std::size_t>& assignments) {
  const std::size_t n = assignments.size();
  const std::set<std::size_t> labels(assignments.begin(), assignments.end());
  if (labels.size() < 2) throw Error(Errc::SingleCluster, "silhouette needs at least two clusters");
  const std::size_t max_label = *labels.rbegin();
  std::vector<std::size_t> pop(max_label + 1, 0);
  for (auto a : assignments) ++pop[a];

  double total = 0.0;
  std::vector<double> sum(max_label + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto own = assignments[i];
    if (pop[own] == 1) continue;
    std::fill(sum.begin(), sum.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) sum[assignments[j]] += dist[i][j];
    const double a = sum[own] / static_cast<double>(pop[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (auto c : labels) {
      if (c != own) b = std::min(b, sum[c] / static_cast<double>(pop[c]));
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

void check_points(const std::vector<Point>& points) {
  if (points.empty()) throw Error(Errc::KOutOfRange, "no points to cluster");
  for (const auto& p : points) {
    if (p.size() != points.front().size()) throw Error(Errc::InvalidArgument, "points differ in dimension");
  }
}

}  // namespace

std::string_view method_name(Method m) { return m == Method::Random ? "random" : "kmeans"; }

Method parse_method(std::string_view name) {
  if (name == "random") return Method::Random;
  if (name == "kmeans") return Method::KMeans;
  throw Error(Errc::InvalidArgument, "unknown selection method '" + std::string(name) + "'");
}

std::uint64_t Rng::next() {
  std::uint64_t z = (state_ += kGolden);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw Error(Errc::InvalidArgument, "empty range");
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const auto r = next();
    if (r >= threshold) return r % bound;
  }
}

double Rng::unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::vector<std::size_t> candidate_pool(const profile::ProfileSet& profiles) {
  std::vector<std::size_t> pool(profiles.full_count());
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  return pool;
}

SelectionResult select_random(const profile::ProfileSet& profiles, std::size_t n, std::uint64_t seed) {
  auto pool = candidate_pool(profiles);
  if (pool.empty()) throw Error(Errc::EmptyPool, "no complete intervals to sample from");
  if (n == 0 || n > pool.size()) {
    throw Error(Errc::NTooLarge, "sample count " + std::to_string(n) + " outside [1, " +
                                     std::to_string(pool.size()) + "]");
  }
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(n);
  std::sort(pool.begin(), pool.end());

  SelectionResult result;
  result.method = Method::Random;
  result.seed = seed;
  for (auto idx : pool) result.chosen.push_back({profiles.interval(idx).interval_id, 1.0 / static_cast<double>(n)});
  return result;
}

Point normalize_bbv(const profile::IntervalProfile& interval, const ir::BlockTable& table) {
  if (interval.actual_size == 0) throw Error(Errc::InvalidArgument, "interval has no instructions");
  Point v(table.size(), 0.0);
  const auto size = static_cast<double>(interval.actual_size);
  for (const auto& [bb, s] : interval.blocks) {
    v.at(bb) = static_cast<double>(s.count * table.inst_count(bb)) / size;
  }
  return v;
}

double squared_distance(const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double within_cluster_ss(const std::vector<Point>& points, const std::vector<std::size_t>& assignments,
                         std::size_t k) {
  const std::size_t dim = points.front().size();
  std::vector<Point> mean(k, Point(dim, 0.0));
  std::vector<std::size_t> pop(k, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t d = 0; d < dim; ++d) mean[assignments[i]][d] += points[i][d];
    ++pop[assignments[i]];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (pop[c] > 0) {
      for (auto& v : mean[c]) v /= static_cast<double>(pop[c]);
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) total += squared_distance(points[i], mean[assignments[i]]);
  return total;
}

KMeansResult kmeans(const std::vector<Point>& points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options) {
  check_points(points);
  if (k < 1 || k > points.size()) {
    throw Error(Errc::KOutOfRange, "k = " + std::to_string(k) + " outside [1, " + std::to_string(points.size()) +
                                       "]");
  }
  Rng rng(seed);
  KMeansResult best;
  const unsigned restarts = std::max(1u, options.restarts);
  for (unsigned r = 0; r < restarts; ++r) {
    auto run = lloyd(points, k, rng, options.max_iters);
    if (r == 0 || run.wcss < best.wcss) best = std::move(run);
  }
  return best;
}

double silhouette(const std::vector<Point>& points, const std::vector<std::size_t>& assignments) {
  check_points(points);
  if (assignments.size() != points.size()) throw Error(Errc::InvalidArgument, "one assignment per point required");
  return silhouette_from(distance_matrix(points), assignments);
}

SelectionResult select_kmeans(const profile::ProfileSet& profiles, unsigned max_clusters, std::uint64_t seed,
                              const KMeansOptions& options) {
  const auto pool = candidate_pool(profiles);
  if (pool.empty()) throw Error(Errc::EmptyPool, "no complete intervals to cluster");

  std::vector<Point> points;
  points.reserve(pool.size());
  for (auto idx : pool) points.push_back(normalize_bbv(profiles.interval(idx), profiles.block_table()));
  const std::size_t n = points.size();

  SelectionResult result;
  result.method = Method::KMeans;
  result.seed = seed;

  const bool all_same = std::all_of(points.begin(), points.end(), [&](const Point& p) { return p == points[0]; });
  std::vector<std::size_t> assignments(n, 0);
  std::vector<Point> centroids{points[0]};
  std::size_t k_used = 1;

  if (!all_same && max_clusters >= 2) {
    const std::size_t k_hi = std::min<std::size_t>(n, std::max<std::size_t>(2, std::min<std::size_t>(max_clusters, n - 1)));
    const auto dist = distance_matrix(points);
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 2; k <= k_hi; ++k) {
      auto run = kmeans(points, k, seed ^ (kGolden * k), options);
      const std::set<std::size_t> labels(run.assignments.begin(), run.assignments.end());
      if (labels.size() < 2) continue;
      const double score = silhouette_from(dist, run.assignments);
      result.silhouette_by_k[static_cast<unsigned>(k)] = score;
      if (score > best_score) {
        best_score = score;
        k_used = k;
        assignments = std::move(run.assignments);
        centroids = std::move(run.centroids);
      }
    }
  } else if (!all_same) {
    auto run = kmeans(points, 1, seed ^ kGolden, options);
    assignments = std::move(run.assignments);
    centroids = std::move(run.centroids);
  }

  result.k_used = static_cast<unsigned>(k_used);
  std::vector<std::size_t> pop(centroids.size(), 0);
  std::vector<std::size_t> rep(centroids.size(), n);
  std::vector<double> rep_d(centroids.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = assignments[i];
    ++pop[c];
    const double d = squared_distance(points[i], centroids[c]);
    if (d < rep_d[c]) {
      rep_d[c] = d;
      rep[c] = i;
    }
  }
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    if (pop[c] == 0) continue;
    result.chosen.push_back(
        {profiles.interval(pool[rep[c]]).interval_id, static_cast<double>(pop[c]) / static_cast<double>(n)});
  }
  for (std::size_t i = 0; i < n; ++i) {
    result.cluster_by_interval[profiles.interval(pool[i]).interval_id] =
        profiles.interval(pool[rep[assignments[i]]]).interval_id;
  }
  std::sort(result.chosen.begin(), result.chosen.end(),
            [](const Choice& a, const Choice& b) { return a.interval_id < b.interval_id; });
  return result;
}

std::string to_json(const SelectionResult& result) {
  Json j;
  j["method"] = method_name(result.method);
  j["seed"] = result.seed;
  j["k_used"] = result.k_used ? Json(*result.k_used) : Json(nullptr);
  j["chosen"] = Json::array();
  for (const auto& c : result.chosen) j["chosen"].push_back({{"interval_id", c.interval_id}, {"weight", c.weight}});
  j["silhouette_by_k"] = Json::object();
  for (const auto& [k, s] : result.silhouette_by_k) j["silhouette_by_k"][std::to_string(k)] = s;
  if (!result.cluster_by_interval.empty()) {
    j["clusters"] = Json::object();
    for (const auto& [id, rep] : result.cluster_by_interval) j["clusters"][std::to_string(id)] = rep;
  }
  return j.dump(2) + "\n";
}

SelectionResult from_json(std::string_view text) {
  try {
    const auto j = Json::parse(text);
    SelectionResult r;
    r.method = parse_method(j.at("method").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    if (!j.at("k_used").is_null()) r.k_used = j.at("k_used").get<unsigned>();
    for (const auto& c : j.at("chosen")) {
      r.chosen.push_back({c.at("interval_id").get<std::uint64_t>(), c.at("weight").get<double>()});
    }
    for (const auto& [k, s] : j.at("silhouette_by_k").items()) {
      r.silhouette_by_k[static_cast<unsigned>(std::stoul(k))] = s.get<double>();
    }
    if (j.contains("clusters")) {
      for (const auto& [id, rep] : j.at("clusters").items()) {
        r.cluster_by_interval[std::stoull(id)] = rep.get<std::uint64_t>();
      }
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("selection document: ") + e.what());
  }
}

void write_selection(const SelectionResult& result, const std::filesystem::path& path) {
  io::write_file_atomic(path, to_json(result));
}

SelectionResult read_selection(const std::filesystem::path& path) { return from_json(io::read_file(path)); }

}  // namespace nugget::selection
