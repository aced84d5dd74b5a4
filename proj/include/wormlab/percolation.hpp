#pragma once

// Cluster analysis of occupied grids: union-find labeling, box-crossing
// events, crossing-probability estimation with Wilson intervals, critical
// intensity bisection under the shared-seed monotone coupling, the
// animal-by-animal exploration of the origin's cluster, and the
// target-shooting (boomerang) experiment.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "wormlab/lattice.hpp"
#include "wormlab/potential.hpp"
#include "wormlab/worms.hpp"

namespace wormlab {

// ---------------------------------------------------------------------------
// Union-find cluster labels
// ---------------------------------------------------------------------------

class ClusterLabels {
 public:
  ClusterLabels() = default;

  // union by size with path halving; deterministic given the grid
  explicit ClusterLabels(const SiteSet& grid) : geom_(grid.geometry()) {
    std::int64_t n = geom_.num_sites();
    parent_.assign(static_cast<std::size_t>(n), -1);
    size_.assign(static_cast<std::size_t>(n), 0);
    for (std::int64_t idx = 0; idx < n; ++idx) {
      if (!grid.test(idx)) continue;
      parent_[static_cast<std::size_t>(idx)] = idx;
      size_[static_cast<std::size_t>(idx)] = 1;
    }
    for (std::int64_t idx = 0; idx < n; ++idx) {
      if (!grid.test(idx)) continue;
      for (int axis = 0; axis < geom_.d; ++axis) {
        for (int step : {-1, 1}) {
          std::int64_t nb = geom_.neighbor_index(idx, axis, step);
          if (nb > idx && grid.test(nb)) unite(idx, nb);
        }
      }
    }
    // compact labels in scan order
    labels_.assign(static_cast<std::size_t>(n), -1);
    for (std::int64_t idx = 0; idx < n; ++idx) {
      if (!grid.test(idx)) continue;
      std::int64_t r = find(idx);
      if (labels_[static_cast<std::size_t>(r)] < 0) {
        labels_[static_cast<std::size_t>(r)] = n_clusters_++;
        cluster_size_.push_back(size_[static_cast<std::size_t>(r)]);
      }
      labels_[static_cast<std::size_t>(idx)] = labels_[static_cast<std::size_t>(r)];
    }
  }

  const BoxGeometry& geometry() const { return geom_; }
  std::int64_t cluster_count() const { return n_clusters_; }
  const std::vector<std::int64_t>& cluster_sizes() const { return cluster_size_; }

  // -1 for unoccupied sites
  std::int64_t label(std::int64_t idx) const { return labels_[static_cast<std::size_t>(idx)]; }

  std::int64_t largest_cluster() const {
    std::int64_t best = -1, best_size = 0;
    for (std::size_t i = 0; i < cluster_size_.size(); ++i)
      if (cluster_size_[i] > best_size) {
        best_size = cluster_size_[i];
        best = static_cast<std::int64_t>(i);
      }
    return best;
  }

 private:
  std::int64_t find(std::int64_t x) {
    while (parent_[static_cast<std::size_t>(x)] != x) {
      parent_[static_cast<std::size_t>(x)] = parent_[static_cast<std::size_t>(parent_[static_cast<std::size_t>(x)])];
      x = parent_[static_cast<std::size_t>(x)];
    }
    return x;
  }
  void unite(std::int64_t a, std::int64_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size_[static_cast<std::size_t>(a)] < size_[static_cast<std::size_t>(b)]) std::swap(a, b);
    parent_[static_cast<std::size_t>(b)] = a;
    size_[static_cast<std::size_t>(a)] += size_[static_cast<std::size_t>(b)];
  }

  BoxGeometry geom_;
  std::vector<std::int64_t> parent_, size_, labels_, cluster_size_;
  std::int64_t n_clusters_ = 0;
};

inline ClusterLabels label_clusters(const SiteSet& grid) { return ClusterLabels(grid); }

// true iff one cluster touches both opposite faces along the axis
inline bool crossing(const ClusterLabels& labels, int axis) {
  const BoxGeometry& g = labels.geometry();
  if (g.boundary == BoundaryKind::Torus)
    throw std::invalid_argument("crossing undefined on a torus");
  if (axis < 0 || axis >= g.d) throw std::invalid_argument("crossing: bad axis");
  std::vector<char> lo_face(static_cast<std::size_t>(labels.cluster_count()), 0);
  std::int64_t n = g.num_sites();
  for (std::int64_t idx = 0; idx < n; ++idx) {
    std::int64_t lbl = labels.label(idx);
    if (lbl < 0) continue;
    Coord c = g.coord_of(idx);
    if (c[axis] == g.lo[axis]) lo_face[static_cast<std::size_t>(lbl)] = 1;
  }
  for (std::int64_t idx = 0; idx < n; ++idx) {
    std::int64_t lbl = labels.label(idx);
    if (lbl < 0) continue;
    Coord c = g.coord_of(idx);
    if (c[axis] == g.lo[axis] + static_cast<std::int32_t>(g.side) - 1 &&
        lo_face[static_cast<std::size_t>(lbl)])
      return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Crossing probability and v_c bisection
// ---------------------------------------------------------------------------

struct WormModel {
  int d = 2;
  std::int64_t L = 32;
  LengthSpec length;
  CloudParams cloud;  // PaddedWindow for crossing work
};

struct WilsonInterval {
  double lo = 0, hi = 1;
};

inline WilsonInterval wilson_interval(std::uint64_t successes, std::uint64_t n, double z = 1.96) {
  if (n == 0) return {0, 1};
  double p = static_cast<double>(successes) / static_cast<double>(n);
  double z2 = z * z;
  double denom = 1 + z2 / static_cast<double>(n);
  double center = (p + z2 / (2.0 * static_cast<double>(n))) / denom;
  double half = z * std::sqrt(p * (1 - p) / static_cast<double>(n) +
                              z2 / (4.0 * static_cast<double>(n) * static_cast<double>(n))) /
                denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

struct CrossingEstimate {
  double v = 0;
  std::int64_t L = 0;
  std::uint64_t crossings = 0;
  std::uint64_t replicas = 0;
  WilsonInterval ci;
  std::uint64_t seed0 = 0;
  double estimate() const {
    return replicas ? static_cast<double>(crossings) / static_cast<double>(replicas) : 0.0;
  }
};

inline CrossingEstimate estimate_crossing_prob(const WormModel& model, double v,
                                               std::uint64_t replicas,
                                               std::uint64_t master_seed) {
  if (replicas < 1) throw std::invalid_argument("estimate_crossing_prob: replicas >= 1");
  LengthDistribution dist(model.length);
  BoxGeometry window = BoxGeometry::centered(model.d, model.L, BoundaryKind::Free);
  CloudParams cparams = model.cloud;
  cparams.policy = CloudPolicy::PaddedWindow;  // crossing needs a Free window
  CrossingEstimate est;
  est.v = v;
  est.L = model.L;
  est.replicas = replicas;
  est.seed0 = master_seed;
  for (std::uint64_t rep = 0; rep < replicas; ++rep) {
    WormCloud cloud = generate_worm_cloud(window, v, dist, master_seed, rep, cparams);
    ClusterLabels labels(trace(cloud));
    if (crossing(labels, 0)) ++est.crossings;
  }
  est.ci = wilson_interval(est.crossings, replicas);
  return est;
}

struct SweepResult {
  std::vector<CrossingEstimate> trace;  // bisection evaluations in order
  double v_lo = 0, v_hi = 0;            // final bracket
  bool budget_exhausted = false;
};

// Bisect v until the Wilson CI at the midpoint excludes `target` or the
// replica budget runs out. Crossing probability is monotone in v thanks to
// the level coupling, so bisection is sound replica-by-replica.
inline SweepResult vc_bisection(const WormModel& model, double v_lo, double v_hi,
                                std::uint64_t replicas_per_point, int max_rounds,
                                std::uint64_t master_seed, double target = 0.5) {
  SweepResult res;
  // widen until the initial interval brackets the target
  for (int tries = 0; tries < 8; ++tries) {
    CrossingEstimate hi = estimate_crossing_prob(model, v_hi, replicas_per_point, master_seed);
    res.trace.push_back(hi);
    if (hi.estimate() >= target) break;
    v_hi *= 2;
    if (tries == 7) throw std::runtime_error("vc_bisection: failed to bracket target");
  }
  for (int round = 0; round < max_rounds; ++round) {
    double mid = 0.5 * (v_lo + v_hi);
    CrossingEstimate est = estimate_crossing_prob(model, mid, replicas_per_point,
                                                  master_seed + 1 + static_cast<std::uint64_t>(round));
    res.trace.push_back(est);
    if (est.ci.lo > target) v_hi = mid;
    else if (est.ci.hi < target) v_lo = mid;
    else {
      // CI straddles the target: stop, the midpoint is our best bracket center
      res.v_lo = v_lo;
      res.v_hi = v_hi;
      return res;
    }
  }
  res.v_lo = v_lo;
  res.v_hi = v_hi;
  res.budget_exhausted = true;
  return res;
}

// ---------------------------------------------------------------------------
// Zoo-distance exploration of the origin's cluster
// ---------------------------------------------------------------------------

struct ExploreResult {
  std::vector<std::uint32_t> layer_animal_counts;  // animals per zoo-distance layer
  std::uint64_t total_animals = 0;
  PointSet cluster_sites;
  bool budget_hit = false;
};

// BFS over animal instances: layer 1 = animals whose trace contains the
// origin; layer k+1 = unexplored animals whose trace meets the closure
// (trace + exterior boundary) of the layer-k traces.
template <class TraceFn>
ExploreResult explore_cluster_generic(int d, std::size_t n_animals, TraceFn&& trace_of,
                                      const Coord& origin_site, std::uint64_t budget) {
  ExploreResult res;
  res.cluster_sites = PointSet(d);
  // site -> animal ids index
  PointSet site_index(d);
  std::vector<std::vector<std::uint32_t>> site_animals;
  for (std::size_t a = 0; a < n_animals; ++a) {
    for (const Coord& c : trace_of(a)) {
      if (site_index.insert(c)) site_animals.push_back({static_cast<std::uint32_t>(a)});
      else site_animals[static_cast<std::size_t>(site_index.index_of(c))].push_back(
          static_cast<std::uint32_t>(a));
    }
  }
  std::vector<char> used(n_animals, 0);
  std::vector<std::uint32_t> frontier;
  {
    std::int32_t i = site_index.index_of(origin_site);
    if (i >= 0)
      for (std::uint32_t a : site_animals[static_cast<std::size_t>(i)])
        if (!used[a]) {
          used[a] = 1;
          frontier.push_back(a);
        }
  }
  while (!frontier.empty()) {
    res.layer_animal_counts.push_back(static_cast<std::uint32_t>(frontier.size()));
    res.total_animals += frontier.size();
    if (res.total_animals > budget) {
      res.budget_hit = true;
      break;
    }
    // collect the closure of this layer's traces, find touching animals
    std::vector<std::uint32_t> next;
    auto consider = [&](const Coord& c) {
      std::int32_t i = site_index.index_of(c);
      if (i < 0) return;
      for (std::uint32_t a : site_animals[static_cast<std::size_t>(i)])
        if (!used[a]) {
          used[a] = 1;
          next.push_back(a);
        }
    };
    for (std::uint32_t a : frontier) {
      for (const Coord& c : trace_of(a)) {
        res.cluster_sites.insert(c);
        consider(c);
        for (int i = 0; i < d; ++i) {
          for (int step : {1, -1}) {
            Coord n = c;
            n[i] += step;
            consider(n);
          }
        }
      }
    }
    frontier = std::move(next);
  }
  return res;
}

inline ExploreResult explore_cluster_of_origin(const WormCloud& cloud, std::uint64_t budget) {
  const BoxGeometry& g = cloud.window;
  bool wrap = cloud.policy == CloudPolicy::TorusWrap;
  std::vector<std::vector<Coord>> traces(cloud.worms.size());
  for (std::size_t i = 0; i < cloud.worms.size(); ++i) {
    PointSet range(g.d);
    cloud.worms[i].traj.for_each_site([&](const Coord& c, std::uint64_t) {
      Coord site = wrap ? g.coord_of(g.index_of(c)) : c;
      if (!wrap && !g.in_window(site)) return;
      range.insert(site);
    });
    traces[i] = range.items();
  }
  Coord origin_site = g.coord_of(g.index_of(Coord{}));
  return explore_cluster_generic(
      g.d, traces.size(), [&](std::size_t a) -> const std::vector<Coord>& { return traces[a]; },
      origin_site, budget);
}

inline ExploreResult explore_cluster_of_origin(const ZooCloud& cloud, std::uint64_t budget) {
  const BoxGeometry& g = cloud.window;
  std::vector<std::vector<Coord>> traces(cloud.animals.size());
  for (std::size_t i = 0; i < cloud.animals.size(); ++i) {
    const auto& rec = cloud.animals[i];
    for (const Coord& off : cloud.menu[rec.animal].shape) {
      Coord c = add(rec.root, off, g.d);
      traces[i].push_back(g.coord_of(g.index_of(c)));
    }
  }
  Coord origin_site = g.coord_of(g.index_of(Coord{}));
  return explore_cluster_generic(
      g.d, traces.size(), [&](std::size_t a) -> const std::vector<Coord>& { return traces[a]; },
      origin_site, budget);
}

// ---------------------------------------------------------------------------
// Target shooting with a boomerang
// ---------------------------------------------------------------------------

struct TargetShootingConfig {
  int d = 5;
  int R = 2;
  int beta = 512;
  double v = 0.1;
  Coord y;  // box center
};

struct TargetShootingResult {
  double poisson_param = 0;    // estimated E[X(B[y,H])]
  double param_stderr = 0;
  double tail_prob = 0;        // P(L >= (2 beta + 1) R^2)
  double empirical_hit = 0;    // fraction of cloud replicas with >= 1 boomerang worm
  double empirical_stderr = 0;
  std::uint64_t start_samples = 0;
  std::uint64_t cloud_replicas = 0;
};

// The boomerang event examines only the first 2 beta R^2 steps, and every
// worm in B[y] is longer than that, so the Poisson parameter factorizes as
// v * P(L >= (2b+1)R^2) * sum_x q(x) with q the back-and-forth probability.
template <class SetT>
TargetShootingResult target_shooting_estimate(const TargetShootingConfig& cfg, const SetT& H,
                                              const LengthDistribution& dist,
                                              std::uint64_t param_samples,
                                              std::uint64_t cloud_replicas,
                                              std::uint64_t master_seed) {
  TargetShootingResult res;
  const int d = cfg.d;
  double r2 = static_cast<double>(cfg.R) * cfg.R;
  double len_cut = (2.0 * cfg.beta + 1.0) * r2;
  res.tail_prob = dist.tail_mass(len_cut);
  std::uint64_t beta_window = static_cast<std::uint64_t>(cfg.beta * r2);

  BallSet start_box{cfg.y, 2 * cfg.R, d};
  BallSet return_box{cfg.y, cfg.R, d};

  auto run_boomerang = [&](RngStream& rng, const Coord& start) {
    Walker w;
    w.reset(start, cfg.y, d);
    bool hit_H = H.contains(start);
    std::uint64_t t = 0;
    while (!hit_H && t < beta_window) {
      w.step(rng);
      ++t;
      if (H.contains(w.pos)) hit_H = true;
    }
    if (!hit_H) return false;
    if (w.norm <= return_box.radius) return true;  // already back (entrance at 0)
    std::uint64_t t2 = 0;
    while (t2 < beta_window) {
      w.step(rng);
      ++t2;
      if (w.norm <= return_box.radius) return true;
    }
    return false;
  };

  // (a) Poisson parameter by MC over uniform starts in ball(y, 2R)
  {
    RngStream rng = derive_stream(master_seed, StreamTag::Percolation, 0, 0xB00);
    detail::MeanAcc acc;
    for (std::uint64_t s = 0; s < param_samples; ++s) {
      Coord start = cfg.y;
      for (int i = 0; i < d; ++i)
        start[i] += static_cast<std::int32_t>(
                        rng.below(static_cast<std::uint64_t>(4 * cfg.R + 1))) -
                    2 * cfg.R;
      acc.add(run_boomerang(rng, start) ? 1.0 : 0.0);
    }
    res.poisson_param = cfg.v * res.tail_prob * start_box.num_sites() * acc.mean();
    res.param_stderr = cfg.v * res.tail_prob * start_box.num_sites() * acc.stderr_();
    res.start_samples = param_samples;
  }

  // (b) empirical: sample clouds of candidate worms, test for >= 1 member
  {
    detail::MeanAcc acc;
    double mean_count = cfg.v * res.tail_prob * start_box.num_sites();
    for (std::uint64_t rep = 0; rep < cloud_replicas; ++rep) {
      RngStream rng = derive_stream(master_seed, StreamTag::Percolation, rep + 1, 0xB01);
      std::uint64_t n_worms = rng.poisson(mean_count);
      bool any = false;
      for (std::uint64_t k = 0; k < n_worms && !any; ++k) {
        Coord start = cfg.y;
        for (int i = 0; i < d; ++i)
          start[i] += static_cast<std::int32_t>(
                          rng.below(static_cast<std::uint64_t>(4 * cfg.R + 1))) -
                      2 * cfg.R;
        if (run_boomerang(rng, start)) any = true;
      }
      acc.add(any ? 1.0 : 0.0);
    }
    res.empirical_hit = acc.mean();
    res.empirical_stderr = acc.stderr_();
    res.cloud_replicas = cloud_replicas;
  }
  return res;
}

}  // namespace wormlab
