#pragma once

// Poisson clouds of worms and general Poisson-zoo animals over a finite
// window. Per start site the worm count is Poisson(v); worm j at a site is
// tagged with its arrival level Gamma_j (a unit-rate Poisson process in the
// intensity), so clouds generated from one seed are monotone-coupled across
// intensities: the level-v cloud is exactly the worms with level <= v.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "wormlab/lattice.hpp"
#include "wormlab/lengths.hpp"
#include "wormlab/rng.hpp"
#include "wormlab/walk.hpp"

namespace wormlab {

enum class CloudPolicy { TorusWrap, PaddedWindow };

struct WormRecord {
  Trajectory traj;
  double level = 0;  // arrival level in the intensity coordinate
};

struct WormCloud {
  BoxGeometry window;        // observation window
  BoxGeometry generation;    // where starts are laid down (window, or padded)
  CloudPolicy policy = CloudPolicy::TorusWrap;
  double intensity = 0;
  std::uint64_t master_seed = 0;
  std::uint64_t replica = 0;
  std::vector<WormRecord> worms;
  double truncated_mass = 0;  // tail mass cut off by the sampling cap
};

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

struct CloudParams {
  CloudPolicy policy = CloudPolicy::TorusWrap;
  int margin = 0;  // PaddedWindow: generation box exceeds the window by this
};

inline WormCloud generate_worm_cloud(const BoxGeometry& window, double v,
                                     const LengthDistribution& dist,
                                     std::uint64_t master_seed, std::uint64_t replica,
                                     const CloudParams& params = {}) {
  if (v < 0) throw std::invalid_argument("generate_worm_cloud: v must be >= 0");
  if (params.policy == CloudPolicy::TorusWrap && window.boundary != BoundaryKind::Torus)
    throw std::invalid_argument("TorusWrap policy requires a Torus window");
  WormCloud cloud;
  cloud.window = window;
  cloud.policy = params.policy;
  cloud.intensity = v;
  cloud.master_seed = master_seed;
  cloud.replica = replica;
  cloud.truncated_mass = dist.truncated_mass();
  if (params.policy == CloudPolicy::PaddedWindow) {
    BoxGeometry gen = window;
    gen.side = window.side + 2 * params.margin;
    for (int i = 0; i < gen.d; ++i) gen.lo[i] = window.lo[i] - params.margin;
    gen.boundary = BoundaryKind::Free;
    cloud.generation = gen;
  } else {
    cloud.generation = window;
  }
  std::int64_t n_sites = cloud.generation.num_sites();
  for (std::int64_t idx = 0; idx < n_sites; ++idx) {
    RngStream site_rng = derive_stream(master_seed, StreamTag::Worms, replica,
                                       static_cast<std::uint64_t>(idx));
    double level = site_rng.exponential();
    while (level <= v) {
      std::uint64_t len = dist.sample(site_rng);
      Trajectory traj = simulate_walk(cloud.generation.coord_of(idx), len - 1,
                                      window.d, site_rng);
      cloud.worms.push_back({std::move(traj), level});
      level += site_rng.exponential();
    }
  }
  return cloud;
}

// Worms alive at a sub-intensity of the generated cloud (monotone coupling).
inline bool worm_alive(const WormRecord& w, double v_sub) { return w.level <= v_sub; }

// Length scale that covers all but ~1e-12 of the law (the truncation cap for
// capped laws, a deep quantile for the geometric family).
inline std::uint64_t reference_length(const LengthDistribution& dist) {
  std::uint64_t cap = dist.effective_cap();
  if (cap > 0) return cap;
  // uncapped geometric: P(L > t) = (1-p)^t < 1e-12
  double p = 1.0 / dist.spec().mean_t;
  return static_cast<std::uint64_t>(std::ceil(-std::log(1e-12) / -std::log1p(-p))) + 1;
}

// Default PaddedWindow margin: min(cap, ceil(4 sqrt(cap))).
inline int default_padding_margin(const LengthDistribution& dist) {
  double ref = static_cast<double>(reference_length(dist));
  double m = std::min(ref, std::ceil(4.0 * std::sqrt(ref)));
  return static_cast<int>(m);
}

// Displacement-bound certificate for a padded generation box: an upper bound
// on the expected number of worms that start outside the padded box yet visit
// the observation window, via P(max displacement >= k) <= 2d exp(-k^2 / 2L).
inline double neglected_mass_bound(const BoxGeometry& window, double v,
                                   const LengthDistribution& dist, int margin) {
  int d = window.d;
  double ref = static_cast<double>(reference_length(dist));
  double per_site_face = 1;
  for (int i = 0; i + 1 < d; ++i) per_site_face *= static_cast<double>(window.side) + 2.0 * margin;
  double bound = 0;
  for (int k = margin + 1; k < margin + 1 + static_cast<int>(20.0 * std::sqrt(ref)); ++k) {
    double shell = 2.0 * d * per_site_face;  // crude outer-shell count at distance k
    double reach = 2.0 * d * std::exp(-static_cast<double>(k) * k / (2.0 * ref));
    bound += v * shell * std::min(1.0, reach);
    if (shell * reach < 1e-16) break;
  }
  return bound;
}

// ---------------------------------------------------------------------------
// Trace and local time
// ---------------------------------------------------------------------------

// Union of worm ranges over the observation window. TorusWrap folds every
// visit onto the torus; PaddedWindow records only visits inside the window.
inline SiteSet trace(const WormCloud& cloud, double v_sub = -1) {
  double level_cut = v_sub < 0 ? cloud.intensity : v_sub;
  SiteSet grid(cloud.window);
  for (const auto& w : cloud.worms) {
    if (!worm_alive(w, level_cut)) continue;
    w.traj.for_each_site([&](const Coord& c, std::uint64_t) {
      if (cloud.policy == CloudPolicy::TorusWrap || cloud.window.in_window(c))
        grid.set_coord(c);
    });
  }
  return grid;
}

struct LocalTimeMeasure {
  PointSet support;
  std::vector<std::uint64_t> count;
  std::uint64_t total = 0;  // equals the summed worm lengths (unclipped)

  std::uint64_t at(const Coord& c) const {
    std::int32_t i = support.index_of(c);
    return i < 0 ? 0 : count[static_cast<std::size_t>(i)];
  }
};

inline LocalTimeMeasure local_time(const WormCloud& cloud) {
  LocalTimeMeasure lt;
  lt.support = PointSet(cloud.window.d);
  bool wrap = cloud.policy == CloudPolicy::TorusWrap;
  for (const auto& w : cloud.worms) {
    w.traj.for_each_site([&](const Coord& c, std::uint64_t) {
      Coord site = wrap ? cloud.window.coord_of(cloud.window.index_of(c)) : c;
      if (lt.support.insert(site)) lt.count.push_back(1);
      else ++lt.count[static_cast<std::size_t>(lt.support.index_of(site))];
    });
    lt.total += w.traj.length();
  }
  return lt;
}

// ---------------------------------------------------------------------------
// Deterministic worm enumeration (Campbell-formula oracles)
// ---------------------------------------------------------------------------

// A worm with its intensity weight v * m(L) * (2d)^{1-L}.
struct WeightedWorm {
  std::vector<Coord> sites;
  double weight = 0;
};

// Every worm starting in `starts` with length <= max_len, with its intensity
// measure weight. Exhaustive: (2d)^{max_len-1} paths per start and length.
inline std::vector<WeightedWorm> enumerate_worms(const std::vector<Coord>& starts, int d,
                                                 std::uint64_t max_len,
                                                 const LengthDistribution& dist, double v) {
  std::vector<WeightedWorm> out;
  for (const Coord& s : starts) {
    for (std::uint64_t len = 1; len <= max_len; ++len) {
      double m = dist.pmf(len);
      if (m <= 0) continue;
      double path_weight = v * m * std::pow(1.0 / (2 * d), static_cast<double>(len - 1));
      std::vector<Coord> sites(len);
      sites[0] = s;
      // iterate over all (2d)^{len-1} direction words
      std::uint64_t n_words = 1;
      for (std::uint64_t i = 1; i < len; ++i) n_words *= static_cast<std::uint64_t>(2 * d);
      for (std::uint64_t word = 0; word < n_words; ++word) {
        std::uint64_t wrem = word;
        for (std::uint64_t t = 1; t < len; ++t) {
          unsigned dir = static_cast<unsigned>(wrem % (2 * d));
          wrem /= static_cast<std::uint64_t>(2 * d);
          Coord c = sites[t - 1];
          c[static_cast<int>(dir >> 1)] += (dir & 1) ? 1 : -1;
          sites[t] = c;
        }
        out.push_back({sites, path_weight});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Campbell-formula comparisons
// ---------------------------------------------------------------------------

enum class CampbellOrder { Mean, Variance, Bilinear };

struct CampbellReport {
  double empirical = 0;
  double empirical_stderr = 0;
  double reference = 0;   // deterministic evaluation of the formula
  double z = 0;           // (empirical - reference) / stderr
  std::uint64_t replicas = 0;
};

// Empirical moment of sum_i f(w_i) (or the bilinear sum over ordered pairs)
// across fresh clouds, against the deterministic reference. The reference is
// the caller's job for Variance/Bilinear-specific formulas; for Mean it can
// come from enumerate_worms.
template <class F>
CampbellReport campbell_estimate(const BoxGeometry& window, double v,
                                 const LengthDistribution& dist, const CloudParams& params,
                                 std::uint64_t replicas, std::uint64_t master_seed,
                                 F&& per_worm, CampbellOrder order, double reference) {
  std::vector<double> values;
  values.reserve(replicas);
  for (std::uint64_t rep = 0; rep < replicas; ++rep) {
    WormCloud cloud = generate_worm_cloud(window, v, dist, master_seed, rep, params);
    if (order == CampbellOrder::Bilinear) {
      double sum = 0;
      for (const auto& a : cloud.worms)
        for (const auto& b : cloud.worms) sum += per_worm(a.traj, b.traj);
      values.push_back(sum);
    } else {
      double sum = 0;
      for (const auto& w : cloud.worms) sum += per_worm(w.traj, w.traj);
      values.push_back(sum);
    }
  }
  double mean = 0;
  for (double x : values) mean += x;
  mean /= static_cast<double>(values.size());
  double var = 0;
  for (double x : values) var += (x - mean) * (x - mean);
  var /= static_cast<double>(values.size() - 1);

  CampbellReport rep;
  rep.replicas = replicas;
  rep.reference = reference;
  if (order == CampbellOrder::Variance) {
    rep.empirical = var;
    // crude stderr of a sample variance assuming near-normal fluctuation
    rep.empirical_stderr = var * std::sqrt(2.0 / static_cast<double>(replicas - 1));
  } else {
    rep.empirical = mean;
    rep.empirical_stderr = std::sqrt(var / static_cast<double>(replicas));
  }
  rep.z = rep.empirical_stderr > 0 ? (rep.empirical - rep.reference) / rep.empirical_stderr
                                   : 0.0;
  return rep;
}

// ---------------------------------------------------------------------------
// Cloud dump (JSON-lines, one record per worm)
// ---------------------------------------------------------------------------

template <class Out>
void dump_cloud_jsonl(const WormCloud& cloud, Out& out) {
  for (const auto& w : cloud.worms) {
    out << "{\"start\":[";
    for (int i = 0; i < cloud.window.d; ++i)
      out << (i ? "," : "") << w.traj.start()[i];
    out << "],\"length\":" << w.traj.length() << ",\"dirs\":\"";
    static const char* hex = "0123456789abcdef";
    for (std::uint64_t t = 0; t < w.traj.steps(); ++t) out << hex[w.traj.dir_at(t)];
    out << "\",\"replica\":" << cloud.replica << ",\"seed\":" << cloud.master_seed << "}\n";
  }
}

// ---------------------------------------------------------------------------
// Poisson zoo with explicit animals
// ---------------------------------------------------------------------------

struct Animal {
  std::vector<Coord> shape;  // connected, contains the origin offset
  double prob = 0;           // nu(H)
};

struct ZooRecord {
  Coord root;
  std::uint32_t animal = 0;
  double level = 0;
};

struct ZooCloud {
  BoxGeometry window;
  std::vector<Animal> menu;
  double intensity = 0;
  std::vector<ZooRecord> animals;
};

inline ZooCloud generate_zoo_cloud(const BoxGeometry& window, double v,
                                   const std::vector<Animal>& menu,
                                   std::uint64_t master_seed, std::uint64_t replica) {
  double total = 0;
  for (const auto& a : menu) total += a.prob;
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("zoo menu probabilities must sum to 1");
  ZooCloud cloud;
  cloud.window = window;
  cloud.menu = menu;
  cloud.intensity = v;
  std::int64_t n_sites = window.num_sites();
  for (std::int64_t idx = 0; idx < n_sites; ++idx) {
    RngStream site_rng = derive_stream(master_seed, StreamTag::Worms, replica,
                                       static_cast<std::uint64_t>(idx) | (1ULL << 62));
    double level = site_rng.exponential();
    while (level <= v) {
      double u = site_rng.uniform();
      std::uint32_t pick = 0;
      double cum = 0;
      for (std::size_t a = 0; a < menu.size(); ++a) {
        cum += menu[a].prob;
        if (u < cum) {
          pick = static_cast<std::uint32_t>(a);
          break;
        }
      }
      cloud.animals.push_back({window.coord_of(idx), pick, level});
      level += site_rng.exponential();
    }
  }
  return cloud;
}

inline SiteSet zoo_trace(const ZooCloud& cloud) {
  SiteSet grid(cloud.window);
  for (const auto& rec : cloud.animals)
    for (const auto& off : cloud.menu[rec.animal].shape)
      grid.set_coord(add(rec.root, off, cloud.window.d));
  return grid;
}

}  // namespace wormlab
