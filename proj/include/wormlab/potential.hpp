#pragma once

// Discrete potential theory for d >= 3: Green function estimates, equilibrium
// measures, capacity (equilibrium-mass, energy-lower-bound and
// hitting-inversion estimators), Dirichlet energy on a precomputed Green
// table, trimming, hitting probabilities with analytic remainders, hitting
// sums over far starting points, and sub-box visit statistics.
//
// Escape to infinity is unobservable; a walk is declared escaped when it
// leaves ball(start, radius) without re-hitting K. The resulting upward bias
// is bounded through the far-field Green envelope and reported next to the
// statistical error. Dimension-dependent envelope constants are calibrated
// per process (fixed internal seeds), never hard-coded.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "wormlab/points.hpp"
#include "wormlab/rng.hpp"
#include "wormlab/walk.hpp"

namespace wormlab {

namespace detail {

struct MeanAcc {
  double sum = 0, sum2 = 0;
  std::uint64_t n = 0;
  void add(double v) { sum += v; sum2 += v * v; ++n; }
  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
  double stderr_() const {
    if (n < 2) return 0.0;
    double m = mean();
    double var = sum2 / static_cast<double>(n) - m * m;
    return var > 0 ? std::sqrt(var / static_cast<double>(n)) : 0.0;
  }
};

}  // namespace detail

inline void require_transient(int d) {
  if (d < 3) throw std::invalid_argument("potential theory needs d >= 3 (Green function diverges)");
}

// ---------------------------------------------------------------------------
// Far-field envelope: an empirical constant C(d) with
// g(x,y) <~ C(d) * (|x-y| + 1)^{2-d}, calibrated once per dimension.
// ---------------------------------------------------------------------------

inline double green_envelope_constant(int d) {
  require_transient(d);
  static std::mutex mu;
  static std::map<int, double> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(d);
  if (it != cache.end()) return it->second;

  RngStream rng = derive_stream(0xCA11B8A7E5EEDULL, StreamTag::Oracle, static_cast<std::uint64_t>(d));
  double best = 0.0;
  for (int r : {0, 3, 6, 12}) {
    Coord target;
    target[0] = r;
    int cutoff = std::max(48, 16 * r);
    std::uint64_t walks = 30000;
    detail::MeanAcc acc;
    Walker w;
    for (std::uint64_t i = 0; i < walks; ++i) {
      w.reset(Coord{}, Coord{}, d);
      double visits = (r == 0) ? 1.0 : 0.0;
      while (w.norm <= cutoff) {
        w.step(rng);
        if (w.pos == target) visits += 1.0;
      }
      acc.add(visits);
    }
    double c = acc.mean() * std::pow(static_cast<double>(r) + 1.0, d - 2);
    best = std::max(best, c);
  }
  double env = 1.6 * best;
  cache[d] = env;
  return env;
}

inline double led_return_bound(int d, double cap_upper, double clearance) {
  if (clearance < 0) clearance = 0;
  double b = cap_upper * green_envelope_constant(d) * std::pow(clearance + 1.0, 2 - d);
  return std::min(1.0, std::max(0.0, b));
}

// ---------------------------------------------------------------------------
// Green function
// ---------------------------------------------------------------------------

enum class GreenMethod { MonteCarloVisits, ExactSmallBox };

struct GreenEstimate {
  double value = 0;
  double stderr_ = 0;     // statistical
  double bias_bound = 0;  // analytic beyond-cutoff remainder
  GreenMethod method = GreenMethod::MonteCarloVisits;
  std::uint64_t walks = 0;
  int cutoff = 0;
};

struct GreenParams {
  std::uint64_t walks = 100000;
  int cutoff = 0;  // 0 = auto
};

// Expected visits to y by a walk from x, truncated at exit of
// ball(x, cutoff); the post-exit contribution is <= env * clearance^{2-d}.
inline GreenEstimate green_mc(const Coord& x, const Coord& y, int d,
                              const GreenParams& params, RngStream& rng) {
  require_transient(d);
  int dist = sup_dist(x, y, d);
  int cutoff = params.cutoff > 0 ? params.cutoff : std::max(64, 8 * (dist + 1));
  if (cutoff <= dist) throw std::invalid_argument("green_mc: cutoff must exceed |x-y|");
  detail::MeanAcc acc;
  Walker w;
  bool same = x == y;
  for (std::uint64_t i = 0; i < params.walks; ++i) {
    w.reset(x, x, d);
    double visits = same ? 1.0 : 0.0;
    while (w.norm <= cutoff) {
      w.step(rng);
      if (same ? (w.norm == 0) : (w.pos == y)) visits += 1.0;
    }
    acc.add(visits);
  }
  GreenEstimate est;
  est.value = acc.mean();
  est.stderr_ = acc.stderr_();
  est.bias_bound = green_envelope_constant(d) *
                   std::pow(static_cast<double>(cutoff - dist) + 1.0, 2 - d);
  est.method = GreenMethod::MonteCarloVisits;
  est.walks = params.walks;
  est.cutoff = cutoff;
  return est;
}

// Deterministic partial sum of p_t(x,y) for t <= t_steps plus an analytic
// tail bound folded into bias_bound. Only sensible for small boxes/times.
inline GreenEstimate green_exact_small(const Coord& x, const Coord& y, int d, int t_steps) {
  require_transient(d);
  PointSet cur_idx(d);
  std::vector<double> cur_p{1.0};
  cur_idx.insert(Coord{});
  Coord target = sub(y, x, d);
  double total = (target == Coord{}) ? 1.0 : 0.0;
  double hk_const = 0.0;
  for (int t = 1; t <= t_steps; ++t) {
    PointSet next_idx(d);
    std::vector<double> next_p;
    double w = 1.0 / (2 * d);
    for (std::size_t k = 0; k < cur_idx.items().size(); ++k) {
      const Coord& c = cur_idx.items()[k];
      double p = cur_p[k] * w;
      for (int i = 0; i < d; ++i) {
        Coord up = c, dn = c;
        up[i] += 1;
        dn[i] -= 1;
        for (const Coord& n : {up, dn}) {
          if (next_idx.insert(n)) next_p.push_back(p);
          else next_p[static_cast<std::size_t>(next_idx.index_of(n))] += p;
        }
      }
    }
    cur_idx = std::move(next_idx);
    cur_p = std::move(next_p);
    std::int32_t ti = cur_idx.index_of(target);
    if (ti >= 0) total += cur_p[static_cast<std::size_t>(ti)];
    double pmax = 0;
    for (double p : cur_p) pmax = std::max(pmax, p);
    hk_const = std::max(hk_const, pmax * std::pow(static_cast<double>(t), d / 2.0));
  }
  GreenEstimate est;
  est.value = total;
  est.method = GreenMethod::ExactSmallBox;
  est.cutoff = t_steps;
  // sum_{t>T} p_t <= C_hk * T^{1-d/2} / (d/2 - 1)
  est.bias_bound = 1.25 * hk_const * std::pow(static_cast<double>(t_steps), 1.0 - d / 2.0) /
                   (d / 2.0 - 1.0);
  return est;
}

// ---------------------------------------------------------------------------
// Green tables (shared-walk visit counting) and Dirichlet energy
// ---------------------------------------------------------------------------

struct GreenTable {
  int d = 3;
  PointSet index;            // site -> row
  std::vector<Coord> sites;
  std::vector<double> g;        // row-major n*n, symmetrized
  std::vector<double> g_stderr;

  double at(const Coord& a, const Coord& b) const {
    std::int32_t i = index.index_of(a), j = index.index_of(b);
    if (i < 0 || j < 0) throw std::out_of_range("GreenTable: missing entry");
    return g[static_cast<std::size_t>(i) * sites.size() + static_cast<std::size_t>(j)];
  }
};

// One batch of walks per source site, each counting visits to every table
// site; estimates are symmetrized afterwards.
inline GreenTable build_green_table(const std::vector<Coord>& sites, int d,
                                    const GreenParams& params, RngStream& rng) {
  require_transient(d);
  GreenTable table;
  table.d = d;
  table.index = PointSet(d);
  table.sites = sites;
  for (const auto& c : sites) table.index.insert(c);
  std::size_t n = sites.size();
  table.g.assign(n * n, 0.0);
  table.g_stderr.assign(n * n, 0.0);

  int diam = 0;
  for (const auto& a : sites)
    for (const auto& b : sites) diam = std::max(diam, sup_dist(a, b, d));
  int cutoff = params.cutoff > 0 ? params.cutoff : std::max(64, 8 * (diam + 1));

  std::vector<double> sum(n), sum2(n), visits(n);
  Walker w;
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(sum2.begin(), sum2.end(), 0.0);
    for (std::uint64_t k = 0; k < params.walks; ++k) {
      std::fill(visits.begin(), visits.end(), 0.0);
      w.reset(sites[i], sites[i], d);
      visits[i] = 1.0;
      while (w.norm <= cutoff) {
        w.step(rng);
        std::int32_t j = table.index.index_of(w.pos);
        if (j >= 0) visits[static_cast<std::size_t>(j)] += 1.0;
      }
      for (std::size_t j = 0; j < n; ++j) {
        sum[j] += visits[j];
        sum2[j] += visits[j] * visits[j];
      }
    }
    double nw = static_cast<double>(params.walks);
    for (std::size_t j = 0; j < n; ++j) {
      double m = sum[j] / nw;
      double var = sum2[j] / nw - m * m;
      table.g[i * n + j] = m;
      table.g_stderr[i * n + j] = var > 0 ? std::sqrt(var / nw) : 0.0;
    }
  }
  // symmetrize
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double m = 0.5 * (table.g[i * n + j] + table.g[j * n + i]);
      table.g[i * n + j] = table.g[j * n + i] = m;
      double s = 0.5 * std::sqrt(table.g_stderr[i * n + j] * table.g_stderr[i * n + j] +
                                 table.g_stderr[j * n + i] * table.g_stderr[j * n + i]);
      table.g_stderr[i * n + j] = table.g_stderr[j * n + i] = s;
    }
  return table;
}

// A finite site measure with an explicit scalar prefactor. Keeping the scale
// outside the atoms makes the bilinear identities of the energy hold exactly
// in floating point: scaling multiplies the result by (a*a), and the
// accumulation below is literally symmetric in its two arguments.
struct SiteMeasure {
  std::vector<std::pair<Coord, double>> atoms;
  double scale = 1.0;
  double total() const {
    double t = 0;
    for (const auto& a : atoms) t += a.second;
    return t * scale;
  }
};

inline SiteMeasure scaled(const SiteMeasure& mu, double a) {
  SiteMeasure out = mu;
  out.scale = mu.scale * a;
  return out;
}

// E(mu1, mu2) = sum_x sum_y g(x,y) mu1(x) mu2(y), deterministic given the
// table. Terms are grouped per unordered site pair, so swapping the
// arguments reproduces the same result bit for bit, and the scales multiply
// the double sum at the end.
inline double dirichlet_energy(const SiteMeasure& mu1, const SiteMeasure& mu2,
                               const GreenTable& table) {
  std::size_t n = table.sites.size();
  std::vector<double> w1(n, 0.0), w2(n, 0.0);
  auto project = [&](const SiteMeasure& mu, std::vector<double>& w) {
    for (const auto& [x, m] : mu.atoms) {
      std::int32_t i = table.index.index_of(x);
      if (i < 0) throw std::out_of_range("GreenTable: missing entry");
      w[static_cast<std::size_t>(i)] += m;
    }
  };
  project(mu1, w1);
  project(mu2, w2);
  double e = 0;
  for (std::size_t i = 0; i < n; ++i) {
    e += table.g[i * n + i] * (w1[i] * w2[i]);
    for (std::size_t j = i + 1; j < n; ++j)
      e += table.g[i * n + j] * (w1[i] * w2[j] + w1[j] * w2[i]);
  }
  return (mu1.scale * mu2.scale) * e;
}

inline double dirichlet_energy(const SiteMeasure& mu, const GreenTable& table) {
  return dirichlet_energy(mu, mu, table);
}

// ---------------------------------------------------------------------------
// Equilibrium measure and capacity
// ---------------------------------------------------------------------------

struct EscapeParams {
  double rho = 64.0;             // escape radius multiplier on (diam+1)
  double radius_override = 0.0;  // explicit escape radius, beats rho if > 0
  std::uint64_t trials_per_site = 400;
  std::uint64_t total_trials = 0;  // if > 0, subsample this many boundary trials
};

enum class CapacityMethod { EquilibriumMass, EnergyLowerBound, HittingInversion };

struct CapacityEstimate {
  double value = 0;
  double stderr_ = 0;
  double bias_bound = 0;
  CapacityMethod method = CapacityMethod::EquilibriumMass;
  std::uint64_t trials = 0;
  double escape_radius = 0;
};

namespace detail {

// single no-return trial started at a boundary site of K
template <class SetT>
bool escape_trial(const SetT& K, const Coord& start, int d, int radius, RngStream& rng) {
  Walker w;
  w.reset(start, start, d);
  while (true) {
    w.step(rng);
    if (w.norm > radius) return true;
    if (K.contains(w.pos)) return false;
  }
}

}  // namespace detail

struct EquilibriumMeasure {
  std::vector<Coord> support;   // all sites of K
  std::vector<double> weight;   // escape-probability estimates, zero off the boundary
  std::vector<double> weight_stderr;
  double total_mass = 0;        // capacity estimate by construction
  double total_stderr = 0;
  double bias_bound = 0;
  double escape_radius = 0;
};

inline EquilibriumMeasure equilibrium_measure(const PointSet& K, int d,
                                              const EscapeParams& params, RngStream& rng) {
  require_transient(d);
  EquilibriumMeasure em;
  if (K.empty()) return em;
  int diam = K.diameter();
  int radius = params.radius_override > 0
                   ? static_cast<int>(params.radius_override)
                   : static_cast<int>(params.rho * (diam + 1));
  em.escape_radius = radius;
  auto bnd = K.interior_boundary();
  PointSet bnd_set = make_point_set(d, bnd);
  em.support.assign(K.items().begin(), K.items().end());
  em.weight.assign(K.size(), 0.0);
  em.weight_stderr.assign(K.size(), 0.0);
  double var_total = 0;
  for (std::size_t i = 0; i < em.support.size(); ++i) {
    if (!bnd_set.contains(em.support[i])) continue;  // interior: e == 0 exactly
    std::uint64_t esc = 0;
    for (std::uint64_t k = 0; k < params.trials_per_site; ++k)
      if (detail::escape_trial(K, em.support[i], d, radius, rng)) ++esc;
    double p = static_cast<double>(esc) / static_cast<double>(params.trials_per_site);
    double se = std::sqrt(std::max(p * (1 - p), 1e-12) / static_cast<double>(params.trials_per_site));
    em.weight[i] = p;
    em.weight_stderr[i] = se;
    em.total_mass += p;
    var_total += se * se;
  }
  em.total_stderr = std::sqrt(var_total);
  double clearance = radius - diam;
  em.bias_bound = led_return_bound(d, em.total_mass + 3 * em.total_stderr, clearance) *
                  em.total_mass;
  return em;
}

// Generic equilibrium-mass capacity over any set exposing contains(); the
// boundary view supplies boundary site count and sampling.
template <class SetT, class BoundaryView>
CapacityEstimate capacity_equilibrium_mass(const SetT& K, const BoundaryView& bview, int d,
                                           const EscapeParams& params, RngStream& rng) {
  require_transient(d);
  CapacityEstimate est;
  est.method = CapacityMethod::EquilibriumMass;
  double bcount = bview.count();
  if (bcount <= 0) return est;
  int diam = K.diameter();
  int radius = params.radius_override > 0
                   ? static_cast<int>(params.radius_override)
                   : static_cast<int>(params.rho * (diam + 1));
  est.escape_radius = radius;
  std::uint64_t trials = params.total_trials > 0
                             ? params.total_trials
                             : params.trials_per_site * static_cast<std::uint64_t>(bcount);
  std::uint64_t esc = 0;
  for (std::uint64_t k = 0; k < trials; ++k)
    if (detail::escape_trial(K, bview.sample(rng), d, radius, rng)) ++esc;
  double p = static_cast<double>(esc) / static_cast<double>(trials);
  est.value = bcount * p;
  est.stderr_ = bcount * std::sqrt(std::max(p * (1 - p), 1e-12) / static_cast<double>(trials));
  est.trials = trials;
  double clearance = radius - diam;
  est.bias_bound = led_return_bound(d, est.value + 3 * est.stderr_, clearance) * est.value;
  return est;
}

struct PointsBoundary {
  std::vector<Coord> sites;
  explicit PointsBoundary(const PointSet& K) : sites(K.interior_boundary()) {}
  double count() const { return static_cast<double>(sites.size()); }
  Coord sample(RngStream& rng) const {
    return sites[static_cast<std::size_t>(rng.below(sites.size()))];
  }
};

struct BallBoundary {
  BallSet ball;
  double count() const { return ball.shell_sites(); }
  Coord sample(RngStream& rng) const { return ball.sample_shell(rng); }
};

inline CapacityEstimate capacity(const PointSet& K, int d, const EscapeParams& params,
                                 RngStream& rng) {
  if (K.empty()) return CapacityEstimate{};  // cap(empty) = 0 exactly
  return capacity_equilibrium_mass(K, PointsBoundary(K), d, params, rng);
}

inline CapacityEstimate capacity(const BallSet& ball, const EscapeParams& params,
                                 RngStream& rng) {
  return capacity_equilibrium_mass(ball, BallBoundary{ball}, ball.d, params, rng);
}

// 1/E(nu) for a probability measure nu on K (default: uniform); a lower bound
// on capacity up to table noise.
inline CapacityEstimate capacity_energy_lower_bound(const PointSet& K, const GreenTable& table,
                                                    const SiteMeasure* nu = nullptr) {
  CapacityEstimate est;
  est.method = CapacityMethod::EnergyLowerBound;
  if (K.empty()) return est;
  SiteMeasure uniform;
  if (!nu) {
    double w = 1.0 / static_cast<double>(K.size());
    for (const auto& c : K.items()) uniform.atoms.push_back({c, w});
    nu = &uniform;
  }
  double e = dirichlet_energy(*nu, table);
  if (e <= 0) throw std::invalid_argument("energy lower bound: non-positive energy");
  est.value = 1.0 / e;
  double var = 0;
  std::size_t n = table.sites.size();
  for (const auto& [x, wx] : nu->atoms)
    for (const auto& [y, wy] : nu->atoms) {
      std::size_t i = static_cast<std::size_t>(table.index.index_of(x));
      std::size_t j = static_cast<std::size_t>(table.index.index_of(y));
      double s = table.g_stderr[i * n + j] * wx * wy;
      var += s * s;
    }
  est.stderr_ = std::sqrt(var) / (e * e);
  return est;
}

// ---------------------------------------------------------------------------
// Hitting probability with analytic remainder
// ---------------------------------------------------------------------------

struct HittingParams {
  std::uint64_t walks = 50000;
  int far_radius = 0;  // 0 = auto
};

struct HittingEstimate {
  double value = 0;       // midpoint estimate of P_x(T_K < infinity)
  double stderr_ = 0;     // statistical
  double remainder_half = 0;  // analytic half-width (censored walks)
  double freq_hit = 0;
  std::uint64_t walks = 0;
};

template <class SetT>
HittingEstimate hitting_probability(const Coord& x, const SetT& K, std::uint64_t t_max,
                                    int d, const HittingParams& params, RngStream& rng,
                                    double cap_estimate) {
  require_transient(d);
  HittingEstimate est;
  est.walks = params.walks;
  if (K.contains(x)) {  // entrance-time convention
    est.value = 1.0;
    est.freq_hit = 1.0;
    return est;
  }
  int diam = K.diameter();
  int far = params.far_radius > 0 ? params.far_radius : std::max(64, 6 * (sup_norm(x, d) + diam + 1));
  std::uint64_t hits = 0;
  double censored_ub = 0;
  Walker w;
  for (std::uint64_t i = 0; i < params.walks; ++i) {
    w.reset(x, Coord{}, d);
    bool resolved = false;
    for (std::uint64_t t = 0; t < t_max; ++t) {
      w.step(rng);
      if (K.contains(w.pos)) {
        ++hits;
        resolved = true;
        break;
      }
      if (w.norm > far) {
        censored_ub += led_return_bound(d, cap_estimate, w.norm - diam);
        resolved = true;
        break;
      }
    }
    if (!resolved) censored_ub += 1.0;  // timed out inside the window
  }
  double nw = static_cast<double>(params.walks);
  est.freq_hit = static_cast<double>(hits) / nw;
  double ub = censored_ub / nw;
  est.value = est.freq_hit + 0.5 * ub;
  est.remainder_half = 0.5 * ub;
  est.stderr_ = std::sqrt(std::max(est.freq_hit * (1 - est.freq_hit), 1e-12) / nw);
  return est;
}

// ---------------------------------------------------------------------------
// Hitting sums (upper and lower lemma experiments)
// ---------------------------------------------------------------------------

enum class HittingSumMode { Upper, Lower };

struct HittingSumParams {
  std::uint64_t samples = 200000;
  double window_mult = 3.0;  // upper mode: starts sampled out to window_mult*sqrt(ell)
  // lower mode geometry
  int big_R = 0;
  double delta_low = 16.0;
  double delta_up = 0.25;
};

struct HittingSumResult {
  double value = 0;
  double stderr_ = 0;
  double remainder_bound = 0;  // upper mode: beyond-window analytic bound
  double ell = 0;
  std::uint64_t samples = 0;
};

// Upper mode: sum over |z| >= 4r of P_z(T_K <= ell), K inside ball(3r),
// ell >= 16 r^2. Shell-importance sampling with weight proportional to t.
template <class SetT>
HittingSumResult hitting_sum_upper(const SetT& K, double ell, int r, int d,
                                   const HittingSumParams& params, RngStream& rng,
                                   double cap_reference) {
  require_transient(d);
  if (ell < 16.0 * r * r)
    throw std::invalid_argument("hitting_sum upper mode requires ell >= 16 r^2");
  int t_lo = 4 * r;
  int t_hi = std::max(t_lo + 1, static_cast<int>(params.window_mult * std::sqrt(ell)));
  std::uint64_t steps_budget = static_cast<std::uint64_t>(ell);

  // shell sizes and the linear-in-t proposal
  std::vector<double> shell(static_cast<std::size_t>(t_hi - t_lo + 1));
  std::vector<double> q(shell.size());
  double qsum = 0;
  for (std::size_t i = 0; i < shell.size(); ++i) {
    double t = static_cast<double>(t_lo + static_cast<int>(i));
    double outer = 1, inner = 1;
    for (int k = 0; k < d; ++k) {
      outer *= 2 * t + 1;
      inner *= 2 * t - 1;
    }
    shell[i] = outer - inner;
    q[i] = t;
    qsum += q[i];
  }
  for (auto& v : q) v /= qsum;
  std::vector<double> qcum(q.size());
  double run = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    run += q[i];
    qcum[i] = run;
  }

  detail::MeanAcc acc;
  BallSet sampler{Coord{}, 0, d};
  Walker w;
  for (std::uint64_t s = 0; s < params.samples; ++s) {
    double u = rng.uniform();
    std::size_t idx = static_cast<std::size_t>(
        std::lower_bound(qcum.begin(), qcum.end(), u) - qcum.begin());
    if (idx >= q.size()) idx = q.size() - 1;
    sampler.radius = t_lo + static_cast<int>(idx);
    Coord z = sampler.sample_shell(rng);
    bool hit = K.contains(z);
    if (!hit) {
      w.reset(z, Coord{}, d);
      for (std::uint64_t t = 0; t < steps_budget; ++t) {
        w.step(rng);
        if (K.contains(w.pos)) {
          hit = true;
          break;
        }
      }
    }
    acc.add(hit ? shell[idx] / q[idx] : 0.0);
  }
  HittingSumResult res;
  res.value = acc.mean();
  res.stderr_ = acc.stderr_();
  res.ell = ell;
  res.samples = params.samples;
  // beyond-window remainder: Hoeffding displacement times LED from the window edge
  double remainder = 0;
  double sqell = std::sqrt(ell);
  for (int t = t_hi + 1; t < t_hi + 40 * static_cast<int>(sqell); ++t) {
    double outer = 1, inner = 1;
    for (int k = 0; k < d; ++k) {
      outer *= 2.0 * t + 1;
      inner *= 2.0 * t - 1;
    }
    double reach = 2.0 * d * std::exp(-(t - sqell) * (t - sqell) / (2.0 * ell));
    double led = std::min(1.0, cap_reference * green_envelope_constant(d) *
                                   std::pow(sqell - 3.0 * r + 1.0, 2 - d));
    remainder += (outer - inner) * std::min(1.0, reach * led);
    if ((outer - inner) * reach < 1e-14) break;
  }
  res.remainder_bound = remainder;
  return res;
}

// Lower mode: sum over the perforated start set G = ball(2R) minus the
// 4r-balls around the 10r-grid of P_z(T_K <= ell/3, walk stays in ball(3R)
// up to ell). Requires delta_low r^2 <= ell <= delta_up R^2. Starts are
// shell-importance-sampled (weight proportional to the shell radius) and
// rejected outside G, which keeps the estimator unbiased for the G-sum.
template <class SetT>
HittingSumResult hitting_sum_lower(const SetT& K, double ell, int r, int d,
                                   const HittingSumParams& params, RngStream& rng) {
  require_transient(d);
  int R = params.big_R;
  if (R <= 0) throw std::invalid_argument("hitting_sum lower mode requires big_R");
  if (ell < params.delta_low * r * r)
    throw std::invalid_argument("hitting_sum lower mode: ell < delta_low * r^2");
  if (ell > params.delta_up * static_cast<double>(R) * R)
    throw std::invalid_argument("hitting_sum lower mode: ell > delta_up * R^2");

  // z is in G iff |z| <= 2R and its sup-distance to the 10r-grid exceeds 4r
  auto in_G = [&](const Coord& z) {
    if (sup_norm(z, d) > 2 * R) return false;
    std::int32_t grid_dist = 0;
    for (int i = 0; i < d; ++i) {
      std::int32_t v = z[i] % (10 * r);
      if (v < 0) v += 10 * r;
      grid_dist = std::max(grid_dist, std::min(v, 10 * r - v));
    }
    return grid_dist > 4 * r;
  };

  int t_lo = 4 * r + 1;  // G clears the grid ball around the K-side grid point
  // starts beyond a few sqrt(ell) cannot reach K within ell/3 steps in any
  // relevant proportion; dropping them only under-reports the G-sum, which is
  // the conservative direction for a lower-bound experiment
  int t_hi = std::min(2 * R, static_cast<int>(params.window_mult * std::sqrt(ell)) + 4 * r + 1);
  if (t_hi <= t_lo) t_hi = t_lo + 1;
  std::vector<double> shell(static_cast<std::size_t>(t_hi - t_lo + 1));
  std::vector<double> q(shell.size());
  double qsum = 0;
  for (std::size_t i = 0; i < shell.size(); ++i) {
    double t = static_cast<double>(t_lo + static_cast<int>(i));
    double outer = 1, inner = 1;
    for (int k = 0; k < d; ++k) {
      outer *= 2 * t + 1;
      inner *= 2 * t - 1;
    }
    shell[i] = outer - inner;
    q[i] = t;
    qsum += q[i];
  }
  std::vector<double> qcum(q.size());
  double run = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    q[i] /= qsum;
    run += q[i];
    qcum[i] = run;
  }

  std::uint64_t ell_i = static_cast<std::uint64_t>(ell);
  std::uint64_t third = ell_i / 3;
  detail::MeanAcc acc;
  BallSet sampler{Coord{}, 0, d};
  Walker w;
  for (std::uint64_t s = 0; s < params.samples; ++s) {
    double u = rng.uniform();
    std::size_t idx = static_cast<std::size_t>(
        std::lower_bound(qcum.begin(), qcum.end(), u) - qcum.begin());
    if (idx >= q.size()) idx = q.size() - 1;
    sampler.radius = t_lo + static_cast<int>(idx);
    Coord z = sampler.sample_shell(rng);
    if (!in_G(z)) {
      acc.add(0.0);
      continue;
    }
    w.reset(z, Coord{}, d);
    bool hit_in_time = K.contains(z);
    bool stayed = true;
    for (std::uint64_t t = 0; t < ell_i; ++t) {
      w.step(rng);
      if (w.norm > 3 * R) {
        stayed = false;
        break;
      }
      if (!hit_in_time && t + 1 <= third && K.contains(w.pos)) hit_in_time = true;
    }
    acc.add(hit_in_time && stayed ? shell[idx] / q[idx] : 0.0);
  }
  HittingSumResult res;
  res.value = acc.mean();
  res.stderr_ = acc.stderr_();
  res.ell = ell;
  res.samples = params.samples;
  return res;
}

// ---------------------------------------------------------------------------
// Trimming: connected K' containing x with a <= cap(K') <= a+1
// ---------------------------------------------------------------------------

struct TrimParams {
  EscapeParams escape;
  std::uint64_t trials_floor = 1200;
};

// BFS ordering from x over K (axis order, FIFO), deterministic.
inline std::vector<Coord> bfs_order(const PointSet& K, const Coord& x, int d) {
  if (!K.contains(x)) throw std::invalid_argument("bfs_order: x not in K");
  std::vector<Coord> order{x};
  PointSet seen(d);
  seen.insert(x);
  std::size_t head = 0;
  while (head < order.size()) {
    Coord c = order[head++];
    for (int i = 0; i < d; ++i) {
      for (int step : {1, -1}) {
        Coord n = c;
        n[i] += step;
        if (K.contains(n) && seen.insert(n)) order.push_back(n);
      }
    }
  }
  if (order.size() != K.size())
    throw std::invalid_argument("trim_to_capacity: K is not connected");
  return order;
}

inline PointSet trim_to_capacity(const PointSet& K, const Coord& x, double a, int d,
                                 const TrimParams& params, RngStream& rng) {
  require_transient(d);
  if (a < 0) throw std::invalid_argument("trim_to_capacity: a must be >= 0");
  auto full = capacity(K, d, params.escape, rng);
  if (a > full.value + 3 * full.stderr_ + 1e-9)
    throw std::invalid_argument("trim_to_capacity: a exceeds cap(K)");
  auto order = bfs_order(K, x, d);
  PointSet prefix(d);
  for (std::size_t i = 0; i < order.size(); ++i) {
    prefix.insert(order[i]);
    EscapeParams ep = params.escape;
    ep.total_trials = std::max<std::uint64_t>(params.trials_floor, 40 * (i + 1));
    auto est = capacity(prefix, d, ep, rng);
    if (est.value >= a) return prefix;
  }
  return prefix;  // a was within cap(K) tolerance; the full set qualifies
}

// ---------------------------------------------------------------------------
// Sub-box visit statistics
// ---------------------------------------------------------------------------

struct SubboxParams {
  std::uint64_t replicas = 2000;
  bool bounded_variant = true;  // stop at exit of ball(2R) or R^2 - r^2 steps
  int horizon_mult = 6;         // unbounded proxy horizon: exit of ball(mult*R)
};

struct SubboxStats {
  std::vector<std::uint32_t> counts;  // per replica: number of grid boxes hit
  double mean_count = 0;
  double count_stderr = 0;
  double mean_pair_sum = 0;  // sum over hit pairs of |y-y'|^{2-d}
};

inline SubboxStats subbox_visit_stats(int r, int R, int d, const Coord& z,
                                      const SubboxParams& params, RngStream& rng) {
  if (r > R) throw std::invalid_argument("subbox_visit_stats: r must be <= R");
  SubboxStats stats;
  stats.counts.reserve(params.replicas);
  detail::MeanAcc count_acc, pair_acc;
  int grid = 10 * r;
  Walker w;
  for (std::uint64_t rep = 0; rep < params.replicas; ++rep) {
    PointSet hit(d);
    auto try_mark = [&](const Coord& pos) {
      Coord y;
      for (int i = 0; i < d; ++i) {
        std::int32_t q = static_cast<std::int32_t>(
            std::lround(static_cast<double>(pos[i]) / grid));
        y[i] = q * grid;
      }
      if (sup_dist(pos, y, d) <= r && sup_norm(y, d) <= 2 * R + r) hit.insert(y);
    };
    w.reset(z, Coord{}, d);
    try_mark(w.pos);
    if (params.bounded_variant) {
      std::uint64_t horizon = static_cast<std::uint64_t>(R) * R - static_cast<std::uint64_t>(r) * r;
      for (std::uint64_t t = 0; t < horizon; ++t) {
        w.step(rng);
        if (w.norm > 2 * R) break;
        try_mark(w.pos);
      }
    } else {
      while (w.norm <= params.horizon_mult * R) {
        w.step(rng);
        try_mark(w.pos);
      }
    }
    stats.counts.push_back(static_cast<std::uint32_t>(hit.size()));
    count_acc.add(static_cast<double>(hit.size()));
    double pair_sum = 0;
    const auto& ys = hit.items();
    for (std::size_t i = 0; i < ys.size(); ++i)
      for (std::size_t j = 0; j < ys.size(); ++j)
        if (i != j)
          pair_sum += std::pow(static_cast<double>(sup_dist(ys[i], ys[j], d)), 2 - d);
    pair_acc.add(pair_sum);
  }
  stats.mean_count = count_acc.mean();
  stats.count_stderr = count_acc.stderr_();
  stats.mean_pair_sum = pair_acc.mean();
  return stats;
}

}  // namespace wormlab
