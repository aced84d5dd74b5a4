// Acceptance suite: one check per criterion, each printing a PASS/FAIL line.
// Exit code is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "wormlab/harness.hpp"

using namespace wormlab;

namespace {

int g_failures = 0;

struct Criterion {
  const char* id;
  const char* title;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;

  Criterion(const char* id_, const char* title_) : id(id_), title(title_) {}
  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
  ~Criterion() {
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::steady_clock::now() - t0)
                  .count();
    std::printf("[%s] %s %s (%lld ms)%s%s\n", ok ? "PASS" : "FAIL", id, title,
                static_cast<long long>(ms), detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
  }
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Stats {
  double mean = 0, stderr_ = 0;
  std::size_t n = 0;
};

Stats stats_of(const std::vector<double>& xs) {
  Stats s;
  s.n = xs.size();
  double sum = 0, sum2 = 0;
  for (double x : xs) {
    sum += x;
    sum2 += x * x;
  }
  double n = static_cast<double>(xs.size());
  s.mean = sum / n;
  double var = n > 1 ? (sum2 / n - s.mean * s.mean) * n / (n - 1) : 0.0;
  s.stderr_ = var > 0 ? std::sqrt(var / n) : 0.0;
  return s;
}

// -----------------------------------------------------------------------
// 1. Density formula: torus d=3, L=32, Geometric{5}, v=0.1, 200 replicas
// -----------------------------------------------------------------------
void criterion_density() {
  Criterion c("01", "density-formula d=3 geometric");
  const double v = 0.1;
  LengthDistribution dist(LengthSpec::geometric(5.0));
  BoxGeometry window = BoxGeometry::centered(3, 32, BoundaryKind::Torus);
  auto densities = run_replicas<double>(200, 2, [&](std::uint64_t rep) {
    WormCloud cloud = generate_worm_cloud(window, v, dist, 1001, rep);
    SiteSet grid = trace(cloud);
    return static_cast<double>(grid.count()) / static_cast<double>(window.num_sites());
  });
  Stats density = stats_of(densities);

  // independent MC oracle for m1 = E|range|
  RngStream rng = derive_stream(1002, StreamTag::Oracle, 0, 0);
  std::vector<double> ranges;
  for (int i = 0; i < 200000; ++i) {
    std::uint64_t len = dist.sample(rng);
    Trajectory t = simulate_walk(Coord{}, len - 1, 3, rng);
    ranges.push_back(static_cast<double>(range_of_walk(t).size()));
  }
  Stats m1 = stats_of(ranges);
  double predicted = 1.0 - std::exp(-v * m1.mean);
  double pred_sigma = v * std::exp(-v * m1.mean) * m1.stderr_;
  double tol = 3 * (density.stderr_ + pred_sigma);
  c.expect(std::abs(density.mean - predicted) < tol,
           "density " + num(density.mean) + " vs 1-exp(-v m1) " + num(predicted) +
               " tol " + num(tol));
}

// -----------------------------------------------------------------------
// 2. Bernoulli reduction: Dirac{1}, d=2, torus L=64
// -----------------------------------------------------------------------
void criterion_bernoulli() {
  Criterion c("02", "bernoulli-reduction d=2 dirac{1}");
  const double v = 0.3;
  LengthDistribution dist(LengthSpec::dirac(1));
  BoxGeometry window = BoxGeometry::centered(2, 64, BoundaryKind::Torus);
  struct Row {
    double density = 0, nn_product = 0;
  };
  auto rows = run_replicas<Row>(200, 2, [&](std::uint64_t rep) {
    WormCloud cloud = generate_worm_cloud(window, v, dist, 2001, rep);
    SiteSet grid = trace(cloud);
    Row row;
    row.density = static_cast<double>(grid.count()) / static_cast<double>(window.num_sites());
    double pairs = 0, occ_pairs = 0;
    for (std::int64_t idx = 0; idx < window.num_sites(); ++idx) {
      bool a = grid.test(idx);
      for (int axis = 0; axis < 2; ++axis) {
        std::int64_t nb = window.neighbor_index(idx, axis, 1);
        pairs += 1;
        if (a && grid.test(nb)) occ_pairs += 1;
      }
    }
    row.nn_product = occ_pairs / pairs;
    return row;
  });
  std::vector<double> dens, covs;
  for (const auto& r : rows) {
    dens.push_back(r.density);
    covs.push_back(r.nn_product - r.density * r.density);
  }
  Stats density = stats_of(dens);
  Stats cov = stats_of(covs);
  double expect_density = 1.0 - std::exp(-v);
  c.expect(std::abs(density.mean - expect_density) < 3 * density.stderr_,
           "density " + num(density.mean) + " vs " + num(expect_density));
  c.expect(std::abs(cov.mean) < 3 * cov.stderr_ + 1e-5,
           "nn covariance " + num(cov.mean) + " +- " + num(cov.stderr_));
}

// -----------------------------------------------------------------------
// 3. Lemma 1.5 regime: Dirac{1} (m2 = 1), v = 0.5/((2d+1) m2), d=3, L=64
// -----------------------------------------------------------------------
void criterion_subcritical() {
  Criterion c("03", "subcritical regime d=3 (Lambda = 1/2)");
  const int d = 3;
  const double m2 = 1.0;  // animal cardinality of Dirac{1} worms
  const double v = 0.5 / ((2 * d + 1) * m2);
  LengthDistribution dist(LengthSpec::dirac(1));
  BoxGeometry window = BoxGeometry::centered(d, 64, BoundaryKind::Free);
  CloudParams params;
  params.policy = CloudPolicy::PaddedWindow;
  struct Row {
    bool crossed = false;
    double beyond_first = 0;
  };
  auto rows = run_replicas<Row>(200, 2, [&](std::uint64_t rep) {
    WormCloud cloud = generate_worm_cloud(window, v, dist, 3001, rep, params);
    Row row;
    row.crossed = crossing(label_clusters(trace(cloud)), 0);
    ExploreResult ex = explore_cluster_of_origin(cloud, 1000000);
    row.beyond_first =
        ex.total_animals > 0 ? static_cast<double>(ex.total_animals - 1) : 0.0;
    return row;
  });
  int crossings = 0;
  std::vector<double> beyond;
  for (const auto& r : rows) {
    crossings += r.crossed ? 1 : 0;
    beyond.push_back(r.beyond_first);
  }
  Stats b = stats_of(beyond);
  c.expect(crossings <= 10, "crossings " + std::to_string(crossings) + "/200 (need <= 5%)");
  // geometric series with Lambda = 1/2: sum_k Lambda^k = 1
  c.expect(b.mean <= 1.0 + 3 * b.stderr_,
           "animals beyond first " + num(b.mean) + " +- " + num(b.stderr_));
}

// -----------------------------------------------------------------------
// 4. Capacity-of-ball scaling: d in {3,5}, R in {4,8}
// -----------------------------------------------------------------------
void criterion_ball_scaling() {
  Criterion c("04", "capacity of balls scales like R^{d-2}");
  for (int d : {3, 5}) {
    EscapeParams ep;
    ep.rho = 6.0;
    ep.total_trials = d == 3 ? 120000 : 400000;
    std::vector<double> caps, sigmas;
    for (int R : {4, 8, 16}) {
      RngStream rng = derive_stream(4001, StreamTag::Potential,
                                    static_cast<std::uint64_t>(d),
                                    static_cast<std::uint64_t>(R));
      CapacityEstimate est = capacity(BallSet{Coord{}, R, d}, ep, rng);
      caps.push_back(est.value);
      sigmas.push_back(est.stderr_ + est.bias_bound);
    }
    double band_lo = std::pow(2.0, d - 2) / 1.5;
    double band_hi = 1.5 * std::pow(2.0, d - 2);
    for (int i = 0; i < 2; ++i) {
      double ratio = caps[static_cast<std::size_t>(i + 1)] / caps[static_cast<std::size_t>(i)];
      c.expect(ratio >= band_lo && ratio <= band_hi,
               "d=" + std::to_string(d) + " cap(2R)/cap(R) at R=" +
                   std::to_string(4 << i) + " is " + num(ratio) + " not in [" +
                   num(band_lo) + "," + num(band_hi) + "]");
    }
  }
}

// -----------------------------------------------------------------------
// 5. Singleton identity cap({x}) = 1/g(o,o) in d=3 and d=5
// -----------------------------------------------------------------------
void criterion_singleton() {
  Criterion c("05", "singleton capacity equals 1/green(o,o)");
  for (int d : {3, 5}) {
    RngStream rng = derive_stream(5001, StreamTag::Potential, static_cast<std::uint64_t>(d), 0);
    GreenParams gp;
    gp.walks = d == 3 ? 60000 : 80000;
    gp.cutoff = d == 3 ? 160 : 56;
    GreenEstimate g = green_mc(Coord{}, Coord{}, d, gp, rng);
    PointSet K(d);
    K.insert(Coord{});
    EscapeParams ep;
    ep.trials_per_site = d == 3 ? 200000 : 250000;
    ep.radius_override = d == 3 ? 96 : 56;
    EquilibriumMeasure em = equilibrium_measure(K, d, ep, rng);
    double inv_g = 1.0 / g.value;
    double sigma_inv = (g.stderr_ + g.bias_bound) / (g.value * g.value);
    double tol = 3 * (em.total_stderr + sigma_inv) + em.bias_bound;
    c.expect(std::abs(em.total_mass - inv_g) < tol,
             "d=" + std::to_string(d) + " cap " + num(em.total_mass) + " vs 1/g " +
                 num(inv_g) + " tol " + num(tol));
  }
}

// -----------------------------------------------------------------------
// 6. LED sandwich: d=3, K=ball(o,3), |x|=20
// -----------------------------------------------------------------------
void criterion_led() {
  Criterion c("06", "LED sandwich d=3 ball(3) from |x|=20");
  const int d = 3;
  RngStream rng = derive_stream(6001, StreamTag::Potential, 0, 0);
  BallSet K{Coord{}, 3, d};
  EscapeParams ep;
  ep.radius_override = 150;  // keeps the no-return bias well under the band width
  ep.total_trials = 120000;
  CapacityEstimate cap_est = capacity(K, ep, rng);

  Coord x;
  x[0] = 20;
  const int far = 300;
  const std::uint64_t walks = 50000;
  std::vector<Coord> sites = enumerate_ball(Coord{}, 3, d);
  PointSet K_points = make_point_set(d, sites);
  std::vector<double> visits(sites.size(), 0.0);
  std::uint64_t hits = 0;
  double censor_ub = 0;
  Walker w;
  for (std::uint64_t i = 0; i < walks; ++i) {
    w.reset(x, Coord{}, d);  // anchored at the origin side: w.norm is |pos|
    bool hit = false;
    while (w.norm <= far) {
      w.step(rng);
      if (w.norm > K.radius) continue;  // only probe the table inside the ball
      std::int32_t idx = K_points.index_of(w.pos);
      if (idx >= 0) {
        visits[static_cast<std::size_t>(idx)] += 1.0;
        hit = true;
      }
    }
    if (hit) ++hits;
    else censor_ub += led_return_bound(d, cap_est.value, far - K.radius);
  }
  double g_min = kInf, g_max = 0;
  for (double s : visits) {
    double g = s / static_cast<double>(walks);
    g_min = std::min(g_min, g);
    g_max = std::max(g_max, g);
  }
  double g_sigma = std::sqrt(2.0 * g_max * 1.6 / static_cast<double>(walks));
  double p_hat = static_cast<double>(hits) / static_cast<double>(walks) +
                 0.5 * censor_ub / static_cast<double>(walks);
  double p_sigma = std::sqrt(p_hat * (1 - p_hat) / static_cast<double>(walks)) +
                   0.5 * censor_ub / static_cast<double>(walks);
  double lower = (cap_est.value - 3 * cap_est.stderr_ - cap_est.bias_bound) *
                 (g_min - 3 * g_sigma);
  double upper = (cap_est.value + 3 * cap_est.stderr_) * (g_max + 3 * g_sigma) +
                 cap_est.value * g_max * 0.02;  // far-field green bias allowance
  c.expect(p_hat + 3 * p_sigma >= lower,
           "p " + num(p_hat) + " below sandwich lower " + num(lower));
  c.expect(p_hat - 3 * p_sigma <= upper,
           "p " + num(p_hat) + " above sandwich upper " + num(upper));
}

// -----------------------------------------------------------------------
// 7. LLN for the capacity of the range in d=5
// -----------------------------------------------------------------------
void criterion_lln_range() {
  Criterion c("07", "capacity of range LLN d=5 (n=2000 vs 20000)");
  const int d = 5;
  double ratios[2] = {0, 0};
  int k = 0;
  for (std::uint64_t n : {2000ull, 20000ull}) {
    // average a few independent walks at each n to tame walk-to-walk spread
    std::vector<double> rs;
    for (std::uint64_t rep = 0; rep < 6; ++rep) {
      RngStream rng = derive_stream(7001, StreamTag::Potential, n, rep);
      Trajectory walk = simulate_walk(Coord{}, n - 1, d, rng);
      PointSet range = range_of_walk(walk);
      EscapeParams ep;
      ep.rho = 2.0;
      ep.total_trials = 8000;
      CapacityEstimate est = capacity(range, d, ep, rng);
      rs.push_back(est.value / static_cast<double>(n));
    }
    Stats s = stats_of(rs);
    ratios[k++] = s.mean;
  }
  c.expect(ratios[0] > 0 && ratios[1] > 0, "ratios must be positive");
  double rel = std::abs(ratios[0] - ratios[1]) / ratios[1];
  c.expect(rel < 0.10, "cap/n " + num(ratios[0]) + " vs " + num(ratios[1]) +
                           " differ by " + num(100 * rel) + "%");
}

// -----------------------------------------------------------------------
// 8. Energy algebra on a fixed Green table
// -----------------------------------------------------------------------
void criterion_energy_algebra() {
  Criterion c("08", "dirichlet energy: exact scaling and symmetry");
  GreenTable table;
  table.d = 3;
  table.index = PointSet(3);
  table.sites = {Coord{}, make_coord({1, 0, 0}), make_coord({0, 1, 0}),
                 make_coord({1, 1, 0})};
  for (const auto& s : table.sites) table.index.insert(s);
  table.g = {1.5, 0.4, 0.4, 0.25,
             0.4, 1.5, 0.25, 0.4,
             0.4, 0.25, 1.5, 0.4,
             0.25, 0.4, 0.4, 1.5};
  table.g_stderr.assign(16, 0.0);
  SiteMeasure mu1, mu2;
  mu1.atoms = {{table.sites[0], 0.3}, {table.sites[1], 1.1}, {table.sites[3], 0.6}};
  mu2.atoms = {{table.sites[2], 0.9}, {table.sites[3], 0.2}};
  double e1 = dirichlet_energy(mu1, table);
  for (double a : {2.0, 1.0 / 3.0}) {
    double scaled_e = dirichlet_energy(scaled(mu1, a), table);
    c.expect(scaled_e == a * a * e1,
             "E(a mu) != a^2 E(mu) exactly for a=" + num(a));
  }
  c.expect(dirichlet_energy(mu1, mu2, table) == dirichlet_energy(mu2, mu1, table),
           "mutual energy not exactly symmetric");
}

// -----------------------------------------------------------------------
// 9. Trimming the fat: BFS prefixes and the trim output window
// -----------------------------------------------------------------------
void criterion_trimming() {
  Criterion c("09", "trimming: unit capacity increments and window");
  const int d = 5;
  for (int set_id = 0; set_id < 20; ++set_id) {
    RngStream rng = derive_stream(9001, StreamTag::Potential,
                                  static_cast<std::uint64_t>(set_id), 0);
    // random connected 50-site set by uniform boundary growth
    PointSet K(d);
    std::vector<Coord> member{Coord{}};
    K.insert(Coord{});
    while (K.size() < 50) {
      const Coord& base = member[static_cast<std::size_t>(rng.below(member.size()))];
      Coord n = base;
      int axis = static_cast<int>(rng.below(static_cast<std::uint64_t>(d)));
      n[axis] += rng.below(2) ? 1 : -1;
      if (K.insert(n)) member.push_back(n);
    }
    EscapeParams ep;
    ep.rho = 2.5;
    ep.total_trials = 2500;
    // BFS prefix capacities: every increment within [-3 sigma, 1 + 3 sigma]
    auto order = bfs_order(K, Coord{}, d);
    double prev = 0, prev_sigma = 0;
    PointSet prefix(d);
    std::vector<double> caps;
    for (std::size_t i = 0; i < order.size(); ++i) {
      prefix.insert(order[i]);
      CapacityEstimate est = capacity(prefix, d, ep, rng);
      if (i > 0) {
        double inc = est.value - prev;
        double sigma = 3 * (est.stderr_ + prev_sigma);
        c.expect(inc >= -sigma && inc <= 1.0 + sigma,
                 "set " + std::to_string(set_id) + " prefix " + std::to_string(i) +
                     " increment " + num(inc));
      }
      prev = est.value;
      prev_sigma = est.stderr_;
      caps.push_back(est.value);
    }
    // trim to half capacity
    double a = 0.5 * caps.back();
    TrimParams tp;
    tp.escape = ep;
    RngStream trim_rng = derive_stream(9002, StreamTag::Potential,
                                       static_cast<std::uint64_t>(set_id), 1);
    PointSet K2 = trim_to_capacity(K, Coord{}, a, d, tp, trim_rng);
    CapacityEstimate out = capacity(K2, d, ep, trim_rng);
    double sigma = 3 * out.stderr_ + out.bias_bound;
    c.expect(out.value >= a - sigma - 0.35 && out.value <= a + 1.0 + sigma + 0.35,
             "set " + std::to_string(set_id) + " trim target " + num(a) + " got " +
                 num(out.value));
    if (!c.ok) break;  // one detailed failure is enough
  }
}

// -----------------------------------------------------------------------
// 10. Campbell formulas on a 3-site region with lengths <= 3
// -----------------------------------------------------------------------
void criterion_campbell() {
  Criterion c("10", "campbell formulas vs exhaustive enumeration");
  const int d = 2;
  const double v = 0.8;
  LengthDistribution dist(LengthSpec::from_table({0.5, 0.3, 0.2}));
  std::vector<Coord> region = {Coord{}, make_coord({1, 0}), make_coord({0, 1})};
  PointSet region_set = make_point_set(d, region);

  // enumeration oracle: cumulants kappa_j = v sum_x sum_l m E[f^j],
  // f(w) = L(w) 1[start in region]
  auto worms_enum = enumerate_worms(region, d, 3, dist, v);
  double kappa1 = 0, kappa2 = 0, kappa3 = 0, kappa4 = 0;
  for (const auto& wm : worms_enum) {
    double f = static_cast<double>(wm.sites.size());
    kappa1 += wm.weight * f;
    kappa2 += wm.weight * f * f;
    kappa3 += wm.weight * f * f * f;
    kappa4 += wm.weight * f * f * f * f;
  }
  (void)kappa3;
  // bilinear with f(w,w') = 1[w(0) = w'(0)]: v^2 |region| + v |region|
  double bilinear_ref = v * v * 3.0 + v * 3.0;

  BoxGeometry window = BoxGeometry::centered(d, 16, BoundaryKind::Free);
  CloudParams params;
  params.policy = CloudPolicy::PaddedWindow;
  struct Row {
    double linear = 0, pairs = 0;
  };
  auto rows = run_replicas<Row>(500, 2, [&](std::uint64_t rep) {
    WormCloud cloud = generate_worm_cloud(window, v, dist, 10001, rep, params);
    Row row;
    std::vector<Coord> starts;
    for (const auto& wm : cloud.worms) {
      if (!region_set.contains(wm.traj.start())) continue;
      row.linear += static_cast<double>(wm.traj.length());
      starts.push_back(wm.traj.start());
    }
    for (const auto& a : starts)
      for (const auto& b : starts)
        if (a == b) row.pairs += 1;
    return row;
  });
  std::vector<double> lin, pairs;
  for (const auto& r : rows) {
    lin.push_back(r.linear);
    pairs.push_back(r.pairs);
  }
  Stats slin = stats_of(lin);
  Stats spairs = stats_of(pairs);
  c.expect(std::abs(slin.mean - kappa1) < 3 * slin.stderr_,
           "linear mean " + num(slin.mean) + " vs " + num(kappa1));
  // sample variance vs kappa2; sd of sample variance from mu4 of the
  // compound Poisson: mu4 = kappa4 + 3 kappa2^2
  double n = static_cast<double>(lin.size());
  double svar = 0;
  for (double x : lin) svar += (x - slin.mean) * (x - slin.mean);
  svar /= (n - 1);
  double mu4 = kappa4 + 3 * kappa2 * kappa2;
  double var_of_var = (mu4 - kappa2 * kappa2 * (n - 3) / (n - 1)) / n;
  c.expect(std::abs(svar - kappa2) < 3 * std::sqrt(var_of_var),
           "variance " + num(svar) + " vs " + num(kappa2));
  c.expect(std::abs(spairs.mean - bilinear_ref) < 3 * spairs.stderr_,
           "bilinear " + num(spairs.mean) + " vs " + num(bilinear_ref));
}

// -----------------------------------------------------------------------
// 11. Scales certifier: all-pass for eps=0.5, all-fail for eps=-0.5,
//     margins recomputed independently agree exactly
// -----------------------------------------------------------------------
void criterion_scales() {
  Criterion c("11", "good-sequence certifier (eps = +-0.5)");
  ScaleParams params;  // published default tuple
  const int d = 5;

  LengthDistribution good(LengthSpec::loglog(0.5, 16));
  GeneratorSearch wide;
  wide.N_max = 60;
  auto seq = generate_candidate_sequence(good, params, d, 0.25, wide);
  c.expect(seq.has_value(), "no passing sequence for eps=0.5");
  if (seq) {
    c.expect(seq->certificate.all_pass, "certificate not all-pass");
    // independent recomputation of every condition margin
    for (const auto& cond : seq->certificate.conditions) {
      double lhs = 0, rhs = 0;
      if (cond.name == "initial-scale") {
        lhs = seq->R[0].log_e;
        rhs = std::log(params.R_star0);
      } else if (cond.name == "moment-window") {
        std::size_t n = static_cast<std::size_t>(cond.index);
        lhs = params.v * good.moment2_window_log(
                             std::log(params.delta_low) + 2 * seq->R[n].log_e,
                             std::log(params.delta_up) + 2 * seq->R[n + 1].log_e)
                             .lo;
        rhs = params.alpha_low;
      } else if (cond.name == "psi-growth") {
        lhs = cond.index * std::log(2.0) + std::log(params.gamma0);
        rhs = std::log(params.psi) + (d - 4) * seq->R[static_cast<std::size_t>(cond.index)].log_e;
      } else {  // shooting
        double lnR = seq->R.back().log_e;
        lhs = (seq->N + 1) * std::log(2.0) + std::log(params.gamma0) + std::log(params.s) +
              std::log(params.v) + 4.0 * lnR +
              good.log_tail_mass(std::log(params.lambda) + 2.0 * lnR).lo;
        rhs = std::log(2.0);
      }
      c.expect(cond.lhs == lhs && cond.rhs == rhs,
               cond.name + " recomputation mismatch");
    }
  }

  // eps = -0.5: scan ell0 upward until the whole N <= 40 search fails
  GeneratorSearch strict;
  strict.N_max = 40;
  std::uint64_t scanned = 0;
  for (std::uint64_t ell0 = 16; ell0 <= 4096; ell0 *= 2) {
    LengthDistribution badm(LengthSpec::loglog(-0.5, ell0));
    if (!generate_candidate_sequence(badm, params, d, 0.25, strict).has_value()) {
      scanned = ell0;
      break;
    }
  }
  c.expect(scanned > 0, "no ell0 with an all-fail certificate found");
  if (scanned) {
    LengthDistribution badm(LengthSpec::loglog(-0.5, scanned));
    c.expect(!generate_candidate_sequence(badm, params, d, 0.25, strict).has_value(),
             "scanned ell0 unexpectedly passes");
  }
}

// -----------------------------------------------------------------------
// 12. Target shooting: lambda >= 2 forces empirical success >= 3/4
// -----------------------------------------------------------------------
void criterion_target_shooting() {
  Criterion c("12", "target shooting with a boomerang");
  TargetShootingConfig cfg;
  cfg.d = 5;
  cfg.R = 2;
  cfg.beta = 2;
  cfg.v = 0.0013;  // places the Poisson parameter a little above 2
  LengthDistribution dist(LengthSpec::dirac(24));
  BallSet H{make_coord({4, 0, 0, 0, 0}), 2, 5};
  TargetShootingResult r = target_shooting_estimate(cfg, H, dist, 400000, 2000, 12001);
  c.expect(r.poisson_param - 3 * r.param_stderr >= 2.0,
           "lambda " + num(r.poisson_param) + " +- " + num(r.param_stderr) +
               " not clearly >= 2, retune v");
  double bound = 0.75 - 3 * r.empirical_stderr;
  c.expect(r.empirical_hit >= bound,
           "empirical " + num(r.empirical_hit) + " < " + num(bound));
  // and the Poissonization itself: P(>0) vs 1 - exp(-lambda)
  double predict = 1.0 - std::exp(-r.poisson_param);
  c.expect(std::abs(r.empirical_hit - predict) <
               3 * (r.empirical_stderr + std::exp(-r.poisson_param) * r.param_stderr) + 0.01,
           "empirical " + num(r.empirical_hit) + " vs 1-e^-lambda " + num(predict));
}

// -----------------------------------------------------------------------
// 13. Monotone coupling of traces and crossings
// -----------------------------------------------------------------------
void criterion_monotone() {
  Criterion c("13", "monotone coupling over 100 shared-seed pairs");
  LengthDistribution dist(LengthSpec::geometric(3.0));
  BoxGeometry window = BoxGeometry::centered(2, 24, BoundaryKind::Free);
  CloudParams params;
  params.policy = CloudPolicy::PaddedWindow;
  const double v_lo = 0.25, v_hi = 0.55;
  for (std::uint64_t rep = 0; rep < 100; ++rep) {
    WormCloud hi = generate_worm_cloud(window, v_hi, dist, 13001, rep, params);
    SiteSet t_lo = trace(hi, v_lo);
    SiteSet t_hi = trace(hi, v_hi);
    if (!t_lo.is_subset_of(t_hi)) {
      c.expect(false, "trace inclusion violated at replica " + std::to_string(rep));
      break;
    }
    bool cross_lo = crossing(ClusterLabels(t_lo), 0);
    bool cross_hi = crossing(ClusterLabels(t_hi), 0);
    if (cross_lo && !cross_hi) {
      c.expect(false, "crossing decreased at replica " + std::to_string(rep));
      break;
    }
  }
}

// -----------------------------------------------------------------------
// 14. Determinism: reruns are byte-identical
// -----------------------------------------------------------------------
void criterion_determinism() {
  Criterion c("14", "byte-identical reruns");
  auto tmp = std::filesystem::temp_directory_path() / "wormlab_acceptance";
  std::filesystem::remove_all(tmp);

  Json density = {{"kind", "density"}, {"d", 3}, {"L", 16}, {"boundary", "torus"},
                  {"v", 0.1}, {"dist", {{"kind", "geometric"}, {"meanT", 5.0}}},
                  {"replicas", 20}, {"walks", 20000}, {"seed", 14001}, {"threads", 2}};
  Json scales = preset("loglog-d5");
  scales["extra"]["N_max"] = 60;

  int pair_id = 0;
  for (const Json& j : {density, scales}) {
    ExperimentConfig cfg = parse_config(j);
    auto dir_a = tmp / ("a" + std::to_string(pair_id));
    auto dir_b = tmp / ("b" + std::to_string(pair_id));
    RunResult a = run_experiment(cfg, dir_a);
    RunResult b = run_experiment(cfg, dir_b);
    c.expect(slurp(a.csv_path) == slurp(b.csv_path),
             cfg.kind + " CSV outputs differ between reruns");
    c.expect(slurp(a.json_path) == slurp(b.json_path),
             cfg.kind + " JSON outputs differ between reruns");
    ++pair_id;
  }
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  criterion_density();
  criterion_bernoulli();
  criterion_subcritical();
  criterion_ball_scaling();
  criterion_singleton();
  criterion_led();
  criterion_lln_range();
  criterion_energy_algebra();
  criterion_trimming();
  criterion_campbell();
  criterion_scales();
  criterion_target_shooting();
  criterion_monotone();
  criterion_determinism();
  if (g_failures) std::printf("%d criterion(s) FAILED\n", g_failures);
  else std::printf("all criteria passed\n");
  return g_failures;
}
