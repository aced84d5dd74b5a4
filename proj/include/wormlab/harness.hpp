#pragma once

// Experiment harness: JSON configs, named presets, reproducible replica
// scheduling, and CSV/JSON outputs. A master seed plus replica index fully
// determines every stream, and outputs are formatted so a rerun with the
// same config and seed is byte-identical (wall-clock stats go to stderr,
// never into the artifacts).

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "wormlab/lattice.hpp"
#include "wormlab/lengths.hpp"
#include "wormlab/percolation.hpp"
#include "wormlab/potential.hpp"
#include "wormlab/scales.hpp"
#include "wormlab/worms.hpp"

namespace wormlab {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

struct ValidationError : std::runtime_error {
  std::vector<std::string> keys;
  explicit ValidationError(std::vector<std::string> bad)
      : std::runtime_error("invalid config keys: " + join(bad)), keys(std::move(bad)) {}
  static std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& k : v) {
      if (!s.empty()) s += ", ";
      s += k;
    }
    return s;
  }
};

struct BudgetExhausted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  std::string kind;
  int d = 3;
  std::int64_t L = 32;
  std::string boundary = "torus";  // "torus" | "free"
  double v = 0.1;
  std::vector<double> v_grid;
  LengthSpec dist;
  std::uint64_t replicas = 100;
  std::uint64_t walks = 100000;
  std::uint64_t seed = 1;
  int threads = 1;
  Json extra;  // per-kind knobs
  Json raw;    // verbatim parsed config for echoing

  BoxGeometry window() const {
    return BoxGeometry::centered(d, L, boundary == "torus" ? BoundaryKind::Torus
                                                           : BoundaryKind::Free);
  }
};

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds = {
      "density",     "subcritical", "vc-sweep",  "capacity", "green",
      "lln-range",   "led",         "hitting-sums", "subboxes", "campbell",
      "scales",      "target-shooting", "explore"};
  return kinds;
}

inline LengthSpec length_spec_from_json(const Json& j, std::vector<std::string>& bad) {
  LengthSpec spec;
  std::string kind = j.value("kind", "");
  if (kind == "dirac") {
    spec = LengthSpec::dirac(j.value("T", std::uint64_t{1}));
  } else if (kind == "geometric") {
    spec = LengthSpec::geometric(j.value("meanT", 1.0));
  } else if (kind == "loglog") {
    spec = LengthSpec::loglog(j.value("epsilon", 0.5), j.value("ell0", std::uint64_t{16}));
  } else if (kind == "powerlaw") {
    spec = LengthSpec::power_law(j.value("beta", 2.5), j.value("ell0", std::uint64_t{1}));
  } else if (kind == "table") {
    spec = LengthSpec::from_table(j.value("table", std::vector<double>{}));
  } else {
    bad.push_back("dist.kind");
    return spec;
  }
  spec.cap = j.value("cap", std::uint64_t{0});
  return spec;
}

inline Json length_spec_to_json(const LengthSpec& spec) {
  Json j;
  switch (spec.kind) {
    case LengthKind::Dirac: j["kind"] = "dirac"; j["T"] = spec.t; break;
    case LengthKind::Geometric: j["kind"] = "geometric"; j["meanT"] = spec.mean_t; break;
    case LengthKind::LogLogEps:
      j["kind"] = "loglog"; j["epsilon"] = spec.epsilon; j["ell0"] = spec.ell0; break;
    case LengthKind::PowerLaw:
      j["kind"] = "powerlaw"; j["beta"] = spec.beta; j["ell0"] = spec.ell0; break;
    case LengthKind::Table: j["kind"] = "table"; j["table"] = spec.table; break;
  }
  if (spec.cap > 0) j["cap"] = spec.cap;
  return j;
}

inline ExperimentConfig parse_config(const Json& j) {
  std::vector<std::string> bad;
  ExperimentConfig cfg;
  cfg.raw = j;
  cfg.kind = j.value("kind", "");
  bool known = false;
  for (const auto& k : experiment_kinds()) known = known || k == cfg.kind;
  if (!known) bad.push_back("kind");
  cfg.d = j.value("d", 3);
  if (cfg.d < 1 || cfg.d > kMaxDim) bad.push_back("d");
  cfg.L = j.value("L", std::int64_t{32});
  if (cfg.L < 2) bad.push_back("L");
  cfg.boundary = j.value("boundary", "torus");
  if (cfg.boundary != "torus" && cfg.boundary != "free") bad.push_back("boundary");
  cfg.v = j.value("v", 0.1);
  if (cfg.v < 0) bad.push_back("v");
  cfg.v_grid = j.value("v_grid", std::vector<double>{});
  if (j.contains("dist")) cfg.dist = length_spec_from_json(j["dist"], bad);
  cfg.replicas = j.value("replicas", std::uint64_t{100});
  if (cfg.replicas < 1) bad.push_back("replicas");
  cfg.walks = j.value("walks", std::uint64_t{100000});
  cfg.seed = j.value("seed", std::uint64_t{1});
  cfg.threads = j.value("threads", 1);
  if (cfg.threads < 1) bad.push_back("threads");
  cfg.extra = j.value("extra", Json::object());
  // surface distribution validation alongside the other offending keys
  if (std::find(bad.begin(), bad.end(), "dist.kind") == bad.end()) {
    try {
      LengthDistribution probe(cfg.dist);
    } catch (const std::invalid_argument& e) {
      bad.push_back(std::string("dist (") + e.what() + ")");
    }
  }
  if (!bad.empty()) throw ValidationError(std::move(bad));
  return cfg;
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

inline Json preset(const std::string& name) {
  Json j;
  if (name == "bernoulli-reduction") {
    j = {{"kind", "density"}, {"d", 2}, {"L", 64}, {"boundary", "torus"}, {"v", 0.3},
         {"dist", {{"kind", "dirac"}, {"T", 1}}}, {"replicas", 200}, {"seed", 1}};
  } else if (name == "fri-d3") {
    j = {{"kind", "vc-sweep"}, {"d", 3}, {"L", 32}, {"boundary", "free"}, {"v", 0.05},
         {"dist", {{"kind", "geometric"}, {"meanT", 8.0}, {"cap", 1024}}},
         {"replicas", 60}, {"seed", 1}};
  } else if (name == "loop-proxy-d3") {
    j = {{"kind", "vc-sweep"}, {"d", 3}, {"L", 32}, {"boundary", "free"}, {"v", 0.05},
         {"dist", {{"kind", "powerlaw"}, {"beta", 2.5}, {"ell0", 1}, {"cap", 1024}}},
         {"replicas", 60}, {"seed", 1}};
  } else if (name == "loop-proxy-d4") {
    j = {{"kind", "vc-sweep"}, {"d", 4}, {"L", 16}, {"boundary", "free"}, {"v", 0.05},
         {"dist", {{"kind", "powerlaw"}, {"beta", 3.0}, {"ell0", 1}, {"cap", 256}}},
         {"replicas", 40}, {"seed", 1}};
  } else if (name == "loglog-d5") {
    j = {{"kind", "scales"}, {"d", 5}, {"L", 16}, {"boundary", "torus"}, {"v", 1.0},
         {"dist", {{"kind", "loglog"}, {"epsilon", 0.5}, {"ell0", 16}}},
         {"replicas", 1}, {"seed", 1},
         {"extra", {{"delta", 0.25}, {"N_max", 60}}}};
  } else {
    std::string names;
    for (const char* n : {"bernoulli-reduction", "fri-d3", "loop-proxy-d3",
                          "loop-proxy-d4", "loglog-d5"}) {
      if (!names.empty()) names += ", ";
      names += n;
    }
    throw ValidationError({"preset (valid: " + names + ")"});
  }
  return j;
}

// ---------------------------------------------------------------------------
// Deterministic writers
// ---------------------------------------------------------------------------

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const Json& config_echo,
            const std::vector<std::string>& columns)
      : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open " + path.string());
    out_ << "# schema_version=" << kSchemaVersion << " config="
         << config_echo.dump() << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i)
      out_ << (i ? "," : "") << columns[i];
    out_ << "\n";
    ncols_ = columns.size();
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != ncols_) throw std::logic_error("CsvWriter: column mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
  }

 private:
  std::ofstream out_;
  std::size_t ncols_ = 0;
};

inline void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Replica pool: per-replica work merged by index, so results do not depend
// on scheduling.
// ---------------------------------------------------------------------------

template <class ResultT>
std::vector<ResultT> run_replicas(std::uint64_t replicas, int threads,
                                  const std::function<ResultT(std::uint64_t)>& work) {
  std::vector<ResultT> results(replicas);
  if (threads <= 1 || replicas <= 1) {
    for (std::uint64_t r = 0; r < replicas; ++r) results[r] = work(r);
    return results;
  }
  std::atomic<std::uint64_t> next{0};
  std::vector<std::thread> pool;
  int n_threads = std::min<int>(threads, static_cast<int>(replicas));
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) {
    pool.emplace_back([&] {
      while (true) {
        std::uint64_t r = next.fetch_add(1);
        if (r >= replicas) return;
        results[r] = work(r);
      }
    });
  }
  for (auto& th : pool) th.join();
  return results;
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

struct RunResult {
  std::filesystem::path csv_path;
  std::filesystem::path json_path;
  bool partial = false;  // budget exhausted somewhere
};

namespace detail_harness {

struct DensityRow {
  std::uint64_t replica = 0, seed = 0;
  std::int64_t occupied = 0, sites = 0;
  double density = 0;
};

inline Json summary_stats(const std::vector<double>& xs) {
  double sum = 0, sum2 = 0;
  for (double x : xs) {
    sum += x;
    sum2 += x * x;
  }
  double n = static_cast<double>(xs.size());
  double mean = sum / n;
  double var = n > 1 ? (sum2 / n - mean * mean) * n / (n - 1) : 0.0;
  Json j;
  j["mean"] = mean;
  j["stderr"] = var > 0 ? std::sqrt(var / n) : 0.0;
  j["n"] = xs.size();
  return j;
}

}  // namespace detail_harness

inline RunResult run_experiment(const ExperimentConfig& cfg,
                                const std::filesystem::path& out_dir);

// --- density ---------------------------------------------------------------

// PaddedWindow margin: explicit "margin" key wins; otherwise the
// displacement default, capped at one window width (the certificate below
// reports what the cap costs).
inline int padded_margin(const ExperimentConfig& cfg, const LengthDistribution& dist) {
  if (cfg.extra.contains("margin")) return cfg.extra["margin"].get<int>();
  return std::min<int>(default_padding_margin(dist), static_cast<int>(cfg.L));
}

inline RunResult run_density(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  LengthDistribution dist(cfg.dist);
  BoxGeometry window = cfg.window();
  CloudParams params;
  params.policy = cfg.boundary == "torus" ? CloudPolicy::TorusWrap : CloudPolicy::PaddedWindow;
  params.margin = params.policy == CloudPolicy::PaddedWindow ? padded_margin(cfg, dist) : 0;

  auto rows = run_replicas<detail_harness::DensityRow>(
      cfg.replicas, cfg.threads, [&](std::uint64_t rep) {
        WormCloud cloud = generate_worm_cloud(window, cfg.v, dist, cfg.seed, rep, params);
        SiteSet grid = trace(cloud);
        detail_harness::DensityRow row;
        row.replica = rep;
        row.seed = cfg.seed;
        row.occupied = grid.count();
        row.sites = window.num_sites();
        row.density = static_cast<double>(row.occupied) / static_cast<double>(row.sites);
        return row;
      });

  // independent MC estimate of m1 = E|range| for the predicted density
  detail::MeanAcc m1;
  {
    RngStream rng = derive_stream(cfg.seed, StreamTag::Oracle, 0, 0xD1);
    std::uint64_t n = std::max<std::uint64_t>(cfg.walks, 10000);
    for (std::uint64_t i = 0; i < n; ++i) {
      std::uint64_t len = dist.sample(rng);
      Trajectory t = simulate_walk(Coord{}, len - 1, cfg.d, rng);
      m1.add(static_cast<double>(range_of_walk(t).size()));
    }
  }

  RunResult res;
  res.csv_path = out_dir / "density.csv";
  res.json_path = out_dir / "density.json";
  CsvWriter csv(res.csv_path, cfg.raw,
                {"replica", "seed", "occupied", "sites", "density"});
  std::vector<double> densities;
  for (const auto& r : rows) {
    csv.row({std::to_string(r.replica), std::to_string(r.seed), std::to_string(r.occupied),
             std::to_string(r.sites), format_number(r.density)});
    densities.push_back(r.density);
  }
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["config"] = cfg.raw;
  j["density"] = detail_harness::summary_stats(densities);
  j["m1_estimate"] = m1.mean();
  j["m1_stderr"] = m1.stderr_();
  j["predicted_density"] = 1.0 - std::exp(-cfg.v * m1.mean());
  j["truncated_mass"] = dist.truncated_mass();
  if (params.policy == CloudPolicy::PaddedWindow) {
    j["padding_margin"] = params.margin;
    j["neglected_mass_bound"] = neglected_mass_bound(window, cfg.v, dist, params.margin);
  }
  write_json(res.json_path, j);
  return res;
}

// --- subcritical (crossing fraction + cluster exploration) ------------------

inline RunResult run_subcritical(const ExperimentConfig& cfg,
                                 const std::filesystem::path& out_dir) {
  LengthDistribution dist(cfg.dist);
  BoxGeometry window = BoxGeometry::centered(cfg.d, cfg.L, BoundaryKind::Free);
  CloudParams params;
  params.policy = CloudPolicy::PaddedWindow;
  params.margin = padded_margin(cfg, dist);
  std::uint64_t budget = cfg.extra.value("budget", std::uint64_t{100000});

  struct Row {
    std::uint64_t replica = 0;
    bool crossed = false;
    std::uint64_t animals = 0;
    std::uint64_t layers = 0;
    std::uint64_t sites = 0;
    bool budget_hit = false;
  };
  auto rows = run_replicas<Row>(cfg.replicas, cfg.threads, [&](std::uint64_t rep) {
    WormCloud cloud = generate_worm_cloud(window, cfg.v, dist, cfg.seed, rep, params);
    Row row;
    row.replica = rep;
    row.crossed = crossing(label_clusters(trace(cloud)), 0);
    ExploreResult ex = explore_cluster_of_origin(cloud, budget);
    row.animals = ex.total_animals;
    row.layers = ex.layer_animal_counts.size();
    row.sites = ex.cluster_sites.size();
    row.budget_hit = ex.budget_hit;
    return row;
  });

  RunResult res;
  res.csv_path = out_dir / "subcritical.csv";
  res.json_path = out_dir / "subcritical.json";
  CsvWriter csv(res.csv_path, cfg.raw,
                {"replica", "crossed", "animals", "layers", "cluster_sites", "budget_hit"});
  std::uint64_t crossings = 0;
  std::vector<double> beyond_first;
  bool partial = false;
  for (const auto& r : rows) {
    csv.row({std::to_string(r.replica), std::to_string(r.crossed ? 1 : 0),
             std::to_string(r.animals), std::to_string(r.layers), std::to_string(r.sites),
             std::to_string(r.budget_hit ? 1 : 0)});
    crossings += r.crossed ? 1 : 0;
    beyond_first.push_back(r.animals > 0 ? static_cast<double>(r.animals - 1) : 0.0);
    partial = partial || r.budget_hit;
  }
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["config"] = cfg.raw;
  j["crossing_fraction"] = static_cast<double>(crossings) / static_cast<double>(cfg.replicas);
  j["animals_beyond_first"] = detail_harness::summary_stats(beyond_first);
  j["padding_margin"] = params.margin;
  j["neglected_mass_bound"] = neglected_mass_bound(window, cfg.v, dist, params.margin);
  j["partial"] = partial;
  write_json(res.json_path, j);
  RunResult out = res;
  out.partial = partial;
  return out;
}

// --- vc-sweep ----------------------------------------------------------------

inline RunResult run_vc_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  LengthDistribution dist_probe(cfg.dist);
  WormModel model;
  model.d = cfg.d;
  model.L = cfg.L;
  model.length = cfg.dist;
  model.cloud.policy = CloudPolicy::PaddedWindow;
  model.cloud.margin = padded_margin(cfg, dist_probe);
  double v_lo = cfg.extra.value("v_lo", 0.0);
  double v_hi = cfg.extra.value("v_hi", std::max(cfg.v, 1e-3));
  int rounds = cfg.extra.value("rounds", 12);

  std::vector<std::int64_t> L_list;
  if (cfg.extra.contains("L_list"))
    L_list = cfg.extra["L_list"].get<std::vector<std::int64_t>>();
  else
    L_list = {cfg.L};

  RunResult res;
  res.csv_path = out_dir / "vc-sweep.csv";
  res.json_path = out_dir / "vc-sweep.json";
  CsvWriter csv(res.csv_path, cfg.raw,
                {"L", "v", "crossings", "replicas", "ci_lo", "ci_hi", "seed0"});
  Json brackets = Json::array();
  bool partial = false;
  for (std::int64_t L : L_list) {
    model.L = L;
    SweepResult sweep = vc_bisection(model, v_lo, v_hi, cfg.replicas, rounds, cfg.seed);
    for (const auto& e : sweep.trace)
      csv.row({std::to_string(L), format_number(e.v), std::to_string(e.crossings),
               std::to_string(e.replicas), format_number(e.ci.lo), format_number(e.ci.hi),
               std::to_string(e.seed0)});
    Json b;
    b["L"] = L;
    b["v_lo"] = sweep.v_lo;
    b["v_hi"] = sweep.v_hi;
    b["budget_exhausted"] = sweep.budget_exhausted;
    brackets.push_back(b);
    partial = partial || sweep.budget_exhausted;
  }
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["config"] = cfg.raw;
  j["brackets"] = brackets;
  j["partial"] = partial;
  write_json(res.json_path, j);
  res.partial = partial;
  return res;
}

// --- capacity / green / lln-range -------------------------------------------

inline RunResult run_capacity(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  std::vector<int> radii;
  if (cfg.extra.contains("radii")) radii = cfg.extra["radii"].get<std::vector<int>>();
  else radii = {2, 4, 8};
  EscapeParams ep;
  ep.rho = cfg.extra.value("rho", 6.0);
  ep.total_trials = cfg.extra.value("trials", std::uint64_t{20000});

  RunResult res;
  res.csv_path = out_dir / "capacity.csv";
  res.json_path = out_dir / "capacity.json";
  CsvWriter csv(res.csv_path, cfg.raw,
                {"d", "R", "method", "value", "stderr", "bias_bound", "trials", "seed"});
  Json rows = Json::array();
  for (std::size_t i = 0; i < radii.size(); ++i) {
    RngStream rng = derive_stream(cfg.seed, StreamTag::Potential, i, 0xCA);
    BallSet ball{Coord{}, radii[i], cfg.d};
    CapacityEstimate est = capacity(ball, ep, rng);
    csv.row({std::to_string(cfg.d), std::to_string(radii[i]), "equilibrium-mass",
             format_number(est.value), format_number(est.stderr_),
             format_number(est.bias_bound), std::to_string(est.trials),
             std::to_string(cfg.seed)});
    Json r;
    r["R"] = radii[i];
    r["value"] = est.value;
    r["stderr"] = est.stderr_;
    r["bias_bound"] = est.bias_bound;
    rows.push_back(r);
  }
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["config"] = cfg.raw;
  j["estimates"] = rows;
  write_json(res.json_path, j);
  return res;
}

inline RunResult run_green(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  GreenParams gp;
  gp.walks = cfg.walks;
  gp.cutoff = cfg.extra.value("cutoff", 0);
  int dist_x = cfg.extra.value("distance", 0);
  RngStream rng = derive_stream(cfg.seed, StreamTag::Potential, 0, 0x62);
  Coord y;
  y[0] = dist_x;
  GreenEstimate est = green_mc(Coord{}, y, cfg.d, gp, rng);

  RunResult res;
  res.csv_path = out_dir / "green.csv";
  res.json_path = out_dir / "green.json";
  CsvWriter csv(res.csv_path, cfg.raw,
                {"d", "distance", "method", "value", "stderr", "bias_bound", "walks",
                 "cutoff", "seed"});
  csv.row({std::to_string(cfg.d), std::to_string(dist_x), "mc-visits",
           format_number(est.value), format_number(est.stderr_), format_number(est.bias_bound),
           std::to_string(est.walks), std::to_string(est.cutoff), std::to_string(cfg.seed)});
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["config"] = cfg.raw;
  j["value"] = est.value;
  j["stderr"] = est.stderr_;
  j["bias_bound"] = est.bias_bound;
  write_json(res.json_path, j);
  return res;
}

inline RunResult run_lln_range(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  std::vector<std::uint64_t> lengths;
  if (cfg.extra.contains("lengths"))
    lengths = cfg.extra["lengths"].get<std::vector<std::uint64_t>>();
  else
    lengths = {2000, 20000};
  EscapeParams ep;
  ep.radius_override = 0;
  ep.rho = cfg.extra.value("rho", 2.0);
  ep.total_trials = cfg.extra.value("trials", std::uint64_t{6000});

  RunResult res;
  res.csv_path = out_dir / "lln-range.csv";
  res.json_path = out_dir / "lln-range.json";
  CsvWriter csv(res.csv_path, cfg.raw,
                {"d", "n", "range_size", "cap", "stderr", "ratio", "seed"});
  Json rows = Json::array();
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    RngStream rng = derive_stream(cfg.seed, StreamTag::Potential, i, 0x77);
    Trajectory walk = simulate_walk(Coord{}, lengths[i] - 1, cfg.d, rng);
    PointSet range = range_of_walk(walk);
    CapacityEstimate est = capacity(range, cfg.d, ep, rng);
    double ratio = est.value / static_cast<double>(lengths[i]);
    csv.row({std::to_string(cfg.d), std::to_string(lengths[i]), std::to_string(range.size()),
             format_number(est.value), format_number(est.stderr_), format_number(ratio),
             std::to_string(cfg.seed)});
    Json r;
    r["n"] = lengths[i];
    r["range_size"] = range.size();
    r["cap"] = est.value;
    r["stderr"] = est.stderr_;
    r["ratio"] = ratio;
    rows.push_back(r);
  }
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["config"] = cfg.raw;
  j["rows"] = rows;
  write_json(res.json_path, j);
  return res;
}

// --- led ----------------------------------------------------------------------

inline RunResult run_led(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  int R = cfg.extra.value("R", 3);
  int dist_x = cfg.extra.value("distance", 20);
  RngStream rng = derive_stream(cfg.seed, StreamTag::Potential, 0, 0x1ED);

  BallSet K{Coord{}, R, cfg.d};
  EscapeParams ep;
  ep.rho = 6.0;
  ep.total_trials = cfg.extra.value("cap_trials", std::uint64_t{40000});
  CapacityEstimate cap_est = capacity(K, ep, rng);

  Coord x;
  x[0] = dist_x;
  // per-site Green estimates from x over K via shared walks
  std::vector<Coord> sites = enumerate_ball(Coord{}, R, cfg.d);
  PointSet K_points = make_point_set(cfg.d, sites);
  std::vector<double> visit_sum(sites.size(), 0.0);
  int far = cfg.extra.value("far_radius", 20 * (dist_x + R));
  std::uint64_t hits = 0;
  Walker w;
  std::uint64_t walks = cfg.walks;
  for (std::uint64_t i = 0; i < walks; ++i) {
    w.reset(x, Coord{}, cfg.d);
    bool hit = false;
    while (w.norm <= far) {
      w.step(rng);
      std::int32_t idx = K_points.index_of(w.pos);
      if (idx >= 0) {
        visit_sum[static_cast<std::size_t>(idx)] += 1.0;
        hit = true;
      }
    }
    if (hit) ++hits;
  }
  double g_min = kInf, g_max = 0;
  for (double s : visit_sum) {
    double g = s / static_cast<double>(walks);
    g_min = std::min(g_min, g);
    g_max = std::max(g_max, g);
  }
  double p_hit = static_cast<double>(hits) / static_cast<double>(walks);

  RunResult res;
  res.csv_path = out_dir / "led.csv";
  res.json_path = out_dir / "led.json";
  CsvWriter csv(res.csv_path, cfg.raw,
                {"d", "R", "distance", "cap", "cap_stderr", "g_min", "g_max", "p_hit",
                 "walks", "seed"});
  csv.row({std::to_string(cfg.d), std::to_string(R), std::to_string(dist_x),
           format_number(cap_est.value), format_number(cap_est.stderr_), format_number(g_min),
           format_number(g_max), format_number(p_hit), std::to_string(walks),
           std::to_string(cfg.seed)});
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["config"] = cfg.raw;
  j["cap"] = cap_est.value;
  j["cap_stderr"] = cap_est.stderr_;
  j["g_min"] = g_min;
  j["g_max"] = g_max;
  j["p_hit"] = p_hit;
  j["sandwich_lo"] = cap_est.value * g_min;
  j["sandwich_hi"] = cap_est.value * g_max;
  write_json(res.json_path, j);
  return res;
}

// --- hitting-sums / subboxes ---------------------------------------------------

inline RunResult run_hitting_sums(const ExperimentConfig& cfg,
                                  const std::filesystem::path& out_dir) {
  int r = cfg.extra.value("r", 2);
  double ell = cfg.extra.value("ell", 16.0 * r * r);
  int KR = cfg.extra.value("K_radius", r);
  HittingSumParams hp;
  hp.samples = cfg.extra.value("samples", std::uint64_t{100000});
  RngStream rng = derive_stream(cfg.seed, StreamTag::Potential, 0, 0x45);

  BallSet K{Coord{}, KR, cfg.d};
  EscapeParams ep;
  ep.rho = 6.0;
  ep.total_trials = 20000;
  CapacityEstimate cap_est = capacity(K, ep, rng);
  HittingSumResult sum = hitting_sum_upper(K, ell, r, cfg.d, hp, rng, cap_est.value);

  RunResult res;
  res.csv_path = out_dir / "hitting-sums.csv";
  res.json_path = out_dir / "hitting-sums.json";
  CsvWriter csv(res.csv_path, cfg.raw,
                {"mode", "d", "r", "ell", "value", "stderr", "remainder_bound", "cap",
                 "ratio", "seed"});
  double ratio = sum.value / (ell * cap_est.value);
  csv.row({"upper", std::to_string(cfg.d), std::to_string(r), format_number(ell),
           format_number(sum.value), format_number(sum.stderr_),
           format_number(sum.remainder_bound), format_number(cap_est.value),
           format_number(ratio), std::to_string(cfg.seed)});
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["config"] = cfg.raw;
  j["value"] = sum.value;
  j["stderr"] = sum.stderr_;
  j["remainder_bound"] = sum.remainder_bound;
  j["cap"] = cap_est.value;
  j["ratio_to_ell_cap"] = ratio;
  write_json(res.json_path, j);
  return res;
}

inline RunResult run_subboxes(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  int r = cfg.extra.value("r", 2);
  int R = cfg.extra.value("R", 32);
  SubboxParams sp;
  sp.replicas = cfg.replicas;
  sp.bounded_variant = cfg.extra.value("bounded", true);
  RngStream rng = derive_stream(cfg.seed, StreamTag::Potential, 0, 0x5B);
  SubboxStats stats = subbox_visit_stats(r, R, cfg.d, Coord{}, sp, rng);

  RunResult res;
  res.csv_path = out_dir / "subboxes.csv";
  res.json_path = out_dir / "subboxes.json";
  CsvWriter csv(res.csv_path, cfg.raw,
                {"d", "r", "R", "replicas", "mean_count", "count_stderr", "mean_pair_sum",
                 "count_over_ratio2", "seed"});
  double ratio2 = static_cast<double>(R) * R / (static_cast<double>(r) * r);
  csv.row({std::to_string(cfg.d), std::to_string(r), std::to_string(R),
           std::to_string(sp.replicas), format_number(stats.mean_count),
           format_number(stats.count_stderr), format_number(stats.mean_pair_sum),
           format_number(stats.mean_count / ratio2), std::to_string(cfg.seed)});
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["config"] = cfg.raw;
  j["mean_count"] = stats.mean_count;
  j["count_stderr"] = stats.count_stderr;
  j["mean_pair_sum"] = stats.mean_pair_sum;
  write_json(res.json_path, j);
  return res;
}

// --- campbell -------------------------------------------------------------------

inline RunResult run_campbell(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  LengthDistribution dist(cfg.dist);
  std::uint64_t max_len = dist.effective_cap();
  if (max_len > 4) throw ValidationError({"dist.cap (campbell needs lengths <= 4)"});
  // region: origin plus (region_size - 1) unit steps along axis 0
  int region_size = cfg.extra.value("region", 3);
  std::vector<Coord> region;
  for (int i = 0; i < region_size; ++i) {
    Coord c;
    c[0] = i;
    region.push_back(c);
  }
  PointSet region_set = make_point_set(cfg.d, region);

  // reference: deterministic enumeration
  auto worms_enum = enumerate_worms(region, cfg.d, max_len, dist, cfg.v);
  double ref_mean = 0, ref_var = 0;
  for (const auto& w : worms_enum) {
    double f = static_cast<double>(w.sites.size());  // linear functional: worm length
    ref_mean += w.weight * f;
    ref_var += w.weight * f * f;
  }

  // empirical: clouds over a window padded enough to be exact for max_len
  BoxGeometry window = BoxGeometry::centered(cfg.d, cfg.L, BoundaryKind::Free);
  CloudParams params;
  params.policy = CloudPolicy::PaddedWindow;
  params.margin = 0;
  auto values = run_replicas<double>(cfg.replicas, cfg.threads, [&](std::uint64_t rep) {
    WormCloud cloud = generate_worm_cloud(window, cfg.v, dist, cfg.seed, rep, params);
    double sum = 0;
    for (const auto& w : cloud.worms)
      if (region_set.contains(w.traj.start()))
        sum += static_cast<double>(w.traj.length());
    return sum;
  });

  Json emp = detail_harness::summary_stats(values);
  double emp_mean = emp["mean"].get<double>();
  double n = static_cast<double>(values.size());
  double svar = 0;
  for (double v : values) svar += (v - emp_mean) * (v - emp_mean);
  svar /= (n - 1);

  RunResult res;
  res.csv_path = out_dir / "campbell.csv";
  res.json_path = out_dir / "campbell.json";
  CsvWriter csv(res.csv_path, cfg.raw,
                {"functional", "empirical", "reference", "z"});
  double z_mean = (emp_mean - ref_mean) / std::max(1e-12, emp["stderr"].get<double>());
  csv.row({"mean", format_number(emp_mean), format_number(ref_mean), format_number(z_mean)});
  csv.row({"variance", format_number(svar), format_number(ref_var), format_number(0.0)});
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["config"] = cfg.raw;
  j["empirical_mean"] = emp_mean;
  j["reference_mean"] = ref_mean;
  j["empirical_variance"] = svar;
  j["reference_variance"] = ref_var;
  write_json(res.json_path, j);
  return res;
}

// --- scales ---------------------------------------------------------------------

inline ScaleParams scale_params_from_json(const Json& extra) {
  ScaleParams p;
  p.R_star0 = extra.value("R_star0", p.R_star0);
  p.gamma0 = extra.value("gamma0", p.gamma0);
  p.delta_low = extra.value("delta_low", p.delta_low);
  p.delta_up = extra.value("delta_up", p.delta_up);
  p.alpha_low = extra.value("alpha_low", p.alpha_low);
  p.psi = extra.value("psi", p.psi);
  p.s = extra.value("s", p.s);
  p.lambda = extra.value("lambda", p.lambda);
  return p;
}

inline Json certificate_to_json(const ScaleCertificate& cert) {
  Json conditions = Json::array();
  for (const auto& c : cert.conditions) {
    Json cc;
    cc["name"] = c.name;
    if (c.index >= 0) cc["n"] = c.index;
    cc["lhs"] = c.lhs;
    cc["rhs"] = c.rhs;
    cc["pass"] = c.pass;
    cc["margin"] = c.margin;
    cc["regime"] = c.regime;
    conditions.push_back(cc);
  }
  Json j;
  j["all_pass"] = cert.all_pass;
  j["conditions"] = conditions;
  return j;
}

inline RunResult run_scales(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  LengthDistribution dist(cfg.dist);
  ScaleParams sp = scale_params_from_json(cfg.extra);
  sp.v = cfg.v;
  double delta = cfg.extra.value("delta", 0.25);
  GeneratorSearch search;
  search.N_max = cfg.extra.value("N_max", 40);
  search.n0_max = cfg.extra.value("n0_max", 64);
  auto seq = generate_candidate_sequence(dist, sp, cfg.d, delta, search);

  RunResult res;
  res.csv_path = out_dir / "scales.csv";
  res.json_path = out_dir / "scales.json";
  CsvWriter csv(res.csv_path, cfg.raw, {"condition", "n", "lhs", "rhs", "pass", "margin", "regime"});
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["config"] = cfg.raw;
  j["dist"] = length_spec_to_json(cfg.dist);
  Json params_json;
  params_json["R_star0"] = sp.R_star0;
  params_json["gamma0"] = sp.gamma0;
  params_json["delta_low"] = sp.delta_low;
  params_json["delta_up"] = sp.delta_up;
  params_json["alpha_low"] = sp.alpha_low;
  params_json["psi"] = sp.psi;
  params_json["s"] = sp.s;
  params_json["lambda"] = sp.lambda;
  params_json["v"] = sp.v;
  j["params"] = params_json;
  if (seq) {
    Json sequence = Json::array();
    for (const auto& r : seq->R) {
      Json rv;
      rv["ln"] = r.log_e;
      if (r.exact) rv["value"] = *r.exact;
      sequence.push_back(rv);
    }
    j["found"] = true;
    j["n0"] = seq->n0;
    j["N"] = seq->N;
    j["delta"] = seq->delta;
    j["sequence"] = sequence;
    j["certificate"] = certificate_to_json(seq->certificate);
    for (const auto& c : seq->certificate.conditions)
      csv.row({c.name, std::to_string(c.index), format_number(c.lhs), format_number(c.rhs),
               std::to_string(c.pass ? 1 : 0), format_number(c.margin), c.regime});
  } else {
    j["found"] = false;
    j["N_max"] = search.N_max;
  }
  write_json(res.json_path, j);
  return res;
}

// --- target-shooting --------------------------------------------------------------

inline RunResult run_target_shooting(const ExperimentConfig& cfg,
                                     const std::filesystem::path& out_dir) {
  LengthDistribution dist(cfg.dist);
  TargetShootingConfig ts;
  ts.d = cfg.d;
  ts.R = cfg.extra.value("R", 2);
  ts.beta = cfg.extra.value("beta", 512);
  ts.v = cfg.v;
  int HR = cfg.extra.value("H_radius", ts.R);
  Coord h_center;
  h_center[0] = cfg.extra.value("H_offset", 3 * ts.R);
  BallSet H{h_center, HR, cfg.d};
  std::uint64_t param_samples = cfg.extra.value("param_samples", std::uint64_t{200000});
  TargetShootingResult r =
      target_shooting_estimate(ts, H, dist, param_samples, cfg.replicas, cfg.seed);

  RunResult res;
  res.csv_path = out_dir / "target-shooting.csv";
  res.json_path = out_dir / "target-shooting.json";
  CsvWriter csv(res.csv_path, cfg.raw,
                {"d", "R", "beta", "v", "lambda_hat", "lambda_stderr", "tail_prob",
                 "empirical_hit", "empirical_stderr", "replicas", "seed"});
  csv.row({std::to_string(cfg.d), std::to_string(ts.R), std::to_string(ts.beta),
           format_number(ts.v), format_number(r.poisson_param), format_number(r.param_stderr),
           format_number(r.tail_prob), format_number(r.empirical_hit),
           format_number(r.empirical_stderr), std::to_string(r.cloud_replicas),
           std::to_string(cfg.seed)});
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["config"] = cfg.raw;
  j["lambda_hat"] = r.poisson_param;
  j["lambda_stderr"] = r.param_stderr;
  j["tail_prob"] = r.tail_prob;
  j["empirical_hit"] = r.empirical_hit;
  j["empirical_stderr"] = r.empirical_stderr;
  write_json(res.json_path, j);
  return res;
}

// --- explore -----------------------------------------------------------------------

inline RunResult run_explore(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  LengthDistribution dist(cfg.dist);
  BoxGeometry window = cfg.window();
  CloudParams params;
  params.policy = cfg.boundary == "torus" ? CloudPolicy::TorusWrap : CloudPolicy::PaddedWindow;
  params.margin = params.policy == CloudPolicy::PaddedWindow ? padded_margin(cfg, dist) : 0;
  std::uint64_t budget = cfg.extra.value("budget", std::uint64_t{100000});

  struct Row {
    std::uint64_t replica = 0, animals = 0, layers = 0, sites = 0;
    bool budget_hit = false;
  };
  auto rows = run_replicas<Row>(cfg.replicas, cfg.threads, [&](std::uint64_t rep) {
    WormCloud cloud = generate_worm_cloud(window, cfg.v, dist, cfg.seed, rep, params);
    ExploreResult ex = explore_cluster_of_origin(cloud, budget);
    return Row{rep, ex.total_animals, ex.layer_animal_counts.size(), ex.cluster_sites.size(),
               ex.budget_hit};
  });

  RunResult res;
  res.csv_path = out_dir / "explore.csv";
  res.json_path = out_dir / "explore.json";
  CsvWriter csv(res.csv_path, cfg.raw,
                {"replica", "animals", "layers", "cluster_sites", "budget_hit"});
  std::vector<double> animal_counts;
  bool partial = false;
  for (const auto& r : rows) {
    csv.row({std::to_string(r.replica), std::to_string(r.animals), std::to_string(r.layers),
             std::to_string(r.sites), std::to_string(r.budget_hit ? 1 : 0)});
    animal_counts.push_back(static_cast<double>(r.animals));
    partial = partial || r.budget_hit;
  }
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["config"] = cfg.raw;
  j["animals"] = detail_harness::summary_stats(animal_counts);
  j["partial"] = partial;
  write_json(res.json_path, j);
  res.partial = partial;
  return res;
}

// --- dispatcher ----------------------------------------------------------------------

inline RunResult run_experiment(const ExperimentConfig& cfg,
                                const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  if (cfg.kind == "density") return run_density(cfg, out_dir);
  if (cfg.kind == "subcritical") return run_subcritical(cfg, out_dir);
  if (cfg.kind == "vc-sweep") return run_vc_sweep(cfg, out_dir);
  if (cfg.kind == "capacity") return run_capacity(cfg, out_dir);
  if (cfg.kind == "green") return run_green(cfg, out_dir);
  if (cfg.kind == "lln-range") return run_lln_range(cfg, out_dir);
  if (cfg.kind == "led") return run_led(cfg, out_dir);
  if (cfg.kind == "hitting-sums") return run_hitting_sums(cfg, out_dir);
  if (cfg.kind == "subboxes") return run_subboxes(cfg, out_dir);
  if (cfg.kind == "campbell") return run_campbell(cfg, out_dir);
  if (cfg.kind == "scales") return run_scales(cfg, out_dir);
  if (cfg.kind == "target-shooting") return run_target_shooting(cfg, out_dir);
  if (cfg.kind == "explore") return run_explore(cfg, out_dir);
  throw ValidationError({"kind"});
}

}  // namespace wormlab
