// worms: command-line front end for the experiment harness.
//
//   worms <kind> --config cfg.json [--seed N] [--out DIR] [--replicas N] [--threads N]
//   worms <kind> --preset NAME [overrides...]
//   worms preset NAME            # print a preset config
//   worms list                   # list experiment kinds
//
// Exit codes: 0 success, 2 validation error, 3 budget exhausted (partial
// outputs written and flagged).

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "wormlab/harness.hpp"

namespace {

int run_kind(const std::string& kind, const std::string& config_path,
             const std::string& preset_name, long long seed, const std::string& out_dir,
             long long replicas, int threads) {
  wormlab::Json raw;
  if (!preset_name.empty()) {
    raw = wormlab::preset(preset_name);
  } else if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "error: cannot open config file " << config_path << "\n";
      return 2;
    }
    raw = wormlab::Json::parse(in, nullptr, true, true);
  } else {
    std::cerr << "error: one of --config or --preset is required\n";
    return 2;
  }
  raw["kind"] = kind;
  if (seed >= 0) raw["seed"] = static_cast<std::uint64_t>(seed);
  if (replicas > 0) raw["replicas"] = static_cast<std::uint64_t>(replicas);
  if (threads > 0) raw["threads"] = threads;

  wormlab::ExperimentConfig cfg = wormlab::parse_config(raw);
  auto t0 = std::chrono::steady_clock::now();
  wormlab::RunResult res = wormlab::run_experiment(cfg, out_dir);
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - t0)
                .count();
  std::cerr << "wrote " << res.csv_path.string() << " and " << res.json_path.string()
            << " in " << ms << " ms\n";
  if (res.partial) {
    std::cerr << "warning: budget exhausted, outputs flagged partial\n";
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo laboratory for the random length worms model"};
  app.require_subcommand(1);

  std::string config_path, preset_name, out_dir = "out";
  long long seed = -1, replicas = 0;
  int threads = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--preset", preset_name, "named preset instead of a config file");
    sub->add_option("--seed", seed, "master seed override");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--replicas", replicas, "replica count override");
    sub->add_option("--threads", threads, "worker threads");
  };
  for (const auto& kind : wormlab::experiment_kinds()) add_common(app.add_subcommand(kind));

  std::string wanted_preset;
  CLI::App* show = app.add_subcommand("preset", "print a named preset config");
  show->add_option("name", wanted_preset, "preset name")->required();
  app.add_subcommand("list", "list experiment kinds");

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (sub->get_name() == "list") {
      for (const auto& k : wormlab::experiment_kinds()) std::cout << k << "\n";
      return 0;
    }
    if (sub->get_name() == "preset") {
      std::cout << wormlab::preset(wanted_preset).dump(2) << "\n";
      return 0;
    }
    return run_kind(sub->get_name(), config_path, preset_name, seed, out_dir, replicas,
                    threads);
  } catch (const wormlab::ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const wormlab::BudgetExhausted& e) {
    std::cerr << "budget exhausted: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
