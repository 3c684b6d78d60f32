// odt: command line front end for the scheduling experiments.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "odt/experiment.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "experiment config file")->required();
  cmd->add_option("--seed", c.seed, "master seed (overrides the config)");
  cmd->add_option("--out", c.out, "output directory (overrides the config)");
}

odt::ExperimentConfig resolve(const Common& c) {
  auto kv = [&] {
    try {
      return odt::KeyValueFile::load(c.config);
    } catch (const odt::StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw odt::StageError("config", e.what());
    }
  }();
  if (c.seed) kv.set("seed", std::to_string(*c.seed));
  if (!c.out.empty()) kv.set("out", c.out);
  try {
    return odt::ExperimentConfig::parse(kv);
  } catch (const odt::StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw odt::StageError("config", e.what());
  }
}

void print_kpis(const std::string& label, const odt::RunKpis& k) {
  std::printf("%-10s rate=%.3f MBit/s  aoi=%.2f s  prb/MB=%s  tx=%zu\n", label.c_str(), k.mean_rate, k.mean_aoi,
              k.prb_per_mb ? std::to_string(*k.prb_per_mb).c_str() : "n/a", k.transmissions);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"opportunistic data transmission experiments"};
  app.require_subcommand(1);

  Common run_opts, sweep_opts, compare_opts, cluster_opts, drift_opts;
  std::string axis;
  std::vector<double> values;
  std::vector<std::string> schemes;

  auto* run = app.add_subcommand("run", "train and evaluate one scheme");
  add_common(run, run_opts);
  auto* sw = app.add_subcommand("sweep", "vary one parameter");
  add_common(sw, sweep_opts);
  sw->add_option("--axis", axis, "parameter to vary")->required();
  sw->add_option("--values", values, "values of the parameter")->required();
  auto* cmp = app.add_subcommand("compare", "run several schemes on shared models");
  add_common(cmp, compare_opts);
  cmp->add_option("--values,--schemes", schemes, "scheme names (default: compare.schemes)");
  auto* cl = app.add_subcommand("cluster", "detect black spots and report the trade-off");
  add_common(cl, cluster_opts);
  auto* dr = app.add_subcommand("drift", "concept drift experiment");
  add_common(dr, drift_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto cfg = resolve(run_opts);
      const auto r = odt::run_experiment(cfg);
      print_kpis(r.scheme, r.kpis);
      if (r.convergence) std::printf("converged at epoch %zu\n", *r.convergence);
      std::printf("wrote %s\n", cfg.out.string().c_str());
    } else if (*sw) {
      const auto cfg = resolve(sweep_opts);
      const auto rows = odt::sweep(cfg, axis, values);
      std::fputs(odt::format_sweep(axis, rows).c_str(), stdout);
    } else if (*cmp) {
      const auto cfg = resolve(compare_opts);
      const auto names = schemes.empty() ? cfg.compare_schemes : schemes;
      const auto rows = odt::compare_schemes(cfg, names);
      for (const auto& r : rows) print_kpis(r.scheme, r.kpis);
    } else if (*cl) {
      const auto cfg = resolve(cluster_opts);
      const auto rep = odt::run_cluster(cfg);
      std::printf("%zu black spots, eliminated fraction %.3f\n", rep.map.ellipses.size(),
                  rep.map.eliminated_fraction);
      std::fputs(odt::format_tradeoff(rep.tradeoff).c_str(), stdout);
    } else if (*dr) {
      const auto cfg = resolve(drift_opts);
      std::fputs(odt::format_drift(odt::run_drift(cfg)).c_str(), stdout);
    }
  } catch (const odt::StageError& e) {
    std::cerr << "odt: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "odt: [internal] " << e.what() << "\n";
    return 3;
  }
  return 0;
}
