// Command line front end: one subcommand per experiment kind.
//
// Exit status: 0 when the run succeeded and every [expect] check passed,
// 1 when a check failed, 2 for configuration or usage errors, 3 for any
// other failure.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "homlab/config.hpp"
#include "homlab/errors.hpp"
#include "homlab/experiments.hpp"

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool rf_chain = false;
  std::optional<std::string> samples;
};

void add_common(CLI::App* sub, Common& c, bool classical) {
  sub->add_option("--config", c.config_path, "Experiment config file");
  sub->add_option("--seed", c.seed, "Master seed (overrides the config)");
  sub->add_option("--out", c.out_dir, "Output directory (overrides the config)");
  if (classical) {
    sub->add_flag("--rf-chain", c.rf_chain, "Route the pulses through the heterodyne chain");
    sub->add_option("--samples", c.samples, "Ensemble size per delay: a count or 'auto'")
        ->check([](const std::string& v) -> std::string {
          if (v == "auto") return {};
          if (!v.empty() && v.find_first_not_of("0123456789") == std::string::npos) return {};
          return "expected 'auto' or a positive integer";
        });
  }
}

int run(const homlab::Config& cfg, const Common& c, const std::string& subcommand) {
  namespace ex = homlab::experiments;
  const std::string kind = cfg.get_string("kind", "");
  if (ex::subcommand_for_kind(kind) != subcommand)
    throw homlab::ConfigError(cfg.source() + ": kind '" + kind + "' does not belong to the '" +
                              subcommand + "' subcommand");
  ex::RunOptions opt;
  opt.out_dir = c.out_dir;
  opt.seed = c.seed;
  opt.rf_chain = c.rf_chain;
  opt.samples = c.samples;
  const auto outcome = ex::run_config(cfg, opt);
  std::cout << kind << ": " << outcome.summary << "\n";
  for (const auto& f : outcome.files) std::cout << "  wrote " << f.string() << "\n";
  if (!outcome.checks_passed) {
    std::cout << "  expectation check FAILED (see the JSON summary)\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Classical and quantum two-pulse interference simulator"};
  app.require_subcommand(1);

  const char* names[] = {"classical-dip", "quantum-dip", "complementarity", "mzi-scan",
                         "fit",           "min-n",       "bootstrap"};
  const char* help[] = {
      "Monte-Carlo cross-correlation dip of two phase-randomized pulses",
      "Coincidence profile of the photon-pair model, optionally with count noise",
      "Blocked/unblocked interferometer ratio (classical or quantum config)",
      "Coincidence and classical intensities versus interferometer phase",
      "Least-squares fit of a quantum or classical dip",
      "Minimum ensemble size, from mean/std or from a pilot sweep",
      "Percentile bootstrap confidence interval of a sample mean"};

  Common common;
  double mean = 0.0, std_dev = 0.0, rel = 0.05, z = 1.96, level = 0.95;
  std::string data_path;
  std::size_t resamples = 10000;
  CLI::App* subs[7];
  for (int i = 0; i < 7; ++i) {
    const std::string name = names[i];
    subs[i] = app.add_subcommand(name, help[i]);
    const bool classical = name == "classical-dip" || name == "complementarity" ||
                           name == "mzi-scan" || name == "min-n";
    add_common(subs[i], common, classical);
  }
  auto* min_n = subs[5];
  auto* mean_opt = min_n->add_option("--mean", mean, "Sample mean (direct mode)");
  auto* std_opt = min_n->add_option("--std", std_dev, "Sample standard deviation (direct mode)");
  auto* rel_opt = min_n->add_option("--rel-halfwidth", rel, "Relative CI half-width");
  auto* z_opt = min_n->add_option("--z", z, "Normal quantile");
  auto* boot = subs[6];
  auto* data_opt = boot->add_option("--data", data_path, "File with one value per line");
  auto* resamples_opt = boot->add_option("--resamples", resamples, "Bootstrap resamples");
  auto* level_opt = boot->add_option("--level", level, "Confidence level");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    for (int i = 0; i < 7; ++i) {
      if (!subs[i]->parsed()) continue;
      const std::string name = names[i];
      homlab::Config cfg;
      if (!common.config_path.empty()) {
        cfg = homlab::Config::load(common.config_path);
      } else if (name == "min-n" && *mean_opt) {
        cfg.set("kind", "min-n");
      } else if (name == "bootstrap" && *data_opt) {
        cfg.set("kind", "bootstrap");
      } else {
        throw homlab::ConfigError("--config is required for " + name);
      }
      auto put = [&](CLI::Option* opt, const std::string& key, double v) {
        if (!*opt) return;
        std::ostringstream os;
        os.precision(17);
        os << v;
        cfg.set(key, os.str());
      };
      if (name == "min-n") {
        put(mean_opt, "min_n.mean", mean);
        put(std_opt, "min_n.std", std_dev);
        put(rel_opt, "min_n.rel_halfwidth", rel);
        put(z_opt, "min_n.z", z);
      }
      if (name == "bootstrap") {
        if (*data_opt) cfg.set("bootstrap.data", data_path);
        if (*resamples_opt) cfg.set("bootstrap.resamples", std::to_string(resamples));
        put(level_opt, "bootstrap.level", level);
      }
      return run(cfg, common, name);
    }
  } catch (const homlab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
