#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "nonohmic/acceptance.hpp"

using namespace nonohmic;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> ensemble;
  std::optional<unsigned> threads;
  std::optional<std::string> label;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config, "JSON config file (defaults < file < flags)");
  sub->add_option("--seed", f.seed, "Master seed");
  sub->add_option("--out", f.out, "Output root; data goes to <out>/<experiment>/<label>");
  sub->add_option("--ensemble", f.ensemble, "Realizations per ensemble");
  sub->add_option("--threads", f.threads, "Worker threads (0: NONOHMIC_THREADS or hardware)");
  sub->add_option("--label", f.label, "Run label (output subdirectory)");
}

ExperimentConfig layered_config(ExperimentKind kind, const CommonFlags& f) {
  ExperimentConfig c;
  if (!f.config.empty()) c = load_config(f.config, c);
  json flags = {{"experiment", to_string(kind)}};
  if (f.seed) flags["seed"] = *f.seed;
  if (f.out) flags["out"] = *f.out;
  if (f.ensemble) flags["ensemble"] = *f.ensemble;
  if (f.threads) flags["threads"] = *f.threads;
  if (f.label) flags["label"] = *f.label;
  return config_from_json(flags, c);
}

int run_experiment(ExperimentKind kind, const CommonFlags& f) {
  auto c = layered_config(kind, f);
  const auto rep = run(c);
  std::printf("%s: %zu files in %s (%.1f s)\n", to_string(kind).c_str(), rep.files.size(), rep.directory.c_str(),
              rep.wall_seconds);
  if (!rep.failed.empty()) std::printf("%zu realizations failed; see report.json\n", rep.failed.size());
  return exit_ok;
}

int run_accept(const CommonFlags& f, const std::vector<int>& only) {
  AcceptanceOptions opt;
  if (!f.config.empty()) throw ConfigError("accept takes no config file");
  if (f.seed) opt.seed = *f.seed;
  if (f.out) opt.out = *f.out;
  if (f.threads) opt.threads = *f.threads;
  opt.only = only;
  const auto results = run_acceptance(opt, [](const CriterionResult& r) {
    std::printf("%s [%d] %s: %s (%.1f s)\n", r.pass ? "PASS" : "FAIL", r.id, r.name.c_str(), r.summary.c_str(),
                r.seconds);
    std::fflush(stdout);
  });
  std::size_t passed = 0;
  for (const auto& r : results) passed += r.pass;
  std::printf("%zu/%zu criteria passed\n", passed, results.size());
  return passed == results.size() ? exit_ok : exit_numerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-Ohmic decay lab: Friedrichs and Wigner model experiments"};
  app.require_subcommand(1);
  CommonFlags flags;
  std::vector<int> only;
  const std::vector<std::pair<ExperimentKind, const char*>> commands = {
      {ExperimentKind::Ldos, "Ensemble LDOS histograms with the analytic FM overlay"},
      {ExperimentKind::Decay, "Survival probability P0(t) and stretched-exponent fit"},
      {ExperimentKind::Spread, "Energy spreading and core width with theory curves"},
      {ExperimentKind::ScanS, "Decay runs over s_grid with fitted exponents"},
      {ExperimentKind::CoreScaling, "Core departure time vs saturation over epsilon_grid"},
      {ExperimentKind::Acceptance, "Run the acceptance suite"}};
  std::vector<std::pair<CLI::App*, ExperimentKind>> subs;
  for (const auto& [kind, help] : commands) {
    auto* sub = app.add_subcommand(to_string(kind), help);
    add_common(sub, flags);
    if (kind == ExperimentKind::Acceptance)
      sub->add_option("--only", only, "Criteria to run (1-10)")->check(CLI::Range(1, acceptance::count));
    subs.emplace_back(sub, kind);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? exit_ok : exit_config;
  }

  try {
    for (const auto& [sub, kind] : subs) {
      if (!sub->parsed()) continue;
      return kind == ExperimentKind::Acceptance ? run_accept(flags, only) : run_experiment(kind, flags);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const PartialEnsembleError& e) {
    std::cerr << "partial ensemble: " << e.what() << "\n";
    return exit_partial;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return exit_numerical;
  }
  return exit_config;
}
