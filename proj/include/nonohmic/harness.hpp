#pragma once

// Experiment orchestration: JSON configs, a bounded worker pool over
// realizations, ensemble merging and flat-file output with a hashed manifest.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "nonohmic/hamiltonian.hpp"
#include "nonohmic/io.hpp"
#include "nonohmic/ldos.hpp"
#include "nonohmic/observables.hpp"
#include "nonohmic/simulation.hpp"
#include "nonohmic/spectral_theory.hpp"
#include "nonohmic/volterra.hpp"

#ifndef NONOHMIC_VERSION
#define NONOHMIC_VERSION "dev"
#endif

namespace nonohmic {

// Exit codes of the command-line driver.
inline constexpr int exit_ok = 0;
inline constexpr int exit_config = 1;
inline constexpr int exit_numerical = 2;
inline constexpr int exit_partial = 3;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PartialEnsembleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind { Ldos, Decay, Spread, ScanS, CoreScaling, Acceptance };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Ldos: return "ldos";
    case ExperimentKind::Decay: return "decay";
    case ExperimentKind::Spread: return "spread";
    case ExperimentKind::ScanS: return "scan-s";
    case ExperimentKind::CoreScaling: return "core-scaling";
    default: return "accept";
  }
}

inline ExperimentKind experiment_kind_from_string(const std::string& s) {
  for (auto k : {ExperimentKind::Ldos, ExperimentKind::Decay, ExperimentKind::Spread, ExperimentKind::ScanS,
                 ExperimentKind::CoreScaling, ExperimentKind::Acceptance})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown experiment kind '" + s + "'");
}

/// Times in units of t0 unless `absolute`, then in units of 1/energy.
struct TimeGridPolicy {
  double t_min = 1e-2;
  double t_max = 1e2;
  std::size_t points = 60;
  bool absolute = false;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Decay;
  ModelSpec model;
  std::vector<double> s_grid;        // scan-s
  std::vector<double> epsilon_grid;  // core-scaling
  std::size_t ensemble = 1;
  TimeGridPolicy time;
  std::string out_dir = "out";
  std::string label = "default";
  std::uint64_t master_seed = 1;
  unsigned threads = 0;  // 0: NONOHMIC_THREADS or the hardware count
  double tol = 1e-10;
  std::size_t bins_per_decade = 20;
};

// --------------------------------------------------------------------------
// JSON
// --------------------------------------------------------------------------

inline json to_json(const ModelSpec& m) {
  return {{"kind", to_string(m.kind)},
          {"s", m.s},
          {"epsilon", m.epsilon},
          {"rho", m.rho},
          {"b", m.b},
          {"n_levels", m.n_levels},
          {"seed", m.seed},
          {"cutoff", to_string(m.cutoff)},
          {"omega_c", m.omega_c},
          {"couplings", to_string(m.couplings)}};
}

inline json to_json(const TimeScales& ts) {
  auto num = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
  return {{"t0", num(ts.t0)},         {"t_c", num(ts.t_c)},         {"t_H", num(ts.t_H)},
          {"t_inf", num(ts.t_inf)},   {"gamma0", num(ts.gamma0)},   {"gamma_o", num(ts.gamma_o)},
          {"universal_regime", ts.universal_regime}};
}

inline json to_json(const ExperimentConfig& c) {
  return {{"experiment", to_string(c.kind)},
          {"model", to_json(c.model)},
          {"s_grid", c.s_grid},
          {"epsilon_grid", c.epsilon_grid},
          {"ensemble", c.ensemble},
          {"time", {{"t_min", c.time.t_min}, {"t_max", c.time.t_max}, {"points", c.time.points},
                    {"absolute", c.time.absolute}}},
          {"out", c.out_dir},
          {"label", c.label},
          {"seed", c.master_seed},
          {"tol", c.tol},
          {"bins_per_decade", c.bins_per_decade}};
}

namespace detail {

template <class T>
void read_if(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

}  // namespace detail

inline ModelSpec model_from_json(const json& j, ModelSpec m = {}) {
  if (!j.is_object()) throw ConfigError("model must be an object");
  detail::check_keys(j, {"kind", "s", "epsilon", "rho", "b", "n_levels", "seed", "cutoff", "omega_c", "couplings"},
                     "model");
  std::string kind = to_string(m.kind), cutoff = to_string(m.cutoff), law = to_string(m.couplings);
  detail::read_if(j, "kind", kind);
  detail::read_if(j, "s", m.s);
  detail::read_if(j, "epsilon", m.epsilon);
  detail::read_if(j, "rho", m.rho);
  detail::read_if(j, "b", m.b);
  detail::read_if(j, "n_levels", m.n_levels);
  detail::read_if(j, "seed", m.seed);
  detail::read_if(j, "cutoff", cutoff);
  detail::read_if(j, "omega_c", m.omega_c);
  detail::read_if(j, "couplings", law);
  if (kind == "friedrichs" || kind == "FM") m.kind = ModelKind::Friedrichs;
  else if (kind == "wigner" || kind == "WM") m.kind = ModelKind::Wigner;
  else throw ConfigError("model.kind must be friedrichs or wigner");
  if (cutoff == "sharp") m.cutoff = CutoffKind::Sharp;
  else if (cutoff == "exponential") m.cutoff = CutoffKind::Exponential;
  else throw ConfigError("model.cutoff must be sharp or exponential");
  if (law == "gaussian") m.couplings = CouplingLaw::Gaussian;
  else if (law == "mean_profile") m.couplings = CouplingLaw::MeanProfile;
  else throw ConfigError("model.couplings must be gaussian or mean_profile");
  return m;
}

/// Keys absent from `j` keep the values already in `base`.
inline ExperimentConfig config_from_json(const json& j, ExperimentConfig c = {}) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  detail::check_keys(j, {"experiment", "model", "s_grid", "epsilon_grid", "ensemble", "time", "out", "label", "seed",
                         "threads", "tol", "bins_per_decade"},
                     "config");
  if (j.contains("experiment")) c.kind = experiment_kind_from_string(j.at("experiment").get<std::string>());
  if (j.contains("model")) c.model = model_from_json(j.at("model"), c.model);
  detail::read_if(j, "s_grid", c.s_grid);
  detail::read_if(j, "epsilon_grid", c.epsilon_grid);
  detail::read_if(j, "ensemble", c.ensemble);
  if (j.contains("time")) {
    const auto& t = j.at("time");
    detail::check_keys(t, {"t_min", "t_max", "points", "absolute"}, "time");
    detail::read_if(t, "t_min", c.time.t_min);
    detail::read_if(t, "t_max", c.time.t_max);
    detail::read_if(t, "points", c.time.points);
    detail::read_if(t, "absolute", c.time.absolute);
  }
  detail::read_if(j, "out", c.out_dir);
  detail::read_if(j, "label", c.label);
  detail::read_if(j, "seed", c.master_seed);
  detail::read_if(j, "threads", c.threads);
  detail::read_if(j, "tol", c.tol);
  detail::read_if(j, "bins_per_decade", c.bins_per_decade);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {}) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(is, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j, base);
}

inline void validate(const ExperimentConfig& c) {
  try {
    c.model.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.ensemble < 1) throw ConfigError("ensemble must be >= 1");
  if (!(c.time.t_min > 0.0 && c.time.t_max > c.time.t_min) || c.time.points < 2)
    throw ConfigError("time grid needs 0 < t_min < t_max and points >= 2");
  if (!(c.tol > 0.0 && c.tol <= 1e-4)) throw ConfigError("tol must lie in (0, 1e-4]");
  if (c.kind == ExperimentKind::ScanS && c.s_grid.empty()) throw ConfigError("scan-s needs s_grid");
  if (c.kind == ExperimentKind::CoreScaling && c.epsilon_grid.size() < 4)
    throw ConfigError("core-scaling needs at least four epsilon_grid values");
  if (c.label.empty() || c.label.find('/') != std::string::npos) throw ConfigError("label must be a plain name");
}

// --------------------------------------------------------------------------
// Scheduling
// --------------------------------------------------------------------------

/// Per-realization seed from the master seed and the realization index.
inline std::uint64_t realization_seed(std::uint64_t master, std::size_t index) {
  return detail::splitmix64(detail::splitmix64(master) ^ (0xd1b54a32d192ed03ULL * (index + 1)));
}

inline unsigned default_threads() {
  if (const char* env = std::getenv("NONOHMIC_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

struct TaskFailure {
  std::size_t index = 0;
  std::string error;
};

template <class R>
struct PoolResult {
  std::vector<std::optional<R>> results;
  std::vector<TaskFailure> failures;
  std::size_t retries = 0;

  std::size_t succeeded() const {
    std::size_t n = 0;
    for (const auto& r : results) n += r.has_value();
    return n;
  }
};

/// Run task(i, attempt) for i < n on a bounded pool. A throwing task is retried
/// once (attempt = 1); a second failure is recorded and the slot left empty.
/// Results are stored by index, so merging them in order is deterministic.
template <class R>
PoolResult<R> run_pool(std::size_t n, unsigned threads, const std::function<R(std::size_t, int)>& task) {
  PoolResult<R> out;
  out.results.resize(n);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> retries{0};
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      for (int attempt = 0; attempt < 2; ++attempt) {
        try {
          out.results[i] = task(i, attempt);
          break;
        } catch (const std::exception& e) {
          if (attempt == 0) {
            ++retries;
            continue;
          }
          std::lock_guard<std::mutex> lock(mu);
          out.failures.push_back({i, e.what()});
        }
      }
    }
  };
  const unsigned k = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < k; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  std::sort(out.failures.begin(), out.failures.end(),
            [](const TaskFailure& a, const TaskFailure& b) { return a.index < b.index; });
  out.retries = retries;
  return out;
}

/// Partial ensembles are valid at >= 80% success.
template <class R>
void require_quorum(const PoolResult<R>& r, const std::string& what) {
  const std::size_t n = r.results.size();
  if (n == 0 || 5 * r.succeeded() < 4 * n) {
    std::string msg = what + ": " + std::to_string(r.succeeded()) + "/" + std::to_string(n) + " realizations succeeded";
    if (!r.failures.empty()) msg += "; first error: " + r.failures.front().error;
    throw PartialEnsembleError(msg);
  }
}

// --------------------------------------------------------------------------
// Run
// --------------------------------------------------------------------------

struct RunReport {
  json config;
  json time_scales;
  std::vector<FileRecord> files;
  json diagnostics = json::object();
  std::vector<TaskFailure> failed;
  double wall_seconds = 0.0;
  std::string version = NONOHMIC_VERSION;
  std::filesystem::path directory;

  json to_json() const {
    json f = json::array();
    for (const auto& r : files) f.push_back(r);
    json bad = json::array();
    for (const auto& x : failed) bad.push_back({{"index", x.index}, {"error", x.error}});
    return {{"config", config},        {"time_scales", time_scales}, {"files", f},
            {"diagnostics", diagnostics}, {"failed_realizations", bad}, {"wall_seconds", wall_seconds},
            {"version", version}};
  }
};

/// Ensemble-mean C(t) of the lattice, sum_n E|V_n0|^2 e^{-i E_n t}.
inline std::complex<double> expected_correlation(const ModelSpec& spec, double t) {
  std::complex<double> c{0.0, 0.0};
  for (long n = -spec.b; n <= spec.b; ++n) {
    if (n == 0) continue;
    c += coupling_variance(spec, n) * std::polar(1.0, -static_cast<double>(n) / spec.rho * t);
  }
  return c;
}

inline std::vector<double> experiment_times(const ExperimentConfig& c, const ModelSpec& m) {
  const double unit = c.time.absolute ? 1.0 : wigner_time(m.profile());
  if (!std::isfinite(unit) || !(unit > 0.0)) throw ConfigError("time grid in units of t0 needs 0 < s < 2 and eps > 0");
  return log_time_grid(c.time.t_min * unit, c.time.t_max * unit, c.time.points);
}

struct EnsembleRun {
  ObservableSeries series;
  PoolResult<RealizationResult> pool;
  RunningStats C0;
  json diagnostics;
};

/// Decay/spreading ensemble of `spec` on `times`.
inline EnsembleRun run_ensemble(const ExperimentConfig& c, const ModelSpec& spec, const std::vector<double>& times,
                                std::uint64_t stream = 0) {
  EnsembleRun out;
  const unsigned threads = c.threads ? c.threads : default_threads();
  out.pool = run_pool<RealizationResult>(c.ensemble, threads, [&](std::size_t i, int attempt) {
    ModelSpec m = spec;
    m.seed = realization_seed(c.master_seed + stream, i);
    // The retry tightens the tolerance, which also halves the first step.
    return simulate_realization(m, times, attempt == 0 ? c.tol : 0.1 * c.tol);
  });
  require_quorum(out.pool, "ensemble");
  SeriesAccumulator acc(times);
  std::size_t matvecs = 0, expansions = 0;
  double drift = 0.0;
  long width = 0;
  for (const auto& r : out.pool.results) {
    if (!r) continue;
    acc.add(r->measurements);
    out.C0.push(r->C0);
    matvecs += r->stats.matvecs;
    expansions += r->expansions;
    drift = std::max(drift, r->max_norm_drift);
    width = std::max(width, r->final_hi - r->final_lo + 1);
  }
  out.series = acc.series();
  out.diagnostics = {{"realizations", out.series.realizations}, {"failed", out.pool.failures.size()},
                     {"retries", out.pool.retries},            {"matvecs", matvecs},
                     {"expansions", expansions},               {"max_norm_drift", drift},
                     {"max_lattice_size", width},              {"realized_C0_mean", out.C0.mean()}};
  return out;
}

inline Table series_table(const ObservableSeries& s, const json& header) {
  Table t;
  t.header = header;
  t.add("t", s.t);
  t.add("P0", s.P0);
  t.add("dE_core", s.dE_core);
  t.add("dE_sprd", s.dE_sprd);
  t.add("E25", s.E25);
  t.add("E50", s.E50);
  t.add("E75", s.E75);
  t.add("P0_stderr", s.P0_err);
  t.add("dE_core_stderr", s.dE_core_err);
  t.add("dE_sprd_stderr", s.dE_sprd_err);
  return t;
}

namespace detail {

inline json fit_json(const ExponentFit& f) {
  return {{"value", f.value}, {"stderr", f.stderr_value}, {"window", {f.window.lo, f.window.hi}},
          {"npoints", f.npoints}};
}

inline void run_ldos(const ExperimentConfig& c, RunReport& rep, const json& header) {
  const auto& m = c.model;
  const auto p = m.profile();
  const auto ts = time_scales(p);
  const double lo = 0.5 / m.rho, hi = m.bandwidth();
  const auto edges = log_abs_edges(lo, hi, c.bins_per_decade);
  const double core = std::isfinite(ts.gamma0) && ts.gamma0 > 0.0 ? ts.gamma0 : 1.0;
  // Linear view around the core. The bin width is an odd number of level
  // spacings so every edge falls halfway between lattice energies.
  const double half = std::min(hi, 10.0 * core);
  const long m_odd = 2 * std::max(0L, std::lround(half * m.rho / 200.0)) + 1;
  const double dw = static_cast<double>(m_odd) / m.rho;
  const auto nb = static_cast<long>(std::ceil(half / dw));
  std::vector<double> lin;
  for (long k = -nb - 1; k <= nb; ++k) lin.push_back((static_cast<double>(k) + 0.5) * dw);
  const unsigned threads = c.threads ? c.threads : default_threads();
  auto pool = run_pool<LdosSpectrum>(c.ensemble, threads, [&](std::size_t i, int) {
    ModelSpec r = m;
    r.seed = realization_seed(c.master_seed, i);
    return ldos_eigen(build(r));
  });
  require_quorum(pool, "ldos");
  LdosAccumulator a_log(edges, true, m.kind), a_lin(lin, false, m.kind);
  for (const auto& r : pool.results)
    if (r) {
      a_log.add(*r);
      a_lin.add(*r);
    }
  const auto hl = a_log.histogram(), hn = a_lin.histogram();
  auto views = [&](const LdosHistogram& h, const std::string& name) {
    Table t;
    t.header = header;
    t.header["view"] = h.abs_axis ? "log_abs" : "linear";
    std::vector<double> w, d, e, exact, universal;
    for (std::size_t i = 0; i < h.bins(); ++i) {
      w.push_back(h.center(i));
      d.push_back(h.density(i));
      e.push_back(h.std_error[i] / h.width(i));
      exact.push_back(m.kind == ModelKind::Friedrichs ? fm_ldos_analytic(p, w.back(), LdosMode::Exact) : NAN);
      universal.push_back(fm_ldos_analytic(p, w.back(), LdosMode::Universal));
    }
    t.add("omega", w);
    t.add("density", d);
    t.add("stderr", e);
    t.add("fm_exact", exact);
    t.add("fm_universal", universal);
    rep.files.push_back(write_file(rep.directory, name + ".csv", t.to_csv()));
    rep.files.push_back(write_file(rep.directory, name + "_plot.dat", t.to_dat()));
  };
  views(hl, "ldos_log");
  views(hn, "ldos_linear");
  rep.failed = pool.failures;
  rep.diagnostics = {{"realizations", pool.succeeded()}, {"outside_weight", hl.outside}};
}

inline void emit_decay(const ExperimentConfig& c, const ModelSpec& m, const EnsembleRun& run, RunReport& rep,
                       const json& header, const std::string& prefix) {
  const auto p = m.profile();
  const double t0 = wigner_time(p);
  rep.files.push_back(write_file(rep.directory, prefix + "series.csv", series_table(run.series, header).to_csv()));
  Table plot;
  plot.header = header;
  std::vector<double> x, st, pl;
  for (double t : run.series.t) {
    x.push_back(t / t0);
    st.push_back(std::pow(decay_asymptotics(p, t, DecayRegime::Stretched).c0, 2));
    pl.push_back(std::pow(decay_asymptotics(p, t, DecayRegime::PowerLaw).c0, 2));
  }
  plot.add("t_over_t0", x);
  plot.add("P0", run.series.P0);
  plot.add("theory_stretched", st);
  plot.add("theory_powerlaw", pl);
  rep.files.push_back(write_file(rep.directory, prefix + "decay_plot.dat", plot.to_dat()));
  json fit;
  try {
    fit["alpha"] = fit_json(fit_stretch_exponent(run.series.t, run.series.P0,
                                                 measured_stretch_window(p, m.kind, run.series.t, run.series.P0)));
  } catch (const std::invalid_argument& e) {
    fit["alpha"] = {{"error", e.what()}};
  }
  fit["expected_alpha"] = 2.0 - p.s;
  rep.files.push_back(write_file(rep.directory, prefix + "fit.json", fit.dump(2) + "\n"));
  (void)c;
}

inline void emit_spread(const ModelSpec& m, const EnsembleRun& run, RunReport& rep, const json& header) {
  const double wc = m.bandwidth();
  const double C0 = run.C0.mean();
  const double norm = std::sqrt(C0);
  Table plot;
  plot.header = header;
  plot.header["normalizer"] = "sqrt(realized C0)";
  std::vector<double> x, sim, lrt, fm;
  const double kernel0 = expected_correlation(m, 0.0).real();
  std::optional<VolterraSolution> vol;
  if (m.kind == ModelKind::Friedrichs) {
    // Ensemble-mean kernel on a grid fine enough for w_c.
    const double dt = std::min(0.05 / wc, run.series.t.back() / 4096.0);
    const auto n = static_cast<std::size_t>(std::ceil(run.series.t.back() / dt)) + 1;
    std::vector<std::complex<double>> k(n);
    for (std::size_t i = 0; i < n; ++i) k[i] = expected_correlation(m, dt * static_cast<double>(i));
    vol = survival_volterra(k, dt, wc);
  }
  for (std::size_t i = 0; i < run.series.t.size(); ++i) {
    const double t = run.series.t[i];
    x.push_back(wc * t);
    sim.push_back(run.series.dE_sprd[i] / norm);
    lrt.push_back(spreading_lrt(kernel0, expected_correlation(m, t)) / std::sqrt(kernel0));
    if (vol) {
      const auto j = std::min(static_cast<std::size_t>(std::lround(t / vol->dt)), vol->c0.c0.size() - 1);
      fm.push_back(spreading_fm_exact(vol->c0.c0[j], vol->dc0[j], vol->ddc0[j], kernel0).value / std::sqrt(kernel0));
    } else {
      fm.push_back(NAN);
    }
  }
  plot.add("omega_c_t", x);
  plot.add("dE_sprd_scaled", sim);
  plot.add("theory_lrt", lrt);
  plot.add("theory_fm_exact", fm);
  rep.files.push_back(write_file(rep.directory, "spread_plot.dat", plot.to_dat()));
}

}  // namespace detail

/// Execute one experiment; data files go to out/<experiment>/<label>/.
inline RunReport run(const ExperimentConfig& c) {
  validate(c);
  if (c.kind == ExperimentKind::Acceptance) throw ConfigError("the acceptance suite runs through its own driver");
  const auto start = std::chrono::steady_clock::now();
  RunReport rep;
  rep.config = to_json(c);
  rep.directory = std::filesystem::path(c.out_dir) / to_string(c.kind) / c.label;
  const auto p = c.model.profile();
  rep.time_scales = to_json(time_scales(p));
  const json header = {{"model", to_json(c.model)}, {"time_scales", rep.time_scales}, {"ensemble", c.ensemble},
                       {"seed", c.master_seed},     {"version", rep.version}};
  switch (c.kind) {
    case ExperimentKind::Ldos:
      detail::run_ldos(c, rep, header);
      break;
    case ExperimentKind::Decay:
    case ExperimentKind::Spread: {
      const auto times = experiment_times(c, c.model);
      const auto run = run_ensemble(c, c.model, times);
      rep.failed = run.pool.failures;
      rep.diagnostics = run.diagnostics;
      if (c.kind == ExperimentKind::Decay) {
        detail::emit_decay(c, c.model, run, rep, header, "");
      } else {
        rep.files.push_back(write_file(rep.directory, "series.csv", series_table(run.series, header).to_csv()));
        detail::emit_spread(c.model, run, rep, header);
      }
      break;
    }
    case ExperimentKind::ScanS: {
      Table scan;
      scan.header = header;
      std::vector<double> s_col, a_col, e_col, x_col;
      for (std::size_t k = 0; k < c.s_grid.size(); ++k) {
        ModelSpec m = c.model;
        m.s = c.s_grid[k];
        const auto run = run_ensemble(c, m, experiment_times(c, m), k * 1000003ULL);
        json h = header;
        h["model"] = to_json(m);
        std::ostringstream tag;
        tag << "s" << m.s << "_";
        detail::emit_decay(c, m, run, rep, h, tag.str());
        rep.diagnostics[tag.str() + "run"] = run.diagnostics;
        for (const auto& f : run.pool.failures) rep.failed.push_back(f);
        double a = NAN, e = NAN;
        try {
          const auto fit = fit_stretch_exponent(
              run.series.t, run.series.P0, measured_stretch_window(m.profile(), m.kind, run.series.t, run.series.P0));
          a = fit.value;
          e = fit.stderr_value;
        } catch (const std::invalid_argument&) {
        }
        s_col.push_back(m.s);
        a_col.push_back(a);
        e_col.push_back(e);
        x_col.push_back(2.0 - m.s);
      }
      scan.add("s", s_col);
      scan.add("alpha", a_col);
      scan.add("alpha_stderr", e_col);
      scan.add("expected", x_col);
      rep.files.push_back(write_file(rep.directory, "scan_s.dat", scan.to_dat()));
      break;
    }
    case ExperimentKind::CoreScaling: {
      std::vector<ObservableSeries> runs;
      for (std::size_t k = 0; k < c.epsilon_grid.size(); ++k) {
        ModelSpec m = c.model;
        m.epsilon = c.epsilon_grid[k];
        const auto run = run_ensemble(c, m, experiment_times(c, m), k * 1000003ULL);
        json h = header;
        h["model"] = to_json(m);
        std::ostringstream tag;
        tag << "eps" << m.epsilon << "_";
        rep.files.push_back(write_file(rep.directory, tag.str() + "series.csv", series_table(run.series, h).to_csv()));
        rep.diagnostics[tag.str() + "run"] = run.diagnostics;
        for (const auto& f : run.pool.failures) rep.failed.push_back(f);
        runs.push_back(run.series);
      }
      const auto cs = core_scaling_analysis(c.epsilon_grid, runs);
      Table t;
      t.header = header;
      std::vector<double> eps, dep, inv, th, sat, t0;
      for (const auto& pt : cs.points) {
        eps.push_back(pt.epsilon);
        dep.push_back(pt.departure);
        inv.push_back(pt.saturation > 0.0 ? 1.0 / pt.saturation : NAN);
        th.push_back(pt.t_half);
        sat.push_back(pt.saturated ? 1.0 : 0.0);
        ModelSpec m = c.model;
        m.epsilon = pt.epsilon;
        t0.push_back(wigner_time(m.profile()));
      }
      t.add("epsilon", eps);
      t.add("departure_time", dep);
      t.add("inverse_saturation", inv);
      t.add("t_half", th);
      t.add("t0", t0);
      t.add("saturated", sat);
      rep.files.push_back(write_file(rep.directory, "core_scaling.dat", t.to_dat()));
      rep.diagnostics["collapse_slope"] = cs.collapse.slope;
      rep.diagnostics["collapse_max_residual"] = cs.collapse.max_abs_residual;
      rep.diagnostics["epsilon_law_slope"] = cs.epsilon_law.slope;
      break;
    }
    default:
      break;
  }
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_file(rep.directory, "report.json", rep.to_json().dump(2) + "\n");
  return rep;
}

}  // namespace nonohmic
