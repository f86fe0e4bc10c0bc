#pragma once

// One realization of the decay/spreading experiment: build the matrix, propagate
// level 0 with the self-expanding lattice, and measure on a time grid.

#include <cmath>
#include <memory>
#include <vector>

#include "nonohmic/hamiltonian.hpp"
#include "nonohmic/numerics.hpp"
#include "nonohmic/observables.hpp"
#include "nonohmic/propagator.hpp"

namespace nonohmic {

/// t = 0 followed by `points` log-spaced times in [t_min, t_max].
inline std::vector<double> log_time_grid(double t_min, double t_max, std::size_t points) {
  std::vector<double> t{0.0};
  const auto g = logspace(t_min, t_max, points);
  t.insert(t.end(), g.begin(), g.end());
  return t;
}

struct RealizationResult {
  std::vector<Measurement> measurements;
  PropagatorStats stats;
  double max_norm_drift = 0.0;
  long final_lo = 0;
  long final_hi = 0;
  std::size_t expansions = 0;
  double C0 = 0.0;  // realized sum_n |V_n0|^2
};

/// Propagate one realization through `times` (sorted, from 0). The lattice is
/// checked for expansion after every Chebyshev step.
inline RealizationResult simulate_realization(const ModelSpec& spec, const std::vector<double>& times,
                                              double tol = 1e-10) {
  spec.validate();
  RealizationResult out;
  auto v = build(spec);
  for (const auto& [e, x] : v.row0()) out.C0 += x * x;
  auto psi = initial_state(v);
  if (out.C0 == 0.0) {
    // Level 0 is decoupled: an exact eigenstate with E = 0.
    out.measurements.assign(times.size(), measure(psi));
    out.final_lo = v.lo();
    out.final_hi = v.hi();
    return out;
  }
  auto prop = std::make_unique<ChebyshevPropagator<CouplingMatrix>>(v, tol);
  auto collect = [&] {
    out.stats.steps += prop->stats().steps;
    out.stats.matvecs += prop->stats().matvecs;
    out.stats.retries += prop->stats().retries;
  };
  for (double t : times) {
    while (psi.t < t) {
      const double next = std::min(t, psi.t + 400.0 / prop->half_width());
      prop->advance(psi, next);
      if (spec.kind == ModelKind::Wigner) {
        bool grew = false;
        while (expand_if_needed(psi, v, spec)) {
          grew = true;
          ++out.expansions;
        }
        if (grew) {
          collect();
          prop = std::make_unique<ChebyshevPropagator<CouplingMatrix>>(v, tol);
        }
      }
    }
    out.max_norm_drift = std::max(out.max_norm_drift, std::abs(psi.norm2() - 1.0));
    out.measurements.push_back(measure(psi));
  }
  collect();
  out.final_lo = v.lo();
  out.final_hi = v.hi();
  return out;
}

}  // namespace nonohmic
