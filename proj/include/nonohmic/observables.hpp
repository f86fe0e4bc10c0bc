#pragma once

// Observables of the spreading wavepacket, their ensemble statistics, the
// linear-response and FM spreading theories, and the decay-law fits.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nonohmic/ldos.hpp"
#include "nonohmic/numerics.hpp"
#include "nonohmic/propagator.hpp"
#include "nonohmic/spectral_theory.hpp"
#include "nonohmic/volterra.hpp"

namespace nonohmic {

struct Measurement {
  double P0 = 1.0;
  double dE_core = 0.0;
  double dE_sprd = 0.0;
  double E25 = 0.0;
  double E50 = 0.0;
  double E75 = 0.0;
};

namespace detail {

// Quantiles of a lattice distribution. Site n carries its mass at E_n and
// the cumulative curve passes through (E_n, F_{n-1} + P_n / 2), linear in
// between and flat beyond the outermost occupied sites.
inline std::vector<double> lattice_quantiles(const Wavepacket& psi, const std::vector<double>& qs) {
  std::vector<double> e, f;
  double cum = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const double p = psi.re[i] * psi.re[i] + psi.im[i] * psi.im[i];
    if (p == 0.0) continue;
    e.push_back(psi.energy(i));
    f.push_back(cum + 0.5 * p);
    cum += p;
  }
  std::vector<double> out;
  for (double q : qs) {
    const double target = q * cum;
    if (e.empty()) {
      out.push_back(0.0);
      continue;
    }
    const auto it = std::lower_bound(f.begin(), f.end(), target);
    if (it == f.begin()) {
      out.push_back(e.front());
    } else if (it == f.end()) {
      out.push_back(e.back());
    } else {
      const auto k = static_cast<std::size_t>(it - f.begin());
      const double u = (target - f[k - 1]) / (f[k] - f[k - 1]);
      out.push_back(e[k - 1] + u * (e[k] - e[k - 1]));
    }
  }
  return out;
}

}  // namespace detail

/// P0, the dispersion about E_0 = 0 and the quartile width of one wavepacket.
inline Measurement measure(const Wavepacket& psi) {
  Measurement m;
  m.P0 = psi.probability(0);
  double m2 = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const double e = psi.energy(i);
    m2 += e * e * (psi.re[i] * psi.re[i] + psi.im[i] * psi.im[i]);
  }
  m.dE_sprd = std::sqrt(m2);
  const auto q = detail::lattice_quantiles(psi, {0.25, 0.5, 0.75});
  m.E25 = q[0];
  m.E50 = q[1];
  m.E75 = q[2];
  m.dE_core = m.E75 - m.E25;
  return m;
}

/// Ensemble means (and standard errors) of the measurements on a time grid.
struct ObservableSeries {
  std::vector<double> t;
  std::vector<double> P0, dE_core, dE_sprd, E25, E50, E75;
  std::vector<double> P0_err, dE_core_err, dE_sprd_err;
  std::size_t realizations = 0;
};

class SeriesAccumulator {
 public:
  explicit SeriesAccumulator(std::vector<double> times) : t_(std::move(times)), s_(t_.size()) {}

  const std::vector<double>& times() const { return t_; }

  /// One realization: a measurement per time point.
  void add(const std::vector<Measurement>& run) {
    if (run.size() != t_.size()) throw std::invalid_argument("SeriesAccumulator: run length mismatch");
    for (std::size_t i = 0; i < t_.size(); ++i) {
      s_[i][0].push(run[i].P0);
      s_[i][1].push(run[i].dE_core);
      s_[i][2].push(run[i].dE_sprd);
      s_[i][3].push(run[i].E25);
      s_[i][4].push(run[i].E50);
      s_[i][5].push(run[i].E75);
    }
    ++count_;
  }

  void merge(const SeriesAccumulator& o) {
    if (o.t_ != t_) throw std::invalid_argument("SeriesAccumulator: time grids differ");
    for (std::size_t i = 0; i < t_.size(); ++i)
      for (std::size_t k = 0; k < 6; ++k) s_[i][k].merge(o.s_[i][k]);
    count_ += o.count_;
  }

  std::size_t count() const { return count_; }

  ObservableSeries series() const {
    ObservableSeries out;
    out.t = t_;
    out.realizations = count_;
    for (const auto& s : s_) {
      out.P0.push_back(s[0].mean());
      out.dE_core.push_back(s[1].mean());
      out.dE_sprd.push_back(s[2].mean());
      out.E25.push_back(s[3].mean());
      out.E50.push_back(s[4].mean());
      out.E75.push_back(s[5].mean());
      out.P0_err.push_back(s[0].stderr_of_mean());
      out.dE_core_err.push_back(s[1].stderr_of_mean());
      out.dE_sprd_err.push_back(s[2].stderr_of_mean());
    }
    return out;
  }

 private:
  std::vector<double> t_;
  std::vector<std::array<RunningStats, 6>> s_;
  std::size_t count_ = 0;
};

// --------------------------------------------------------------------------
// First-order perturbation theory
// --------------------------------------------------------------------------

/// Continuous part of the FOPT distribution, (C~(w)/2pi w^2) 4 sin^2(wt/2).
inline double fopt_distribution(const BandProfile& p, double omega, double t) {
  if (omega == 0.0) return spectral_function(p, 0.0) / two_pi * t * t;
  const double s = std::sin(0.5 * omega * t);
  return spectral_function(p, omega) / (two_pi * omega * omega) * 4.0 * s * s;
}

struct FoptWeights {
  double tail = 0.0;       // int of the continuous part
  double delta = 1.0;      // 1 - tail, the weight left at w = 0
  bool valid = true;       // t well below t0
};

inline FoptWeights fopt_weights(const BandProfile& p, double t) {
  FoptWeights out;
  if (t == 0.0) return out;
  const double top = p.cutoff == CutoffKind::Sharp ? p.omega_c : 60.0 * p.omega_c;
  // Below w1 = 1/t the integrand is smooth in ln w; above it oscillates with
  // period 2 pi / t and is integrated on linear panels.
  const double w1 = std::min(top, 1.0 / t);
  auto f = [&](double u) {
    const double w = std::exp(u);
    return w * fopt_distribution(p, w, t);
  };
  const double lo = std::log(1e-12 * w1);
  double sum = integrate_panels(f, lo, std::log(w1), static_cast<std::size_t>(std::log(w1) - lo) + 1, 1e-10);
  if (top > w1) {
    const auto panels = static_cast<std::size_t>(std::ceil((top - w1) * t / pi)) + 1;
    sum += integrate_panels([&](double w) { return fopt_distribution(p, w, t); }, w1, top, panels, 1e-10);
  }
  out.tail = 2.0 * sum;
  out.delta = 1.0 - out.tail;
  out.valid = t < 0.5 * wigner_time(p);
  return out;
}

// --------------------------------------------------------------------------
// Spreading theories
// --------------------------------------------------------------------------

/// Linear response: dE = [2 (C(0) - Re C(t))]^{1/2}.
inline double spreading_lrt(std::complex<double> c0_kernel, std::complex<double> ct) {
  return std::sqrt(std::max(0.0, 2.0 * (c0_kernel.real() - ct.real())));
}

inline double spreading_lrt(const BandProfile& p, double t) {
  return spreading_lrt(correlation_function(p, 0.0), correlation_function(p, t));
}

struct FmSpread {
  double value = 0.0;
  // Imaginary part of the unconjugated bracket (1 + c0^2) C0 - c0'^2 + 2 c0 c0''.
  double literal_residue = 0.0;
};

/// FM dispersion from c0 and its derivatives:
/// dE^2 = (1 + |c0|^2) C0 - |c0'|^2 + 2 Re(conj(c0) c0'').
inline FmSpread spreading_fm_exact(std::complex<double> c, std::complex<double> dc, std::complex<double> ddc,
                                   double C0) {
  const double r = (1.0 + std::norm(c)) * C0 - std::norm(dc) + 2.0 * (std::conj(c) * ddc).real();
  const double tol = 1e-8 * std::max(C0, 1e-300);
  if (r < -tol)
    throw NumericalError("spreading_fm_exact: negative radicand " + std::to_string(r) +
                         " (inconsistent c0 derivatives or C0)");
  FmSpread out;
  out.value = std::sqrt(std::max(r, 0.0));
  out.literal_residue = ((1.0 + c * c) * C0 - dc * dc + 2.0 * c * ddc).imag();
  return out;
}

inline std::vector<FmSpread> spreading_fm_exact(const VolterraSolution& s, double C0) {
  std::vector<FmSpread> out;
  out.reserve(s.c0.c0.size());
  for (std::size_t i = 0; i < s.c0.c0.size(); ++i)
    out.push_back(spreading_fm_exact(s.c0.c0[i], s.dc0[i], s.ddc0[i], C0));
  return out;
}

/// [2 eps^2 (w_c^s - [finite_spacing] w_rho^s) / s]^{1/2}.
inline double saturation_theory(const BandProfile& p, bool finite_spacing) {
  if (!(p.s > 0.0)) throw std::domain_error("saturation_theory: requires s > 0");
  const double e2 = p.epsilon * p.epsilon;
  double bracket;
  if (finite_spacing) {
    // w_rho^s (e^{s L} - 1) / s, finite as s -> 0.
    const double L = std::log(p.omega_c / p.omega_rho);
    bracket = std::pow(p.omega_rho, p.s) * std::expm1(p.s * L) / p.s;
  } else {
    bracket = std::pow(p.omega_c, p.s) / p.s;
  }
  return std::sqrt(2.0 * e2 * bracket);
}

// --------------------------------------------------------------------------
// Fits
// --------------------------------------------------------------------------

struct TimeWindow {
  double lo = 0.0;
  double hi = inf;
  bool contains(double t) const { return t >= lo && t <= hi; }
};

struct ExponentFit {
  double value = 0.0;
  double stderr_value = 0.0;
  TimeWindow window;
  std::size_t npoints = 0;
  LinearFit fit;
};

inline constexpr std::size_t min_fit_points = 8;

/// [2 t0, min(t_inf, 50 t0)].
inline TimeWindow default_stretch_window(const BandProfile& p) {
  const double t0 = wigner_time(p);
  double hi = 50.0 * t0;
  if (p.s > 1.0 && p.s < 2.0) hi = std::min(hi, crossover_time(p));
  return {2.0 * t0, hi};
}

/// alpha from ln(-ln P0) = alpha ln t + const over the window.
inline ExponentFit fit_stretch_exponent(const std::vector<double>& t, const std::vector<double>& P0,
                                        TimeWindow w) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!w.contains(t[i]) || !(P0[i] > 0.0 && P0[i] < 1.0) || t[i] <= 0.0) continue;
    x.push_back(std::log(t[i]));
    y.push_back(std::log(-std::log(P0[i])));
  }
  if (x.size() < min_fit_points)
    throw std::invalid_argument("fit_stretch_exponent: " + std::to_string(x.size()) + " usable points, need " +
                                std::to_string(min_fit_points));
  ExponentFit out;
  out.fit = linear_fit(x, y);
  out.value = out.fit.slope;
  out.stderr_value = out.fit.slope_stderr;
  out.window = w;
  out.npoints = x.size();
  return out;
}

/// Rate g from -ln P0 = g t + const over the window.
inline ExponentFit fit_exponential_rate(const std::vector<double>& t, const std::vector<double>& P0, TimeWindow w) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!w.contains(t[i]) || !(P0[i] > 0.0)) continue;
    x.push_back(t[i]);
    y.push_back(-std::log(P0[i]));
  }
  if (x.size() < min_fit_points) throw std::invalid_argument("fit_exponential_rate: too few usable points");
  ExponentFit out;
  out.fit = linear_fit(x, y);
  out.value = out.fit.slope;
  out.stderr_value = out.fit.slope_stderr;
  out.window = w;
  out.npoints = x.size();
  return out;
}

/// Slope of ln y against ln t over the window.
inline ExponentFit fit_loglog_slope(const std::vector<double>& t, const std::vector<double>& y, TimeWindow w) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!w.contains(t[i]) || !(y[i] > 0.0) || t[i] <= 0.0) continue;
    lx.push_back(std::log(t[i]));
    ly.push_back(std::log(y[i]));
  }
  if (lx.size() < min_fit_points) throw std::invalid_argument("fit_loglog_slope: too few usable points");
  ExponentFit out;
  out.fit = linear_fit(lx, ly);
  out.value = out.fit.slope;
  out.stderr_value = out.fit.slope_stderr;
  out.window = w;
  out.npoints = lx.size();
  return out;
}

/// First time y crosses `level` (from either side), interpolated linearly.
inline std::optional<double> first_crossing(const std::vector<double>& t, const std::vector<double>& y,
                                            double level) {
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double a = y[i - 1] - level, b = y[i] - level;
    if (a == 0.0) return t[i - 1];
    if ((a < 0.0) != (b < 0.0) || b == 0.0) return t[i - 1] + (t[i] - t[i - 1]) * a / (a - b);
  }
  return std::nullopt;
}

/// First time dE_core falls more than 10% below its running maximum.
inline std::optional<double> recurrence_time(const std::vector<double>& t, const std::vector<double>& dE_core) {
  double peak = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    peak = std::max(peak, dE_core[i]);
    if (peak > 0.0 && dE_core[i] < 0.9 * peak) return t[i];
  }
  return std::nullopt;
}

/// Fit window for a measured decay. t_inf marks the FM power-law takeover and
/// is applied to FM only; for both models the window closes where P0 first
/// drops below `floor`, above the finite-size saturation of P0.
inline TimeWindow measured_stretch_window(const BandProfile& p, ModelKind kind, const std::vector<double>& t,
                                          const std::vector<double>& P0, double floor = 0.1) {
  const double t0 = wigner_time(p);
  auto w = kind == ModelKind::Friedrichs ? default_stretch_window(p) : TimeWindow{2.0 * t0, 50.0 * t0};
  if (const auto c = first_crossing(t, P0, floor)) w.hi = std::min(w.hi, *c);
  return w;
}

// --------------------------------------------------------------------------
// Core one-parameter scaling
// --------------------------------------------------------------------------

struct CoreScalingPoint {
  double epsilon = 0.0;
  double departure = 0.0;   // dE_core first reaches half its saturation
  double saturation = 0.0;  // median of dE_core over the last decade of t
  double t_half = 0.0;      // P0 = 1/2
  bool saturated = true;
};

struct CoreScaling {
  std::vector<CoreScalingPoint> points;
  LinearFit collapse;  // ln departure vs ln (1 / saturation), saturated runs
  LinearFit epsilon_law;  // ln departure vs ln eps
};

inline CoreScalingPoint core_scaling_point(double epsilon, const ObservableSeries& s) {
  CoreScalingPoint pt;
  pt.epsilon = epsilon;
  const double t_end = s.t.back();
  std::vector<double> tail, early, late;
  for (std::size_t i = 0; i < s.t.size(); ++i) {
    if (s.t[i] < 0.1 * t_end) continue;
    tail.push_back(s.dE_core[i]);
    (s.t[i] < std::sqrt(0.1) * t_end ? early : late).push_back(s.dE_core[i]);
  }
  if (tail.size() < 4 || early.empty() || late.empty()) {
    pt.saturated = false;
    return pt;
  }
  pt.saturation = median(tail);
  // Still rising across the last decade: not saturated.
  pt.saturated = pt.saturation > 0.0 && std::abs(median(late) - median(early)) <= 0.1 * pt.saturation;
  const auto dep = first_crossing(s.t, s.dE_core, 0.5 * pt.saturation);
  const auto half = first_crossing(s.t, s.P0, 0.5);
  if (!dep || !half) pt.saturated = false;
  pt.departure = dep.value_or(0.0);
  pt.t_half = half.value_or(0.0);
  return pt;
}

inline CoreScaling core_scaling_analysis(const std::vector<double>& epsilons,
                                         const std::vector<ObservableSeries>& runs) {
  if (epsilons.size() != runs.size()) throw std::invalid_argument("core_scaling_analysis: size mismatch");
  if (runs.size() < 4) throw std::invalid_argument("core_scaling_analysis: need at least four epsilon values");
  CoreScaling out;
  std::vector<double> x, y, le;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    out.points.push_back(core_scaling_point(epsilons[i], runs[i]));
    const auto& p = out.points.back();
    if (!p.saturated) continue;
    x.push_back(std::log(1.0 / p.saturation));
    y.push_back(std::log(p.departure));
    le.push_back(std::log(p.epsilon));
  }
  if (x.size() >= 2) {
    out.collapse = linear_fit(x, y);
    out.epsilon_law = linear_fit(le, y);
  }
  return out;
}

}  // namespace nonohmic
