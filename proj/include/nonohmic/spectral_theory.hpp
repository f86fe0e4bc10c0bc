#pragma once

// Closed-form functions of the bandprofile C~(w) = 2 pi eps^2 |w|^(s-1) f(|w|/w_c):
// spectral and correlation functions, the Lamb-shift function, the generalized
// Wigner time and the associated core frequencies and crossover times.

#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <string>

#include "nonohmic/numerics.hpp"

namespace nonohmic {

enum class CutoffKind { Exponential, Sharp };

inline const char* to_string(CutoffKind k) {
  return k == CutoffKind::Sharp ? "sharp" : "exponential";
}

struct BandProfile {
  double s = 1.0;
  double epsilon = 0.1;    // units 1/time^(2-s)
  double omega_c = 100.0;  // ultraviolet cutoff
  double omega_rho = 1.0;  // infrared cutoff, the mean level spacing 1/rho
  CutoffKind cutoff = CutoffKind::Sharp;

  void validate() const {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
      throw std::invalid_argument("BandProfile: epsilon must be finite and >= 0");
    if (!(omega_rho > 0.0) || !(omega_c > omega_rho))
      throw std::invalid_argument("BandProfile: need omega_c > omega_rho > 0");
    if (!std::isfinite(s)) throw std::invalid_argument("BandProfile: s must be finite");
  }

  bool universal_exponent() const { return s > 0.0 && s < 2.0; }
};

namespace detail {

inline void require_universal(const BandProfile& p, const char* who) {
  if (!p.universal_exponent())
    throw std::domain_error(std::string(who) + ": requires 0 < s < 2");
}

}  // namespace detail

/// Cutoff factor f(|w|/w_c) multiplying the power law.
inline double cutoff_factor(const BandProfile& p, double omega) {
  const double a = std::abs(omega);
  if (p.cutoff == CutoffKind::Sharp) return a <= p.omega_c ? 1.0 : 0.0;
  return std::exp(-a / p.omega_c);
}

/// C~(w). Returns +inf at w = 0 when s < 1 (integrable singularity).
inline double spectral_function(const BandProfile& p, double omega) {
  const double a = std::abs(omega);
  const double amp = two_pi * p.epsilon * p.epsilon;
  if (a == 0.0) {
    if (p.s < 1.0) return p.epsilon == 0.0 ? 0.0 : inf;
    if (p.s == 1.0) return amp;
    return 0.0;
  }
  return amp * std::pow(a, p.s - 1.0) * cutoff_factor(p, a);
}

/// C(t) = int C~(w) e^{-iwt} dw/2pi. Real because C~ is even.
inline std::complex<double> correlation_function(const BandProfile& p, double t) {
  const double e2 = p.epsilon * p.epsilon;
  const double s = p.s;
  if (!(s > 0.0)) throw std::domain_error("correlation_function: requires s > 0");
  if (p.cutoff == CutoffKind::Exponential) {
    const double wc = p.omega_c;
    const double v = 2.0 * e2 * std::tgamma(s) *
                     std::pow(1.0 / (wc * wc) + t * t, -0.5 * s) *
                     std::cos(s * std::atan(wc * t));
    return {v, 0.0};
  }
  // Sharp band: 2 eps^2 int_0^{w_c} w^{s-1} cos(wt) dw.
  const double at = std::abs(t);
  const double wc = p.omega_c;
  const std::size_t panels =
      static_cast<std::size_t>(std::ceil(wc * at / pi)) + 1;
  const double w1 = wc / static_cast<double>(panels);
  // First panel: w = w1 u^{1/s} removes the |w|^{s-1} singularity.
  const double first =
      std::pow(w1, s) / s *
      integrate([&](double u) { return std::cos(w1 * at * std::pow(u, 1.0 / s)); },
                0.0, 1.0, 1e-12);
  double rest = 0.0;
  if (panels > 1) {
    auto f = [&](double w) { return std::pow(w, s - 1.0) * std::cos(w * at); };
    for (std::size_t k = 1; k < panels; ++k) {
      const double lo = w1 * static_cast<double>(k);
      const double hi = (k + 1 == panels) ? wc : lo + w1;
      rest += integrate(f, lo, hi, 1e-12, 10);
    }
  }
  return {2.0 * e2 * (first + rest), 0.0};
}

/// Generalized Wigner time t0 = [2 pi eps^2 / (Gamma(3-s) sin(s pi/2))]^{-1/(2-s)}.
inline double wigner_time(const BandProfile& p) {
  detail::require_universal(p, "wigner_time");
  const double s = p.s;
  const double rate =
      two_pi * p.epsilon * p.epsilon / (std::tgamma(3.0 - s) * std::sin(s * pi / 2.0));
  return std::pow(rate, -1.0 / (2.0 - s));
}

/// Order-of-magnitude variant [2 pi eps^2 / ((2-s) s)]^{-1/(2-s)}.
inline double wigner_time_estimate(const BandProfile& p) {
  detail::require_universal(p, "wigner_time_estimate");
  const double s = p.s;
  const double rate = two_pi * p.epsilon * p.epsilon / ((2.0 - s) * s);
  return std::pow(rate, -1.0 / (2.0 - s));
}

/// Inverse of wigner_time: the coupling giving a requested t0.
inline double epsilon_for_wigner_time(double s, double t0) {
  if (!(s > 0.0 && s < 2.0)) throw std::domain_error("epsilon_for_wigner_time: requires 0 < s < 2");
  const double rate = std::pow(t0, -(2.0 - s));
  return std::sqrt(rate * std::tgamma(3.0 - s) * std::sin(s * pi / 2.0) / two_pi);
}

// --------------------------------------------------------------------------
// Lamb-shift function
// --------------------------------------------------------------------------

enum class LambShiftFormula { Universal, MarginalS2, MarginalS0 };
enum class MarginalPolicy { FlagOnly, Dispatch };

struct LambShift {
  double value = 0.0;
  LambShiftFormula formula = LambShiftFormula::Universal;
  bool in_window = true;
};

/// Frequency window in which the cutoff-free Lamb shift applies:
/// w_rho e^{1/s} < |w| < w_c e^{-1/(2-s)}.
struct UniversalWindow {
  double lower;
  double upper;
  bool contains(double omega) const {
    const double a = std::abs(omega);
    return a > lower && a < upper;
  }
};

inline UniversalWindow universal_window(const BandProfile& p) {
  const double lo = p.s > 0.0 ? p.omega_rho * std::exp(1.0 / p.s) : inf;
  const double hi = p.s < 2.0 ? p.omega_c * std::exp(-1.0 / (2.0 - p.s)) : 0.0;
  return {lo, hi};
}

inline double lamb_shift_marginal_s2(const BandProfile& p, double omega) {
  if (omega == 0.0) return 0.0;
  const double r = p.omega_c / omega;
  return -p.epsilon * p.epsilon * omega * std::log(std::abs(1.0 - r * r));
}

inline double lamb_shift_marginal_s0(const BandProfile& p, double omega) {
  if (omega == 0.0) return 0.0;
  const double r = omega / p.omega_rho;
  return p.epsilon * p.epsilon / omega * std::log(std::abs(r * r - 1.0));
}

/// Cutoff-free Delta(w) = eps^2 pi cot(s pi/2) |w|^{s-1} sgn(w).
/// Outside the universal window the universal value is still returned but
/// flagged, unless MarginalPolicy::Dispatch selects the logarithmic forms.
inline LambShift lamb_shift(const BandProfile& p, double omega,
                            MarginalPolicy policy = MarginalPolicy::FlagOnly) {
  LambShift out;
  const auto win = universal_window(p);
  out.in_window = p.universal_exponent() && win.contains(omega);
  if (policy == MarginalPolicy::Dispatch) {
    const double a = std::abs(omega);
    if (p.s >= 2.0 || (p.s > 1.0 && a >= win.upper)) {
      out.formula = LambShiftFormula::MarginalS2;
      out.value = lamb_shift_marginal_s2(p, omega);
      return out;
    }
    if (p.s <= 0.0 || (p.s < 1.0 && a <= win.lower)) {
      out.formula = LambShiftFormula::MarginalS0;
      out.value = lamb_shift_marginal_s0(p, omega);
      return out;
    }
  }
  detail::require_universal(p, "lamb_shift");
  if (omega == 0.0) return out;
  const double sgn = omega > 0.0 ? 1.0 : -1.0;
  out.value = p.epsilon * p.epsilon * pi / std::tan(p.s * pi / 2.0) *
              std::pow(std::abs(omega), p.s - 1.0) * sgn;
  return out;
}

/// Delta(w) = PV int C~(w') / (w - w') dw'/2pi evaluated with the profile's
/// own ultraviolet cutoff and, optionally, the infrared cutoff w_rho. The
/// principal value is taken through w' = |w| e^x, which maps the pole to x = 0
/// and allows a symmetric subtraction.
inline double lamb_shift_exact(const BandProfile& p, double omega,
                               bool infrared_cutoff = false) {
  if (omega == 0.0) return 0.0;
  if (!(p.s > 0.0)) throw std::domain_error("lamb_shift_exact: requires s > 0");
  const double a = std::abs(omega);
  const double s = p.s;
  auto g = [&](double x) {
    return std::exp((s - 1.0) * x) * cutoff_factor(p, a * std::exp(x));
  };
  double x_lo = infrared_cutoff ? std::log(p.omega_rho / a) : -45.0 / s;
  double x_hi = p.cutoff == CutoffKind::Sharp ? std::log(p.omega_c / a)
                                              : std::log(60.0 * p.omega_c / a);
  if (p.cutoff == CutoffKind::Exponential && s < 2.0)
    x_hi = std::max(x_hi, 1.0);
  auto plain = [&](double x) { return g(x) / std::sinh(x); };
  auto chunked = [&](double lo, double hi) {
    if (!(hi > lo)) return 0.0;
    const std::size_t n = static_cast<std::size_t>(std::ceil((hi - lo) / 1.0));
    return integrate_panels(plain, lo, hi, n, 1e-12);
  };
  double integral = 0.0;
  if (x_lo < 0.0 && x_hi > 0.0) {
    const double m = std::min(-x_lo, x_hi);
    auto sym = [&](double x) { return (g(x) - g(-x)) / std::sinh(x); };
    const std::size_t n = static_cast<std::size_t>(std::ceil(m / 1.0));
    integral += integrate_panels(sym, 0.0, m, n, 1e-12);
    integral += chunked(m, x_hi);
    integral += chunked(x_lo, -m);
  } else {
    integral += chunked(x_lo, x_hi);
  }
  const double sgn = omega > 0.0 ? 1.0 : -1.0;
  return -p.epsilon * p.epsilon * std::pow(a, s - 1.0) * sgn * integral;
}

/// d Delta / dw outside the support of C~ (no principal value needed):
/// -int C~(w') / (w - w')^2 dw'/2pi. Sharp cutoff only, |w| > w_c.
inline double lamb_shift_derivative_outside_band(const BandProfile& p, double omega) {
  if (p.cutoff != CutoffKind::Sharp || std::abs(omega) <= p.omega_c)
    throw std::domain_error("lamb_shift_derivative_outside_band: need sharp cutoff and |w| > w_c");
  const double s = p.s;
  const double wc = p.omega_c;
  auto f = [&](double w) {
    return std::pow(w, s - 1.0) *
           (1.0 / ((omega - w) * (omega - w)) + 1.0 / ((omega + w) * (omega + w)));
  };
  // Substitution near w = 0 as in correlation_function.
  const double w1 = std::min(wc, 0.05 * std::abs(omega));
  const double head = std::pow(w1, s) / s *
                      integrate([&](double u) {
                        const double w = w1 * std::pow(u, 1.0 / s);
                        return 1.0 / ((omega - w) * (omega - w)) +
                               1.0 / ((omega + w) * (omega + w));
                      }, 0.0, 1.0, 1e-12);
  const double tail = integrate(f, w1, wc, 1e-12);
  return -p.epsilon * p.epsilon * (head + tail);
}

// --------------------------------------------------------------------------
// Characteristic frequencies and times
// --------------------------------------------------------------------------

enum class CoreFormula { Universal, LimitS2, LimitS0 };

struct CoreFrequencies {
  double gamma0 = 0.0;   // core width of the FM LDOS
  double gamma_o = 0.0;  // core-tail crossover of the WM LDOS
  CoreFormula gamma0_formula = CoreFormula::Universal;
};

inline CoreFrequencies core_frequencies(const BandProfile& p) {
  detail::require_universal(p, "core_frequencies");
  const double s = p.s;
  const double e2 = p.epsilon * p.epsilon;
  CoreFrequencies out;
  out.gamma_o = std::pow(e2 / (2.0 - s), 1.0 / (2.0 - s));
  const double g0 = std::pow(e2 / std::abs(std::sin(s * pi / 2.0)), 1.0 / (2.0 - s));
  const auto win = universal_window(p);
  if (!std::isfinite(g0) || (s > 1.0 && g0 >= win.upper)) {
    out.gamma0 = p.omega_c * std::exp(-1.0 / (2.0 * e2));
    out.gamma0_formula = CoreFormula::LimitS2;
  } else if (s < 1.0 && g0 <= win.lower) {
    out.gamma0 = std::abs(p.epsilon * std::log(p.epsilon / p.omega_rho));
    out.gamma0_formula = CoreFormula::LimitS0;
  } else {
    out.gamma0 = g0;
  }
  return out;
}

/// Tail weight int_{|w|>gamma} C~(w)/w^2 dw/2pi, by quadrature.
inline double tail_weight_beyond(const BandProfile& p, double gamma) {
  const double s = p.s;
  const double e2 = p.epsilon * p.epsilon;
  // In u = ln w the integrand w^{s-2} is smooth over many decades.
  auto f = [&](double u) {
    const double w = std::exp(u);
    return std::pow(w, s - 2.0) * cutoff_factor(p, w);
  };
  const double top = p.cutoff == CutoffKind::Sharp ? p.omega_c : 80.0 * p.omega_c;
  if (gamma >= top) return 0.0;
  const double lg = std::log(gamma), lt = std::log(top);
  const auto panels = static_cast<std::size_t>(std::ceil(lt - lg)) + 1;
  const double sum = integrate_panels(f, lg, lt, panels, 1e-12);
  return 2.0 * e2 * sum;
}

/// gamma_o from its defining condition (tail weight = `fraction`), by bisection.
inline double gamma_o_numeric(const BandProfile& p, double fraction = 0.5) {
  detail::require_universal(p, "gamma_o_numeric");
  auto f = [&](double g) { return tail_weight_beyond(p, g) - fraction; };
  double lo = p.omega_c * 1e-12;
  const double hi = p.cutoff == CutoffKind::Sharp ? p.omega_c : 80.0 * p.omega_c;
  if (f(lo) < 0.0) throw NumericalError("gamma_o_numeric: tail weight never reaches the target");
  return bisect(f, lo, hi, 1e-13);
}

/// Exponential-to-power-law crossover time (FM). +inf at s = 1.
inline double crossover_time(const BandProfile& p) {
  detail::require_universal(p, "crossover_time");
  const double s = p.s;
  if (s == 1.0) return inf;
  const double arg = 2.0 * std::sin(std::abs(s - 1.0) * pi) / ((2.0 - s) * pi);
  return std::pow(std::abs(2.0 * std::log(arg)), 1.0 / (2.0 - s)) * wigner_time(p);
}

/// Intersection of the stretched exponential with the power-law amplitude,
/// in units of t0, searched on [1e-3, 1e4]. Empty when the curves never meet.
inline std::optional<double> crossover_time_numeric(const BandProfile& p) {
  detail::require_universal(p, "crossover_time_numeric");
  const double s = p.s;
  if (s == 1.0) return std::nullopt;
  const double alpha = 2.0 - s;
  const double amp = std::abs(2.0 * std::sin((s - 1.0) * pi) / (alpha * pi));
  auto h = [&](double lx) {
    const double x = std::exp(lx);
    return -0.5 * std::pow(x, alpha) - (std::log(amp) - alpha * lx);
  };
  const double lo = std::log(1e-3), hi = std::log(1e4);
  const int n = 2000;
  double prev = h(lo);
  for (int i = 1; i <= n; ++i) {
    const double x = lo + (hi - lo) * i / n;
    const double cur = h(x);
    if ((prev < 0.0) != (cur < 0.0)) {
      const double root = bisect(h, lo + (hi - lo) * (i - 1) / n, x, 1e-13);
      return std::exp(root) * wigner_time(p);
    }
    prev = cur;
  }
  return std::nullopt;
}

enum class Clamp { None, Floor, Ceiling };

struct CoreBorder {
  double gamma = 0.0;
  Clamp clamp = Clamp::None;
  double residual = 0.0;
};

/// Core-tail border gamma(t) of the evolving energy distribution, from
/// eps^2 [ (t^{2-s} - gamma^s t^2)/s + t^{2-s}/(2-s) ] = 1/2, clamped to
/// [w_rho, gamma_o]. The root of this equation rises until
/// t* = ((2-s)/(2 eps^2))^{1/(2-s)} and falls afterwards; the border is the
/// running maximum, so it is evaluated at min(t, t*).
inline CoreBorder core_border_of_time(const BandProfile& p, double t) {
  detail::require_universal(p, "core_border_of_time");
  if (!(t > 0.0)) throw std::domain_error("core_border_of_time: requires t > 0");
  const double s = p.s;
  const double e2 = p.epsilon * p.epsilon;
  const double t_star = std::pow((2.0 - s) / (2.0 * e2), 1.0 / (2.0 - s));
  const double te = std::min(t, t_star);
  auto f = [&](double g) {
    const double a = std::pow(te, 2.0 - s);
    return e2 * ((a - std::pow(g, s) * te * te) / s + a / (2.0 - s)) - 0.5;
  };
  const double floor = p.omega_rho;
  const double ceil = core_frequencies(p).gamma_o;
  CoreBorder out;
  if (ceil <= floor) {
    out.gamma = floor;
    out.clamp = Clamp::Floor;
    out.residual = f(floor);
    return out;
  }
  const double ff = f(floor), fc = f(ceil);
  if (ff <= 0.0) {
    out.gamma = floor;
    out.clamp = Clamp::Floor;
    out.residual = ff;
  } else if (fc >= 0.0) {
    out.gamma = ceil;
    out.clamp = Clamp::Ceiling;
    out.residual = fc;
  } else {
    out.gamma = bisect(f, floor, ceil, 1e-15);
    out.residual = f(out.gamma);
  }
  return out;
}

struct TimeScales {
  double t_H = 0.0;
  double t_c = 0.0;
  double t0 = 0.0;
  double t_inf = 0.0;
  double gamma0 = 0.0;
  double gamma_o = 0.0;
  bool universal_regime = false;  // t_c < t0 < t_H
};

inline TimeScales time_scales(const BandProfile& p) {
  TimeScales ts;
  ts.t_H = two_pi / p.omega_rho;
  ts.t_c = two_pi / p.omega_c;
  if (p.universal_exponent() && p.epsilon > 0.0) {
    ts.t0 = wigner_time(p);
    ts.t_inf = crossover_time(p);
    const auto cf = core_frequencies(p);
    ts.gamma0 = cf.gamma0;
    ts.gamma_o = cf.gamma_o;
    ts.universal_regime = ts.t_c < ts.t0 && ts.t0 < ts.t_H;
  } else {
    ts.t0 = inf;
    ts.t_inf = inf;
  }
  return ts;
}

}  // namespace nonohmic
