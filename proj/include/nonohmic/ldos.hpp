#pragma once

// Local density of states of the initial level and its Fourier transform,
// the survival amplitude c0(t).

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nonohmic/hamiltonian.hpp"
#include "nonohmic/numerics.hpp"
#include "nonohmic/spectral_theory.hpp"

namespace nonohmic {

// --------------------------------------------------------------------------
// Analytic FM LDOS
// --------------------------------------------------------------------------

/// Universal: cutoff-free Gamma = 2 pi eps^2 |w|^{s-1} and the universal
/// Lamb shift. Exact: C~ with its cutoff and the principal-value Lamb shift.
enum class LdosMode { Universal, Exact };

inline double fm_ldos_analytic(const BandProfile& p, double omega, LdosMode mode = LdosMode::Universal) {
  if (omega == 0.0) return 0.0;
  const double a = std::abs(omega);
  double gamma, delta;
  if (mode == LdosMode::Universal) {
    gamma = two_pi * p.epsilon * p.epsilon * std::pow(a, p.s - 1.0);
    delta = lamb_shift(p, omega).value;
  } else {
    gamma = spectral_function(p, omega);
    if (gamma == 0.0) return 0.0;  // outside a sharp band only bound states remain
    delta = lamb_shift_exact(p, omega);
  }
  const double x = omega - delta;
  return gamma / (2.0 * pi) / (x * x + 0.25 * gamma * gamma);
}

struct PointMass {
  double omega = 0.0;
  double weight = 0.0;
};

/// Poles of the exact FM resolvent outside a sharp band: w = Delta(w) with
/// |w| > w_c, residue 1 / (1 - Delta'(w)). Empty for the exponential cutoff.
inline std::vector<PointMass> fm_bound_states(const BandProfile& p) {
  if (p.cutoff != CutoffKind::Sharp || p.epsilon == 0.0) return {};
  const double wc = p.omega_c;
  auto f = [&](double w) { return w - lamb_shift_exact(p, w); };
  // f -> -inf at the band edge (logarithmic), f ~ w far away.
  double lo = wc * (1.0 + 1e-12);
  double hi = 2.0 * wc;
  while (f(hi) <= 0.0) hi *= 2.0;
  // The edge divergence is only logarithmic: for weak coupling the root sits
  // closer to w_c than double resolution and its weight is negligible.
  for (int i = 0; f(lo) > 0.0; ++i) {
    if (i == 60) return {};
    lo = wc + 0.5 * (lo - wc);
  }
  const double wb = bisect(f, lo, hi, 1e-14);
  const double weight = 1.0 / (1.0 - lamb_shift_derivative_outside_band(p, wb));
  // Delta is odd, so the mirror pole carries the same weight.
  return {{-wb, weight}, {wb, weight}};
}

// --------------------------------------------------------------------------
// Numerical LDOS
// --------------------------------------------------------------------------

inline constexpr std::size_t max_dense_dimension = 4000;

/// Eigenvalues E_nu - E_0 and weights |<E_nu|0>|^2 of one realization.
struct LdosSpectrum {
  std::vector<double> omega;
  std::vector<double> weight;
};

inline LdosSpectrum ldos_eigen(const CouplingMatrix& v) {
  if (v.size() > max_dense_dimension)
    throw std::invalid_argument("ldos_numerical: dimension " + std::to_string(v.size()) +
                                " exceeds the dense bound " + std::to_string(max_dense_dimension) +
                                "; reduce b or n_levels, or use the propagator");
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v.to_dense());
  if (es.info() != Eigen::Success) throw NumericalError("ldos_numerical: eigensolver failed");
  const auto c = static_cast<Eigen::Index>(v.index_of(0));
  LdosSpectrum out;
  out.omega.resize(v.size());
  out.weight.resize(v.size());
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
    const double u = es.eigenvectors()(c, k);
    out.omega[static_cast<std::size_t>(k)] = es.eigenvalues()[k];  // E_0 = 0
    out.weight[static_cast<std::size_t>(k)] = u * u;
  }
  return out;
}

/// Binned LDOS, ensemble averaged. With `abs_axis` the edges are in |w| and
/// both signs fold into one bin.
struct LdosHistogram {
  std::vector<double> edges;
  std::vector<double> weights;  // probability per bin (ensemble mean)
  std::vector<double> std_error;
  ModelKind model = ModelKind::Friedrichs;
  std::size_t realizations = 0;
  bool abs_axis = false;
  double outside = 0.0;  // mean weight that fell outside all bins

  std::size_t bins() const { return weights.size(); }
  double center(std::size_t i) const {
    return abs_axis ? std::sqrt(edges[i] * edges[i + 1]) : 0.5 * (edges[i] + edges[i + 1]);
  }
  double width(std::size_t i) const { return (abs_axis ? 2.0 : 1.0) * (edges[i + 1] - edges[i]); }
  double density(std::size_t i) const { return weights[i] / width(i); }
};

class LdosAccumulator {
 public:
  LdosAccumulator(std::vector<double> edges, bool abs_axis, ModelKind model)
      : edges_(std::move(edges)), abs_(abs_axis), model_(model), stats_(edges_.size() - 1) {
    if (edges_.size() < 2 || !std::is_sorted(edges_.begin(), edges_.end()))
      throw std::invalid_argument("LdosAccumulator: need sorted edges");
  }

  void add(const LdosSpectrum& sp) {
    std::vector<double> w(stats_.size(), 0.0);
    double out = 0.0;
    for (std::size_t k = 0; k < sp.omega.size(); ++k) {
      const double x = abs_ ? std::abs(sp.omega[k]) : sp.omega[k];
      const auto it = std::upper_bound(edges_.begin(), edges_.end(), x);
      if (it == edges_.begin() || it == edges_.end()) {
        out += sp.weight[k];
        continue;
      }
      w[static_cast<std::size_t>(it - edges_.begin() - 1)] += sp.weight[k];
    }
    for (std::size_t i = 0; i < w.size(); ++i) stats_[i].push(w[i]);
    outside_.push(out);
  }

  void merge(const LdosAccumulator& o) {
    for (std::size_t i = 0; i < stats_.size(); ++i) stats_[i].merge(o.stats_[i]);
    outside_.merge(o.outside_);
  }

  LdosHistogram histogram() const {
    LdosHistogram h;
    h.edges = edges_;
    h.model = model_;
    h.abs_axis = abs_;
    h.realizations = outside_.count();
    h.outside = outside_.mean();
    for (const auto& s : stats_) {
      h.weights.push_back(s.mean());
      h.std_error.push_back(s.stderr_of_mean());
    }
    return h;
  }

 private:
  std::vector<double> edges_;
  bool abs_;
  ModelKind model_;
  std::vector<RunningStats> stats_;
  RunningStats outside_;
};

/// |w| edges, logarithmic between lo and hi.
inline std::vector<double> log_abs_edges(double lo, double hi, std::size_t bins_per_decade) {
  const auto n = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(std::log10(hi / lo) * static_cast<double>(bins_per_decade))));
  return logspace(lo, hi, n + 1);
}

/// Ensemble LDOS over seeds spec.seed, spec.seed + 1, ...
inline LdosHistogram ldos_numerical(const ModelSpec& spec, const std::vector<double>& edges, bool abs_axis,
                                    std::size_t realizations = 1) {
  LdosAccumulator acc(edges, abs_axis, spec.kind);
  for (std::size_t r = 0; r < realizations; ++r) {
    ModelSpec m = spec;
    m.seed = spec.seed + r;
    acc.add(ldos_eigen(build(m)));
  }
  return acc.histogram();
}

// --------------------------------------------------------------------------
// Survival amplitude c0(t) = int rho(w) e^{-iwt} dw
// --------------------------------------------------------------------------

enum class Provenance { Simulation, FtOfLdos, Volterra, Asymptotic };

inline std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Simulation: return "simulation";
    case Provenance::FtOfLdos: return "ft_of_ldos";
    case Provenance::Volterra: return "volterra";
    default: return "asymptotic";
  }
}

struct SurvivalAmplitude {
  std::vector<double> t;
  std::vector<std::complex<double>> c0;
  Provenance provenance = Provenance::FtOfLdos;

  std::vector<double> probability() const {
    std::vector<double> p(c0.size());
    for (std::size_t i = 0; i < c0.size(); ++i) p[i] = std::norm(c0[i]);
    return p;
  }
};

inline SurvivalAmplitude survival_from_spectrum(const LdosSpectrum& sp, const std::vector<double>& times) {
  SurvivalAmplitude out;
  out.t = times;
  out.c0.assign(times.size(), {0.0, 0.0});
  for (std::size_t k = 0; k < sp.omega.size(); ++k)
    for (std::size_t i = 0; i < times.size(); ++i) out.c0[i] += sp.weight[k] * std::polar(1.0, -sp.omega[k] * times[i]);
  return out;
}

/// Histogram read as a piecewise-constant density.
inline SurvivalAmplitude survival_from_histogram(const LdosHistogram& h, const std::vector<double>& times) {
  if (h.abs_axis) throw std::invalid_argument("survival_from_histogram: needs a signed frequency axis");
  SurvivalAmplitude out;
  out.t = times;
  out.c0.assign(times.size(), {0.0, 0.0});
  for (std::size_t b = 0; b < h.bins(); ++b) {
    const double c = h.center(b), half = 0.5 * h.width(b);
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double x = half * times[i];
      const double sinc = std::abs(x) < 1e-8 ? 1.0 : std::sin(x) / x;
      out.c0[i] += h.weights[b] * sinc * std::polar(1.0, -c * times[i]);
    }
  }
  return out;
}

namespace detail {

// int_0^1 u^m e^{-i theta u} du for m = 0, 1.
inline std::pair<std::complex<double>, std::complex<double>> filon_moments(double theta) {
  using cd = std::complex<double>;
  if (std::abs(theta) < 0.05) {
    cd i0{0.0, 0.0}, i1{0.0, 0.0}, term{1.0, 0.0};
    for (int n = 0; n < 10; ++n) {
      i0 += term / static_cast<double>(n + 1);
      i1 += term / static_cast<double>(n + 2);
      term *= cd(0.0, -theta) / static_cast<double>(n + 1);
    }
    return {i0, i1};
  }
  const cd e = std::polar(1.0, -theta);
  const cd i0 = (1.0 - e) / cd(0.0, theta);
  const cd i1 = cd(0.0, 1.0) * e / theta - (1.0 - e) / (theta * theta);
  return {i0, i1};
}

}  // namespace detail

/// A density tabulated on a sorted mesh plus point masses; its Fourier
/// transform is evaluated exactly for the piecewise-linear interpolant
/// (Filon quadrature), so the result holds uniformly in t.
struct TabulatedDensity {
  std::vector<double> omega;
  std::vector<double> value;
  std::vector<PointMass> masses;

  double total_weight() const {
    double w = 0.0;
    for (std::size_t j = 0; j + 1 < omega.size(); ++j)
      w += 0.5 * (value[j] + value[j + 1]) * (omega[j + 1] - omega[j]);
    for (const auto& m : masses) w += m.weight;
    return w;
  }

  std::complex<double> fourier(double t) const {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t j = 0; j + 1 < omega.size(); ++j) {
      const double a = omega[j], h = omega[j + 1] - omega[j];
      if (h <= 0.0 || (value[j] == 0.0 && value[j + 1] == 0.0)) continue;
      const auto [i0, i1] = detail::filon_moments(h * t);
      acc += h * std::polar(1.0, -a * t) * (value[j] * (i0 - i1) + value[j + 1] * i1);
    }
    for (const auto& m : masses) acc += m.weight * std::polar(1.0, -m.omega * t);
    return acc;
  }
};

struct MeshOptions {
  double omega_min = 0.0;        // 0: 1e-10 x core scale
  double omega_max = 0.0;        // 0: w_c (sharp) or 60 w_c (exponential)
  std::size_t per_decade = 400;
};

/// Graded two-sided mesh for the FM density: geometric in |w| from omega_min,
/// so the |w|^{1-s} behaviour at the origin is resolved; the last node sits
/// on the band edge. Weight below omega_min is a point mass at 0.
inline TabulatedDensity tabulate_fm_ldos(const BandProfile& p, LdosMode mode, MeshOptions opt = {}) {
  const double core = std::max(core_frequencies(p).gamma0, 1e-300);
  const double wmin = opt.omega_min > 0.0 ? opt.omega_min : 1e-10 * core;
  double wmax = opt.omega_max;
  if (wmax <= 0.0) wmax = p.cutoff == CutoffKind::Sharp ? p.omega_c : 60.0 * p.omega_c;
  if (mode == LdosMode::Exact && p.cutoff == CutoffKind::Sharp) wmax = std::min(wmax, p.omega_c);
  auto pos = log_abs_edges(wmin, wmax, opt.per_decade);
  const bool edge = mode == LdosMode::Exact && p.cutoff == CutoffKind::Sharp && wmax == p.omega_c;
  if (edge) {
    // rho vanishes at a sharp band edge only as 1/ln^2 of the distance:
    // grade the mesh geometrically towards w_c.
    for (double d : logspace(1e-14 * wmax, 0.1 * wmax, 13 * opt.per_decade / 4 + 1)) pos.push_back(wmax - d);
    std::sort(pos.begin(), pos.end());
    pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
  }
  const std::size_t n = pos.size();
  TabulatedDensity d;
  d.omega.resize(2 * n + 1);
  d.value.resize(2 * n + 1);
  d.omega[n] = 0.0;
  d.value[n] = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    // rho is even: omega - Delta(omega) is odd and Gamma is even.
    const double v = edge && j + 1 == n ? 0.0 : fm_ldos_analytic(p, pos[j], mode);
    d.omega[n + 1 + j] = pos[j];
    d.omega[n - 1 - j] = -pos[j];
    d.value[n + 1 + j] = v;
    d.value[n - 1 - j] = v;
  }
  // On [-wmin, wmin] the interpolant through 0 carries wmin rho(wmin); the
  // true head, with rho ~ |w|^{1-s}, carries 2 wmin rho(wmin) / (2 - s).
  const double r0 = d.value[n + 1];
  d.masses.push_back({0.0, 2.0 * wmin * r0 * (1.0 / (2.0 - p.s) - 0.5)});
  if (mode == LdosMode::Exact)
    for (const auto& b : fm_bound_states(p)) d.masses.push_back(b);
  return d;
}

inline SurvivalAmplitude survival_from_density(const TabulatedDensity& d, const std::vector<double>& times) {
  SurvivalAmplitude out;
  out.t = times;
  out.provenance = Provenance::FtOfLdos;
  out.c0.reserve(times.size());
  for (double t : times) out.c0.push_back(d.fourier(t));
  return out;
}

// --------------------------------------------------------------------------
// Asymptotic decay laws
// --------------------------------------------------------------------------

enum class DecayRegime { Stretched, PowerLaw, LogS2 };

struct AsymptoticValue {
  double c0 = 0.0;
  bool in_validity_window = true;
};

/// Stretched: exp(-(t/t0)^{2-s}/2). PowerLaw: 2 sin((s-1)pi)/((2-s)pi) (t0/t)^{2-s}.
/// LogS2: (eps^2/pi) ln(t0/t), flagged outside t_c < t < t0. For LogS2, t0 is
/// the scale of the approximate LDOS eps^2 / sqrt(w^2 + t0^-2) and is passed in.
inline AsymptoticValue decay_asymptotics(const BandProfile& p, double t, DecayRegime regime,
                                         std::optional<double> t0_override = std::nullopt) {
  AsymptoticValue out;
  if (regime == DecayRegime::LogS2) {
    if (!t0_override) throw std::invalid_argument("decay_asymptotics: LogS2 needs t0");
    const double t0 = *t0_override;
    out.c0 = p.epsilon * p.epsilon / pi * std::log(t0 / t);
    out.in_validity_window = t > two_pi / p.omega_c && t < t0;
    return out;
  }
  const double s = p.s;
  const double t0 = t0_override.value_or(wigner_time(p));
  if (regime == DecayRegime::Stretched) {
    out.c0 = std::exp(-0.5 * std::pow(t / t0, 2.0 - s));
  } else {
    out.c0 = 2.0 * std::sin((s - 1.0) * pi) / ((2.0 - s) * pi) * std::pow(t0 / t, 2.0 - s);
  }
  return out;
}

}  // namespace nonohmic
