#pragma once

// Finite Friedrichs (FM) and Wigner banded (WM) Hamiltonians H = diag(E_n) + V
// on the energy lattice E_n = n / rho.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nonohmic/numerics.hpp"
#include "nonohmic/spectral_theory.hpp"

namespace nonohmic {

enum class ModelKind { Friedrichs, Wigner };

inline std::string to_string(ModelKind k) {
  return k == ModelKind::Friedrichs ? "friedrichs" : "wigner";
}

/// Gaussian: independent N(0, var) couplings. MeanProfile: V = +sqrt(var),
/// a deterministic matrix with the ensemble-mean spectral function.
enum class CouplingLaw { Gaussian, MeanProfile };

inline std::string to_string(CouplingLaw c) {
  return c == CouplingLaw::Gaussian ? "gaussian" : "mean_profile";
}

struct ModelSpec {
  ModelKind kind = ModelKind::Wigner;
  double s = 1.0;
  double epsilon = 0.1;
  double rho = 1.0;
  long b = 100;
  long n_levels = 400;  // initial lattice half-width (WM only)
  std::uint64_t seed = 1;
  CutoffKind cutoff = CutoffKind::Sharp;
  // Only read for the exponential cutoff; the sharp band has w_c = b / rho.
  double omega_c = 0.0;
  CouplingLaw couplings = CouplingLaw::Gaussian;

  void validate() const {
    if (b < 1) throw std::invalid_argument("ModelSpec: b must be >= 1");
    if (!(rho > 0.0)) throw std::invalid_argument("ModelSpec: rho must be positive");
    if (!(s > 0.0)) throw std::invalid_argument("ModelSpec: s must be positive");
    if (!(epsilon >= 0.0)) throw std::invalid_argument("ModelSpec: epsilon must be >= 0");
    if (kind == ModelKind::Wigner && n_levels < 1)
      throw std::invalid_argument("ModelSpec: n_levels must be >= 1");
    if (cutoff == CutoffKind::Exponential && !(omega_c > 0.0))
      throw std::invalid_argument("ModelSpec: exponential cutoff needs omega_c > 0");
  }

  double bandwidth() const {
    return cutoff == CutoffKind::Sharp ? static_cast<double>(b) / rho : omega_c;
  }

  BandProfile profile() const {
    return {s, epsilon, bandwidth(), 1.0 / rho, cutoff};
  }

  /// Lattice half-width at construction. FM lives on [-b, b]: levels beyond
  /// the band of level 0 are never reached.
  long initial_half_width() const {
    return kind == ModelKind::Friedrichs ? b : std::max(n_levels, b);
  }
};

/// Expected |V_nm|^2 for |n - m| = k: eps^2 |w|^{s-1} f(w) / rho, w = k / rho.
/// Summed over a lattice of spacing 1/rho this reproduces C~(w) = 2 pi eps^2 |w|^{s-1}.
inline double coupling_variance(const ModelSpec& spec, long k) {
  if (k == 0 || std::abs(k) > spec.b) return 0.0;
  const double w = static_cast<double>(std::abs(k)) / spec.rho;
  const auto p = spec.profile();
  return spec.epsilon * spec.epsilon * std::pow(w, spec.s - 1.0) *
         (spec.cutoff == CutoffKind::Sharp ? 1.0 : cutoff_factor(p, w)) / spec.rho;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Standard normal keyed by (seed, min(n,m), max(n,m)); independent of the
// order in which elements are generated.
inline double keyed_normal(std::uint64_t seed, long n, long m) {
  const auto lo = static_cast<std::uint64_t>(std::min(n, m));
  const auto hi = static_cast<std::uint64_t>(std::max(n, m));
  const std::uint64_t h = splitmix64(seed ^ splitmix64(lo * 0xd1342543de82ef95ULL ^ splitmix64(hi)));
  const double u1 = static_cast<double>((splitmix64(h) >> 11) + 1) * 0x1.0p-53;  // (0, 1]
  const double u2 = static_cast<double>(splitmix64(h + 0x632be59bd9b4e019ULL) >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

inline double draw_coupling(const ModelSpec& spec, long n, long m) {
  const double var = coupling_variance(spec, n - m);
  if (var == 0.0) return 0.0;
  if (spec.couplings == CouplingLaw::MeanProfile) return std::sqrt(var);
  return std::sqrt(var) * keyed_normal(spec.seed, n, m);
}

}  // namespace detail

/// Symmetric, zero-diagonal coupling matrix on the lattice n in [lo, hi].
/// WM: one array per diagonal offset k = 1..b, d_k[i] = V(lo+i, lo+i+k).
/// FM: only row 0 is stored (arrowhead), row0[i] = V(0, lo+i).
class CouplingMatrix {
 public:
  CouplingMatrix() = default;

  ModelKind kind() const { return kind_; }
  long band() const { return b_; }
  long lo() const { return lo_; }
  long hi() const { return hi_; }
  std::size_t size() const { return static_cast<std::size_t>(hi_ - lo_ + 1); }
  double rho() const { return rho_; }
  double energy(long n) const { return static_cast<double>(n) / rho_; }
  std::size_t index_of(long n) const { return static_cast<std::size_t>(n - lo_); }

  double element(long n, long m) const {
    if (n < lo_ || n > hi_ || m < lo_ || m > hi_ || n == m) return 0.0;
    if (kind_ == ModelKind::Friedrichs) {
      if (n == 0) return row0_[index_of(m)];
      if (m == 0) return row0_[index_of(n)];
      return 0.0;
    }
    const long k = std::abs(n - m);
    if (k > b_) return 0.0;
    return diag_[static_cast<std::size_t>(k - 1)][index_of(std::min(n, m))];
  }

  /// y <- alpha (H - shift) x + beta y, with H = diag(E_n) + V real symmetric.
  void apply(double alpha, double shift, const double* x, double beta, double* y) const {
    const std::size_t N = size();
    const double inv_rho = 1.0 / rho_;
    const double e0 = static_cast<double>(lo_) * inv_rho - shift;
    if (beta == 0.0) {
      for (std::size_t i = 0; i < N; ++i)
        y[i] = alpha * (e0 + static_cast<double>(i) * inv_rho) * x[i];
    } else {
      for (std::size_t i = 0; i < N; ++i)
        y[i] = beta * y[i] + alpha * (e0 + static_cast<double>(i) * inv_rho) * x[i];
    }
    if (kind_ == ModelKind::Friedrichs) {
      const std::size_t c = index_of(0);
      double acc = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        acc += row0_[i] * x[i];
        y[i] += alpha * row0_[i] * x[c];
      }
      y[c] += alpha * acc;
      return;
    }
    for (long k = 1; k <= b_; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      if (uk >= N) break;
      const double* d = diag_[uk - 1].data();
      const std::size_t M = N - uk;
      double* yk = y + uk;
      const double* xk = x + uk;
      for (std::size_t i = 0; i < M; ++i) y[i] += alpha * d[i] * xk[i];
      for (std::size_t i = 0; i < M; ++i) yk[i] += alpha * d[i] * x[i];
    }
  }

  /// apply() on a planar complex vector in one pass over the stored band.
  void apply_pair(double alpha, double shift, const double* xr, const double* xi, double beta,
                  double* yr, double* yi) const {
    if (kind_ == ModelKind::Friedrichs) {
      apply(alpha, shift, xr, beta, yr);
      apply(alpha, shift, xi, beta, yi);
      return;
    }
    const std::size_t N = size();
    const double inv_rho = 1.0 / rho_;
    const double e0 = static_cast<double>(lo_) * inv_rho - shift;
    for (std::size_t i = 0; i < N; ++i) {
      const double e = alpha * (e0 + static_cast<double>(i) * inv_rho);
      yr[i] = (beta == 0.0 ? 0.0 : beta * yr[i]) + e * xr[i];
      yi[i] = (beta == 0.0 ? 0.0 : beta * yi[i]) + e * xi[i];
    }
    for (long k = 1; k <= b_; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      if (uk >= N) break;
      const double* __restrict d = diag_[uk - 1].data();
      const std::size_t M = N - uk;
      band_pass(alpha, d, M, xr + uk, xi + uk, yr, yi);
      band_pass(alpha, d, M, xr, xi, yr + uk, yi + uk);
    }
  }

  /// Couplings of level 0 to every other site: (E_n, V_{n0}).
  std::vector<std::pair<double, double>> row0() const {
    std::vector<std::pair<double, double>> out;
    for (long n = std::max(lo_, -b_); n <= std::min(hi_, b_); ++n)
      if (n != 0) out.emplace_back(energy(n), element(0, n));
    return out;
  }

  /// Rigorous enclosure of the spectrum of H. WM: Gershgorin discs. FM: the
  /// arrowhead V has eigenvalues +-|row0|_2 (and zeros), so Weyl's inequality
  /// gives [E_lo - |row0|, E_hi + |row0|], far tighter than Gershgorin.
  std::pair<double, double> spectral_bounds() const {
    if (kind_ == ModelKind::Friedrichs) {
      double n2 = 0.0;
      for (double v : row0_) n2 += v * v;
      const double r = std::sqrt(n2) * (1.0 + 1e-12);
      return {energy(lo_) - r, energy(hi_) + r};
    }
    std::vector<double> r(size(), 0.0);
    for (std::size_t k = 1; k <= diag_.size(); ++k)
      for (std::size_t i = 0; i < diag_[k - 1].size(); ++i) {
        r[i] += std::abs(diag_[k - 1][i]);
        r[i + k] += std::abs(diag_[k - 1][i]);
      }
    double lo = inf, hi = -inf;
    for (std::size_t i = 0; i < size(); ++i) {
      const double e = energy(lo_ + static_cast<long>(i));
      lo = std::min(lo, e - r[i]);
      hi = std::max(hi, e + r[i]);
    }
    return {lo, hi};
  }

  Eigen::MatrixXd to_dense() const {
    const auto N = static_cast<Eigen::Index>(size());
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(N, N);
    for (Eigen::Index i = 0; i < N; ++i) h(i, i) = energy(lo_ + static_cast<long>(i));
    for (long n = lo_; n <= hi_; ++n)
      for (long m = std::max(lo_, n - b_); m <= std::min(hi_, n + b_); ++m)
        if (m != n) h(static_cast<Eigen::Index>(index_of(n)), static_cast<Eigen::Index>(index_of(m))) += element(n, m);
    return h;
  }

  /// Number of stored nonzero pairs n < m.
  std::size_t nonzero_pairs() const {
    std::size_t c = 0;
    if (kind_ == ModelKind::Friedrichs) {
      for (double v : row0_) c += v != 0.0;
    } else {
      for (const auto& d : diag_)
        for (double v : d) c += v != 0.0;
    }
    return c;
  }

 private:
  static void band_pass(double alpha, const double* __restrict d, std::size_t m, const double* __restrict xr,
                        const double* __restrict xi, double* __restrict yr, double* __restrict yi) {
    for (std::size_t i = 0; i < m; ++i) {
      const double a = alpha * d[i];
      yr[i] += a * xr[i];
      yi[i] += a * xi[i];
    }
  }

  friend CouplingMatrix build(const ModelSpec&);
  friend CouplingMatrix extend(const CouplingMatrix&, const ModelSpec&, long);

  ModelKind kind_ = ModelKind::Wigner;
  long b_ = 0;
  long lo_ = 0;
  long hi_ = -1;
  double rho_ = 1.0;
  std::vector<std::vector<double>> diag_;
  std::vector<double> row0_;
};

inline CouplingMatrix build(const ModelSpec& spec) {
  spec.validate();
  CouplingMatrix v;
  v.kind_ = spec.kind;
  v.b_ = spec.b;
  v.rho_ = spec.rho;
  const long h = spec.initial_half_width();
  v.lo_ = -h;
  v.hi_ = h;
  const std::size_t N = v.size();
  if (spec.kind == ModelKind::Friedrichs) {
    v.row0_.assign(N, 0.0);
    for (long n = v.lo_; n <= v.hi_; ++n) v.row0_[v.index_of(n)] = detail::draw_coupling(spec, 0, n);
    return v;
  }
  v.diag_.resize(static_cast<std::size_t>(spec.b));
  for (long k = 1; k <= spec.b; ++k) {
    auto& d = v.diag_[static_cast<std::size_t>(k - 1)];
    d.resize(N > static_cast<std::size_t>(k) ? N - static_cast<std::size_t>(k) : 0);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const long n = v.lo_ + static_cast<long>(i);
      d[i] = detail::draw_coupling(spec, n, n + k);
    }
  }
  return v;
}

/// Grow the lattice by `sites_per_edge` on both sides. Existing elements are
/// copied; new ones come from the same keyed stream, so any sequence of
/// extensions yields the matrix a direct build on the final lattice would.
inline CouplingMatrix extend(const CouplingMatrix& old, const ModelSpec& spec, long sites_per_edge) {
  if (sites_per_edge < 1) throw std::invalid_argument("extend: sites_per_edge must be >= 1");
  CouplingMatrix v;
  v.kind_ = old.kind_;
  v.b_ = old.b_;
  v.rho_ = old.rho_;
  v.lo_ = old.lo_ - sites_per_edge;
  v.hi_ = old.hi_ + sites_per_edge;
  const std::size_t N = v.size();
  const auto shift = static_cast<std::size_t>(sites_per_edge);
  if (v.kind_ == ModelKind::Friedrichs) {
    // Out-of-band sites of level 0 stay decoupled.
    v.row0_.assign(N, 0.0);
    std::copy(old.row0_.begin(), old.row0_.end(), v.row0_.begin() + static_cast<std::ptrdiff_t>(shift));
    return v;
  }
  v.diag_.resize(old.diag_.size());
  for (std::size_t k = 1; k <= v.diag_.size(); ++k) {
    auto& d = v.diag_[k - 1];
    const auto& od = old.diag_[k - 1];
    d.resize(N > k ? N - k : 0);
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (i >= shift && i - shift < od.size()) {
        d[i] = od[i - shift];
      } else {
        const long n = v.lo_ + static_cast<long>(i);
        d[i] = detail::draw_coupling(spec, n, n + static_cast<long>(k));
      }
    }
  }
  return v;
}

/// C(0) and a binned C~(w) estimate from row 0, accumulated over realizations.
struct RealizedSpectrum {
  double c0 = 0.0;                   // ensemble mean of sum_n V_{n0}^2
  RunningStats c0_stats;
  std::vector<double> edges;         // |w| bin edges
  std::vector<double> centers;       // geometric bin centres
  std::vector<double> ctilde;        // ensemble mean of 2 pi rho <V^2>_{bin}
  std::vector<std::size_t> levels;   // lattice levels per bin (both signs); empty bins read 0
  std::vector<RunningStats> ctilde_stats;
  std::size_t realizations = 0;
};

/// Logarithmic |w| bins between one level spacing and the band edge.
inline RealizedSpectrum make_realized_spectrum(double rho, long b, std::size_t bins_per_decade = 8) {
  RealizedSpectrum r;
  const double lo = 0.5 / rho, hi = (static_cast<double>(b) + 0.5) / rho;
  const auto nb = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(std::log10(hi / lo) * static_cast<double>(bins_per_decade))));
  r.edges = logspace(lo, hi, nb + 1);
  r.centers.resize(nb);
  for (std::size_t i = 0; i < nb; ++i) r.centers[i] = std::sqrt(r.edges[i] * r.edges[i + 1]);
  r.ctilde.assign(nb, 0.0);
  r.levels.assign(nb, 0);
  r.ctilde_stats.assign(nb, RunningStats{});
  return r;
}

inline void accumulate(RealizedSpectrum& acc, const CouplingMatrix& v) {
  std::vector<double> bins(acc.centers.size(), 0.0);
  std::vector<std::size_t> count(acc.centers.size(), 0);
  double c0 = 0.0;
  for (const auto& [e, x] : v.row0()) {
    c0 += x * x;
    const auto it = std::upper_bound(acc.edges.begin(), acc.edges.end(), std::abs(e));
    if (it == acc.edges.begin() || it == acc.edges.end()) continue;
    const auto i = static_cast<std::size_t>(it - acc.edges.begin() - 1);
    bins[i] += x * x;
    ++count[i];
  }
  acc.c0_stats.push(c0);
  acc.c0 = acc.c0_stats.mean();
  for (std::size_t i = 0; i < bins.size(); ++i) {
    acc.levels[i] = count[i];
    if (count[i] == 0) continue;
    acc.ctilde_stats[i].push(two_pi * v.rho() * bins[i] / static_cast<double>(count[i]));
    acc.ctilde[i] = acc.ctilde_stats[i].mean();
  }
  ++acc.realizations;
}

inline RealizedSpectrum realized_spectral_sums(const CouplingMatrix& v, std::size_t bins_per_decade = 8) {
  auto acc = make_realized_spectrum(v.rho(), v.band(), bins_per_decade);
  accumulate(acc, v);
  return acc;
}

/// C(t) = sum_n V_{n0}^2 e^{-i E_n t} of one realization on a uniform grid
/// t_k = k dt, k < count. Phasors are advanced by rotation and re-seeded
/// every 512 steps.
inline std::vector<std::complex<double>> realized_correlation(const CouplingMatrix& v, double dt,
                                                              std::size_t count) {
  std::vector<std::complex<double>> out(count, {0.0, 0.0});
  for (const auto& [e, x] : v.row0()) {
    const double w = x * x;
    if (w == 0.0) continue;
    const std::complex<double> rot = std::polar(1.0, -e * dt);
    std::complex<double> z{1.0, 0.0};
    for (std::size_t k = 0; k < count; ++k) {
      if (k % 512 == 0) z = std::polar(1.0, -e * dt * static_cast<double>(k));
      out[k] += w * z;
      z *= rot;
    }
  }
  return out;
}

struct DiscreteLambShift {
  double value = 0.0;
  double omega = 0.0;   // frequency actually used
  bool shifted = false;  // omega sat on a lattice energy and was moved
};

/// sum_n E|V_{n0}|^2 / (w - E_n) over the in-band lattice, using the expected
/// couplings. The pole contribution pi eps^2 |w|^{s-1} cot(pi rho w) of the
/// nearest levels is removed so the sum approximates the principal value at
/// any off-lattice w (the correction vanishes at half-integer rho w).
inline DiscreteLambShift lamb_shift_discrete(const ModelSpec& spec, double omega) {
  spec.validate();
  DiscreteLambShift out;
  double x = omega * spec.rho;
  if (x == std::round(x)) {
    x += 0.5;
    out.shifted = true;
  }
  out.omega = x / spec.rho;
  const double w = out.omega;
  double sum = 0.0;
  for (long n = 1; n <= spec.b; ++n) {
    const double e = static_cast<double>(n) / spec.rho;
    sum += coupling_variance(spec, n) * (1.0 / (w - e) + 1.0 / (w + e));
  }
  // Pole term of the nearest levels, only while w is inside the band.
  if (std::abs(w) < static_cast<double>(spec.b) / spec.rho) {
    const double f = spec.cutoff == CutoffKind::Sharp ? 1.0 : cutoff_factor(spec.profile(), w);
    const double density = spec.epsilon * spec.epsilon * std::pow(std::abs(w), spec.s - 1.0) * f;
    const double phase = pi * x;
    sum -= pi * density * std::cos(phase) / std::sin(phase);
  }
  out.value = sum;
  return out;
}

}  // namespace nonohmic
