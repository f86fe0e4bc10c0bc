#pragma once

// Chebyshev propagation of psi(t) = exp(-iHt) psi(0) on the banded lattice,
// with the self-expanding boundary rule.

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <boost/math/special_functions/bessel.hpp>

#include "nonohmic/hamiltonian.hpp"
#include "nonohmic/numerics.hpp"

namespace nonohmic {

/// Planar complex amplitudes psi_n on the lattice n in [lo, lo + size).
struct Wavepacket {
  std::vector<double> re;
  std::vector<double> im;
  long lo = 0;
  double rho = 1.0;
  double t = 0.0;

  std::size_t size() const { return re.size(); }
  long hi() const { return lo + static_cast<long>(re.size()) - 1; }
  double energy(std::size_t i) const { return static_cast<double>(lo + static_cast<long>(i)) / rho; }

  std::complex<double> amplitude(long n) const {
    if (n < lo || n > hi()) return {0.0, 0.0};
    const auto i = static_cast<std::size_t>(n - lo);
    return {re[i], im[i]};
  }
  double probability(long n) const { return std::norm(amplitude(n)); }

  double norm2() const {
    double s = 0.0;
    for (std::size_t i = 0; i < re.size(); ++i) s += re[i] * re[i] + im[i] * im[i];
    return s;
  }
};

inline Wavepacket initial_state(const CouplingMatrix& v) {
  Wavepacket psi;
  psi.re.assign(v.size(), 0.0);
  psi.im.assign(v.size(), 0.0);
  psi.lo = v.lo();
  psi.rho = v.rho();
  psi.re[v.index_of(0)] = 1.0;
  return psi;
}

/// <psi|H|psi>.
inline double energy_expectation(const Wavepacket& psi, const CouplingMatrix& v) {
  std::vector<double> hr(psi.size()), hi(psi.size());
  v.apply(1.0, 0.0, psi.re.data(), 0.0, hr.data());
  v.apply(1.0, 0.0, psi.im.data(), 0.0, hi.data());
  double e = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) e += psi.re[i] * hr[i] + psi.im[i] * hi[i];
  return e;
}

struct PropagatorStats {
  std::size_t steps = 0;
  std::size_t matvecs = 0;
  std::size_t retries = 0;
};

/// Chebyshev expansion of exp(-iH dt) on the Gershgorin interval of H.
/// Steps are sized so that the scaled argument z = half_width * dt stays
/// below `max_z`; the series is truncated once |J_k(z)| drops below the
/// per-step share of `tol`.
/// Op provides size(), spectral_bounds() and
/// apply(alpha, shift, x, beta, y): y <- alpha (H - shift) x + beta y.
template <class Op = CouplingMatrix>
class ChebyshevPropagator {
 public:
  explicit ChebyshevPropagator(const Op& v, double tol = 1e-10, double max_z = 400.0)
      : v_(&v), tol_(tol), max_z_(max_z) {
    if (!(tol > 0.0 && tol <= 1e-4)) throw std::invalid_argument("propagator: tol must lie in (0, 1e-4]");
    auto [lo, hi] = v.spectral_bounds();
    // A sliver of margin keeps |x| <= 1 against rounding in the bounds.
    const double pad = 1e-9 * std::max(std::abs(lo), std::abs(hi)) + 1e-12;
    center_ = 0.5 * (lo + hi);
    half_width_ = 0.5 * (hi - lo) + pad;
  }

  double center() const { return center_; }
  double half_width() const { return half_width_; }
  const PropagatorStats& stats() const { return stats_; }

  /// Advance psi to t_target. psi must live on the same lattice as the matrix.
  void advance(Wavepacket& psi, double t_target) {
    if (t_target < psi.t) throw std::invalid_argument("propagator: t_target precedes psi.t");
    if (psi.size() != v_->size())
      throw std::invalid_argument("propagator: wavepacket and matrix sizes differ");
    const double span = t_target - psi.t;
    if (span == 0.0) return;
    auto n = static_cast<std::size_t>(std::ceil(half_width_ * span / max_z_));
    n = std::max<std::size_t>(n, 1);
    const double step_tol = tol_ / static_cast<double>(n);
    double remaining = span;
    double dt = span / static_cast<double>(n);
    while (remaining > 0.0) {
      const double h = std::min(dt, remaining);
      const double before = psi.norm2();
      save_re_ = psi.re;
      save_im_ = psi.im;
      step(psi, h, step_tol);
      const double after = psi.norm2();
      if (!std::isfinite(after) || std::abs(after - before) > 1e-10) {
        psi.re = save_re_;
        psi.im = save_im_;
        ++stats_.retries;
        dt = 0.5 * h;
        if (half_width_ * dt < 1e-6 || dt <= 1e-14 * std::max(1.0, std::abs(psi.t)))
          throw NumericalError("propagator: step size underflow at t=" + std::to_string(psi.t));
        continue;
      }
      remaining -= h;
      psi.t = remaining > 0.0 ? psi.t + h : t_target;
      ++stats_.steps;
    }
  }

 private:
  void step(Wavepacket& psi, double dt, double step_tol) {
    const std::size_t N = psi.size();
    const double z = half_width_ * dt;
    coefficients(z, step_tol);
    t0r_ = psi.re;
    t0i_ = psi.im;
    t1r_.assign(N, 0.0);
    t1i_.assign(N, 0.0);
    const double a = 1.0 / half_width_;
    apply(a, t0r_, t0i_, 0.0, t1r_, t1i_);
    stats_.matvecs += 2;
    std::vector<double>& rr = psi.re;
    std::vector<double>& ri = psi.im;
    const double c0 = coef_[0];
    for (std::size_t i = 0; i < N; ++i) {
      rr[i] = c0 * t0r_[i];
      ri[i] = c0 * t0i_[i];
    }
    // (-i)^k cycles through 1, -i, -1, i.
    auto accumulate_term = [&](std::size_t k, const std::vector<double>& xr, const std::vector<double>& xi) {
      const double c = coef_[k];
      switch (k % 4) {
        case 0:
          for (std::size_t i = 0; i < N; ++i) { rr[i] += c * xr[i]; ri[i] += c * xi[i]; }
          break;
        case 1:
          for (std::size_t i = 0; i < N; ++i) { rr[i] += c * xi[i]; ri[i] -= c * xr[i]; }
          break;
        case 2:
          for (std::size_t i = 0; i < N; ++i) { rr[i] -= c * xr[i]; ri[i] -= c * xi[i]; }
          break;
        default:
          for (std::size_t i = 0; i < N; ++i) { rr[i] -= c * xi[i]; ri[i] += c * xr[i]; }
          break;
      }
    };
    if (coef_.size() > 1) accumulate_term(1, t1r_, t1i_);
    // T_{k+1} = 2 H~ T_k - T_{k-1}, written over T_{k-1}.
    std::vector<double>* prev_r = &t0r_;
    std::vector<double>* prev_i = &t0i_;
    std::vector<double>* cur_r = &t1r_;
    std::vector<double>* cur_i = &t1i_;
    for (std::size_t k = 2; k < coef_.size(); ++k) {
      apply(2.0 * a, *cur_r, *cur_i, -1.0, *prev_r, *prev_i);
      stats_.matvecs += 2;
      std::swap(prev_r, cur_r);
      std::swap(prev_i, cur_i);
      accumulate_term(k, *cur_r, *cur_i);
    }
    // Undo the spectral shift: exp(-i c dt).
    const double cr = std::cos(center_ * dt), ci = -std::sin(center_ * dt);
    for (std::size_t i = 0; i < N; ++i) {
      const double x = rr[i], y = ri[i];
      rr[i] = cr * x - ci * y;
      ri[i] = cr * y + ci * x;
    }
  }

  void apply(double alpha, const std::vector<double>& xr, const std::vector<double>& xi, double beta,
             std::vector<double>& yr, std::vector<double>& yi) const {
    if constexpr (requires { v_->apply_pair(alpha, 0.0, xr.data(), xi.data(), beta, yr.data(), yi.data()); }) {
      v_->apply_pair(alpha, center_, xr.data(), xi.data(), beta, yr.data(), yi.data());
    } else {
      v_->apply(alpha, center_, xr.data(), beta, yr.data());
      v_->apply(alpha, center_, xi.data(), beta, yi.data());
    }
  }

  // coef_[k] = (2 - delta_k0) J_k(z), truncated past k > z where the tail is
  // below step_tol.
  void coefficients(double z, double step_tol) {
    coef_.clear();
    const double cut = std::max(step_tol * 1e-2, 1e-18);
    for (std::size_t k = 0;; ++k) {
      const double j = boost::math::cyl_bessel_j(static_cast<double>(k), z);
      coef_.push_back(k == 0 ? j : 2.0 * j);
      if (static_cast<double>(k) > z && std::abs(j) < cut) break;
      if (k > 4 * static_cast<std::size_t>(z) + 1000)
        throw NumericalError("propagator: Chebyshev series failed to converge");
    }
  }

  const Op* v_;
  double tol_;
  double max_z_;
  double center_ = 0.0;
  double half_width_ = 1.0;
  PropagatorStats stats_;
  std::vector<double> coef_;
  std::vector<double> t0r_, t0i_, t1r_, t1i_, save_re_, save_im_;
};

/// psi(t_target) for the Hamiltonian diag(E_n) + V.
template <class Op>
Wavepacket evolve(Wavepacket psi, const Op& v, double t_target, double tol = 1e-10) {
  ChebyshevPropagator<Op> prop(v, tol);
  prop.advance(psi, t_target);
  return psi;
}

/// Largest probability held by the `sites` outermost sites of either edge.
inline double edge_probability(const Wavepacket& psi, long sites) {
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(std::max(sites, 1L)), psi.size());
  double left = 0.0, right = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    left += psi.re[i] * psi.re[i] + psi.im[i] * psi.im[i];
    const std::size_t j = psi.size() - 1 - i;
    right += psi.re[j] * psi.re[j] + psi.im[j] * psi.im[j];
  }
  return std::max(left, right);
}

/// Grow lattice and wavepacket by `growth` sites per edge (default 10b) when
/// the probability on the outermost b sites of an edge exceeds `threshold`.
/// FM is never grown: sites beyond +-b are decoupled from level 0.
/// Returns true if the lattice grew.
inline bool expand_if_needed(Wavepacket& psi, CouplingMatrix& v, const ModelSpec& spec,
                             double threshold = 1e-12, long growth = 0) {
  if (spec.kind == ModelKind::Friedrichs) return false;
  if (edge_probability(psi, spec.b) <= threshold) return false;
  if (growth <= 0) growth = 10 * spec.b;
  v = extend(v, spec, growth);
  const auto g = static_cast<std::ptrdiff_t>(growth);
  psi.re.insert(psi.re.begin(), static_cast<std::size_t>(g), 0.0);
  psi.re.insert(psi.re.end(), static_cast<std::size_t>(g), 0.0);
  psi.im.insert(psi.im.begin(), static_cast<std::size_t>(g), 0.0);
  psi.im.insert(psi.im.end(), static_cast<std::size_t>(g), 0.0);
  psi.lo -= growth;
  return true;
}

}  // namespace nonohmic
