#pragma once

// Memory-kernel equation dc0/dt = -int_0^t C(t - t') c0(t') dt', c0(0) = 1,
// solved by trapezoidal product integration with an implicit trapezoid step.
// The history sums use FFT-blocked convolution, so a run of n steps costs
// O(n log^2 n).

#include <fftw3.h>

#include <complex>
#include <cstring>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "nonohmic/hamiltonian.hpp"
#include "nonohmic/ldos.hpp"
#include "nonohmic/numerics.hpp"
#include "nonohmic/spectral_theory.hpp"

namespace nonohmic {

namespace detail {

// Owning wrapper around one complex FFTW plan pair of length m.
class FftBuffer {
 public:
  explicit FftBuffer(std::size_t m) : m_(m) {
    data_ = fftw_alloc_complex(m);
    if (!data_) throw std::bad_alloc();
    fwd_ = fftw_plan_dft_1d(static_cast<int>(m), data_, data_, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_1d(static_cast<int>(m), data_, data_, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~FftBuffer() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(data_);
  }
  FftBuffer(const FftBuffer&) = delete;
  FftBuffer& operator=(const FftBuffer&) = delete;

  std::complex<double>* data() { return reinterpret_cast<std::complex<double>*>(data_); }
  std::size_t size() const { return m_; }
  void forward() { fftw_execute(fwd_); }
  void backward() { fftw_execute(bwd_); }

 private:
  std::size_t m_;
  fftw_complex* data_ = nullptr;
  fftw_plan fwd_ = nullptr;
  fftw_plan bwd_ = nullptr;
};

// Online lagged convolution h_i = sum_{j < i} k_{i-j} z_j. The strictly lower
// triangle (i, j) is tiled by dyadic squares: j in [A, A + 2^l), i in
// [A + 2^l, A + 2^{l+1}); each square is evaluated once its sources are
// final, directly for small l and by FFT otherwise.
class HistoryConvolution {
 public:
  HistoryConvolution(const std::vector<std::complex<double>>& kernel, std::size_t n)
      : k_(kernel), z_(n, {0.0, 0.0}), h_(n + 1, {0.0, 0.0}) {}

  /// h_i, complete once push() has been called for every j < i.
  std::complex<double> history(std::size_t i) const { return h_[i]; }

  /// Record z_j (j = number of previous pushes) and propagate it.
  void push(std::complex<double> z) {
    const std::size_t j = count_++;
    z_[j] = z;
    // Squares whose source block ends at j: those levels l with
    // (j + 1) % 2^{l+1} == 2^l.
    const std::size_t e = j + 1;
    for (std::size_t l = 0; (std::size_t{1} << l) <= e; ++l) {
      const std::size_t len = std::size_t{1} << l;
      if (e % (2 * len) != len) continue;
      const std::size_t a = e - len;
      if (e >= h_.size()) break;
      if (l < direct_levels) {
        square_direct(a, len);
      } else {
        square_fft(a, len, l);
      }
    }
  }

 private:
  static constexpr std::size_t direct_levels = 6;

  std::complex<double> k(std::size_t d) const { return d < k_.size() ? k_[d] : std::complex<double>{0.0, 0.0}; }

  void square_direct(std::size_t a, std::size_t len) {
    const std::size_t i_end = std::min(a + 2 * len, h_.size());
    for (std::size_t i = a + len; i < i_end; ++i) {
      std::complex<double> acc{0.0, 0.0};
      for (std::size_t j = a; j < a + len; ++j) acc += k(i - j) * z_[j];
      h_[i] += acc;
    }
  }

  void square_fft(std::size_t a, std::size_t len, std::size_t l) {
    const std::size_t m = 4 * len;
    while (kernel_hat_.size() <= l) kernel_hat_.emplace_back();
    while (work_.size() <= l) work_.emplace_back();
    if (!work_[l]) work_[l] = std::make_unique<FftBuffer>(m);
    FftBuffer& w = *work_[l];
    if (kernel_hat_[l].empty()) {
      // Lags 0 .. 2len - 1 of the kernel, zero padded to 4 len.
      std::fill(w.data(), w.data() + m, std::complex<double>{0.0, 0.0});
      for (std::size_t d = 1; d < 2 * len; ++d) w.data()[d] = k(d);
      w.forward();
      kernel_hat_[l].assign(w.data(), w.data() + m);
    }
    std::fill(w.data(), w.data() + m, std::complex<double>{0.0, 0.0});
    for (std::size_t q = 0; q < len; ++q) w.data()[q] = z_[a + q];
    w.forward();
    for (std::size_t i = 0; i < m; ++i) w.data()[i] *= kernel_hat_[l][i];
    w.backward();
    const double scale = 1.0 / static_cast<double>(m);
    const std::size_t i_end = std::min(a + 2 * len, h_.size());
    // Linear convolution index len + p maps to target a + len + p.
    for (std::size_t i = a + len; i < i_end; ++i) h_[i] += scale * w.data()[i - a];
  }

  const std::vector<std::complex<double>>& k_;
  std::vector<std::complex<double>> z_;
  std::vector<std::complex<double>> h_;
  std::size_t count_ = 0;
  std::vector<std::vector<std::complex<double>>> kernel_hat_;
  std::vector<std::unique_ptr<FftBuffer>> work_;
};

}  // namespace detail

/// c0 and its first two derivatives on the grid t_i = i dt.
struct VolterraSolution {
  double dt = 0.0;
  SurvivalAmplitude c0;
  std::vector<std::complex<double>> dc0;
  std::vector<std::complex<double>> ddc0;

  /// Cubic Hermite interpolation from (c0, dc0); fourth-order in dt.
  std::complex<double> at(double t) const {
    if (t < 0.0 || t > c0.t.back() * (1.0 + 1e-12))
      throw std::out_of_range("VolterraSolution: t outside the solved grid");
    const std::size_t n = c0.c0.size();
    auto i = std::min(static_cast<std::size_t>(t / dt), n - 2);
    const double u = t / dt - static_cast<double>(i);
    const double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
    const double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
    return h00 * c0.c0[i] + h10 * dt * dc0[i] + h01 * c0.c0[i + 1] + h11 * dt * dc0[i + 1];
  }
};

/// Solve with C(t_k) = kernel[k], k = 0 .. n. Sampling faster than the
/// kernel's highest frequency w_max is enforced: dt <= pi / w_max.
inline VolterraSolution survival_volterra(const std::vector<std::complex<double>>& kernel, double dt,
                                          double omega_max) {
  if (kernel.size() < 2) throw std::invalid_argument("survival_volterra: need at least two kernel samples");
  if (!(dt > 0.0)) throw std::invalid_argument("survival_volterra: dt must be positive");
  if (dt * omega_max > pi)
    throw std::invalid_argument("survival_volterra: dt = " + std::to_string(dt) +
                                " undersamples the kernel; need dt <= pi / w_max = " + std::to_string(pi / omega_max));
  using cd = std::complex<double>;
  const std::size_t n = kernel.size();
  VolterraSolution out;
  out.dt = dt;
  out.c0.provenance = Provenance::Volterra;
  out.c0.t.resize(n);
  out.c0.c0.resize(n);
  out.dc0.resize(n);
  out.ddc0.resize(n);
  detail::HistoryConvolution hy(kernel, n), hd(kernel, n);
  const cd c0k = kernel[0];
  const cd denom = 1.0 + 0.25 * dt * dt * c0k;
  cd y = 1.0, k_prev = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    // Trapezoid weights: 1/2 at j = 0 and at j = i (the implicit end point).
    if (i > 0) y = (y - 0.5 * dt * k_prev - 0.5 * dt * dt * hy.history(i)) / denom;
    const cd kint = i == 0 ? cd{0.0, 0.0} : dt * (hy.history(i) + 0.5 * c0k * y);
    const cd dy = -kint;
    // c0'' = -[C(t) c0(0) + int_0^t C(t - t') c0'(t') dt'].
    const cd ddy = -(kernel[i] + (i == 0 ? cd{0.0, 0.0} : dt * (hd.history(i) + 0.5 * c0k * dy)));
    out.c0.t[i] = dt * static_cast<double>(i);
    out.c0.c0[i] = y;
    out.dc0[i] = dy;
    out.ddc0[i] = ddy;
    if (!std::isfinite(std::abs(y))) throw NumericalError("survival_volterra: non-finite amplitude");
    const double w = i == 0 ? 0.5 : 1.0;
    hy.push(w * y);
    hd.push(w * dy);
    k_prev = kint;
  }
  return out;
}

/// Kernel from the continuum C(t) of a band profile.
inline VolterraSolution survival_volterra(const BandProfile& p, double dt, double t_max) {
  const auto n = static_cast<std::size_t>(std::ceil(t_max / dt)) + 1;
  if (dt * p.omega_c > pi)
    throw std::invalid_argument("survival_volterra: dt undersamples the cutoff; need dt <= pi / w_c");
  std::vector<std::complex<double>> k(n);
  for (std::size_t i = 0; i < n; ++i) k[i] = correlation_function(p, dt * static_cast<double>(i));
  return survival_volterra(k, dt, p.omega_c);
}

/// Kernel from a realized matrix: C(t) = sum_n |V_n0|^2 e^{-i E_n t}.
inline VolterraSolution survival_volterra(const CouplingMatrix& v, double dt, double t_max) {
  const auto n = static_cast<std::size_t>(std::ceil(t_max / dt)) + 1;
  double wmax = 0.0;
  for (const auto& [e, x] : v.row0())
    if (x != 0.0) wmax = std::max(wmax, std::abs(e));
  return survival_volterra(realized_correlation(v, dt, n), dt, wmax);
}

/// Resample onto arbitrary times within the grid.
inline SurvivalAmplitude resample(const VolterraSolution& s, const std::vector<double>& times) {
  SurvivalAmplitude out;
  out.t = times;
  out.provenance = Provenance::Volterra;
  for (double t : times) out.c0.push_back(s.at(t));
  return out;
}

}  // namespace nonohmic
