#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <random>

#include "nonohmic/propagator.hpp"
#include "nonohmic/volterra.hpp"

using namespace nonohmic;
using cd = std::complex<double>;

namespace {

// For C(t) = a e^{-lambda t} the equation closes on (c, I = int C c):
// c' = -I, I' = a c - lambda I, a linear 2x2 system with c(0) = 1, I(0) = 0.
cd exponential_kernel_solution(cd a, cd lambda, double t) {
  // Characteristic roots of r^2 + lambda r + a = 0.
  const cd disc = std::sqrt(lambda * lambda - 4.0 * a);
  const cd r1 = 0.5 * (-lambda + disc), r2 = 0.5 * (-lambda - disc);
  // c = u e^{r1 t} + (1 - u) e^{r2 t}, c'(0) = 0.
  const cd u = r2 / (r2 - r1);
  return u * std::exp(r1 * t) + (1.0 - u) * std::exp(r2 * t);
}

std::vector<cd> exponential_kernel(cd a, cd lambda, double dt, std::size_t n) {
  std::vector<cd> k(n);
  for (std::size_t i = 0; i < n; ++i) k[i] = a * std::exp(-lambda * (dt * static_cast<double>(i)));
  return k;
}

double max_error(const VolterraSolution& s, cd a, cd lambda) {
  double e = 0.0;
  for (std::size_t i = 0; i < s.c0.t.size(); ++i)
    e = std::max(e, std::abs(s.c0.c0[i] - exponential_kernel_solution(a, lambda, s.c0.t[i])));
  return e;
}

}  // namespace

TEST(HistoryConvolution, MatchesDirectSum) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  const std::size_t n = 1500;
  std::vector<cd> k(n + 1), z(n);
  for (auto& x : k) x = {g(rng), g(rng)};
  for (auto& x : z) x = {g(rng), g(rng)};
  detail::HistoryConvolution conv(k, n);
  for (std::size_t i = 0; i < n; ++i) {
    cd ref{0.0, 0.0};
    for (std::size_t j = 0; j < i; ++j) ref += k[i - j] * z[j];
    EXPECT_LT(std::abs(conv.history(i) - ref), 1e-11 * (1.0 + std::abs(ref))) << i;
    conv.push(z[i]);
  }
}

TEST(Volterra, ExponentialKernelHasClosedForm) {
  const cd a{2.0, 0.0}, lambda{1.0, 3.0};
  const double dt = 1e-3;
  const auto s = survival_volterra(exponential_kernel(a, lambda, dt, 10001), dt, 3.0);
  EXPECT_EQ(s.c0.c0[0], cd(1.0, 0.0));
  EXPECT_EQ(s.c0.provenance, Provenance::Volterra);
  // Global error O(dt^2).
  EXPECT_LT(max_error(s, a, lambda), 5e-6);
}

TEST(Volterra, SecondOrderConvergence) {
  const cd a{4.0, 1.0}, lambda{0.5, 2.0};
  const double t_max = 8.0;
  double prev = 0.0;
  for (int level = 0; level < 4; ++level) {
    const double dt = 0.02 / std::pow(2.0, level);
    const auto n = static_cast<std::size_t>(std::lround(t_max / dt)) + 1;
    const double e = max_error(survival_volterra(exponential_kernel(a, lambda, dt, n), dt, 2.0), a, lambda);
    if (level > 0) {
      EXPECT_NEAR(prev / e, 4.0, 0.2) << dt;
    }
    prev = e;
  }
}

TEST(Volterra, RichardsonErrorShrinksFourfold) {
  // No closed form needed: compare successive grids against the extrapolant.
  const auto p = BandProfile{1.5, 0.3, 10.0, 1e-3, CutoffKind::Exponential};
  const double t = 5.0;
  std::vector<cd> v;
  for (double dt : {0.04, 0.02, 0.01}) v.push_back(survival_volterra(p, dt, t).c0.c0.back());
  const cd extrap = v[2] + (v[2] - v[1]) / 3.0;
  EXPECT_NEAR(std::abs(v[1] - extrap) / std::abs(v[2] - extrap), 4.0, 0.4);
}

TEST(Volterra, DerivativesAreConsistent) {
  const cd a{2.0, 0.0}, lambda{1.0, 3.0};
  const double dt = 1e-3;
  const auto k = exponential_kernel(a, lambda, dt, 4001);
  const auto s = survival_volterra(k, dt, 3.0);
  EXPECT_EQ(s.dc0[0], cd(0.0, 0.0));
  EXPECT_EQ(s.ddc0[0], -k[0]);
  for (std::size_t i = 1; i + 1 < k.size(); i += 397) {
    const cd fd1 = (s.c0.c0[i + 1] - s.c0.c0[i - 1]) / (2.0 * dt);
    const cd fd2 = (s.dc0[i + 1] - s.dc0[i - 1]) / (2.0 * dt);
    EXPECT_LT(std::abs(fd1 - s.dc0[i]), 1e-5) << i;
    EXPECT_LT(std::abs(fd2 - s.ddc0[i]), 1e-5) << i;
  }
  // Hermite interpolation between grid points.
  const double t = 1.23456;
  EXPECT_LT(std::abs(s.at(t) - exponential_kernel_solution(a, lambda, t)), 1e-6);
  EXPECT_THROW(s.at(10.0), std::out_of_range);
}

TEST(Volterra, MarkovianLimit) {
  // s = 1 with a far cutoff: C(t) is a narrow peak of area pi eps^2.
  const double eps = 0.1;
  const auto p = BandProfile{1.0, eps, 200.0, 1e-3, CutoffKind::Exponential};
  const auto s = survival_volterra(p, 0.002, 60.0);
  for (std::size_t i = 0; i < s.c0.t.size(); i += 2500) {
    const double ref = std::exp(-pi * eps * eps * s.c0.t[i]);
    EXPECT_NEAR(std::abs(s.c0.c0[i]), ref, 1e-3) << s.c0.t[i];
  }
}

TEST(Volterra, AgreesWithFourierTransformOfLdos) {
  const auto p = BandProfile{1.5, 0.3, 10.0, 1e-6, CutoffKind::Exponential};
  const double t0 = wigner_time(p);
  const auto s = survival_volterra(p, 0.01, 100.0 * t0);
  const auto d = tabulate_fm_ldos(p, LdosMode::Exact);
  double worst = 0.0;
  for (double t : logspace(0.01 * t0, 100.0 * t0, 60)) worst = std::max(worst, std::abs(s.at(t) - d.fourier(t)));
  EXPECT_LT(worst, 1e-3);
}

TEST(Volterra, RealizedKernelReproducesFriedrichsPropagation) {
  ModelSpec m;
  m.kind = ModelKind::Friedrichs;
  m.s = 1.3;
  m.epsilon = 0.4;
  m.rho = 2.0;
  m.b = 120;
  m.seed = 9;
  const auto v = build(m);
  // w_c dt = 0.06 keeps the O((w_c dt)^2) error below 1e-4.
  const double dt = 0.001;
  const auto s = survival_volterra(v, dt, 20.0);
  ChebyshevPropagator prop(v, 1e-12);
  auto psi = initial_state(v);
  for (double t : {0.5, 2.0, 7.0, 20.0}) {
    prop.advance(psi, t);
    EXPECT_LT(std::abs(s.at(t) - psi.amplitude(0)), 1e-4) << t;
  }
}

TEST(Volterra, RefusesUndersampledKernel) {
  const auto p = BandProfile{1.5, 0.3, 100.0, 1e-3, CutoffKind::Sharp};
  EXPECT_THROW(survival_volterra(p, 0.05, 1.0), std::invalid_argument);
  EXPECT_THROW(survival_volterra(std::vector<cd>{1.0, 1.0}, 1.0, 4.0), std::invalid_argument);
}
