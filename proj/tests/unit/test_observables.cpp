#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nonohmic/observables.hpp"

using namespace nonohmic;

namespace {

Wavepacket packet(long lo, std::vector<double> probs, double rho = 1.0) {
  Wavepacket psi;
  psi.lo = lo;
  psi.rho = rho;
  for (double p : probs) {
    psi.re.push_back(std::sqrt(p));
    psi.im.push_back(0.0);
  }
  return psi;
}

ModelSpec model(ModelKind kind, double s, double eps, long b, std::uint64_t seed = 4) {
  ModelSpec m;
  m.kind = kind;
  m.s = s;
  m.epsilon = eps;
  m.b = b;
  m.n_levels = 2 * b;
  m.seed = seed;
  return m;
}

}  // namespace

TEST(Measure, DeltaAtOrigin) {
  const auto m = measure(packet(-2, {0, 0, 1, 0, 0}));
  EXPECT_EQ(m.P0, 1.0);
  EXPECT_EQ(m.dE_sprd, 0.0);
  EXPECT_EQ(m.dE_core, 0.0);
  EXPECT_EQ(m.E25, 0.0);
  EXPECT_EQ(m.E50, 0.0);
  EXPECT_EQ(m.E75, 0.0);
}

TEST(Measure, UniformThreePoint) {
  const auto m = measure(packet(-1, {1.0 / 3, 1.0 / 3, 1.0 / 3}));
  EXPECT_NEAR(m.dE_sprd, std::sqrt(2.0 / 3.0), 1e-15);
  // Cumulative knots (-1, 1/6), (0, 1/2), (1, 5/6).
  EXPECT_NEAR(m.E25, -0.75, 1e-15);
  EXPECT_NEAR(m.E50, 0.0, 1e-15);
  EXPECT_NEAR(m.E75, 0.75, 1e-15);
  EXPECT_NEAR(m.dE_core, 1.5, 1e-15);
}

TEST(Measure, SkewedThreePointAndSpacing) {
  // rho = 2: energies -0.5, 0, 0.5.
  const auto m = measure(packet(-1, {0.5, 0.3, 0.2}, 2.0));
  EXPECT_NEAR(m.P0, 0.3, 1e-15);
  EXPECT_NEAR(m.dE_sprd, std::sqrt(0.25 * 0.7), 1e-15);
  // Knots (-0.5, 0.25), (0, 0.65), (0.5, 0.9).
  EXPECT_NEAR(m.E25, -0.5, 1e-15);
  EXPECT_NEAR(m.E50, -0.5 + 0.5 * 0.25 / 0.4, 1e-15);
  EXPECT_NEAR(m.E75, 0.5 * 0.1 / 0.25, 1e-15);
}

TEST(Measure, SymmetricMedianIsZeroAndQuartilesOrdered) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u;
  std::vector<double> half(20);
  for (auto& x : half) x = u(rng);
  std::vector<double> p(half.rbegin(), half.rend());
  p.push_back(u(rng));
  p.insert(p.end(), half.begin(), half.end());
  double z = 0.0;
  for (double x : p) z += x;
  for (auto& x : p) x /= z;
  const auto m = measure(packet(-20, p));
  EXPECT_NEAR(m.E50, 0.0, 1e-12);
  EXPECT_LE(m.E25, m.E50);
  EXPECT_LE(m.E50, m.E75);
}

TEST(Series, EnsembleMergeIsAssociative) {
  const std::vector<double> t{0.0, 1.0, 2.0};
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u;
  std::vector<std::vector<Measurement>> runs(7, std::vector<Measurement>(3));
  for (auto& r : runs)
    for (auto& m : r) m = {u(rng), u(rng), u(rng), -u(rng), 0.0, u(rng)};
  SeriesAccumulator all(t), a(t), b(t), c(t);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    all.add(runs[i]);
    (i < 2 ? a : i < 5 ? b : c).add(runs[i]);
  }
  SeriesAccumulator left = a, right = b;
  left.merge(b);
  left.merge(c);
  right.merge(c);
  right.merge(a);
  for (const auto* acc : {&left, &right}) {
    const auto s = acc->series(), ref = all.series();
    EXPECT_EQ(s.realizations, 7u);
    for (std::size_t i = 0; i < t.size(); ++i) {
      EXPECT_NEAR(s.P0[i], ref.P0[i], 1e-12);
      EXPECT_NEAR(s.P0_err[i], ref.P0_err[i], 1e-12);
      EXPECT_NEAR(s.dE_core_err[i], ref.dE_core_err[i], 1e-12);
    }
  }
  EXPECT_THROW(a.merge(SeriesAccumulator({0.0})), std::invalid_argument);
}

TEST(Fopt, ZeroTimeAndSmallFrequencyEnvelope) {
  const BandProfile p{1.5, 0.2, 50.0, 1.0, CutoffKind::Sharp};
  EXPECT_EQ(fopt_distribution(p, 3.0, 0.0), 0.0);
  const double t = 0.3, w = 1e-5;
  EXPECT_NEAR(fopt_distribution(p, w, t) / (spectral_function(p, w) / two_pi * t * t), 1.0, 1e-9);
  EXPECT_EQ(fopt_weights(p, 0.0).tail, 0.0);
}

TEST(Fopt, TailMatchesSimulatedDecayAtShortTime) {
  // First order in (t/t0)^{2-s}; at t = 0.1 t0 the next order is ~5% for
  // s = 1. Mean-profile couplings remove the sampling noise of a small
  // ensemble.
  auto spec = model(ModelKind::Friedrichs, 1.0, 0.3, 1600);
  spec.rho = 4.0;
  spec.couplings = CouplingLaw::MeanProfile;
  const auto p = spec.profile();
  const double t = 0.1 * wigner_time(p);
  const auto w = fopt_weights(p, t);
  EXPECT_TRUE(w.valid);
  const auto v = build(spec);
  const double loss = 1.0 - evolve(initial_state(v), v, t).probability(0);
  EXPECT_NEAR(w.tail / loss, 1.0, 0.10);
}

TEST(Spreading, LrtOnsetAndSaturation) {
  const BandProfile p{1.2, 0.3, 20.0, 1.0, CutoffKind::Exponential};
  EXPECT_EQ(spreading_lrt(p, 0.0), 0.0);
  // -C''(0) = int w^2 C~ dw / 2pi = 2 eps^2 Gamma(s + 2) w_c^{s+2}.
  const double curv = 2.0 * 0.09 * std::tgamma(3.2) * std::pow(20.0, 3.2);
  const double t = 1e-4;
  EXPECT_NEAR(spreading_lrt(p, t) / t, std::sqrt(curv), 1e-3 * std::sqrt(curv));
  const double sat = std::sqrt(2.0 * correlation_function(p, 0.0).real());
  EXPECT_NEAR(spreading_lrt(p, 1e4) / sat, 1.0, 0.01);
}

TEST(Spreading, FmExactLimits) {
  const double C0 = 2.5;
  EXPECT_NEAR(spreading_fm_exact({1.0, 0.0}, {0.0, 0.0}, {-C0, 0.0}, C0).value, 0.0, 1e-12);
  EXPECT_NEAR(spreading_fm_exact({0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}, C0).value, std::sqrt(C0), 1e-15);
  EXPECT_THROW(spreading_fm_exact({1.0, 0.0}, {0.0, 0.0}, {-2.0 * C0, 0.0}, C0), NumericalError);
}

TEST(Spreading, FmExactMatchesSimulation) {
  const auto spec = model(ModelKind::Friedrichs, 1.3, 0.4, 150);
  const auto v = build(spec);
  double C0 = 0.0;
  for (const auto& [e, x] : v.row0()) C0 += x * x;
  const double dt = 1e-3;
  const auto sol = survival_volterra(v, dt, 30.0);
  const auto theory = spreading_fm_exact(sol, C0);
  ChebyshevPropagator prop(v, 1e-12);
  auto psi = initial_state(v);
  for (double t : {0.05, 0.5, 3.0, 10.0, 30.0}) {
    prop.advance(psi, t);
    const auto i = static_cast<std::size_t>(std::lround(t / dt));
    EXPECT_NEAR(theory[i].value / measure(psi).dE_sprd, 1.0, 1e-3) << t;
  }
}

TEST(Saturation, FormulaLimits) {
  const BandProfile p{1.0, 0.5, 30.0, 1.0, CutoffKind::Sharp};
  EXPECT_NEAR(saturation_theory(p, false), std::sqrt(2 * 0.25 * 30.0), 1e-12);
  EXPECT_NEAR(saturation_theory(p, true), std::sqrt(2 * 0.25 * 29.0), 1e-12);
  BandProfile q = p;
  q.s = 1e-9;
  EXPECT_NEAR(saturation_theory(q, true), std::sqrt(2 * 0.25 * std::log(30.0)), 1e-7);
  BandProfile r = p;
  r.omega_c = 1e8;
  EXPECT_GT(saturation_theory(r, true), 1e3);
}

TEST(Fits, SyntheticStretchedExponential) {
  const auto t = logspace(0.1, 10.0, 40);
  std::vector<double> P;
  for (double x : t) P.push_back(std::exp(-std::pow(x, 0.7)));
  const auto f = fit_stretch_exponent(t, P, {0.0, inf});
  EXPECT_NEAR(f.value, 0.7, 1e-10);
  EXPECT_EQ(f.npoints, 40u);
  EXPECT_THROW(fit_stretch_exponent(t, P, {5.0, 6.0}), std::invalid_argument);
}

TEST(Fits, ExponentialRateAndLogLog) {
  const auto t = linspace(0.0, 5.0, 30);
  std::vector<double> P, y;
  for (double x : t) {
    P.push_back(0.9 * std::exp(-1.7 * x));
    y.push_back(3.0 * std::pow(x + 1.0, -1.5));
  }
  EXPECT_NEAR(fit_exponential_rate(t, P, {0.0, inf}).value, 1.7, 1e-12);
  std::vector<double> tp;
  for (double x : t) tp.push_back(x + 1.0);
  EXPECT_NEAR(fit_loglog_slope(tp, y, {0.0, inf}).value, -1.5, 1e-12);
}

TEST(Fits, MeasuredWindowClosesAtTheFloor) {
  const BandProfile p{1.5, 0.1, 100.0, 1.0, CutoffKind::Sharp};
  const double t0 = wigner_time(p);
  std::vector<double> t, P0;
  for (double x : logspace(0.1 * t0, 100.0 * t0, 60)) {
    t.push_back(x);
    P0.push_back(std::max(0.05, std::exp(-std::sqrt(x / t0))));
  }
  // P0 = 0.1 at t = ln(10)^2 t0.
  const double cross = std::pow(std::log(10.0), 2) * t0;
  const auto wm = measured_stretch_window(p, ModelKind::Wigner, t, P0);
  EXPECT_DOUBLE_EQ(wm.lo, 2.0 * t0);
  EXPECT_NEAR(wm.hi, cross, 0.1 * t0);
  // FM keeps the power-law takeover as the upper limit when it comes first.
  const auto fm = measured_stretch_window(p, ModelKind::Friedrichs, t, P0);
  EXPECT_DOUBLE_EQ(fm.hi, std::min(crossover_time(p), wm.hi));
  // Without a crossing the WM window runs to 50 t0.
  const std::vector<double> flat(t.size(), 0.5);
  EXPECT_DOUBLE_EQ(measured_stretch_window(p, ModelKind::Wigner, t, flat).hi, 50.0 * t0);
}

TEST(Fits, DefaultWindowAndCrossings) {
  const BandProfile p{1.5, 0.1, 100.0, 1.0, CutoffKind::Sharp};
  const auto w = default_stretch_window(p);
  EXPECT_DOUBLE_EQ(w.lo, 2.0 * wigner_time(p));
  EXPECT_DOUBLE_EQ(w.hi, std::min(crossover_time(p), 50.0 * wigner_time(p)));
  const std::vector<double> t{0, 1, 2, 3, 4}, y{0, 2, 4, 3.5, 2};
  EXPECT_DOUBLE_EQ(*first_crossing(t, y, 3.0), 1.5);
  EXPECT_FALSE(first_crossing(t, y, 10.0));
  // 3.5 < 0.9 x 4.
  EXPECT_DOUBLE_EQ(*recurrence_time(t, y), 3.0);
}

TEST(CoreScaling, SyntheticCollapse) {
  // Departure at t0 ~ eps^-4 and saturation ~ 1/t0: slope 1 and the eps law.
  std::vector<double> eps{0.1, 0.14, 0.2, 0.28};
  std::vector<ObservableSeries> runs;
  for (double e : eps) {
    const double t0 = std::pow(e, -4.0);
    ObservableSeries s;
    s.t = logspace(1e-2, 1e7, 400);
    for (double t : s.t) {
      s.P0.push_back(std::exp(-std::log(2.0) * t / t0));
      s.dE_core.push_back((1.0 / t0) * t / (t + t0));
    }
    runs.push_back(s);
  }
  const auto cs = core_scaling_analysis(eps, runs);
  for (const auto& p : cs.points) {
    EXPECT_TRUE(p.saturated);
    EXPECT_NEAR(p.departure * std::pow(p.epsilon, 4.0), 1.0, 0.02);
    EXPECT_NEAR(p.t_half * std::pow(p.epsilon, 4.0), 1.0, 0.02);
  }
  EXPECT_NEAR(cs.collapse.slope, 1.0, 0.02);
  EXPECT_NEAR(cs.epsilon_law.slope, -4.0, 0.05);
  EXPECT_THROW(core_scaling_analysis({0.1}, {runs[0]}), std::invalid_argument);
}
