#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numeric>

#include "nonohmic/ldos.hpp"
#include "nonohmic/propagator.hpp"

using namespace nonohmic;

namespace {

BandProfile band(double s, double eps, double wc = 100.0, CutoffKind cut = CutoffKind::Sharp) {
  return {s, eps, wc, 1e-6, cut};
}

ModelSpec fm(double s, double eps, double rho, long b, CouplingLaw law = CouplingLaw::Gaussian) {
  ModelSpec m;
  m.kind = ModelKind::Friedrichs;
  m.s = s;
  m.epsilon = eps;
  m.rho = rho;
  m.b = b;
  m.couplings = law;
  return m;
}

// int_0^inf of the analytic density, in u = ln w.
double half_weight(const BandProfile& p, LdosMode mode, double hi) {
  auto f = [&](double u) {
    const double w = std::exp(u);
    return w * fm_ldos_analytic(p, w, mode);
  };
  const double lo = std::log(1e-14), top = std::log(hi);
  return integrate_panels(f, lo, top, static_cast<std::size_t>(top - lo), 1e-9);
}

}  // namespace

TEST(AnalyticLdos, OhmicIsLorentzian) {
  const auto p = band(1.0, 0.2);
  const double g = two_pi * 0.04;
  for (double w : {-3.0, -0.1, 0.05, 0.4, 7.0}) {
    const double ref = g / (2.0 * pi) / (w * w + 0.25 * g * g);
    EXPECT_NEAR(fm_ldos_analytic(p, w), ref, 1e-12 * ref) << w;
  }
}

TEST(AnalyticLdos, UniversalIsEvenAndNormalized) {
  for (double s : {0.5, 1.5}) {
    const auto p = band(s, 0.3, 1e40, CutoffKind::Exponential);
    EXPECT_DOUBLE_EQ(fm_ldos_analytic(p, 0.7), fm_ldos_analytic(p, -0.7));
    // Tail beyond 1e30 is eps^2 w^{s-2}/(2-s) < 1e-14.
    EXPECT_NEAR(2.0 * half_weight(p, LdosMode::Universal, 1e30), 1.0, 1e-6) << s;
  }
}

TEST(AnalyticLdos, UniversalTailIsGoldenRule) {
  for (double s : {0.5, 1.0, 1.5}) {
    const auto p = band(s, 0.3, 1e12, CutoffKind::Exponential);
    const double w = 1e6;
    EXPECT_NEAR(fm_ldos_analytic(p, w) * std::pow(w, 3.0 - s) / 0.09, 1.0, 1e-3) << s;
  }
}

TEST(AnalyticLdos, ExactDensityPlusBoundStatesIsNormalized) {
  for (double s : {0.5, 1.5}) {
    const auto p = band(s, 0.6, 5.0);
    const auto bound = fm_bound_states(p);
    double wb = 0.0;
    for (const auto& m : bound) {
      EXPECT_GT(std::abs(m.omega), p.omega_c);
      // Pole condition w = Delta(w).
      EXPECT_NEAR(m.omega, lamb_shift_exact(p, m.omega), 1e-9 * std::abs(m.omega));
      wb += m.weight;
    }
    const double cont = 2.0 * half_weight(p, LdosMode::Exact, p.omega_c);
    EXPECT_NEAR(cont + wb, 1.0, 1e-5) << s;
  }
}

TEST(AnalyticLdos, WeakCouplingHasNoResolvableBoundState) {
  EXPECT_TRUE(fm_bound_states(band(0.5, 0.3, 100.0)).empty());
  EXPECT_TRUE(fm_bound_states(band(1.5, 0.3, 100.0, CutoffKind::Exponential)).empty());
}

TEST(Filon, TriangleTransformIsExact) {
  TabulatedDensity d;
  d.omega = {-1.0, -0.25, 0.0, 0.6, 1.0};
  for (double w : d.omega) d.value.push_back(1.0 - std::abs(w));
  EXPECT_NEAR(d.total_weight(), 1.0, 1e-15);
  for (double t : {0.0, 1e-3, 0.5, 3.0, 40.0, 1e4}) {
    const double ref = t == 0.0 ? 1.0 : std::pow(std::sin(0.5 * t) / (0.5 * t), 2);
    const auto c = d.fourier(t);
    EXPECT_NEAR(c.real(), ref, 1e-13) << t;
    EXPECT_NEAR(c.imag(), 0.0, 1e-13) << t;
  }
}

TEST(Filon, PointMassAtRest) {
  TabulatedDensity d;
  d.masses.push_back({0.0, 1.0});
  for (double t : {0.0, 1.0, 1e6}) EXPECT_EQ(d.fourier(t), std::complex<double>(1.0, 0.0));
}

TEST(Survival, LorentzianDecaysExponentially) {
  const auto p = band(1.0, 0.2, 1e7, CutoffKind::Exponential);
  MeshOptions o;
  o.omega_max = 1e7;
  // Trapezoid error of the log mesh falls as per_decade^-2.
  o.per_decade = 2000;
  const auto d = tabulate_fm_ldos(p, LdosMode::Universal, o);
  // Truncated tail weight Gamma / (pi w_max).
  EXPECT_NEAR(d.total_weight(), 1.0, 1e-6);
  const auto sa = survival_from_density(d, {0.0, 1.0, 10.0, 40.0, 100.0});
  for (std::size_t i = 0; i < sa.t.size(); ++i) {
    const double ref = std::exp(-pi * 0.04 * sa.t[i]);
    EXPECT_NEAR(sa.c0[i].real(), ref, 1e-5) << sa.t[i];
    EXPECT_NEAR(sa.c0[i].imag(), 0.0, 1e-5) << sa.t[i];
  }
  EXPECT_EQ(sa.provenance, Provenance::FtOfLdos);
}

TEST(Survival, TabulatedExactMeshIsNormalized) {
  const auto p = band(1.5, 0.6, 5.0);
  const auto d = tabulate_fm_ldos(p, LdosMode::Exact);
  EXPECT_NEAR(d.total_weight(), 1.0, 1e-5);
  EXPECT_NEAR(std::abs(d.fourier(0.0)), 1.0, 1e-5);
}

TEST(NumericalLdos, EigenWeightsSatisfySumRules) {
  const auto spec = fm(1.3, 0.4, 2.0, 150);
  const auto v = build(spec);
  const auto sp = ldos_eigen(v);
  double w0 = 0.0, w1 = 0.0, w2 = 0.0, row = 0.0;
  for (std::size_t k = 0; k < sp.omega.size(); ++k) {
    w0 += sp.weight[k];
    w1 += sp.weight[k] * sp.omega[k];
    w2 += sp.weight[k] * sp.omega[k] * sp.omega[k];
  }
  for (const auto& [e, x] : v.row0()) row += x * x;
  EXPECT_NEAR(w0, 1.0, 1e-10);
  EXPECT_NEAR(w1, 0.0, 1e-10);
  // <0|H^2|0> = sum_n V_0n^2.
  EXPECT_NEAR(w2, row, 1e-10 * row);
}

TEST(NumericalLdos, SpectrumTransformMatchesPropagator) {
  ModelSpec spec = fm(1.5, 0.5, 1.0, 60);
  spec.kind = ModelKind::Wigner;
  spec.n_levels = 100;
  const auto v = build(spec);
  const auto sp = ldos_eigen(v);
  ChebyshevPropagator prop(v, 1e-12);
  auto psi = initial_state(v);
  const std::vector<double> times{0.1, 1.0, 3.0};
  const auto sa = survival_from_spectrum(sp, times);
  for (std::size_t i = 0; i < times.size(); ++i) {
    prop.advance(psi, times[i]);
    EXPECT_LT(std::abs(sa.c0[i] - psi.amplitude(0)), 1e-9) << times[i];
  }
}

TEST(NumericalLdos, UncoupledIsDeltaAtZero) {
  const auto h = ldos_numerical(fm(1.0, 0.0, 1.0, 20), linspace(-2.5, 2.5, 6), false, 3);
  ASSERT_EQ(h.bins(), 5u);
  EXPECT_EQ(h.realizations, 3u);
  for (std::size_t i = 0; i < h.bins(); ++i) EXPECT_NEAR(h.weights[i], i == 2 ? 1.0 : 0.0, 1e-14);
  const auto sa = survival_from_histogram(h, {0.0, 5.0});
  EXPECT_NEAR(std::abs(sa.c0[0]), 1.0, 1e-14);
}

TEST(NumericalLdos, RefusesLargeDimensions) {
  EXPECT_THROW(ldos_eigen(build(fm(1.0, 0.1, 1.0, 2500))), std::invalid_argument);
}

TEST(NumericalLdos, AccumulatorMergeMatchesSequential) {
  const auto spec = fm(1.2, 0.3, 1.0, 40);
  const auto edges = log_abs_edges(0.05, 40.0, 4);
  LdosAccumulator all(edges, true, spec.kind), a(edges, true, spec.kind), b(edges, true, spec.kind);
  for (std::uint64_t r = 0; r < 6; ++r) {
    ModelSpec m = spec;
    m.seed = 100 + r;
    const auto sp = ldos_eigen(build(m));
    all.add(sp);
    (r < 2 ? a : b).add(sp);
  }
  a.merge(b);
  const auto h1 = all.histogram(), h2 = a.histogram();
  for (std::size_t i = 0; i < h1.bins(); ++i) {
    EXPECT_NEAR(h1.weights[i], h2.weights[i], 1e-14);
    EXPECT_NEAR(h1.std_error[i], h2.std_error[i], 1e-12);
  }
  double total = h1.outside;
  for (double w : h1.weights) total += w;
  EXPECT_NEAR(total, 1.0, 1e-10);
}

TEST(NumericalLdos, DenseLatticeApproachesAnalyticDensity) {
  // Spacing 0.05 against a width Gamma = 0.57: bins of five levels with
  // edges between lattice energies. Near the origin the lattice has no site
  // at E = 0 (level 0 itself), a hole in the spectral function that narrows
  // the central peak; the comparison starts at |w| = 1.
  const auto spec = fm(1.0, 0.3, 20.0, 1000, CouplingLaw::MeanProfile);
  const auto h = ldos_numerical(spec, linspace(-3.125, 3.125, 26), false);
  const auto p = spec.profile();
  for (std::size_t i = 0; i < h.bins(); ++i) {
    if (std::abs(h.center(i)) < 1.0) continue;
    const double lo = h.edges[i], hi = h.edges[i + 1];
    const double ref = integrate([&](double w) { return fm_ldos_analytic(p, w, LdosMode::Exact); }, lo, hi, 1e-10) /
                       (hi - lo);
    EXPECT_NEAR(h.density(i), ref, 0.03 * ref) << h.center(i);
  }
}

TEST(Asymptotics, DocumentedExamples) {
  const auto p1 = band(1.0, 0.1);
  const double t0 = wigner_time(p1);
  EXPECT_NEAR(decay_asymptotics(p1, 3.0 * t0, DecayRegime::Stretched).c0, std::exp(-1.5), 1e-14);
  EXPECT_NEAR(decay_asymptotics(p1, 3.0 * t0, DecayRegime::PowerLaw).c0, 0.0, 1e-15);
  const auto p15 = band(1.5, 0.1);
  const double t15 = wigner_time(p15);
  EXPECT_NEAR(decay_asymptotics(p15, t15, DecayRegime::PowerLaw).c0, 4.0 / pi, 1e-14);
  EXPECT_NEAR(decay_asymptotics(p15, 4.0 * t15, DecayRegime::PowerLaw).c0, 2.0 / pi, 1e-14);
}

TEST(Asymptotics, LogLawWindow) {
  const auto p = band(2.0, 0.1, 100.0);
  EXPECT_THROW(decay_asymptotics(p, 1.0, DecayRegime::LogS2), std::invalid_argument);
  const auto in = decay_asymptotics(p, 1.0, DecayRegime::LogS2, 100.0);
  EXPECT_TRUE(in.in_validity_window);
  EXPECT_NEAR(in.c0, 0.01 / pi * std::log(100.0), 1e-15);
  EXPECT_FALSE(decay_asymptotics(p, 0.01, DecayRegime::LogS2, 100.0).in_validity_window);
  EXPECT_FALSE(decay_asymptotics(p, 200.0, DecayRegime::LogS2, 100.0).in_validity_window);
}
