#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "nonohmic/spectral_theory.hpp"

using namespace nonohmic;

namespace {

BandProfile sharp(double s, double eps, double wc, double wrho = 1.0) {
  return {s, eps, wc, wrho, CutoffKind::Sharp};
}

BandProfile expo(double s, double eps, double wc, double wrho = 1.0) {
  return {s, eps, wc, wrho, CutoffKind::Exponential};
}

// Principal-value sum of 2 eps^2 w w'^{s-1} / (w^2 - w'^2) on a midpoint
// lattice that straddles the pole symmetrically. [0, delta] is integrated in
// closed form with the integrand's leading behaviour 2/w * w'^{s-1}.
double lamb_shift_lattice(double s, double eps, double omega, double h, double top) {
  const double delta = 0.01 * omega;
  double sum = 2.0 / omega * std::pow(delta, s) / s;
  // Lattice nodes are w + (k + 1/2) h so the pole sits midway between nodes.
  const long k_lo = static_cast<long>(std::ceil((delta - omega) / h - 0.5));
  const long k_hi = static_cast<long>((top - omega) / h);
  for (long k = k_lo; k <= k_hi; ++k) {
    const double w = omega + (static_cast<double>(k) + 0.5) * h;
    sum += h * std::pow(w, s - 1.0) * 2.0 * omega / (omega * omega - w * w);
  }
  return eps * eps * sum;
}

}  // namespace

TEST(SpectralFunction, OhmicIsFlat) {
  const auto p = expo(1.0, 0.3, 1e12);
  EXPECT_NEAR(spectral_function(p, 0.0), two_pi * 0.09, 1e-15);
  EXPECT_NEAR(spectral_function(p, 1.0), two_pi * 0.09, 1e-12);
}

TEST(SpectralFunction, SuperOhmicVanishesAtZero) {
  EXPECT_EQ(spectral_function(sharp(1.5, 1.0, 10.0), 0.0), 0.0);
}

TEST(SpectralFunction, SubOhmicSignalsInfinity) {
  const double v = spectral_function(sharp(0.5, 1.0, 10.0), 0.0);
  EXPECT_TRUE(std::isinf(v));
  EXPECT_FALSE(std::isnan(v));
}

TEST(SpectralFunction, DirectArithmetic) {
  EXPECT_NEAR(spectral_function(sharp(1.5, 1.44, 800.0), 1.0),
              13.0288130529675905, 1e-12);
}

TEST(SpectralFunction, EvenAndCutoff) {
  for (auto p : {sharp(0.7, 0.4, 50.0), expo(1.6, 0.4, 50.0)}) {
    for (double w = 0.01; w < 200.0; w *= 1.37)
      EXPECT_DOUBLE_EQ(spectral_function(p, w), spectral_function(p, -w));
  }
  EXPECT_EQ(spectral_function(sharp(1.2, 1.0, 50.0), 50.5), 0.0);
}

TEST(CorrelationFunction, SharpAtZeroMatchesAnalytic) {
  for (double s : {0.3, 0.75, 1.0, 1.5, 1.9}) {
    const auto p = sharp(s, 0.7, 123.0);
    const double exact = 2.0 * 0.49 * std::pow(123.0, s) / s;
    EXPECT_NEAR(correlation_function(p, 0.0).real() / exact, 1.0, 1e-9) << s;
  }
}

TEST(CorrelationFunction, OhmicExponentialIsLorentzian) {
  const auto p = expo(1.0, 0.2, 40.0);
  for (double t : {0.0, 0.01, 0.1, 1.0, 3.0}) {
    const double ref = 2.0 * 0.04 * 40.0 / (1.0 + 1600.0 * t * t);
    EXPECT_NEAR(correlation_function(p, t).real(), ref, 1e-12 * 3.2);
  }
}

TEST(CorrelationFunction, SharpMatchesRiemannSum) {
  const auto p = sharp(1.5, 1.0, 100.0);
  const double t = 0.5;
  const int n = 1'000'000;
  const double h = 100.0 / n;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = (i + 0.5) * h;
    sum += std::sqrt(w) * std::cos(w * t);
  }
  const double riemann = 2.0 * h * sum;
  const double quad = correlation_function(p, t).real();
  EXPECT_NEAR(quad / riemann, 1.0, 1e-6);
  // Independent high-precision value (mpmath, 30 digits).
  EXPECT_NEAR(quad, -13.6550787680906450, 1e-9);
}

TEST(CorrelationFunction, ExponentialMatchesQuadrature) {
  const auto p = expo(0.6, 0.5, 20.0);
  for (double t : {0.0, 0.05, 0.4}) {
    // x = w^s removes the integrable singularity at w = 0.
    const double q = 2.0 * 0.25 / 0.6 *
                     integrate_panels([&](double x) {
                       const double w = std::pow(x, 1.0 / 0.6);
                       return std::exp(-w / 20.0) * std::cos(w * t);
                     }, 0.0, std::pow(900.0, 0.6), 200, 1e-13);
    EXPECT_NEAR(correlation_function(p, t).real(), q, 1e-7 * std::abs(q) + 1e-9);
  }
}

TEST(WignerTime, OhmicIsFermiGoldenRule) {
  for (double eps : {0.05, 0.1, 1.0}) {
    const auto p = sharp(1.0, eps, 100.0);
    EXPECT_NEAR(wigner_time(p), 1.0 / (two_pi * eps * eps), 1e-12 / (eps * eps));
    EXPECT_NEAR(wigner_time_estimate(p), wigner_time(p), 1e-12 / (eps * eps));
  }
}

TEST(WignerTime, HighPrecisionValue) {
  EXPECT_NEAR(wigner_time(sharp(1.5, 1.44, 800.0)), 2.31339706684711e-3, 1e-15);
}

TEST(WignerTime, ScalingLaw) {
  for (double s = 0.1; s < 2.0; s += 0.1) {
    const double r = wigner_time(sharp(s, 0.6, 100.0)) / wigner_time(sharp(s, 0.3, 100.0));
    EXPECT_NEAR(r, std::pow(2.0, -2.0 / (2.0 - s)), 1e-12) << s;
  }
}

TEST(WignerTime, RejectsOutsideRange) {
  EXPECT_THROW(wigner_time(sharp(2.0, 1.0, 100.0)), std::domain_error);
  EXPECT_THROW(wigner_time(sharp(0.0, 1.0, 100.0)), std::domain_error);
  EXPECT_THROW(wigner_time_estimate(sharp(2.5, 1.0, 100.0)), std::domain_error);
}

TEST(WignerTime, InverseRoundTrip) {
  for (double s : {0.4, 1.0, 1.5}) {
    const double eps = epsilon_for_wigner_time(s, 3.7);
    EXPECT_NEAR(wigner_time(sharp(s, eps, 100.0)), 3.7, 1e-12);
  }
}

TEST(LambShift, OhmicVanishes) {
  const auto p = sharp(1.0, 1.0, 1e6, 1e-6);
  for (double w : {-30.0, -1.0, 0.5, 10.0}) EXPECT_NEAR(lamb_shift(p, w).value, 0.0, 1e-14);
}

TEST(LambShift, Odd) {
  for (double s : {0.3, 0.8, 1.3, 1.8}) {
    const auto p = sharp(s, 0.9, 1e4, 1e-3);
    for (double w = 0.01; w < 1e3; w *= 1.9) {
      EXPECT_NEAR(lamb_shift(p, w).value + lamb_shift(p, -w).value, 0.0, 1e-13);
      EXPECT_NEAR(lamb_shift_exact(p, w) + lamb_shift_exact(p, -w), 0.0,
                  1e-10 * std::abs(lamb_shift_exact(p, w)));
    }
  }
}

TEST(LambShift, SubOhmicValueMatchesLatticePrincipalValue) {
  const auto p = sharp(0.5, 1.0, 1e8, 1e-8);
  const auto d = lamb_shift(p, 1.0);
  EXPECT_TRUE(d.in_window);
  EXPECT_NEAR(d.value, pi, 1e-12);
  const double lattice = lamb_shift_lattice(0.5, 1.0, 1.0, 1e-3, 2e4);
  EXPECT_NEAR(lattice / d.value, 1.0, 0.01);
}

TEST(LambShift, CutoffFreeLimitOfExactIntegral) {
  for (double s : {0.4, 0.9, 1.3, 1.7}) {
    const auto p = expo(s, 0.8, 1e9, 1e-9);
    const double w = 2.5;
    // Leading cutoff correction: 2 eps^2 w wc^{s-2} * (-Gamma(s-2)).
    const double corr = -2.0 * 0.64 * w * std::pow(1e9, s - 2.0) * std::tgamma(s - 2.0);
    EXPECT_NEAR(lamb_shift_exact(p, w) / (lamb_shift(p, w).value + corr), 1.0, 1e-6) << s;
  }
}

TEST(LambShift, SharpCutoffCorrection) {
  // Removing the band beyond w_c adds 2 eps^2 w w_c^{s-2}/(2-s) to leading order.
  const double s = 1.5, wc = 1e4, w = 3.0;
  const auto p = sharp(s, 1.0, wc, 1e-9);
  const double expected = lamb_shift(p, w).value + 2.0 * w * std::pow(wc, s - 2.0) / (2.0 - s);
  EXPECT_NEAR(lamb_shift_exact(p, w), expected, 1e-6 * std::abs(expected));
}

TEST(LambShift, OutOfWindowIsFlaggedOrDispatched) {
  const auto p = sharp(1.7, 1.0, 100.0, 1.0);
  const auto flagged = lamb_shift(p, 90.0);
  EXPECT_FALSE(flagged.in_window);
  EXPECT_EQ(flagged.formula, LambShiftFormula::Universal);
  const auto dispatched = lamb_shift(p, 90.0, MarginalPolicy::Dispatch);
  EXPECT_EQ(dispatched.formula, LambShiftFormula::MarginalS2);
  EXPECT_NEAR(dispatched.value, lamb_shift_marginal_s2(p, 90.0), 1e-14);
  const auto low = lamb_shift(sharp(0.2, 1.0, 1e4, 1.0), 3.0, MarginalPolicy::Dispatch);
  EXPECT_EQ(low.formula, LambShiftFormula::MarginalS0);
}

TEST(CoreFrequencies, OhmicCollapse) {
  const auto cf = core_frequencies(sharp(1.0, 0.3, 1e4, 1e-4));
  EXPECT_NEAR(cf.gamma0, 0.09, 1e-14);
  EXPECT_NEAR(cf.gamma_o, 0.09, 1e-14);
}

TEST(CoreFrequencies, NearS2UsesLimitingFormula) {
  const auto p = sharp(1.999, 0.5, 1e4, 1.0);
  const auto cf = core_frequencies(p);
  EXPECT_EQ(cf.gamma0_formula, CoreFormula::LimitS2);
  EXPECT_NEAR(cf.gamma0, 1e4 * std::exp(-2.0), 1e-9);
}

TEST(CoreFrequencies, RejectsOutsideRange) {
  EXPECT_THROW(core_frequencies(sharp(2.2, 1.0, 100.0)), std::domain_error);
}

TEST(CoreFrequencies, GammaORootSolvesTailCondition) {
  for (double s : {0.3, 0.7, 1.0, 1.3, 1.7}) {
    const auto p = sharp(s, 0.4, 1e3, 1e-3);
    const double g = gamma_o_numeric(p);
    EXPECT_NEAR(tail_weight_beyond(p, g), 0.5, 1e-9) << s;
    // Sharp cutoff: 2 eps^2 (g^{s-2} - wc^{s-2})/(2-s) = 1/2 in closed form.
    const double exact =
        std::pow(std::pow(1e3, s - 2.0) + (2.0 - s) / (4.0 * 0.16), -1.0 / (2.0 - s));
    EXPECT_NEAR(g / exact, 1.0, 1e-9) << s;
    // The order-of-magnitude formula sits below the cutoff-free root by 4^{1/(2-s)}.
    const double free_root = std::pow(4.0 * 0.16 / (2.0 - s), 1.0 / (2.0 - s));
    EXPECT_NEAR(free_root / core_frequencies(p).gamma_o, std::pow(4.0, 1.0 / (2.0 - s)), 1e-9) << s;
  }
}

TEST(CrossoverTime, DivergesAtOhmic) {
  EXPECT_TRUE(std::isinf(crossover_time(sharp(1.0, 0.2, 100.0))));
}

TEST(CrossoverTime, SuperOhmicValue) {
  const auto p = sharp(1.5, 1.44, 800.0);
  EXPECT_NEAR(crossover_time(p) / wigner_time(p), 0.233413582850829558, 1e-12);
}

TEST(CrossoverTime, RatioIndependentOfCoupling) {
  for (double s : {0.5, 1.2, 1.8}) {
    const auto a = sharp(s, 0.1, 100.0), b = sharp(s, 0.9, 100.0);
    EXPECT_NEAR(crossover_time(a) / wigner_time(a), crossover_time(b) / wigner_time(b), 1e-12);
  }
}

TEST(CrossoverTime, NumericIntersectionReportedSeparately) {
  // For s = 1.5 the power-law amplitude 4/pi exceeds the stretched exponential
  // everywhere, so the curves never cross.
  EXPECT_FALSE(crossover_time_numeric(sharp(1.5, 1.0, 100.0)).has_value());
  const auto p = sharp(1.05, 1.0, 100.0);
  const auto tn = crossover_time_numeric(p);
  ASSERT_TRUE(tn.has_value());
  const double x = *tn / wigner_time(p);
  const double amp = 2.0 * std::sin(0.05 * pi) / (0.95 * pi);
  EXPECT_NEAR(std::exp(-0.5 * std::pow(x, 0.95)), amp * std::pow(x, -0.95), 1e-9);
}

TEST(CoreBorder, ClampsAndMonotone) {
  const auto p = sharp(1.5, 0.3, 1e4, 1e-3);
  const double t0 = wigner_time(p);
  const auto early = core_border_of_time(p, 1e-4 * t0);
  EXPECT_EQ(early.clamp, Clamp::Floor);
  EXPECT_DOUBLE_EQ(early.gamma, p.omega_rho);
  const double t_o = 1.0 / core_frequencies(p).gamma_o;
  const auto late = core_border_of_time(p, 100.0 * t_o);
  EXPECT_EQ(late.clamp, Clamp::Ceiling);
  EXPECT_DOUBLE_EQ(late.gamma, core_frequencies(p).gamma_o);
  double prev = 0.0;
  bool saw_root = false;
  for (double t = 0.1 * t0; t < 10.0 * t_o; t *= 1.002) {
    const auto b = core_border_of_time(p, t);
    EXPECT_GE(b.gamma, prev);
    prev = b.gamma;
    if (b.clamp == Clamp::None) {
      saw_root = true;
      EXPECT_LT(std::abs(b.residual), 1e-10);
    }
  }
  EXPECT_TRUE(saw_root);
}

TEST(TimeScales, Bundle) {
  const auto p = sharp(1.5, 1.44, 1e4, 1.0);
  const auto ts = time_scales(p);
  EXPECT_NEAR(ts.t_H, two_pi, 1e-14);
  EXPECT_NEAR(ts.t_c, two_pi / 1e4, 1e-16);
  EXPECT_TRUE(ts.universal_regime);
  EXPECT_NEAR(ts.t_inf / ts.t0, 0.2334135828508, 1e-10);
}
