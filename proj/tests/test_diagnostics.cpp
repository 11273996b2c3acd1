#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "snlab/diagnostics.hpp"

using namespace snlab;

namespace {

std::vector<double> uniform_segment(const Grid& g, double half_width) {
  std::vector<double> rho(g.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (std::abs(g.x(i)) < half_width) rho[i] = 1.0;
  double mass = 0.0;
  for (double r : rho) mass += r * g.dx();
  for (double& r : rho) r /= mass;
  return rho;
}

/// P([a, b]) of the piecewise-constant density as a difference of its
/// cumulative distribution function.
double cdf_probability(const Grid& g, const std::vector<double>& rho, double a, double b) {
  auto cdf = [&](double x) {
    const double u = (x - (g.x_min() - 0.5 * g.dx())) / g.dx();
    const auto whole = static_cast<std::size_t>(std::floor(u));
    double s = 0.0;
    for (std::size_t k = 0; k < whole; ++k) s += rho[k] * g.dx();
    return s + rho[whole] * (u - static_cast<double>(whole)) * g.dx();
  };
  return cdf(b) - cdf(a);
}

WaveFunction free_evolved_gaussian(const Grid& g, double t) {
  const Kernel k = build_kernel(g, g.dx());
  StepperConfig cfg;
  cfg.snapshot_stride = 100000;
  return evolve(sample_gaussian(g, 1.0), t, cfg, 0.0, k, TrapPotential{}).final_state;
}

}  // namespace

TEST(IntervalProbability, PartialCellsCountProportionally) {
  const Grid g = make_grid(8, 4.0);
  std::vector<double> rho(8, 0.125);
  EXPECT_NEAR(interval_probability(g, rho, -0.5, 0.5), 0.125, 1e-15);
  EXPECT_NEAR(interval_probability(g, rho, -0.25, 0.25), 0.0625, 1e-15);
  EXPECT_NEAR(interval_probability(g, rho, 0.0, 1.75), 0.125 * 1.75, 1e-15);
  EXPECT_NEAR(interval_probability(g, rho, -4.5, 3.5), 1.0, 1e-15);
  EXPECT_EQ(interval_probability(g, rho, 1.0, 1.0), 0.0);
  EXPECT_THROW(interval_probability(g, rho, -5.0, 0.0), DomainError);
  EXPECT_THROW(interval_probability(g, rho, 0.0, 3.6), DomainError);
}

TEST(IntervalProbability, AgreesWithQuadratureAndGrowsWithNestedIntervals) {
  const Grid g = make_grid(256, 12.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.2, 2.0);
  for (int state = 0; state < 10; ++state) {
    const double w1 = u(rng), w2 = u(rng), shift = 3.0 * u(rng);
    std::vector<double> rho(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = g.x(i);
      rho[i] = std::exp(-x * x / w1) + 0.5 * std::exp(-(x - shift) * (x - shift) / w2) +
               0.5 * std::exp(-(x + shift) * (x + shift) / w2);
    }
    rho[0] = 0.0;  // no mirror partner for the leftmost cell
    double mass = 0.0;
    for (double r : rho) mass += r * g.dx();
    for (double& r : rho) r /= mass;
    double previous = 0.0;
    for (double R = 0.13; R < 11.0; R += 0.37) {
      const double p = interval_probability(g, rho, -R, R);
      EXPECT_NEAR(p, cdf_probability(g, rho, -R, R), 1e-12);
      EXPECT_GE(p, previous);
      previous = p;
    }
  }
}

TEST(ConeLeak, VanishesAtTimeZero) {
  const Grid g = make_grid(1024, 60.0);
  const auto rho = sample_gaussian(g, 1.0).density();
  EXPECT_EQ(cone_leak(g, rho, rho, 0.0, 3.0), 0.0);
}

TEST(ConeLeak, FreeGaussianMatchesErfOracle) {
  const Grid g = make_grid(4096, 200.0);
  const auto rho0 = sample_gaussian(g, 1.0).density();
  const auto rho2 = free_evolved_gaussian(g, 2.0).density();
  const double expected = oracle::free_gaussian_leak_raw(1.0, 2.0, 5.0);
  EXPECT_NEAR(expected, 1.7e-7, 0.1 * 1.7e-7);
  EXPECT_NEAR(cone_leak(g, rho0, rho2, 2.0, 5.0), expected, 0.1 * expected);
  EXPECT_LT(oracle::free_gaussian_leak_raw(1.0, 2.0, 1.0), 0.0);
  EXPECT_LT(cone_leak_raw(g, rho0, rho2, 2.0, 1.0), 0.0);
  EXPECT_EQ(cone_leak(g, rho0, rho2, 2.0, 1.0), 0.0);
}

TEST(ConeLeak, WholeGridConeNeverLeaks) {
  const Grid g = make_grid(512, 20.0);
  const auto rho0 = sample_gaussian(g, 1.0).density();
  // Cell 0 has no mirror image, so the symmetric cone can only cover cells 1..n-1.
  std::vector<double> rho_t(g.size(), 1.0 / ((g.size() - 1) * g.dx()));
  rho_t[0] = 0.0;
  const double edge = g.half_length() - 0.5 * g.dx();
  for (double R : {0.5, 2.0, 7.0}) {
    const double t = 1.0;
    EXPECT_EQ(cone_leak(g, rho0, rho_t, t, R, (edge - R) / t), 0.0);
  }
}

TEST(ConeLeak, RejectsConeBeyondGrid) {
  const Grid g = make_grid(256, 10.0);
  const auto rho = sample_gaussian(g, 1.0).density();
  EXPECT_THROW(cone_leak(g, rho, rho, 6.0, 5.0), DomainError);
  EXPECT_THROW(cone_leak(g, rho, rho, -1.0, 1.0), UsageError);
}

TEST(MaxLeak, Definition) {
  const std::vector<double> zeros(5, 0.0);
  EXPECT_EQ(max_leak(zeros), 0.0);
  const std::vector<double> series{0.0, 1e-4, 5e-5};
  EXPECT_EQ(max_leak(series), 1e-4);
  EXPECT_THROW(max_leak(std::vector<double>{}), UsageError);
}

TEST(Spread, GaussianAndTranslation) {
  const Grid g = make_grid(4096, 200.0);
  const WaveFunction psi = sample_gaussian(g, 1.0);
  EXPECT_NEAR(spread(psi), 1.0, 1e-6);
  WaveFunction moved = psi;
  std::rotate(moved.amplitudes.begin(), moved.amplitudes.begin() + 300, moved.amplitudes.end());
  EXPECT_NEAR(spread(moved), spread(psi), 1e-10);
}

TEST(Spread, FreeGaussianAtTimeTwo) {
  const Grid g = make_grid(4096, 200.0);
  EXPECT_NEAR(spread(free_evolved_gaussian(g, 2.0)), oracle::free_spread(1.0, 2.0), 1e-3);
}

TEST(Energies, FreeGaussian) {
  const Grid g = make_grid(4096, 200.0);
  const Kernel k = build_kernel(g, g.dx());
  const Energies e = energies(sample_gaussian(g, 1.0), 0.0, k);
  EXPECT_NEAR(e.kinetic, 0.125, 1e-6);
  EXPECT_EQ(e.interaction, 0.0);
}

TEST(Energies, InteractionLinearInCoupling) {
  const Grid g = make_grid(512, 20.0);
  const Kernel k = build_kernel(g, g.dx());
  const WaveFunction psi = sample_gaussian(g, 1.3);
  for (double kappa : {0.1, 0.7, 2.5}) {
    const double once = energies(psi, kappa, k).interaction;
    EXPECT_LT(once, 0.0);
    EXPECT_EQ(energies(psi, 2.0 * kappa, k).interaction, 2.0 * once);
  }
}

TEST(Energies, InteractionMatchesDirectDoubleSum) {
  const Grid g = make_grid(256, 10.0);
  const Kernel k = build_kernel(g, g.dx());
  const WaveFunction psi = sample_gaussian(g, 0.8);
  const double direct = oracle::direct_interaction_energy(g, psi.density(), 1.7, g.dx());
  EXPECT_NEAR(energies(psi, 1.7, k).interaction, direct, 1e-10);
}

TEST(TailProbability, UniformAndWholeGrid) {
  const Grid g = make_grid(1024, 8.0);
  const auto rho = uniform_segment(g, 1.0);
  // The occupied cells span [-1 + dx/2, 1 - dx/2].
  const double support = 1.0 - 0.5 * g.dx();
  EXPECT_NEAR(tail_probability(g, rho, 0.5 * support), 0.5, 1e-12);
  const Grid wide = make_grid(4096, 200.0);
  const auto gauss = sample_gaussian(wide, 1.0).density();
  EXPECT_LE(tail_probability(wide, gauss, 200.0 - wide.dx()), 1e-6);
  EXPECT_NEAR(tail_probability(wide, gauss, 5.0), 5.7e-7, 0.3e-7);
}

TEST(CoreWidth, InterquartileOfGaussian) {
  const Grid g = make_grid(8192, 40.0);
  const auto rho = sample_gaussian(g, 1.0).density();
  EXPECT_NEAR(core_width(g, rho), 2.0 * 0.6744897501960817, 1e-4);
}
