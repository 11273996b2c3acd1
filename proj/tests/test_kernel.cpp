#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "snlab/kernel.hpp"

using namespace snlab;

TEST(Kernel, PointValues) {
  const Grid g = make_grid(4096, 200.0);
  const Kernel k = build_kernel(g, g.dx());
  EXPECT_DOUBLE_EQ(k(0.0), 1.0 / g.dx());
  EXPECT_NEAR(k(10.0), 0.1, 0.0005);
  const Kernel floor_kernel = build_kernel(make_grid(64, 8.0), 1.0, KernelMode::floor);
  EXPECT_DOUBLE_EQ(floor_kernel(0.5), 1.0);
  EXPECT_DOUBLE_EQ(floor_kernel(2.0), 0.5);
}

TEST(Kernel, EvenPositiveNonIncreasing) {
  const Grid g = make_grid(64, 8.0);
  for (KernelMode mode : {KernelMode::plummer, KernelMode::floor}) {
    const Kernel k = build_kernel(g, 0.3, mode);
    double prev = k(0.0);
    for (double r = 0.05; r < 20.0; r += 0.05) {
      EXPECT_GT(k(r), 0.0);
      EXPECT_EQ(k(r), k(-r));
      EXPECT_LE(k(r), prev);
      prev = k(r);
    }
  }
}

TEST(Kernel, RejectsTinyRegularization) {
  const Grid g = make_grid(64, 8.0);
  EXPECT_THROW(build_kernel(g, g.dx() / 5.0), ConfigError);
  EXPECT_THROW(build_kernel(g, 0.0), ConfigError);
  EXPECT_THROW(kernel_mode_from_string("gaussian"), ConfigError);
  EXPECT_EQ(kernel_mode_from_string("floor"), KernelMode::floor);
}

TEST(SelfPotential, PointMassGivesKernelShape) {
  const Grid g = make_grid(512, 20.0);
  const Kernel k = build_kernel(g, g.dx());
  std::vector<double> rho(g.size(), 0.0);
  rho[g.size() / 2] = 1.0 / g.dx();
  const auto phi = self_potential(g, rho, k, 1.0);
  for (std::size_t i = 0; i < g.size(); ++i)
    EXPECT_NEAR(phi[i], -1.0 / std::sqrt(g.x(i) * g.x(i) + g.dx() * g.dx()), 1e-12);
}

TEST(SelfPotential, UniformSegmentFarField) {
  const Grid g = make_grid(2048, 20.0);
  const Kernel k = build_kernel(g, g.dx());
  ASSERT_LE(g.dx(), 0.1);
  std::vector<double> rho(g.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (std::abs(g.x(i)) <= 1.0) rho[i] = 1.0;
  double mass = 0.0;
  for (double r : rho) mass += r * g.dx();
  for (double& r : rho) r /= mass;
  const auto phi = self_potential(g, rho, k, 1.0);
  const std::size_t at10 = static_cast<std::size_t>(std::lround((10.0 - g.x_min()) / g.dx()));
  ASSERT_NEAR(g.x(at10), 10.0, 1e-12);
  const double quadrature = -0.5 * std::log(11.0 / 9.0);
  EXPECT_NEAR(phi[at10], quadrature, 0.01 * std::abs(quadrature));
  EXPECT_NEAR(phi[at10], -0.1, 0.01 * 0.1);
}

TEST(SelfPotential, ZeroCouplingIsZero) {
  const Grid g = make_grid(128, 10.0);
  const Kernel k = build_kernel(g, g.dx());
  std::vector<double> rho(g.size(), 0.05);
  for (double v : self_potential(g, rho, k, 0.0)) EXPECT_EQ(v, 0.0);
}

TEST(SelfPotential, MatchesDirectSumOnRandomDensities) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t n : {16u, 64u, 256u}) {
    for (KernelMode mode : {KernelMode::plummer, KernelMode::floor}) {
      const Grid g = make_grid(n, 5.0);
      const double a = 1.5 * g.dx();
      const Kernel k = build_kernel(g, a, mode);
      std::vector<double> rho(n);
      double mass = 0.0;
      for (double& r : rho) mass += (r = u(rng)) * g.dx();
      for (double& r : rho) r /= mass;
      const double kappa = 0.1 + 3.0 * u(rng);
      const auto fast = self_potential(g, rho, k, kappa);
      const auto slow = oracle::direct_potential(g, rho, kappa, a, mode);
      for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(fast[i], slow[i], 1e-12) << "n=" << n << " i=" << i;
    }
  }
}

TEST(SelfPotential, TranslationCarriesNoPeriodicImages) {
  const Grid g = make_grid(512, 25.0);
  const Kernel k = build_kernel(g, g.dx());
  const std::size_t shift = 37;
  std::vector<double> rho(g.size(), 0.0), moved(g.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.x(i) + 8.0;
    if (std::abs(x) < 3.0) rho[i] = std::exp(-x * x);
  }
  double mass = 0.0;
  for (double r : rho) mass += r * g.dx();
  for (double& r : rho) r /= mass;
  for (std::size_t i = 0; i + shift < g.size(); ++i) moved[i + shift] = rho[i];
  const auto phi = self_potential(g, rho, k, 1.0);
  const auto phi_moved = self_potential(g, moved, k, 1.0);
  for (std::size_t i = 0; i + shift < g.size(); ++i) EXPECT_NEAR(phi_moved[i + shift], phi[i], 1e-13);
}

TEST(SelfPotential, EvenDensityGivesEvenPotential) {
  const Grid g = make_grid(1024, 30.0);
  const Kernel k = build_kernel(g, g.dx());
  std::vector<double> rho(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) rho[i] = std::exp(-g.x(i) * g.x(i) / 3.0) * (1.0 + std::cos(g.x(i)));
  double mass = 0.0;
  for (double r : rho) mass += r * g.dx();
  for (double& r : rho) r /= mass;
  const auto phi = self_potential(g, rho, k, 2.0);
  // Parity maps index i to n - i; index 0 has no partner on the grid.
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(phi[i], phi[g.size() - i], 1e-13);
}

TEST(SelfPotential, RejectsOvermassAndMismatch) {
  const Grid g = make_grid(64, 4.0);
  const Kernel k = build_kernel(g, g.dx());
  std::vector<double> heavy(g.size(), 1.0);
  EXPECT_THROW(self_potential(g, heavy, k, 1.0), UsageError);
  std::vector<double> light(g.size(), 0.0);
  EXPECT_THROW(self_potential(make_grid(128, 4.0), std::vector<double>(128, 0.0), k, 1.0), UsageError);
  EXPECT_THROW(self_potential(g, light, k, -1.0), ConfigError);
}
