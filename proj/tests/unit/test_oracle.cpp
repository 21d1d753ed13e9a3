#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "cutoff/oracle.hpp"
#include "gen.hpp"

using namespace cutoff;

TEST(Generator, RowsSumToZeroAndBalance) {
  Rng r(1);
  for (int trial = 0; trial < 60; ++trial) {
    const auto g = gen::torus(r, 10);
    const auto gen = build_generator(gen::model(r), g);
    EXPECT_LT(gen.row_sum_residual(), 1e-12);
    EXPECT_LT(gen.stationarity_residual(), 1e-12);
    EXPECT_LT(gen.reversibility_residual(), 1e-12);
  }
}

TEST(Generator, HardcoreStateSpaceIsIndependentSets) {
  const auto gen = build_generator(ModelSpec::hardcore(1.0), TorusGeometry::cube(1, 5));
  EXPECT_EQ(gen.dimension(), 11u);  // Lucas number L_5
  for (auto label : gen.states().labels) EXPECT_EQ(label & ((label << 1) | (label >> 4)) & 31u, 0u);
}

TEST(Generator, CapsAreEnforced) {
  EXPECT_THROW(build_generator(ModelSpec::ising(0.2), TorusGeometry::cube(1, 16)), SizeCapError);
  const auto gen = build_generator(ModelSpec::ising(0.2), TorusGeometry::cube(1, 13));
  EXPECT_THROW(spectral_decomposition(gen), SizeCapError);
}

TEST(Spectrum, IndependentSpinsOnCycleOfThree) {
  const auto s = spectral_decomposition(build_generator(ModelSpec::ising(0.0), TorusGeometry::cube(1, 3)));
  const double expect[] = {0, 1, 1, 1, 2, 2, 2, 3};
  for (int k = 0; k < 8; ++k) EXPECT_NEAR(s.eigenvalues[k], expect[k], 1e-12);
}

TEST(Spectrum, OneDimensionalGapFormula) {
  for (std::size_t n = 4; n <= 10; ++n) {
    EXPECT_NEAR(spectral_gap_exact(build_generator(ModelSpec::ising(0.0), TorusGeometry::cube(1, n))), 1.0, 1e-9);
    const auto gap = spectral_gap_exact(build_generator(ModelSpec::ising(0.4), TorusGeometry::cube(1, n)));
    EXPECT_NEAR(gap, 1.0 - std::tanh(0.8), 1e-8);
    EXPECT_NEAR(gap, 0.335963, 5e-7);
  }
}

TEST(Spectrum, ProductChainSpectrumIsPairwiseSums) {
  const auto a = build_generator(ModelSpec::ising(0.5), TorusGeometry::cube(1, 4));
  const auto b = build_generator(ModelSpec::hardcore(0.8), TorusGeometry::cube(1, 5));
  const auto sa = spectral_decomposition(a), sb = spectral_decomposition(b);
  const auto sab = spectral_decomposition(product(a, b));
  EXPECT_NEAR(sab.gap(), std::min(sa.gap(), sb.gap()), 1e-10);
  std::vector<double> sums;
  for (int i = 0; i < sa.eigenvalues.size(); ++i) {
    for (int j = 0; j < sb.eigenvalues.size(); ++j) sums.push_back(sa.eigenvalues[i] + sb.eigenvalues[j]);
  }
  std::sort(sums.begin(), sums.end());
  for (std::size_t k = 0; k < sums.size(); ++k) EXPECT_NEAR(sab.eigenvalues[k], sums[k], 1e-9);
}

TEST(Spectrum, GroundStateIsSimpleAndConstant) {
  const auto s = spectral_decomposition(build_generator(ModelSpec::antiferro(0.6, 0.1), TorusGeometry::cube(2, 3)));
  EXPECT_NEAR(s.eigenvalues[0], 0.0, 1e-10);
  EXPECT_GT(s.eigenvalues[1], 1e-6);
  const auto phi0 = s.eigenfunction(0);
  for (int i = 1; i < phi0.size(); ++i) EXPECT_NEAR(std::abs(phi0[i]), std::abs(phi0[0]), 1e-8);
}

TEST(HeatKernel, EndpointsAndSymmetry) {
  const auto g = TorusGeometry::cube(1, 6);
  const auto gen = build_generator(ModelSpec::ising(0.4), g);
  const auto s = spectral_decomposition(gen);
  const std::size_t top = *gen.states().index_of(63), bottom = *gen.states().index_of(0);
  const auto p0 = heat_kernel_row(s, top, 0.0);
  for (std::size_t i = 0; i < p0.size(); ++i) EXPECT_NEAR(p0[i], i == top ? 1.0 : 0.0, 1e-12);
  EXPECT_LT(tv_distance(heat_kernel_row(s, top, 50.0 / s.gap()), gen.stationary()), 1e-12);
  const auto up = heat_kernel_row(s, top, 1.3), down = heat_kernel_row(s, bottom, 1.3);
  for (std::size_t i = 0; i < up.size(); ++i) {
    EXPECT_NEAR(up[i], down[*gen.states().index_of(63 ^ gen.states().labels[i])], 1e-12);
  }
}

TEST(HeatKernel, RowsAreProbabilityVectors) {
  const auto gen = build_generator(ModelSpec::hardcore(1.3), TorusGeometry::cube(2, 3));
  const auto s = spectral_decomposition(gen);
  const auto k = heat_kernel(s, 0.7);
  for (int i = 0; i < k.rows(); ++i) {
    EXPECT_NEAR(k.row(i).sum(), 1.0, 1e-10);
    EXPECT_GE(k.row(i).minCoeff(), -1e-12);
  }
}

TEST(Distances, Examples) {
  const std::vector<double> p{0.2, 0.3, 0.5};
  EXPECT_EQ(tv_distance(p, p), 0.0);
  EXPECT_EQ(tv_distance(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 1.0);
  EXPECT_EQ(tv_distance(std::vector<double>{1, 0}, std::vector<double>{0.5, 0.5}), 0.5);
  EXPECT_EQ(l2_distance(p, p), 0.0);
  EXPECT_NEAR(l2_distance(std::vector<double>{1, 0}, std::vector<double>{0.5, 0.5}), 1.0, 1e-15);
}

TEST(Distances, TvIsAtMostHalfL2) {
  Rng r(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + r.uniform_index(20);
    std::vector<double> p(n), q(n);
    for (auto& x : p) x = r.uniform01();
    for (auto& x : q) x = 0.01 + r.uniform01();
    const double sp = std::accumulate(p.begin(), p.end(), 0.0), sq = std::accumulate(q.begin(), q.end(), 0.0);
    for (auto& x : p) x /= sp;
    for (auto& x : q) x /= sq;
    EXPECT_LE(tv_distance(p, q), 0.5 * l2_distance(p, q) + 1e-12);
  }
}

TEST(Dirichlet, ConstantsAndRayleighQuotient) {
  const auto gen = build_generator(ModelSpec::ising(0.3, 0.2), TorusGeometry::cube(1, 6));
  const auto s = spectral_decomposition(gen);
  const auto c = dirichlet_form(gen, Eigen::VectorXd::Constant(gen.dimension(), 2.5));
  EXPECT_NEAR(c.energy, 0.0, 1e-14);
  EXPECT_NEAR(c.variance, 0.0, 1e-14);
  const auto d = dirichlet_form(gen, s.eigenfunction(1));
  EXPECT_NEAR(d.energy / d.variance, s.gap(), 1e-8);
  Rng r(3);
  for (int k = 0; k < 50; ++k) {
    Eigen::VectorXd f(gen.dimension());
    for (auto& x : f) x = r.uniform01();
    const auto v = dirichlet_form(gen, f);
    EXPECT_GE(v.energy / v.variance, s.gap() - 1e-9);
  }
}

TEST(LogSobolev, OrderingAndSelfConsistency) {
  const auto gen = build_generator(ModelSpec::ising(0.4), TorusGeometry::cube(1, 4));
  const auto s = spectral_decomposition(gen);
  const auto ls = log_sobolev_upper_estimate(gen, s, 6, 1);
  EXPECT_GT(ls.alpha, 0.0);
  EXPECT_LE(2 * ls.alpha, s.gap() + 1e-9);
  EXPECT_TRUE(ls.certificate);
  if (ls.minimizer.size() > 0) {
    const auto v = dirichlet_form(gen, ls.minimizer);
    EXPECT_GE(v.energy / v.entropy, ls.alpha - 1e-9);
  }
}

TEST(LogSobolev, ReproducibleAcrossSeeds) {
  const auto gen = build_generator(ModelSpec::ising(0.0), TorusGeometry::cube(1, 3));
  const auto s = spectral_decomposition(gen);
  const double a = log_sobolev_upper_estimate(gen, s, 4, 1).alpha;
  const double b = log_sobolev_upper_estimate(gen, s, 4, 2).alpha;
  EXPECT_NEAR(a, b, 1e-6);
  EXPECT_THROW(log_sobolev_upper_estimate(build_generator(ModelSpec::ising(0.1), TorusGeometry::cube(1, 11)),
                                          spectral_decomposition(build_generator(ModelSpec::ising(0.1), TorusGeometry::cube(1, 11))),
                                          2, 1),
               SizeCapError);
}

TEST(MixingL2, TimeZeroAndLimit) {
  const auto g = TorusGeometry::cube(1, 6);
  const auto gen = build_generator(ModelSpec::ising(0.3), g);
  const auto s = spectral_decomposition(gen);
  const auto all = Region::all(g);
  const auto& mu = gen.stationary();
  const double mu_min = *std::min_element(mu.begin(), mu.end());
  EXPECT_NEAR(m_t_exact(gen, s, all, 0.0), std::sqrt(1.0 / mu_min - 1.0), 1e-8);
  EXPECT_LT(m_t_exact(gen, s, all, 60.0 / s.gap()), 1e-10);
}

TEST(MixingL2, ContractionOnBox) {
  const auto g = TorusGeometry::cube(1, 8);
  const auto gen = build_generator(ModelSpec::ising(0.3), g);
  const auto s = spectral_decomposition(gen);
  std::vector<double> grid;
  for (int k = 0; k <= 16; ++k) grid.push_back(0.5 * k);
  const auto mt = m_t_exact(gen, s, Region(g, {0, 1, 2, 3}), grid);
  for (std::size_t k = 1; k < mt.size(); ++k) EXPECT_LE(mt[k], mt[k - 1] + 1e-12);
  EXPECT_NEAR(m_t_exact(ModelSpec::ising(0.3), g, Region(g, {0, 1, 2, 3}), 2.0), mt[4], 1e-12);
}

TEST(Projection, MarginalsSumToOne) {
  const auto g = TorusGeometry::cube(2, 3);
  const auto gen = build_generator(ModelSpec::ising(0.2), g);
  const auto marg = project(gen.states(), gen.stationary(), Region(g, {0, 4, 8}));
  EXPECT_EQ(marg.size(), 8u);
  EXPECT_NEAR(std::accumulate(marg.begin(), marg.end(), 0.0), 1.0, 1e-14);
}

TEST(DsBound, HoldsWithSafeAlpha) {
  const auto gen = build_generator(ModelSpec::ising(0.3), TorusGeometry::cube(1, 6));
  const auto s = spectral_decomposition(gen);
  const auto ls = log_sobolev_upper_estimate(gen, s, 4, 1);
  std::vector<double> grid;
  for (int k = 1; k <= 10; ++k) grid.push_back(k);
  const auto check = ds_bound_check(s, ls.alpha / 2, *gen.states().index_of(63), grid);
  EXPECT_TRUE(check.advisory);
  EXPECT_GE(check.worst_slack, 0.0);
  const auto prod = build_generator(ModelSpec::ising(0.0), TorusGeometry::cube(1, 5));
  const auto sp = spectral_decomposition(prod);
  EXPECT_GE(ds_bound_check(sp, 0.5 * sp.gap(), 0, grid).worst_slack, 0.0);
}

TEST(ExactTv, WorstStartDecreases) {
  const auto s = spectral_decomposition(build_generator(ModelSpec::ising(0.4), TorusGeometry::cube(1, 8)));
  std::vector<double> t;
  for (int k = 0; k <= 20; ++k) t.push_back(0.5 * k);
  const auto tv = exact_tv_curve(s, t);
  for (std::size_t k = 1; k < tv.size(); ++k) EXPECT_LE(tv[k], tv[k - 1] + 1e-12);
  const auto from_top = exact_tv_curve(s, 255, t);
  for (std::size_t k = 0; k < tv.size(); ++k) EXPECT_LE(from_top[k], tv[k] + 1e-12);
}

TEST(Csv, SpectrumRoundTripsAtFullPrecision) {
  const auto s = spectral_decomposition(build_generator(ModelSpec::ising(0.4), TorusGeometry::cube(1, 6)));
  std::ostringstream os;
  write_spectrum_csv(os, s, 3);
  std::istringstream in(os.str());
  std::string header, line;
  std::getline(in, header);
  EXPECT_EQ(header, "index,eigenvalue");
  for (int k = 0; k < 3; ++k) {
    std::getline(in, line);
    EXPECT_EQ(std::stod(line.substr(line.find(',') + 1)), s.eigenvalues[k]);
  }
}
