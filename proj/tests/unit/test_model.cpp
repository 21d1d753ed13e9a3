#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "cutoff/model.hpp"
#include "gen.hpp"

using namespace cutoff;

namespace {

// Log-weight from the Hamiltonian, summing each edge once via the +1 neighbor on every axis.
std::optional<double> naive_log_weight(const ModelSpec& m, const TorusGeometry& g, const SpinConfiguration& s) {
  double agree = 0.0, field = 0.0;
  std::size_t occupied = 0;
  for (Site x = 0; x < g.site_count(); ++x) {
    field += s.spin(x);
    occupied += s.plus(x);
    for (std::size_t axis = 0; axis < g.dimension(); ++axis) {
      const Site y = g.neighbor(x, 2 * axis + 1);
      if (m.family == Family::hardcore && s.plus(x) && s.plus(y)) return std::nullopt;
      agree += s.spin(x) * s.spin(y);
    }
  }
  if (m.family == Family::hardcore) return static_cast<double>(occupied) * std::log(m.beta);
  const double j = m.family == Family::ising_antiferro ? -m.beta : m.beta;
  return j * agree + m.h * field;
}

}  // namespace

TEST(GibbsWeight, Examples) {
  const auto c3 = TorusGeometry::cube(1, 3);
  Rng r(1);
  for (int k = 0; k < 10; ++k) {
    EXPECT_EQ(*gibbs_log_weight(ModelSpec::ising(0.0), c3, gen::config(r, 3)), 0.0);
  }
  EXPECT_DOUBLE_EQ(*gibbs_log_weight(ModelSpec::ising(1.0), c3, SpinConfiguration::all_plus(3)), 3.0);
  const auto c4 = TorusGeometry::cube(1, 4);
  const int alt[] = {1, -1, 1, -1};
  EXPECT_NEAR(*gibbs_log_weight(ModelSpec::hardcore(2.0), c4, SpinConfiguration::from_spins(alt)), 2 * std::log(2.0),
              1e-15);
  const int adj[] = {1, 1, -1, -1};
  EXPECT_FALSE(gibbs_log_weight(ModelSpec::hardcore(2.0), c4, SpinConfiguration::from_spins(adj)).has_value());
}

TEST(GibbsWeight, MatchesHamiltonianOnRandomInstances) {
  Rng r(2);
  for (int trial = 0; trial < 500; ++trial) {
    const auto g = gen::torus(r, 30);
    const auto m = gen::model(r);
    const auto s = gen::config(r, g.site_count());
    const auto a = gibbs_log_weight(m, g, s);
    const auto b = naive_log_weight(m, g, s);
    ASSERT_EQ(a.has_value(), b.has_value());
    if (a) EXPECT_NEAR(*a, *b, 1e-12 * (1 + std::abs(*b)));
  }
}

TEST(GibbsTable, UniformAtInfiniteTemperature) {
  const auto t = gibbs_table(ModelSpec::ising(0.0), TorusGeometry::cube(1, 4));
  for (double p : t.probabilities()) EXPECT_NEAR(p, 1.0 / 16, 1e-15);
}

TEST(GibbsTable, CycleOfThreeByHand) {
  const double b = 0.4;
  const auto t = gibbs_table(ModelSpec::ising(b), TorusGeometry::cube(1, 3));
  // All equal: 3 agreeing edges; otherwise one agreeing and two disagreeing.
  const double z = 2 * std::exp(3 * b) + 6 * std::exp(-b);
  for (std::uint64_t i = 0; i < 8; ++i) {
    const double w = (i == 0 || i == 7) ? std::exp(3 * b) : std::exp(-b);
    EXPECT_NEAR(t[i], w / z, 1e-15);
  }
  EXPECT_NEAR(t.log_partition(), std::log(z), 1e-14);
}

TEST(GibbsTable, HardcoreCycleOfThree) {
  const auto t = gibbs_table(ModelSpec::hardcore(1.0), TorusGeometry::cube(1, 3));
  for (std::uint64_t i = 0; i < 8; ++i) {
    const bool independent = std::popcount(i) <= 1;
    EXPECT_NEAR(t[i], independent ? 0.25 : 0.0, 1e-15);
  }
}

TEST(GibbsTable, NormalizedOnRandomInstances) {
  Rng r(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = gen::torus(r, 12);
    const auto t = gibbs_table(gen::model(r), g);
    const auto& p = t.probabilities();
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
    for (double x : p) EXPECT_GE(x, 0.0);
  }
}

TEST(FlipRate, Examples) {
  const auto g = TorusGeometry::cube(1, 5);
  Rng r(6);
  for (int k = 0; k < 20; ++k) {
    const auto s = gen::config(r, 5);
    const Site x = r.uniform_index(5);
    EXPECT_EQ(flip_rate(ModelSpec::ising(0.0), g, s, x), 0.5);
    EXPECT_EQ(flip_rate(ModelSpec::ising(0.0, 0.0, RateRule::metropolis), g, s, x), 1.0);
  }
  const int spins[] = {1, -1, 1, -1, -1};
  const double c = flip_rate(ModelSpec::ising(0.4), g, SpinConfiguration::from_spins(spins), 1);
  EXPECT_NEAR(c, 1.0 / (1.0 + std::exp(-1.6)), 1e-15);
  EXPECT_NEAR(c, 0.8320, 5e-5);
}

TEST(FlipRate, HeatBathEqualsGibbsConditional) {
  Rng r(7);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = gen::torus(r, 10);
    auto m = gen::model(r);
    m.rule = RateRule::heat_bath;
    const auto t = gibbs_table(m, g);
    const auto s = gen::config(r, g.site_count());
    const Site x = r.uniform_index(g.site_count());
    auto plus = s, minus = s;
    plus.set(x, true);
    minus.set(x, false);
    const double denom = t.probability(plus) + t.probability(minus);
    if (denom == 0.0) continue;
    const double conditional = t.probability(s.plus(x) ? minus : plus) / denom;
    EXPECT_NEAR(flip_rate(m, g, s, x), conditional, 1e-12);
  }
}

TEST(DetailedBalance, ResidualsSmall) {
  const auto g = TorusGeometry::cube(1, 5);
  EXPECT_EQ(check_detailed_balance(ModelSpec::ising(0.0), g, 100, 1), 0.0);
  EXPECT_LT(check_detailed_balance(ModelSpec::ising(0.4), g, 100, 1), 1e-12);
  EXPECT_LT(check_detailed_balance(ModelSpec::ising(0.4, 0.0, RateRule::metropolis), g, 100, 1), 1e-12);
}

TEST(DetailedBalance, RandomInstances) {
  Rng r(8);
  for (int trial = 0; trial < 60; ++trial) {
    const auto g = gen::torus(r, 10);
    EXPECT_LT(check_detailed_balance(gen::model(r), g, 200, trial), 1e-12);
  }
}

TEST(Parity, Examples) {
  const auto m4 = parity_mask(TorusGeometry::cube(1, 4));
  EXPECT_FALSE(m4.odd(0));
  EXPECT_TRUE(m4.odd(1));
  EXPECT_FALSE(m4.odd(2));
  EXPECT_TRUE(m4.odd(3));
  const auto g = TorusGeometry::cube(2, 4);
  const auto m = parity_mask(g);
  for (Site s = 0; s < 16; ++s) {
    const auto c = g.coords(s);
    EXPECT_EQ(m.odd(s), (c[0] + c[1]) % 2 == 1);
  }
  EXPECT_THROW(parity_mask(TorusGeometry::cube(1, 5)), InvalidArgument);
}

TEST(PartialOrder, Examples) {
  Rng r(10);
  const auto g = TorusGeometry::cube(1, 4);
  const auto mask = parity_mask(g);
  for (int k = 0; k < 20; ++k) {
    const auto s = gen::config(r, 4);
    EXPECT_TRUE(partial_order_leq(SpinConfiguration::all_minus(4), s));
    EXPECT_TRUE(partial_order_leq(s, SpinConfiguration::all_plus(4)));
    EXPECT_TRUE(partial_order_leq(s, s));
    EXPECT_TRUE(partial_order_leq(s, s, &mask));
  }
  const int a[] = {1, -1, 1, -1};
  EXPECT_FALSE(partial_order_leq(SpinConfiguration::from_spins(a), SpinConfiguration::all_plus(4), &mask));
}

TEST(PartialOrder, FrameExtremesBoundEverything) {
  Rng r(12);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t side = 4 + 2 * r.uniform_index(3);
    const auto g = TorusGeometry::cube(1 + r.uniform_index(2), side);
    const ModelSpec m = r.bernoulli(0.5) ? ModelSpec::antiferro(0.3) : ModelSpec::hardcore(1.0);
    ASSERT_TRUE(is_monotone_instance(m, g));
    const auto f = monotone_frame(m, g);
    const auto s = gen::config(r, g.site_count());
    EXPECT_TRUE(f.leq(f.bottom, s));
    EXPECT_TRUE(f.leq(s, f.top));
  }
}

TEST(ModelSpec, RejectsInvalidParameters) {
  EXPECT_THROW(ModelSpec::ising(-0.1), Error);
  EXPECT_THROW(ModelSpec::hardcore(-1.0), Error);
  EXPECT_THROW(parse_family("potts"), Error);
  EXPECT_EQ(parse_rate_rule(to_string(RateRule::metropolis)), RateRule::metropolis);
}
