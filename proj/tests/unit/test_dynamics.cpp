#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "cutoff/dynamics.hpp"
#include "cutoff/model.hpp"
#include "gen.hpp"

using namespace cutoff;

TEST(UpdateSequence, EmptyHorizon) {
  EXPECT_EQ(sample_update_sequence(TorusGeometry::cube(1, 8), 0.0, 3).size(), 0u);
}

TEST(UpdateSequence, DeterministicGivenSeed) {
  const auto g = TorusGeometry::cube(2, 5);
  EXPECT_EQ(sample_update_sequence(g, 3.0, 42), sample_update_sequence(g, 3.0, 42));
  EXPECT_NE(sample_update_sequence(g, 3.0, 42).events(), sample_update_sequence(g, 3.0, 43).events());
}

TEST(UpdateSequence, ShorterHorizonIsPrefix) {
  const auto g = TorusGeometry::cube(1, 10);
  const auto long_w = sample_update_sequence(g, 5.0, 7);
  const auto short_w = sample_update_sequence(g, 2.0, 7);
  EXPECT_EQ(long_w.prefix(2.0).events(), short_w.events());
}

TEST(UpdateSequence, PoissonEventCount) {
  const auto g = TorusGeometry::cube(2, 10);
  const int seeds = 10000;
  double sum = 0.0, sum2 = 0.0;
  for (int s = 0; s < seeds; ++s) {
    const double k = static_cast<double>(sample_update_sequence(g, 5.0, derive_seed(99, s)).size());
    sum += k;
    sum2 += k * k;
  }
  const double mean = sum / seeds;
  const double se = std::sqrt((sum2 / seeds - mean * mean) / seeds);
  EXPECT_NEAR(mean, 500.0, 3 * se);
}

TEST(UpdateSequence, BinaryRoundTrip) {
  const auto w = sample_update_sequence(TorusGeometry::build(2, {3, 4}), 2.5, 17);
  std::stringstream buf;
  write_update_sequence(buf, w);
  EXPECT_EQ(buf.str().substr(0, 8), std::string(kUpdateSequenceMagic, 8));
  EXPECT_EQ(read_update_sequence(buf), w);
  std::stringstream bad("NOTMAGIC");
  EXPECT_THROW(read_update_sequence(bad), Error);
}

TEST(UpdateSequence, RejectsMalformedEvents) {
  EXPECT_THROW(UpdateSequence({4}, 1.0, 0, {{0.5, 0, 0.1}, {0.4, 1, 0.1}}), InvalidArgument);
  EXPECT_THROW(UpdateSequence({4}, 1.0, 0, {{0.5, 9, 0.1}}), InvalidArgument);
  EXPECT_THROW(UpdateSequence({4}, 1.0, 0, {{1.5, 0, 0.1}}), InvalidArgument);
}

TEST(ApplyUpdates, EmptySequenceIsIdentity) {
  Rng r(1);
  const auto g = TorusGeometry::cube(1, 7);
  const auto x = gen::config(r, 7);
  EXPECT_EQ(apply_updates(ModelSpec::ising(0.4), g, x, UpdateSequence({7}, 1.0, 0, {})), x);
}

TEST(ApplyUpdates, InfiniteTemperatureForgetsStart) {
  Rng r(2);
  const auto g = TorusGeometry::cube(1, 6);
  std::vector<UpdateEvent> ev;
  for (Site s = 0; s < 6; ++s) ev.push_back({0.1 * (s + 1), s, r.uniform01()});
  const UpdateSequence w({6}, 1.0, 0, ev);
  const auto m = ModelSpec::ising(0.0);
  const auto ref = apply_updates(m, g, SpinConfiguration::all_plus(6), w);
  for (int k = 0; k < 20; ++k) EXPECT_EQ(apply_updates(m, g, gen::config(r, 6), w), ref);
}

TEST(ApplyUpdates, HandSteppedCycleOfFour) {
  // p+(k plus neighbors) = logistic(2 * 0.4 * (2k - 2)); k=0 gives 0.168, k=1 gives 0.5.
  const UpdateSequence w({4}, 1.0, 0, {{0.1, 0, 0.5}, {0.2, 1, 0.1}, {0.3, 2, 0.4}});
  const auto out = apply_updates(ModelSpec::ising(0.4), TorusGeometry::cube(1, 4), SpinConfiguration::all_minus(4), w);
  const int expect[] = {-1, 1, 1, -1};
  EXPECT_EQ(out, SpinConfiguration::from_spins(expect));
}

TEST(ApplyUpdates, MatchesNaiveStepOnRandomInstances) {
  Rng r(3);
  for (int trial = 0; trial < 500; ++trial) {
    const auto g = gen::torus(r, 30);
    const auto m = gen::model(r);
    const auto w = gen::events(r, g, 5 * g.site_count(), 3.0);
    const auto x = gen::config(r, g.site_count());
    ASSERT_EQ(apply_updates(m, g, x, w), gen::naive_apply(m, g, x, w)) << m.describe() << " " << g.describe();
  }
}

TEST(GrandCoupling, SingleStartMatchesApplyUpdates) {
  Rng r(4);
  const auto g = TorusGeometry::cube(2, 4);
  const auto m = ModelSpec::ising(0.5);
  const auto w = sample_update_sequence(g, 2.0, 5);
  const auto x = gen::config(r, 16);
  const auto snaps = run_grand_coupling(m, g, {x}, w, {2.0});
  EXPECT_EQ(snaps[0][0], apply_updates(m, g, x, w));
}

TEST(GrandCoupling, FerroOrderPreservedAndAgreementAbsorbing) {
  Rng r(5);
  std::vector<double> record;
  for (int k = 0; k <= 20; ++k) record.push_back(0.25 * k);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto g = gen::torus(r, 30);
    const auto m = ModelSpec::ising(r.uniform01(), r.uniform01() - 0.5);
    const auto w = sample_update_sequence(g, 5.0, derive_seed(5, trial));
    const auto n = g.site_count();
    const auto snaps = run_grand_coupling(m, g, {SpinConfiguration::all_minus(n), SpinConfiguration::all_plus(n)}, w, record);
    bool met = false;
    for (std::size_t k = 0; k < record.size(); ++k) {
      ASSERT_TRUE(partial_order_leq(snaps[0][k], snaps[1][k]));
      if (met) ASSERT_EQ(snaps[0][k], snaps[1][k]);
      met = met || snaps[0][k] == snaps[1][k];
    }
  }
}

TEST(Coalescence, CapZeroWithDistinctExtremes) {
  EXPECT_FALSE(coalescence_time(ModelSpec::ising(0.3), TorusGeometry::cube(1, 8), 1, 0.0).has_value());
}

TEST(Coalescence, AgreesWithReplayedExtremes) {
  const auto g = TorusGeometry::cube(1, 10);
  const auto m = ModelSpec::ising(0.4);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto t = coalescence_time(m, g, s, 50.0);
    ASSERT_TRUE(t.has_value());
    const auto w = sample_update_sequence(g, *t, s);
    EXPECT_EQ(apply_updates(m, g, SpinConfiguration::all_plus(10), w),
              apply_updates(m, g, SpinConfiguration::all_minus(10), w));
    const auto before = w.prefix(std::nextafter(*t, 0.0));
    EXPECT_NE(apply_updates(m, g, SpinConfiguration::all_plus(10), before),
              apply_updates(m, g, SpinConfiguration::all_minus(10), before));
  }
}

TEST(Coalescence, InfiniteTemperatureIsCouponCollector) {
  // Coalescence happens exactly when every site has been updated once:
  // the maximum of 16 unit exponentials has mean H_16.
  const auto g = TorusGeometry::cube(2, 4);
  double sum = 0.0;
  const int seeds = 4000;
  for (int s = 0; s < seeds; ++s) sum += *coalescence_time(ModelSpec::ising(0.0), g, derive_seed(1, s), 100.0);
  double harmonic = 0.0;
  for (int k = 1; k <= 16; ++k) harmonic += 1.0 / k;
  EXPECT_NEAR(sum / seeds, harmonic, 0.1 * harmonic);
}

TEST(Coalescence, SlowerAtStrongerCoupling) {
  const auto g = TorusGeometry::cube(1, 32);
  auto median = [&](double beta) {
    std::vector<double> t;
    for (int s = 0; s < 200; ++s) t.push_back(*coalescence_time(ModelSpec::ising(beta), g, derive_seed(2, s), 1e4));
    std::nth_element(t.begin(), t.begin() + 100, t.end());
    return t[100];
  };
  EXPECT_LE(median(0.2), median(0.8));
}

TEST(Cftp, UniformAtInfiniteTemperature) {
  const auto g = TorusGeometry::cube(2, 4);
  const auto m = ModelSpec::ising(0.0);
  // 16 sites would give 65536 cells; test the four-site marginal on sites 0..3.
  std::vector<double> counts(16, 0.0);
  const int samples = 100000;
  for (int s = 0; s < samples; ++s) {
    const auto x = cftp_sample(m, g, derive_seed(3, s)).sample;
    counts[x.to_index() & 15] += 1;
  }
  double chi2 = 0.0;
  const double e = samples / 16.0;
  for (double c : counts) chi2 += (c - e) * (c - e) / e;
  EXPECT_LT(chi2, 37.7);  // 0.999 quantile of chi-square with 15 degrees of freedom
}

TEST(Cftp, EdgeAgreementMatchesExactLaw) {
  const auto g = TorusGeometry::cube(1, 6);
  const auto m = ModelSpec::ising(0.4);
  const auto t = gibbs_table(m, g);
  auto agreement = [&](const SpinConfiguration& s) {
    int a = 0;
    for (Site x = 0; x < 6; ++x) a += s.spin(x) * s.spin((x + 1) % 6);
    return a;
  };
  double exact = 0.0;
  for (const auto& s : enumerate_configurations(g)) exact += t.probability(s) * agreement(s);
  const int samples = 20000;
  double sum = 0.0, sum2 = 0.0;
  for (int k = 0; k < samples; ++k) {
    const double a = agreement(cftp_sample(m, g, derive_seed(4, k)).sample);
    sum += a;
    sum2 += a * a;
  }
  const double mean = sum / samples;
  const double se = std::sqrt((sum2 / samples - mean * mean) / samples);
  EXPECT_NEAR(mean, exact, 3 * se);
}

TEST(Cftp, DisjointSeedsAreIndependent) {
  const auto g = TorusGeometry::cube(1, 8);
  const auto m = ModelSpec::ising(0.3);
  const int n = 10000;
  std::vector<double> mag(n);
  for (int k = 0; k < n; ++k) mag[k] = static_cast<double>(cftp_sample(m, g, derive_seed(5, k)).sample.magnetization());
  double mean = 0.0;
  for (double v : mag) mean += v / n;
  double num = 0.0, den = 0.0;
  for (int k = 0; k < n; ++k) {
    den += (mag[k] - mean) * (mag[k] - mean);
    if (k + 1 < n) num += (mag[k] - mean) * (mag[k + 1] - mean);
  }
  EXPECT_LT(std::abs(num / den), 3.0 / std::sqrt(n));
}

TEST(Cftp, DeterministicGivenSeed) {
  const auto g = TorusGeometry::cube(2, 6);
  EXPECT_EQ(cftp_sample(ModelSpec::antiferro(0.3), g, 9).sample, cftp_sample(ModelSpec::antiferro(0.3), g, 9).sample);
}
