#include <gtest/gtest.h>

#include <sstream>

#include "cutoff/support.hpp"
#include "gen.hpp"

using namespace cutoff;

namespace {

// 1D barrier dynamics written directly from the construction: block i owns
// base sites [i b, (i+1) b) and evolves a cycle of b + 2w sites whose site j
// mirrors base site i b + j - w.
SpinConfiguration naive_barrier_1d(const ModelSpec& m, std::size_t n, std::size_t b, std::size_t w,
                                   const SpinConfiguration& x0, const UpdateSequence& seq) {
  const std::size_t blocks = n / b, len = b + 2 * w;
  const auto cyc = TorusGeometry::cube(1, len);
  auto base_of = [&](std::size_t i, std::size_t j) { return (i * b + j + n - w) % n; };
  std::vector<SpinConfiguration> tori(blocks, SpinConfiguration(len));
  for (std::size_t i = 0; i < blocks; ++i) {
    for (std::size_t j = 0; j < len; ++j) tori[i].set(j, x0.plus(base_of(i, j)));
  }
  for (const auto& e : seq.events()) {
    for (std::size_t i = 0; i < blocks; ++i) {
      for (std::size_t j = 0; j < len; ++j) {
        if (base_of(i, j) == e.site) tori[i].set(j, gen::naive_next(m, cyc, tori[i], static_cast<Site>(j), e.u));
      }
    }
  }
  SpinConfiguration out(n);
  for (std::size_t u = 0; u < n; ++u) out.set(u, tori[u / b].plus(u % b + w));
  return out;
}

// Sites whose initial value changes the output for some start.
template <class F>
std::vector<Site> brute_support(std::size_t n, F&& image) {
  std::vector<Site> out;
  for (Site v = 0; v < n; ++v) {
    for (std::uint64_t x = 0; x < (std::uint64_t{1} << n); ++x) {
      if (x >> v & 1) continue;
      if (image(SpinConfiguration::from_index(x, n)) != image(SpinConfiguration::from_index(x | (1ULL << v), n))) {
        out.push_back(v);
        break;
      }
    }
  }
  return out;
}

std::vector<Site> sites_of(const Region& r) { return {r.sites().begin(), r.sites().end()}; }

}  // namespace

TEST(Partition, Examples) {
  const auto p1 = BlockPartition::build(TorusGeometry::cube(1, 12), 4, 2);
  EXPECT_EQ(p1.block_count(), 3u);
  EXPECT_EQ(p1.plus_geometry().side(0), 8u);
  const auto p2 = BlockPartition::build(TorusGeometry::cube(2, 12), 4, 2);
  EXPECT_EQ(p2.block_count(), 9u);
  EXPECT_EQ(p2.plus_geometry(), TorusGeometry::cube(2, 8));
  EXPECT_EQ(BlockPartition::build(TorusGeometry::cube(1, 12), 12, 2).block_count(), 1u);
  EXPECT_THROW(BlockPartition::build(TorusGeometry::cube(1, 12), 5, 2), InvalidArgument);
  EXPECT_THROW(BlockPartition::build(TorusGeometry::cube(1, 12), 4, 0), InvalidArgument);
}

TEST(Partition, BlocksTileTheTorus) {
  Rng r(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t b = 2 + r.uniform_index(4), k = 1 + r.uniform_index(3), d = 1 + r.uniform_index(2);
    const auto g = TorusGeometry::cube(d, b * k < 3 ? 3 * b : b * k);
    const auto p = BlockPartition::build(g, b, 1 + r.uniform_index(3));
    std::vector<int> cover(g.site_count(), 0);
    for (std::size_t i = 0; i < p.block_count(); ++i) {
      for (Site s : p.block(i).sites.sites()) {
        ++cover[s];
        EXPECT_EQ(p.block_of(s), i);
        EXPECT_EQ(p.block(i).plus_to_base[p.own_image(s)], s);
      }
      const auto& inf = p.influencers(i);
      EXPECT_TRUE(std::find(inf.begin(), inf.end(), i) != inf.end());
    }
    for (int c : cover) EXPECT_EQ(c, 1);
  }
}

TEST(Barrier, EmptySequenceIsIdentity) {
  Rng r(2);
  const auto g = TorusGeometry::cube(1, 12);
  const auto p = BlockPartition::build(g, 4, 2);
  const auto x = gen::config(r, 12);
  EXPECT_EQ(run_barrier_dynamics(ModelSpec::ising(0.4), p, x, UpdateSequence({12}, 1.0, 0, {})), x);
}

TEST(Barrier, PinnedSeedMatchesNaiveImplementation) {
  const auto g = TorusGeometry::cube(1, 12);
  const auto p = BlockPartition::build(g, 4, 2);
  const auto m = ModelSpec::ising(0.4);
  const auto w = sample_update_sequence(g, 3.0, 20240601);
  const auto x = SpinConfiguration::all_plus(12);
  EXPECT_EQ(run_barrier_dynamics(m, p, x, w), naive_barrier_1d(m, 12, 4, 2, x, w));
}

TEST(Barrier, MatchesNaiveOnRandomInstances) {
  Rng r(3);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t b = 1 + r.uniform_index(5);
    const std::size_t n = b * std::max<std::size_t>(1 + r.uniform_index(4), (3 + b - 1) / b);
    const std::size_t w = 1 + r.uniform_index(4);
    const auto g = TorusGeometry::cube(1, n);
    const auto p = BlockPartition::build(g, b, w);
    auto m = gen::model(r);
    const auto seq = gen::events(r, g, 4 * n, 2.0);
    const auto x = gen::config(r, n);
    ASSERT_EQ(run_barrier_dynamics(m, p, x, seq), naive_barrier_1d(m, n, b, w, x, seq))
        << m.describe() << " n=" << n << " b=" << b << " w=" << w;
  }
}

TEST(Discrepancy, ZeroAtTimeZeroAndAtInfiniteTemperature) {
  const auto p = BlockPartition::build(TorusGeometry::cube(1, 48), 8, 1);
  EXPECT_EQ(coupling_discrepancy(ModelSpec::ising(0.4), p, 0.0, 200, 1).discrepant, 0u);
  EXPECT_EQ(coupling_discrepancy(ModelSpec::ising(0.0), p, 3.0, 200, 1).discrepant, 0u);
}

TEST(Discrepancy, NonincreasingInHalo) {
  const auto g = TorusGeometry::cube(1, 48);
  std::size_t prev = 1001;
  for (std::size_t w : {1, 2, 4, 8}) {
    const auto d = coupling_discrepancy(ModelSpec::ising(0.4), BlockPartition::build(g, 8, w), 2.0, 1000, 77);
    EXPECT_LE(d.discrepant, prev);
    EXPECT_LE(d.ci_low, d.fraction);
    EXPECT_GE(d.ci_high, d.fraction);
    prev = d.discrepant;
  }
}

TEST(ExactSupport, Examples) {
  const auto g = TorusGeometry::cube(1, 6);
  const auto m = ModelSpec::ising(0.4);
  EXPECT_EQ(exact_support(m, g, UpdateSequence({6}, 1.0, 0, {})).region.size(), 6u);
  std::vector<UpdateEvent> all;
  for (Site s = 0; s < 6; ++s) all.push_back({0.1 * (s + 1), s, 0.3});
  EXPECT_TRUE(exact_support(ModelSpec::ising(0.0), g, UpdateSequence({6}, 1.0, 0, all)).region.empty());
  const UpdateSequence early({6}, 1.0, 0, {{0.1, 0, 0.2}, {0.2, 1, 0.7}, {0.3, 2, 0.4}});
  const auto d = exact_support(m, g, early).region;
  for (Site s : {3, 4, 5}) EXPECT_TRUE(d.contains(s));
}

TEST(ExactSupport, MatchesBruteForceTabulation) {
  Rng r(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = gen::torus(r, 10);
    const auto m = gen::model(r);
    const auto w = gen::events(r, g, 1 + r.uniform_index(3 * g.site_count()), 1.0);
    const auto expect = brute_support(g.site_count(), [&](const SpinConfiguration& x) { return gen::naive_apply(m, g, x, w); });
    EXPECT_EQ(sites_of(exact_support(m, g, w).region), expect) << m.describe() << " " << g.describe();
  }
}

TEST(ExactSupport, BarrierMatchesBruteForceTabulation) {
  Rng r(5);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t b = 2 + r.uniform_index(3);
    const std::size_t n = b * (b == 2 ? 2 + r.uniform_index(3) : 2 + r.uniform_index(2));
    const std::size_t w = 1 + r.uniform_index(2);
    const auto g = TorusGeometry::cube(1, n);
    const auto p = BlockPartition::build(g, b, w);
    const auto m = gen::model(r);
    const auto seq = gen::events(r, g, 1 + r.uniform_index(3 * n), 1.0);
    const auto expect = brute_support(n, [&](const SpinConfiguration& x) { return naive_barrier_1d(m, n, b, w, x, seq); });
    EXPECT_EQ(sites_of(exact_support(m, p, seq).region), expect);
  }
}

TEST(ExactSupport, RespectsCap) {
  const auto g = TorusGeometry::cube(1, 24);
  EXPECT_THROW(exact_support(ModelSpec::ising(0.3), g, sample_update_sequence(g, 0.1, 1)), SizeCapError);
}

TEST(BlockSuperset, Examples) {
  const auto g = TorusGeometry::cube(1, 12);
  const auto p = BlockPartition::build(g, 4, 2);
  EXPECT_EQ(support_superset_blocks(ModelSpec::ising(0.4), p, UpdateSequence({12}, 1.0, 0, {})).region.size(), 12u);
  std::vector<UpdateEvent> all;
  for (Site s = 0; s < 12; ++s) all.push_back({0.05 * (s + 1), s, 0.5});
  EXPECT_TRUE(support_superset_blocks(ModelSpec::ising(0.0), p, UpdateSequence({12}, 1.0, 0, all)).region.empty());
}

TEST(BlockSuperset, ContainsExactSupport) {
  Rng r(6);
  const auto g = TorusGeometry::cube(1, 12);
  const auto p = BlockPartition::build(g, 4, 2);
  for (int trial = 0; trial < 300; ++trial) {
    const auto m = ModelSpec::ising(r.uniform01(), r.uniform01() - 0.5);
    const auto w = sample_update_sequence(g, 3.0 * r.uniform01(), derive_seed(6, trial));
    EXPECT_TRUE(exact_support(m, p, w).region.subset_of(support_superset_blocks(m, p, w).region));
  }
}

TEST(PathSuperset, GoldenClosure) {
  const auto g = TorusGeometry::cube(1, 6);
  const UpdateSequence w({6}, 1.0, 0, {{0.1, 0, 0.5}, {0.2, 1, 0.5}, {0.3, 3, 0.5}});
  EXPECT_EQ(sites_of(support_superset_paths(g, w, RateRule::heat_bath).region), (std::vector<Site>{1, 2, 4, 5}));
  EXPECT_EQ(support_superset_paths(g, w, RateRule::metropolis).region.size(), 6u);
  EXPECT_EQ(support_superset_paths(g, UpdateSequence({6}, 1.0, 0, {}), RateRule::heat_bath).region.size(), 6u);
}

TEST(PathSuperset, ContainsExactSupport) {
  Rng r(7);
  for (int trial = 0; trial < 300; ++trial) {
    const auto g = gen::torus(r, 12);
    const auto m = gen::model(r);
    const auto w = gen::events(r, g, r.uniform_index(4 * g.site_count()), 1.0);
    EXPECT_TRUE(exact_support(m, g, w).region.subset_of(support_superset_paths(g, w, m.rule).region));
  }
}

TEST(Sparsity, Examples) {
  const auto g = TorusGeometry::cube(1, 40);
  const SparsityThresholds t{3, 5, 5};
  auto classify = [&](std::vector<Site> s) { return classify_sparse(g, SupportSet{Region(g, s)}, t); };
  const auto empty = classify({});
  EXPECT_TRUE(empty.sparse);
  EXPECT_TRUE(empty.components.empty());
  EXPECT_TRUE(classify({7}).sparse);
  const auto apart = classify({0, 1, 6, 7});
  EXPECT_TRUE(apart.sparse);
  EXPECT_EQ(apart.components.size(), 2u);
  EXPECT_EQ(*apart.min_separation, 5u);
  const auto merged = classify({0, 1, 5, 6});
  EXPECT_FALSE(merged.sparse);
  EXPECT_EQ(merged.violated, SparsityReport::Clause::diameter);
  EXPECT_EQ(classify({0, 10, 20, 30}).violated, SparsityReport::Clause::none);
  EXPECT_EQ(classify_sparse(g, SupportSet{Region(g, {0, 10, 20, 30})}, SparsityThresholds{3, 5, 3}).violated,
            SparsityReport::Clause::component_count);
}

TEST(Sparsity, Defaults) {
  const auto t = SparsityThresholds::defaults(128, 2);
  EXPECT_EQ(t.max_diameter, 115u);
  EXPECT_EQ(t.min_separation, 95u);
  EXPECT_EQ(t.max_components, 1u);
  EXPECT_EQ(default_block_side(128), 16u);
  EXPECT_EQ(default_halo(128), 11u);
  EXPECT_EQ(128 % default_block_side(128), 0u);
}

TEST(SupportMap, InfiniteTemperatureEmptiesAndRasterShape) {
  const auto g = TorusGeometry::build(2, {12, 8});
  const auto p = BlockPartition::build(g, 4, 1);
  const auto map = support_map(ModelSpec::ising(0.0), p, 3, {0.0, 1.0, 30.0}, SparsityThresholds{5, 3, 4});
  EXPECT_EQ(map.support_fraction.front(), 1.0);
  EXPECT_EQ(map.support_fraction.back(), 0.0);
  std::ostringstream os;
  write_support_pgm(os, map);
  std::istringstream in(os.str());
  std::string magic, comment;
  std::getline(in, magic);
  std::getline(in, comment);
  std::size_t width = 0, height = 0;
  in >> width >> height;
  EXPECT_EQ(magic, "P2");
  EXPECT_EQ(width * height, g.site_count());
}

TEST(SupportMap, SerialAndParallelAgree) {
  const auto g = TorusGeometry::cube(2, 24);
  const auto p = BlockPartition::build(g, 6, 2);
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6};
  const std::vector<double> times{0.5, 2.0, 6.0};
  const SparsityThresholds t{20, 6, 4};
  const auto a = support_maps(ModelSpec::ising(0.3), p, seeds, times, t, Execution::serial);
  const auto b = support_maps(ModelSpec::ising(0.3), p, seeds, times, t, Execution::parallel);
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    EXPECT_EQ(a[i].last_support_time, b[i].last_support_time);
    EXPECT_EQ(a[i].supports, b[i].supports);
  }
}

TEST(Discrepancy, SerialAndParallelAgree) {
  const auto p = BlockPartition::build(TorusGeometry::cube(1, 48), 8, 2);
  const auto a = coupling_discrepancy(ModelSpec::ising(0.4), p, 2.0, 300, 5, Execution::serial);
  const auto b = coupling_discrepancy(ModelSpec::ising(0.4), p, 2.0, 300, 5, Execution::parallel);
  EXPECT_EQ(a.discrepant, b.discrepant);
}
