#include "cutoff/support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace cutoff {

BlockPartition BlockPartition::build(const TorusGeometry& g, std::size_t block_side, std::size_t halo) {
  if (block_side == 0) throw InvalidArgument("block side must be positive");
  if (halo == 0) throw InvalidArgument("halo width must be positive");
  for (auto n : g.sides()) {
    if (n % block_side != 0) {
      throw InvalidArgument("block side " + std::to_string(block_side) + " does not divide side " +
                            std::to_string(n));
    }
  }
  const std::size_t d = g.dimension();
  BlockPartition p(g, TorusGeometry::cube(d, block_side + 2 * halo));
  p.block_side_ = block_side;
  p.halo_ = halo;

  std::vector<std::size_t> per_axis(d);
  std::size_t count = 1;
  for (std::size_t a = 0; a < d; ++a) {
    per_axis[a] = g.side(a) / block_side;
    count *= per_axis[a];
  }
  const std::size_t n = g.site_count();
  const std::size_t plus_sites = p.plus_.site_count();
  p.block_of_.assign(n, 0);
  p.own_image_.assign(n, 0);
  p.blocks_.resize(count);

  std::vector<long> base_coords(d);
  std::vector<std::size_t> local(d);
  for (std::size_t i = 0; i < count; ++i) {
    Block& blk = p.blocks_[i];
    blk.block_coords.resize(d);
    std::size_t rest = i;
    for (std::size_t a = d; a-- > 0;) {
      blk.block_coords[a] = rest % per_axis[a];
      rest /= per_axis[a];
    }
    blk.plus_to_base.resize(plus_sites);
    std::vector<Site> members;
    members.reserve(plus_sites);
    for (Site v = 0; v < plus_sites; ++v) {
      local = p.plus_.coords(v);
      bool inside = true;
      for (std::size_t a = 0; a < d; ++a) {
        base_coords[a] = static_cast<long>(blk.block_coords[a] * block_side + local[a]) - static_cast<long>(halo);
        inside = inside && local[a] >= halo && local[a] < halo + block_side;
      }
      const Site u = g.site_at_wrapped(base_coords);
      blk.plus_to_base[v] = u;
      if (inside) {
        members.push_back(u);
        p.block_of_[u] = static_cast<std::uint32_t>(i);
        p.own_image_[u] = v;
      }
    }
    blk.sites = Region(g, std::move(members));
  }

  // CSR table of images per base site.
  std::vector<std::size_t> counts(n + 1, 0);
  for (const auto& blk : p.blocks_) {
    for (Site u : blk.plus_to_base) ++counts[u + 1];
  }
  for (std::size_t s = 0; s < n; ++s) counts[s + 1] += counts[s];
  p.image_offsets_ = counts;
  p.images_.resize(counts[n]);
  std::vector<std::size_t> cursor(counts.begin(), counts.end() - 1);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& blk = p.blocks_[i];
    for (Site v = 0; v < plus_sites; ++v) {
      p.images_[cursor[blk.plus_to_base[v]]++] = Image{static_cast<std::uint32_t>(i), v};
    }
  }

  p.influencers_.assign(count, {});
  for (std::size_t j = 0; j < count; ++j) {
    for (Site u : p.blocks_[j].plus_to_base) p.influencers_[p.block_of_[u]].push_back(j);
  }
  for (auto& list : p.influencers_) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return p;
}

BarrierState::BarrierState(const BlockPartition& p, const LocalUpdate& rule, const SpinConfiguration& x0)
    : p_(p), rule_(rule) {
  if (x0.size() != p.base().site_count()) throw InvalidArgument("barrier: configuration size mismatch");
  const std::size_t plus_sites = p.plus_geometry().site_count();
  tori_.reserve(p.block_count());
  for (std::size_t i = 0; i < p.block_count(); ++i) {
    SpinConfiguration c(plus_sites);
    const auto& map = p.block(i).plus_to_base;
    for (Site v = 0; v < plus_sites; ++v) c.set(v, x0.plus(map[v]));
    tori_.push_back(std::move(c));
  }
}

SpinConfiguration BarrierState::pull_back() const {
  const std::size_t n = p_.base().site_count();
  SpinConfiguration out(n);
  for (Site u = 0; u < n; ++u) out.set(u, output(u));
  return out;
}

SpinConfiguration run_barrier_dynamics(const ModelSpec& m, const BlockPartition& p,
                                       const SpinConfiguration& x0, const UpdateSequence& w) {
  if (!w.compatible_with(p.base())) throw InvalidArgument("update sequence belongs to another geometry");
  const LocalUpdate rule(m, p.plus_geometry().degree());
  BarrierState state(p, rule, x0);
  for (const auto& e : w.events()) state.apply(e.site, e.u);
  return state.pull_back();
}

namespace {

SpinConfiguration random_configuration(std::size_t n, Rng& rng) {
  SpinConfiguration c(n);
  for (std::size_t i = 0; i < n; ++i) c.set(i, (rng.next_u64() >> 63) != 0);
  return c;
}

void wilson_interval(DiscrepancyEstimate& est) {
  const double z = 1.959963984540054;
  const double n = static_cast<double>(est.replicas);
  if (n == 0) return;
  const double p = est.fraction;
  const double denom = 1.0 + z * z / n;
  const double centre = (p + z * z / (2 * n)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom;
  // rounding can push the bounds past p at 0 and n successes
  est.ci_low = std::min(p, std::max(0.0, centre - half));
  est.ci_high = std::max(p, std::min(1.0, centre + half));
}

}  // namespace

DiscrepancyEstimate coupling_discrepancy(const ModelSpec& m, const BlockPartition& p, double t,
                                         std::size_t replicas, std::uint64_t seed, Execution ex) {
  const TorusGeometry& g = p.base();
  const std::size_t n = g.site_count();
  const LocalUpdate rule(m, g.degree());
  std::vector<char> discrepant(replicas, 0);

  for_each_replica(replicas, ex, [&](std::size_t r) {
    const std::uint64_t rs = derive_seed(seed, r);
    Rng init(derive_seed(rs, 1));
    SpinConfiguration x = random_configuration(n, init);
    BarrierState barrier(p, rule, x);
    EventStream stream(n, derive_seed(rs, 0));
    for (;;) {
      const UpdateEvent e = stream.next();
      if (e.time > t) break;
      apply_event(rule, g, x, e.site, e.u);
      barrier.apply(e.site, e.u);
      if (x.plus(e.site) != barrier.output(e.site)) {
        discrepant[r] = 1;
        break;
      }
    }
  });

  DiscrepancyEstimate est;
  est.replicas = replicas;
  for (char c : discrepant) est.discrepant += static_cast<std::size_t>(c);
  est.fraction = replicas ? static_cast<double>(est.discrepant) / static_cast<double>(replicas) : 0.0;
  wilson_interval(est);
  return est;
}

std::string to_string(SupportMethod m) {
  switch (m) {
    case SupportMethod::exact: return "exact";
    case SupportMethod::block_certificate: return "block_certificate";
    case SupportMethod::dependency_paths: return "dependency_paths";
  }
  return "?";
}

namespace {

template <class Map>
SupportSet tabulated_support(const TorusGeometry& g, const UpdateSequence& w, Execution ex, Map&& map) {
  const std::size_t n = g.site_count();
  if (n > kExactSupportCap) {
    throw SizeCapError("exact support needs |V| <= " + std::to_string(kExactSupportCap) + ", got " +
                       std::to_string(n));
  }
  const std::uint64_t states = std::uint64_t{1} << n;
  std::vector<std::uint64_t> image(states);
  for_each_replica(states, ex, [&](std::size_t x) {
    image[x] = map(SpinConfiguration::from_index(x, n)).to_index();
  });
  std::vector<Site> support;
  for (Site v = 0; v < n; ++v) {
    const std::uint64_t bit = std::uint64_t{1} << v;
    for (std::uint64_t x = 0; x < states; ++x) {
      if ((x & bit) == 0 && image[x] != image[x | bit]) {
        support.push_back(v);
        break;
      }
    }
  }
  return SupportSet{Region(g, std::move(support)), SupportMethod::exact, w.t_end(), w.seed()};
}

}  // namespace

SupportSet exact_support(const ModelSpec& m, const BlockPartition& p, const UpdateSequence& w, Execution ex) {
  if (!w.compatible_with(p.base())) throw InvalidArgument("update sequence belongs to another geometry");
  const LocalUpdate rule(m, p.plus_geometry().degree());
  return tabulated_support(p.base(), w, ex, [&](const SpinConfiguration& x) {
    BarrierState state(p, rule, x);
    for (const auto& e : w.events()) state.apply(e.site, e.u);
    return state.pull_back();
  });
}

SupportSet exact_support(const ModelSpec& m, const TorusGeometry& g, const UpdateSequence& w, Execution ex) {
  if (!w.compatible_with(g)) throw InvalidArgument("update sequence belongs to another geometry");
  const LocalUpdate rule(m, g.degree());
  return tabulated_support(g, w, ex, [&](SpinConfiguration x) {
    for (const auto& e : w.events()) apply_event(rule, g, x, e.site, e.u);
    return x;
  });
}

namespace {

template <class NextEvent>
std::vector<std::optional<double>> coalescence_per_block(const ModelSpec& m, const BlockPartition& p,
                                                         NextEvent&& next) {
  const MonotoneFrame frame = monotone_frame(m, p.plus_geometry());
  const LocalUpdate rule(m, p.plus_geometry().degree());
  std::vector<CoupledPair> pairs;
  pairs.reserve(p.block_count());
  for (std::size_t i = 0; i < p.block_count(); ++i) pairs.emplace_back(p.plus_geometry(), rule, frame.top, frame.bottom);
  std::vector<std::optional<double>> when(p.block_count());
  std::size_t open = p.block_count();
  UpdateEvent e;
  while (open > 0 && next(e)) {
    for (const auto& img : p.images(e.site)) {
      if (when[img.block]) continue;
      auto& pair = pairs[img.block];
      pair.apply(img.plus_site, e.u);
      if (pair.coalesced()) {
        when[img.block] = e.time;
        --open;
      }
    }
  }
  return when;
}

}  // namespace

std::vector<std::optional<double>> block_coalescence_times(const ModelSpec& m, const BlockPartition& p,
                                                           const UpdateSequence& w) {
  if (!w.compatible_with(p.base())) throw InvalidArgument("update sequence belongs to another geometry");
  auto it = w.events().begin();
  return coalescence_per_block(m, p, [&](UpdateEvent& e) {
    if (it == w.events().end()) return false;
    e = *it++;
    return true;
  });
}

std::vector<std::optional<double>> block_coalescence_times(const ModelSpec& m, const BlockPartition& p,
                                                           std::uint64_t seed, double t_end) {
  EventStream stream(p.base().site_count(), seed);
  return coalescence_per_block(m, p, [&](UpdateEvent& e) {
    e = stream.next();
    return e.time <= t_end;
  });
}

Region block_support_at(const BlockPartition& p, const std::vector<std::optional<double>>& coalesced_at,
                        double t) {
  std::vector<Site> sites;
  for (std::size_t i = 0; i < p.block_count(); ++i) {
    const auto& infl = p.influencers(i);
    const bool open = std::any_of(infl.begin(), infl.end(), [&](std::size_t j) {
      return !coalesced_at[j] || *coalesced_at[j] > t;
    });
    if (open) {
      const auto s = p.block(i).sites.sites();
      sites.insert(sites.end(), s.begin(), s.end());
    }
  }
  return Region(p.base(), std::move(sites));
}

SupportSet support_superset_blocks(const ModelSpec& m, const BlockPartition& p, const UpdateSequence& w) {
  if (!is_monotone_instance(m, p.plus_geometry())) {
    throw InvalidArgument("block certificate requires a monotone instance (heat-bath; bipartite B+ for "
                          "anti-monotone families)");
  }
  const auto when = block_coalescence_times(m, p, w);
  return SupportSet{block_support_at(p, when, w.t_end()), SupportMethod::block_certificate, w.t_end(),
                    w.seed()};
}

SupportSet support_superset_paths(const TorusGeometry& g, const UpdateSequence& w, RateRule rule) {
  if (!w.compatible_with(g)) throw InvalidArgument("update sequence belongs to another geometry");
  const bool resets = rule == RateRule::heat_bath;
  std::vector<char> live(g.site_count(), 1);
  const auto& events = w.events();
  for (auto it = events.rbegin(); it != events.rend(); ++it) {
    if (!live[it->site]) continue;
    if (resets) live[it->site] = 0;
    g.for_each_neighbor(it->site, [&](Site y) { live[y] = 1; });
  }
  std::vector<Site> sites;
  for (Site s = 0; s < g.site_count(); ++s) {
    if (live[s]) sites.push_back(s);
  }
  return SupportSet{Region(g, std::move(sites)), SupportMethod::dependency_paths, w.t_end(), w.seed()};
}

// --- sparsity ----------------------------------------------------------------

SparsityThresholds SparsityThresholds::defaults(std::size_t n, std::size_t d) {
  const double l = std::log(static_cast<double>(n));
  SparsityThresholds t;
  t.max_diameter = static_cast<std::size_t>(std::ceil(std::pow(l, 3)));
  t.min_separation = static_cast<std::size_t>(std::ceil(2.0 * static_cast<double>(d) * l * l));
  t.max_components = static_cast<std::size_t>(
      std::ceil(std::pow(static_cast<double>(n) / std::pow(l, 5), static_cast<double>(d))));
  t.max_components = std::max<std::size_t>(t.max_components, 1);
  return t;
}

std::size_t default_block_side(std::size_t n) {
  const double l = std::log(static_cast<double>(n));
  const double target = std::ceil(l * l);
  std::size_t best = n;
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t b = 1; b <= n; ++b) {
    if (n % b != 0) continue;
    const double gap = std::abs(static_cast<double>(b) - target);
    if (gap < best_gap) {
      best_gap = gap;
      best = b;
    }
  }
  return best;
}

std::size_t default_halo(std::size_t n) {
  const double l = std::log(static_cast<double>(n));
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::pow(l, 1.5))));
}

std::string to_string(SparsityReport::Clause c) {
  switch (c) {
    case SparsityReport::Clause::none: return "none";
    case SparsityReport::Clause::component_count: return "component_count";
    case SparsityReport::Clause::diameter: return "diameter";
  }
  return "?";
}

SparsityReport classify_sparse(const TorusGeometry& g, const SupportSet& s, const SparsityThresholds& t) {
  if (t.max_diameter == 0 || t.min_separation == 0 || t.max_components == 0) {
    throw InvalidArgument("sparsity thresholds must be positive");
  }
  SparsityReport report;
  report.thresholds = t;
  const auto comps = region_components(g, s.region, t.min_separation - 1);
  for (const auto& c : comps) {
    SparsityReport::Component info;
    info.size = c.size();
    const auto sites = c.sites();
    for (std::size_t i = 0; i < sites.size() && info.diameter_exact; ++i) {
      for (std::size_t j = i + 1; j < sites.size(); ++j) {
        info.diameter = std::max(info.diameter, g.distance(sites[i], sites[j], Metric::graph_l1));
        if (info.diameter > t.max_diameter) {
          info.diameter_exact = false;
          break;
        }
      }
    }
    report.components.push_back(info);
  }
  if (comps.size() > 1 && s.region.size() <= 4096) {
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (std::size_t a = 0; a < comps.size(); ++a) {
      for (std::size_t b = a + 1; b < comps.size(); ++b) {
        for (Site u : comps[a].sites()) {
          for (Site v : comps[b].sites()) best = std::min(best, g.distance(u, v, Metric::graph_l1));
        }
      }
    }
    report.min_separation = best;
  }
  if (comps.size() > t.max_components) {
    report.sparse = false;
    report.violated = SparsityReport::Clause::component_count;
  } else if (std::any_of(report.components.begin(), report.components.end(),
                         [&](const auto& c) { return c.diameter > t.max_diameter; })) {
    report.sparse = false;
    report.violated = SparsityReport::Clause::diameter;
  }
  return report;
}

// --- support maps ------------------------------------------------------------

SupportMap support_map(const ModelSpec& m, const BlockPartition& p, std::uint64_t seed,
                       const std::vector<double>& times, const SparsityThresholds& thresholds) {
  if (times.empty()) throw InvalidArgument("support map needs a nonempty time grid");
  if (!std::is_sorted(times.begin(), times.end())) throw InvalidArgument("time grid must be sorted");
  const TorusGeometry& g = p.base();
  SupportMap map;
  map.sides.assign(g.sides().begin(), g.sides().end());
  map.times = times;
  map.seed = seed;
  map.last_support_time.assign(g.site_count(), 0.0);
  const auto when = block_coalescence_times(m, p, seed, times.back());
  for (double t : times) {
    Region r = block_support_at(p, when, t);
    for (Site u : r.sites()) map.last_support_time[u] = t;
    map.support_fraction.push_back(static_cast<double>(r.size()) / static_cast<double>(g.site_count()));
    map.sparsity.push_back(classify_sparse(g, SupportSet{r, SupportMethod::block_certificate, t, seed}, thresholds));
    map.supports.push_back(std::move(r));
  }
  return map;
}

std::vector<SupportMap> support_maps(const ModelSpec& m, const BlockPartition& p,
                                     const std::vector<std::uint64_t>& seeds,
                                     const std::vector<double>& times,
                                     const SparsityThresholds& thresholds, Execution ex) {
  std::vector<SupportMap> out(seeds.size());
  for_each_replica(seeds.size(), ex, [&](std::size_t i) { out[i] = support_map(m, p, seeds[i], times, thresholds); });
  return out;
}

namespace {

std::pair<std::size_t, std::size_t> raster_shape(const std::vector<std::size_t>& sides) {
  std::size_t width = sides.back();
  std::size_t height = 1;
  for (std::size_t a = 0; a + 1 < sides.size(); ++a) height *= sides[a];
  return {width, height};
}

}  // namespace

void write_support_pgm(std::ostream& os, const SupportMap& map) {
  const auto [width, height] = raster_shape(map.sides);
  const double tmax = map.times.back() > 0 ? map.times.back() : 1.0;
  os << "P2\n# last time in update support; seed " << map.seed << "\n" << width << " " << height << "\n255\n";
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double v = map.last_support_time[y * width + x] / tmax;
      os << (x ? " " : "") << static_cast<int>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
    }
    os << "\n";
  }
}

void write_support_csv(std::ostream& os, const SupportMap& map) {
  const auto [width, height] = raster_shape(map.sides);
  os << "x,y,last_support_time\n";
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) os << x << "," << y << "," << map.last_support_time[y * width + x] << "\n";
  }
}

void write_region_pgm(std::ostream& os, const TorusGeometry& g, const Region& r) {
  const std::vector<std::size_t> sides(g.sides().begin(), g.sides().end());
  const auto [width, height] = raster_shape(sides);
  std::vector<char> mask(g.site_count(), 0);
  for (Site s : r.sites()) mask[s] = 1;
  os << "P2\n" << width << " " << height << "\n255\n";
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) os << (x ? " " : "") << (mask[y * width + x] ? 255 : 0);
    os << "\n";
  }
}

}  // namespace cutoff
