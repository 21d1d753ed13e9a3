#include "cutoff/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "cutoff/dynamics.hpp"
#include "cutoff/estimators.hpp"
#include "cutoff/oracle.hpp"
#include "cutoff/rng.hpp"
#include "cutoff/support.hpp"

namespace cutoff::acceptance {

namespace {

// Tolerances are pinned here; failure injection swaps one for an impossible value.
double tol(const Options& o, int id, double value) {
  return o.corrupt && *o.corrupt == id ? -std::numeric_limits<double>::max() : value;
}

std::uint64_t seed_for(const Options& o, int id) { return derive_seed(o.seed, static_cast<std::uint64_t>(id)); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<double> grid(double step, double end) {
  std::vector<double> t;
  for (std::size_t k = 0; static_cast<double>(k) * step <= end + 1e-12; ++k) t.push_back(static_cast<double>(k) * step);
  return t;
}

Result exact_gap(const Options& o) {
  Result r{1, "exact-1d-gap", false, {}, 0.0};
  const double eps = tol(o, 1, 1e-8);
  const std::size_t n_max = o.quick ? 8 : 10;
  double worst = 0.0;
  std::size_t checked = 0;
  for (double beta : {0.0, 0.2, 0.4, 0.7}) {
    const double target = 1.0 - std::tanh(2.0 * beta);
    for (std::size_t n = 4; n <= n_max; ++n) {
      const double gap = spectral_gap_exact(build_generator(ModelSpec::ising(beta), TorusGeometry::cube(1, n)));
      worst = std::max(worst, std::abs(gap - target));
      ++checked;
    }
  }
  r.passed = worst <= eps;
  r.detail = std::to_string(checked) + " instances, max |gap - (1 - tanh 2beta)| = " + fmt("%.3e", worst);
  return r;
}

Result balance(const Options& o) {
  Result r{2, "detailed-balance-stationarity", false, {}, 0.0};
  const double eps = tol(o, 2, 1e-12);
  std::vector<TorusGeometry> geoms{TorusGeometry::cube(1, 5), TorusGeometry::cube(1, 12),
                                   TorusGeometry::build(2, {3, 4})};
  if (!o.quick) geoms.push_back(TorusGeometry::build(2, {4, 3}));
  std::vector<ModelSpec> models;
  for (RateRule rule : {RateRule::heat_bath, RateRule::metropolis}) {
    models.push_back(ModelSpec::ising(0.4, 0.0, rule));
    models.push_back(ModelSpec::ising(0.7, 0.3, rule));
    models.push_back(ModelSpec::antiferro(0.5, -0.2, rule));
    models.push_back(ModelSpec::hardcore(1.5, rule));
    models.push_back(ModelSpec::hardcore(0.6, rule));
  }
  double worst_stat = 0.0, worst_rev = 0.0, worst_db = 0.0;
  std::size_t count = 0;
  for (const auto& g : geoms) {
    for (const auto& m : models) {
      const auto gen = build_generator(m, g);
      worst_stat = std::max(worst_stat, gen.stationarity_residual());
      worst_rev = std::max(worst_rev, gen.reversibility_residual());
      worst_db = std::max(worst_db, check_detailed_balance(m, g, 2000, seed_for(o, 2) + count));
      ++count;
    }
  }
  r.passed = worst_stat < eps && worst_rev < eps && worst_db < eps;
  r.detail = std::to_string(count) + " instances; stationarity " + fmt("%.2e", worst_stat) + ", reversibility " +
             fmt("%.2e", worst_rev) + ", pairwise balance " + fmt("%.2e", worst_db);
  return r;
}

Result product_gap(const Options& o) {
  Result r{3, "product-min-gap", false, {}, 0.0};
  const double eps = tol(o, 3, 1e-9);
  struct Pair {
    ModelSpec ma;
    TorusGeometry ga;
    ModelSpec mb;
    TorusGeometry gb;
  };
  std::vector<Pair> pairs{
      {ModelSpec::ising(0.4), TorusGeometry::cube(1, 4), ModelSpec::ising(0.2), TorusGeometry::cube(1, 6)},
      {ModelSpec::ising(0.7), TorusGeometry::cube(1, 5), ModelSpec::hardcore(1.2), TorusGeometry::cube(2, 3)},
      {ModelSpec::ising(0.3, 0.0, RateRule::metropolis), TorusGeometry::cube(1, 3), ModelSpec::antiferro(0.5),
       TorusGeometry::cube(1, 6)},
  };
  double worst = 0.0, worst_sum = 0.0;
  for (const auto& p : pairs) {
    const auto a = build_generator(p.ma, p.ga);
    const auto b = build_generator(p.mb, p.gb);
    const auto sa = spectral_decomposition(a);
    const auto sb = spectral_decomposition(b);
    const auto sab = spectral_decomposition(product(a, b));
    worst = std::max(worst, std::abs(sab.gap() - std::min(sa.gap(), sb.gap())));
    std::vector<double> sums;
    for (Eigen::Index i = 0; i < sa.eigenvalues.size(); ++i) {
      for (Eigen::Index j = 0; j < sb.eigenvalues.size(); ++j) sums.push_back(sa.eigenvalues[i] + sb.eigenvalues[j]);
    }
    std::sort(sums.begin(), sums.end());
    for (std::size_t k = 0; k < sums.size(); ++k) {
      worst_sum = std::max(worst_sum, std::abs(sums[k] - sab.eigenvalues[static_cast<Eigen::Index>(k)]));
    }
  }
  r.passed = worst <= eps && worst_sum <= 1e-8;
  r.detail = std::to_string(pairs.size()) + " products; |gap - min gaps| max " + fmt("%.2e", worst) +
             ", spectrum vs pairwise sums max " + fmt("%.2e", worst_sum);
  return r;
}

Result monotone_order(const Options& o) {
  Result r{4, "monotone-coupling-order", false, {}, 0.0};
  const std::size_t ising_count = o.quick ? 100 : 1000;
  const std::size_t hardcore_count = o.quick ? 50 : 300;
  const std::size_t total = ising_count + hardcore_count;
  std::vector<std::size_t> violations(total, 0);
  std::vector<std::size_t> events(total, 0);
  for_each_replica(total, o.ex, [&](std::size_t i) {
    Rng rng(derive_seed(seed_for(o, 4), i));
    const bool hard = i >= ising_count;
    const std::size_t d = 1 + rng.uniform_index(2);
    std::vector<std::size_t> sides;
    if (hard) {
      if (d == 1) sides = {4 + 2 * rng.uniform_index(31)};
      else sides = {4 + 2 * rng.uniform_index(3), 4 + 2 * rng.uniform_index(3)};
    } else {
      if (d == 1) sides = {3 + rng.uniform_index(62)};
      else sides = {3 + rng.uniform_index(6), 3 + rng.uniform_index(6)};
    }
    const auto g = TorusGeometry::build(d, sides);
    const ModelSpec m = hard ? ModelSpec::hardcore(0.05 + 2.95 * rng.uniform01())
                             : ModelSpec::ising(rng.uniform01(), rng.uniform01() - 0.5);
    const MonotoneFrame frame = monotone_frame(m, g);
    const std::size_t n = g.site_count();
    SpinConfiguration x(n), y(n);
    for (Site s = 0; s < n; ++s) {
      const bool a = rng.bernoulli(0.5);
      const bool b = rng.bernoulli(0.5);
      const bool raise = frame.mask && frame.mask->odd(s) ? !b : b;  // push y up in the frame order
      x.set(s, a);
      y.set(s, frame.mask && frame.mask->odd(s) ? (a && raise) : (a || raise));
    }
    if (!frame.leq(x, y)) ++violations[i];
    std::vector<SpinConfiguration> chain{frame.bottom, x, y, frame.top};
    const LocalUpdate rule(m, g.degree());
    EventStream stream(n, derive_seed(seed_for(o, 4) ^ 0x9e37, i));
    const double horizon = 0.5 + 3.5 * rng.uniform01();
    for (UpdateEvent e = stream.next(); e.time <= horizon; e = stream.next()) {
      for (auto& c : chain) apply_event(rule, g, c, e.site, e.u);
      ++events[i];
      for (std::size_t k = 0; k + 1 < chain.size(); ++k) {
        if (!frame.leq(chain[k], chain[k + 1])) ++violations[i];
      }
    }
  });
  std::size_t bad = 0, ev = 0;
  for (std::size_t i = 0; i < total; ++i) {
    bad += violations[i];
    ev += events[i];
  }
  r.passed = static_cast<double>(bad) <= tol(o, 4, 0.0);
  r.detail = std::to_string(ising_count) + " ferro + " + std::to_string(hardcore_count) + " hardcore instances, " +
             std::to_string(ev) + " shared events, " + std::to_string(bad) + " order violations";
  return r;
}

Result support_soundness(const Options& o) {
  Result r{5, "support-soundness", false, {}, 0.0};
  const std::size_t count = o.quick ? 100 : 1000;
  struct Outcome {
    bool blocks_ok = true, paths_ok = true, never_ok = true;
    std::size_t exact_size = 0, block_size = 0, path_size = 0;
  };
  std::vector<Outcome> out(count);
  for_each_replica(count, o.ex, [&](std::size_t i) {
    Rng rng(derive_seed(seed_for(o, 5), i));
    std::vector<std::size_t> sides;
    switch (rng.uniform_index(4)) {
      case 0: sides = {3, 3}; break;
      case 1: sides = {3, 4}; break;
      case 2: sides = {4, 3}; break;
      default: sides = {3 + rng.uniform_index(10)}; break;
    }
    const auto g = TorusGeometry::build(sides.size(), sides);
    std::vector<std::size_t> divisors;
    for (std::size_t b = 1; b <= sides[0]; ++b) {
      if (std::all_of(sides.begin(), sides.end(), [&](std::size_t s) { return s % b == 0; })) divisors.push_back(b);
    }
    const std::size_t b = divisors[rng.uniform_index(divisors.size())];
    const std::size_t w = 1 + rng.uniform_index(3);
    const auto p = BlockPartition::build(g, b, w);
    const ModelSpec ferro = ModelSpec::ising(rng.uniform01(), rng.uniform01() - 0.5);
    const auto w_seq = sample_update_sequence(g, 2.0 * rng.uniform01(), rng.next_u64());

    ModelSpec any = ferro;
    const auto rule = rng.uniform_index(2) ? RateRule::heat_bath : RateRule::metropolis;
    switch (rng.uniform_index(3)) {
      case 0: any = ModelSpec::ising(rng.uniform01(), rng.uniform01() - 0.5, rule); break;
      case 1: any = ModelSpec::antiferro(rng.uniform01(), rng.uniform01() - 0.5, rule); break;
      default: any = ModelSpec::hardcore(0.1 + 2.9 * rng.uniform01(), rule); break;
    }

    const auto exact_barrier = exact_support(ferro, p, w_seq, Execution::serial);
    const auto blocks = support_superset_blocks(ferro, p, w_seq);
    const auto exact_plain = exact_support(any, g, w_seq, Execution::serial);
    const auto paths = support_superset_paths(g, w_seq, any.rule);
    Outcome& res = out[i];
    res.blocks_ok = exact_barrier.region.subset_of(blocks.region);
    res.paths_ok = exact_plain.region.subset_of(paths.region);
    std::vector<char> updated(g.site_count(), 0);
    for (const auto& e : w_seq.events()) updated[e.site] = 1;
    for (Site s = 0; s < g.site_count(); ++s) {
      if (!updated[s] && (!exact_barrier.region.contains(s) || !exact_plain.region.contains(s))) res.never_ok = false;
    }
    res.exact_size = exact_barrier.region.size();
    res.block_size = blocks.region.size();
    res.path_size = paths.region.size();
  });
  std::size_t fail_blocks = 0, fail_paths = 0, fail_never = 0;
  double e = 0, bsz = 0, psz = 0;
  for (const auto& x : out) {
    fail_blocks += !x.blocks_ok;
    fail_paths += !x.paths_ok;
    fail_never += !x.never_ok;
    e += static_cast<double>(x.exact_size);
    bsz += static_cast<double>(x.block_size);
    psz += static_cast<double>(x.path_size);
  }
  const double failures = static_cast<double>(fail_blocks + fail_paths + fail_never);
  r.passed = failures <= tol(o, 5, 0.0);
  const double c = static_cast<double>(count);
  r.detail = std::to_string(count) + " instances; containment failures blocks/paths/never-updated = " +
             std::to_string(fail_blocks) + "/" + std::to_string(fail_paths) + "/" + std::to_string(fail_never) +
             "; mean sizes exact " + fmt("%.2f", e / c) + ", blocks " + fmt("%.2f", bsz / c) + ", paths " +
             fmt("%.2f", psz / c);
  return r;
}

Result barrier_coupling(const Options& o) {
  Result r{6, "barrier-coupling", false, {}, 0.0};
  const auto g = TorusGeometry::cube(1, 48);
  const auto m = ModelSpec::ising(0.4);
  const std::size_t replicas = o.quick ? 200 : 1000;
  std::vector<DiscrepancyEstimate> est;
  std::ostringstream detail;
  for (std::size_t w : {1, 2, 4, 8}) {
    est.push_back(coupling_discrepancy(m, BlockPartition::build(g, 8, w), 2.0, replicas, seed_for(o, 6), o.ex));
    detail << "w=" << w << ": " << est.back().discrepant << "/" << replicas << " ";
  }
  const double slack = tol(o, 6, 0.0);
  bool ok = true;
  for (std::size_t k = 0; k + 1 < est.size(); ++k) ok = ok && est[k + 1].fraction < est[k].fraction + slack;
  ok = ok && est.back().fraction <= slack;
  r.passed = ok;
  r.detail = detail.str();
  return r;
}

Result estimator_oracle(const Options& o) {
  Result r{7, "estimator-oracle-agreement", false, {}, 0.0};
  const double slack = tol(o, 7, 1e-12);
  const std::size_t reps = o.quick ? 400 : 10000;
  const auto times = grid(0.5, 6.0);
  std::size_t checks = 0, fails = 0;
  double min_up_margin = 1e9, min_lo_margin = 1e9;
  std::size_t instance = 0;
  for (std::size_t n : {6, 8, 10}) {
    for (double beta : {0.2, 0.4}) {
      const auto g = TorusGeometry::cube(1, n);
      const auto m = ModelSpec::ising(beta);
      const auto exact = exact_tv_curve(spectral_decomposition(build_generator(m, g)), times);
      const std::uint64_t s = derive_seed(seed_for(o, 7), instance++);
      const auto up = tv_upper_via_coalescence(m, g, times, reps, derive_seed(s, 1), o.ex);
      LowerBoundOptions mag;
      const auto lo_m = tv_lower_via_statistic(m, g, times, reps, derive_seed(s, 2), mag, o.ex);
      LowerBoundOptions prod;
      prod.statistic = LowerStatistic::product_blocks;
      const auto lo_p = tv_lower_via_statistic(m, g, times, reps, derive_seed(s, 3), prod, o.ex);
      for (std::size_t k = 0; k < times.size(); ++k) {
        const double mu = up.points[k].value + 2 * up.points[k].se - exact[k];
        min_up_margin = std::min(min_up_margin, mu);
        fails += mu < -slack;
        for (const Curve* c : {&lo_m, &lo_p}) {
          const double ml = exact[k] - (c->points[k].value - 2 * c->points[k].se);
          min_lo_margin = std::min(min_lo_margin, ml);
          fails += ml < -slack;
        }
        checks += 3;
      }
    }
  }
  r.passed = fails == 0;
  r.detail = std::to_string(checks) + " comparisons over 6 instances, " + std::to_string(fails) +
             " outside 2SE; min margin upper " + fmt("%.4f", min_up_margin) + ", lower " + fmt("%.4f", min_lo_margin);
  return r;
}

Result xi_gap(const Options& o) {
  Result r{8, "xi-gap-extraction", false, {}, 0.0};
  const auto g = TorusGeometry::cube(1, 64);
  const auto free_curve = xi_t_curve(ModelSpec::ising(0.0), g, grid(0.25, 8.0), o.quick ? 2000 : 10000,
                                     derive_seed(seed_for(o, 8), 0), o.ex);
  const auto free_gap = gap_from_xi(free_curve.curve, 64);
  const auto hot = xi_t_curve(ModelSpec::ising(0.4), g, grid(0.5, 20.0), o.quick ? 10000 : 100000,
                              derive_seed(seed_for(o, 8), 1), o.ex);
  const auto hot_gap = gap_from_xi(hot.curve, 64);
  const double target = 1.0 - std::tanh(0.8);
  const double e0 = std::abs(free_gap.lambda - 1.0);
  const double e1 = std::abs(hot_gap.lambda - target) / target;
  r.passed = e0 <= tol(o, 8, 0.05) && e1 <= tol(o, 8, 0.10);
  r.detail = "beta=0: lambda " + fmt("%.4f", free_gap.lambda) + " (err " + fmt("%.2f%%", 100 * e0) +
             "); beta=0.4: lambda " + fmt("%.4f", hot_gap.lambda) + " vs " + fmt("%.6f", target) + " (err " +
             fmt("%.2f%%", 100 * e1) + ")";
  return r;
}

Result gap_stabilization(const Options& o) {
  Result r{9, "gap-stabilization", false, {}, 0.0};
  const std::size_t reps = o.quick ? 5000 : 40000;
  std::vector<GapEstimate> est;
  std::ostringstream detail;
  std::size_t k = 0;
  for (std::size_t side : {16, 32, 64}) {
    const auto xi = xi_t_curve(ModelSpec::ising(0.4), TorusGeometry::cube(1, side), grid(0.5, 20.0), reps,
                               derive_seed(seed_for(o, 9), k++), o.ex);
    est.push_back(gap_from_xi(xi.curve, side));
    detail << "r=" << side << ": " << fmt("%.5f", est.back().lambda) << "+-" << fmt("%.5f", est.back().se) << " ";
  }
  const double d1 = std::abs(est[1].lambda - est[0].lambda);
  const double d2 = std::abs(est[2].lambda - est[1].lambda);
  const double joint = std::sqrt(est[0].se * est[0].se + 2 * est[1].se * est[1].se + est[2].se * est[2].se);
  r.passed = d2 <= d1 + tol(o, 9, joint);
  detail << "| diffs " << fmt("%.5f", d1) << " -> " << fmt("%.5f", d2) << ", joint SE " << fmt("%.5f", joint);
  r.detail = detail.str();
  return r;
}

Result cutoff_profile(const Options& o) {
  Result r{10, "cutoff-diagnostics", false, {}, 0.0};
  ProfileOptions p;
  p.sides = o.quick ? std::vector<std::size_t>{64, 128} : std::vector<std::size_t>{64, 128, 256, 512};
  p.upper_replicas = o.quick ? 200 : 400;
  p.lower_replicas = o.quick ? 1000 : 2000;
  p.seed = seed_for(o, 10);
  p.reference_gap = 1.0 - std::tanh(0.6);
  const auto prof = mixing_profile(ModelSpec::ising(0.3), p, o.ex);
  std::ostringstream detail;
  bool ok = true;
  std::optional<double> prev;
  for (const auto& s : prof.sides) {
    detail << "n=" << s.side << " ratio " << fmt("%.3f", s.ratio.value_or(NAN)) << "; ";
    if (!s.ratio) {
      ok = false;
      continue;
    }
    if (prev) ok = ok && *s.ratio < *prev + tol(o, 10, 0.0);
    prev = s.ratio;
  }
  for (const auto& e : prof.entries) ok = ok && e.bracket_high.has_value();
  const auto& last = prof.sides.back();
  const double pred = *prof.predicted_location;
  const double rel = last.location ? std::abs(*last.location - pred) / pred : 1e9;
  ok = ok && rel <= tol(o, 10, 0.25);
  detail << "location at n=" << last.side << " " << fmt("%.3f", last.location.value_or(NAN)) << " vs "
         << fmt("%.3f", pred) << " (" << fmt("%.1f%%", 100 * rel) << ")";
  r.passed = ok;
  r.detail = detail.str();
  return r;
}

Result sparsification(const Options& o) {
  Result r{11, "support-sparsification", false, {}, 0.0};
  const std::size_t n = 128;
  const auto g = TorusGeometry::cube(2, n);
  const auto p = BlockPartition::build(g, default_block_side(n), default_halo(n));
  const auto th = SparsityThresholds::defaults(n, 2);
  // Grid pinned after a pilot run at this seed: coalescence of the enlarged
  // blocks spreads over roughly t in [250, 1200] at beta = 0.4.
  const std::vector<double> times{700, 850, 950, 1100};
  const auto map = support_map(ModelSpec::ising(0.4), p, seed_for(o, 11), times, th);
  std::ostringstream detail;
  bool ok = true;
  for (std::size_t k = 0; k < times.size(); ++k) {
    detail << "t=" << times[k] << ": " << fmt("%.4f", map.support_fraction[k])
           << (map.sparsity[k].sparse ? " sparse" : " dense") << "; ";
    if (k > 0) ok = ok && map.support_fraction[k] < map.support_fraction[k - 1] + tol(o, 11, 0.0);
  }
  ok = ok && map.sparsity.back().sparse && !map.sparsity.front().sparse;
  detail << "b=" << p.block_side() << " w=" << p.halo() << " D=" << th.max_diameter << " S=" << th.min_separation
         << " L=" << th.max_components;
  r.passed = ok;
  r.detail = detail.str();
  return r;
}

Result mt_contraction(const Options& o) {
  Result r{12, "mt-contraction", false, {}, 0.0};
  const auto g = TorusGeometry::cube(1, 8);
  const auto m = ModelSpec::ising(0.3);
  const auto gen = build_generator(m, g);
  const auto s = spectral_decomposition(gen);
  const Region box(g, {0, 1, 2, 3});
  auto times = grid(0.5, 8.0);
  times.push_back(50.0 / s.gap());
  const auto mt = m_t_exact(gen, s, box, times);
  double worst_rise = 0.0;
  for (std::size_t k = 0; k + 1 < mt.size(); ++k) worst_rise = std::max(worst_rise, mt[k + 1] - mt[k]);
  r.passed = worst_rise <= tol(o, 12, 1e-12) && mt.back() <= 1e-9;
  r.detail = "m_0 = " + fmt("%.4f", mt.front()) + ", m_8 = " + fmt("%.4e", mt[mt.size() - 2]) + ", m_(50/gap) = " +
             fmt("%.2e", mt.back()) + ", max rise " + fmt("%.2e", worst_rise);
  return r;
}

}  // namespace

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {1, "exact-1d-gap", true, exact_gap},
      {2, "detailed-balance-stationarity", true, balance},
      {3, "product-min-gap", true, product_gap},
      {4, "monotone-coupling-order", true, monotone_order},
      {5, "support-soundness", true, support_soundness},
      {6, "barrier-coupling", true, barrier_coupling},
      {7, "estimator-oracle-agreement", false, estimator_oracle},
      {8, "xi-gap-extraction", false, xi_gap},
      {9, "gap-stabilization", false, gap_stabilization},
      {10, "cutoff-diagnostics", false, cutoff_profile},
      {11, "support-sparsification", false, sparsification},
      {12, "mt-contraction", true, mt_contraction},
  };
  return all;
}

std::vector<Result> run_all(const Options& options, const std::function<void(const Result&)>& sink) {
  std::vector<Result> out;
  for (const auto& c : criteria()) {
    if (options.quick && !c.in_quick) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Result r;
    try {
      r = c.run(options);
    } catch (const std::exception& e) {
      r = Result{c.id, c.name, false, std::string("error: ") + e.what()};
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (sink) sink(r);
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_line(const Result& r) {
  char head[96];
  std::snprintf(head, sizeof head, "%s C%02d %-30s %7.1fs  ", r.passed ? "PASS" : "FAIL", r.id, r.name.c_str(),
                r.seconds);
  return head + r.detail;
}

}  // namespace cutoff::acceptance
