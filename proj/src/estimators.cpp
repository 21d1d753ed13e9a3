#include "cutoff/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "cutoff/error.hpp"
#include "cutoff/oracle.hpp"
#include "cutoff/rng.hpp"

namespace cutoff {

namespace {

constexpr std::uint64_t kStationaryStream = 0x5354415449524e41ULL;

void require_grid(const std::vector<double>& times) {
  if (times.empty()) throw InvalidArgument("time grid is empty");
  if (!std::is_sorted(times.begin(), times.end())) throw InvalidArgument("time grid must be sorted");
  if (times.front() < 0.0) throw InvalidArgument("time grid must be nonnegative");
}

Estimate binomial(std::size_t hits, std::size_t total) {
  const double p = total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
  return {p, total ? std::sqrt(p * (1.0 - p) / static_cast<double>(total)) : 0.0};
}

Estimate mean_se(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  if (v.empty()) return {};
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double var = v.size() > 1 ? ss / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n)};
}

std::vector<std::optional<double>> coalescence_samples(const ModelSpec& m, const TorusGeometry& g,
                                                       std::size_t replicas, std::uint64_t seed, double t_cap,
                                                       Execution ex) {
  monotone_frame(m, g);  // rejects non-monotone instances up front
  std::vector<std::optional<double>> out(replicas);
  for_each_replica(replicas, ex, [&](std::size_t r) { out[r] = coalescence_time(m, g, derive_seed(seed, r), t_cap); });
  return out;
}

Curve upper_from_samples(const std::vector<std::optional<double>>& tau, const std::vector<double>& times,
                         std::uint64_t seed) {
  Curve c;
  c.times = times;
  c.replicas = tau.size();
  c.seed = seed;
  for (double t : times) {
    std::size_t open = 0;
    for (const auto& x : tau) open += (!x || *x > t) ? 1 : 0;
    c.points.push_back(binomial(open, tau.size()));
  }
  return c;
}

}  // namespace

Curve tv_upper_via_coalescence(const ModelSpec& m, const TorusGeometry& g, const std::vector<double>& times,
                               std::size_t replicas, std::uint64_t seed, Execution ex) {
  require_grid(times);
  if (replicas == 0) throw InvalidArgument("replicas must be positive");
  return upper_from_samples(coalescence_samples(m, g, replicas, seed, times.back(), ex), times, seed);
}

std::string to_string(LowerStatistic s) {
  return s == LowerStatistic::magnetization ? "magnetization" : "product_blocks";
}

LowerStatistic parse_lower_statistic(const std::string& s) {
  if (s == "magnetization") return LowerStatistic::magnetization;
  if (s == "product_blocks") return LowerStatistic::product_blocks;
  throw ConfigError("unknown lower-bound statistic '" + s + "' (magnetization|product_blocks)");
}

ProductBlockLayout ProductBlockLayout::single(const TorusGeometry& g) {
  const auto sides = g.sides();
  if (!std::all_of(sides.begin(), sides.end(), [&](std::size_t s) { return s == sides[0]; })) {
    throw InvalidArgument("product blocks need a cubic torus");
  }
  return {sides[0], std::max<std::size_t>(1, 2 * sides[0] / 3), 1};
}

ProductBlockLayout ProductBlockLayout::tiled(const TorusGeometry& g, std::size_t torus_side) {
  const auto single_layout = single(g);
  if (torus_side < TorusGeometry::kMinSide || torus_side > single_layout.torus_side) {
    throw InvalidArgument("block torus side must lie in [3, n]");
  }
  std::size_t blocks = 1;
  for (std::size_t a = 0; a < g.dimension(); ++a) blocks *= single_layout.torus_side / torus_side;
  return {torus_side, std::max<std::size_t>(1, 2 * torus_side / 3), blocks};
}

namespace {

std::vector<SpinConfiguration> stationary_samples(const ModelSpec& m, const TorusGeometry& g, std::size_t count,
                                                  std::uint64_t seed, Execution ex) {
  std::vector<SpinConfiguration> out(count);
  const std::uint64_t master = derive_seed(seed, kStationaryStream);
  if (is_monotone_instance(m, g)) {
    for_each_replica(count, ex, [&](std::size_t j) { out[j] = cftp_sample(m, g, derive_seed(master, j)).sample; });
    return out;
  }
  const GibbsTable table = gibbs_table(m, g);
  std::vector<double> cdf(table.probabilities().size());
  std::partial_sum(table.probabilities().begin(), table.probabilities().end(), cdf.begin());
  for_each_replica(count, ex, [&](std::size_t j) {
    Rng rng(derive_seed(master, j));
    const double u = rng.uniform01() * cdf.back();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const auto idx = static_cast<std::uint64_t>(std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
    out[j] = SpinConfiguration::from_index(idx, g.site_count());
  });
  return out;
}

// Half-sample selected-event estimate: A is chosen on (p_sel, q_sel), then
// P(A) - Q(A) is evaluated on (p_eval, q_eval).
struct Split {
  std::span<const long> p_sel, q_sel, p_eval, q_eval;
};

Estimate selected_event(const Split& s, std::size_t bins) {
  long lo = std::numeric_limits<long>::max();
  long hi = std::numeric_limits<long>::min();
  for (auto span : {s.p_sel, s.q_sel}) {
    for (long v : span) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  const std::size_t values = static_cast<std::size_t>((hi - lo) / 2 + 1);  // magnetization moves in steps of 2
  const std::size_t b = std::clamp<std::size_t>(bins, 1, values);
  auto bin = [&](long v) {
    const long k = std::clamp<long>((v - lo) / 2, 0, static_cast<long>(values) - 1);
    return static_cast<std::size_t>(k) * b / values;
  };
  std::vector<double> p(b, 0.0), q(b, 0.0);
  for (long v : s.p_sel) p[bin(v)] += 1.0 / static_cast<double>(s.p_sel.size());
  for (long v : s.q_sel) q[bin(v)] += 1.0 / static_cast<double>(s.q_sel.size());
  std::vector<char> in_a(b);
  for (std::size_t i = 0; i < b; ++i) in_a[i] = p[i] > q[i];
  std::size_t hp = 0, hq = 0;
  for (long v : s.p_eval) hp += in_a[bin(v)] ? 1 : 0;
  for (long v : s.q_eval) hq += in_a[bin(v)] ? 1 : 0;
  const auto ep = binomial(hp, s.p_eval.size());
  const auto eq = binomial(hq, s.q_eval.size());
  return {ep.value - eq.value, std::sqrt(ep.se * ep.se + eq.se * eq.se)};
}

Curve lower_magnetization(const ModelSpec& m, const TorusGeometry& g, const std::vector<double>& times,
                          std::size_t replicas, std::uint64_t seed, const LowerBoundOptions& options, Execution ex) {
  const std::size_t n = g.site_count();
  SpinConfiguration start = options.start ? *options.start : monotone_frame(m, g).top;
  if (start.size() != n) throw InvalidArgument("start configuration size mismatch");
  const std::size_t ns = options.stationary_samples ? options.stationary_samples : 4 * replicas;
  if (replicas < 4 || ns < 4) throw InvalidArgument("magnetization lower bound needs at least 4 samples per side");

  const LocalUpdate rule(m, g.degree());
  std::vector<std::vector<long>> at_time(times.size(), std::vector<long>(replicas));
  for_each_replica(replicas, ex, [&](std::size_t r) {
    SpinConfiguration x = start;
    EventStream stream(n, derive_seed(seed, r));
    UpdateEvent e = stream.next();
    for (std::size_t k = 0; k < times.size(); ++k) {
      for (; e.time <= times[k]; e = stream.next()) apply_event(rule, g, x, e.site, e.u);
      at_time[k][r] = x.magnetization();
    }
  });
  std::vector<long> reference(ns);
  const auto samples = stationary_samples(m, g, ns, seed, ex);
  for (std::size_t j = 0; j < ns; ++j) reference[j] = samples[j].magnetization();

  const std::size_t hp = replicas / 2;
  const std::size_t hq = ns / 2;
  Curve c;
  c.times = times;
  c.replicas = replicas;
  c.seed = seed;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const std::span<const long> p(at_time[k]);
    const std::span<const long> q(reference);
    const std::size_t bins =
        options.bins ? options.bins
                     : static_cast<std::size_t>(std::ceil(2.0 * std::cbrt(static_cast<double>(std::min(hp, hq)))));
    const auto a = selected_event({p.first(hp), q.first(hq), p.subspan(hp), q.subspan(hq)}, bins);
    const auto b = selected_event({p.subspan(hp), q.subspan(hq), p.first(hp), q.first(hq)}, bins);
    const double value = 0.5 * (a.value + b.value);
    // halves share data, so the errors are correlated; the mean of the two SEs bounds the SD
    const double se = 0.5 * (a.se + b.se);
    c.points.push_back({std::clamp(value, 0.0, 1.0), se});
  }
  return c;
}

Curve lower_product_blocks(const ModelSpec& m, const TorusGeometry& g, const std::vector<double>& times,
                           std::size_t replicas, std::uint64_t seed, const LowerBoundOptions& options,
                           Execution ex) {
  const ProductBlockLayout layout = options.layout ? *options.layout : ProductBlockLayout::single(g);
  const std::size_t d = g.dimension();
  const TorusGeometry block = TorusGeometry::cube(d, layout.torus_side);
  const auto gen = build_generator(m, block);
  const auto spec = spectral_decomposition(gen);

  const std::size_t offset = (layout.torus_side - layout.box_side) / 2;
  std::vector<Site> box_sites;
  for (Site s = 0; s < block.site_count(); ++s) {
    const auto c = block.coords(s);
    if (std::all_of(c.begin(), c.end(), [&](std::size_t v) { return v >= offset && v < offset + layout.box_side; })) {
      box_sites.push_back(s);
    }
  }
  const Region box(block, box_sites);
  const auto mu_b = project(gen.states(), gen.stationary(), box);
  std::vector<double> cdf(mu_b.size());
  std::partial_sum(mu_b.begin(), mu_b.end(), cdf.begin());

  Curve c;
  c.times = times;
  c.replicas = replicas;
  c.seed = seed;
  std::vector<double> row(gen.dimension());
  for (std::size_t k = 0; k < times.size(); ++k) {
    const Eigen::MatrixXd kernel = heat_kernel(spec, times[k]);
    double worst = -1.0;
    std::vector<double> best;
    for (Eigen::Index x = 0; x < kernel.rows(); ++x) {
      for (Eigen::Index y = 0; y < kernel.cols(); ++y) row[static_cast<std::size_t>(y)] = std::max(0.0, kernel(x, y));
      auto law = project(gen.states(), row, box);
      const double l2 = l2_distance(law, mu_b);
      if (l2 > worst) {
        worst = l2;
        best = std::move(law);
      }
    }
    std::vector<double> log_y(mu_b.size(), -std::numeric_limits<double>::infinity());
    for (std::size_t b = 0; b < mu_b.size(); ++b) {
      if (mu_b[b] > 0.0 && best[b] > 0.0) log_y[b] = std::log(best[b] / mu_b[b]);
    }
    std::vector<double> values(replicas);
    for_each_replica(replicas, ex, [&](std::size_t r) {
      Rng rng(derive_seed(derive_seed(seed, k), r));
      double sum = 0.0;
      for (std::size_t i = 0; i < layout.blocks; ++i) {
        const double u = rng.uniform01() * cdf.back();
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        sum += log_y[static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1))];
      }
      values[r] = std::max(0.0, 1.0 - std::exp(sum));
    });
    c.points.push_back(mean_se(values));
  }
  return c;
}

}  // namespace

Curve tv_lower_via_statistic(const ModelSpec& m, const TorusGeometry& g, const std::vector<double>& times,
                             std::size_t replicas, std::uint64_t seed, const LowerBoundOptions& options,
                             Execution ex) {
  require_grid(times);
  if (replicas == 0) throw InvalidArgument("replicas must be positive");
  return options.statistic == LowerStatistic::magnetization
             ? lower_magnetization(m, g, times, replicas, seed, options, ex)
             : lower_product_blocks(m, g, times, replicas, seed, options, ex);
}

namespace {

// P(Poisson(t) >= k)
double poisson_tail(double t, std::size_t k) {
  if (k == 0) return 1.0;
  double below = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    below += std::exp(static_cast<double>(j) * std::log(t) - t - std::lgamma(static_cast<double>(j) + 1.0));
  }
  return std::clamp(1.0 - below, 0.0, 1.0);
}

}  // namespace

XiCurve xi_t_curve(const ModelSpec& m, const TorusGeometry& g, const std::vector<double>& times,
                   std::size_t replicas, std::uint64_t seed, Execution ex) {
  require_grid(times);
  if (replicas < 2) throw InvalidArgument("xi_t needs at least 2 replicas");
  const MonotoneFrame frame = monotone_frame(m, g);
  const LocalUpdate rule(m, g.degree());
  const std::size_t n = g.site_count();
  std::vector<std::vector<double>> frac(times.size(), std::vector<double>(replicas));
  for_each_replica(replicas, ex, [&](std::size_t r) {
    CoupledPair pair(g, rule, frame.top, frame.bottom);
    EventStream stream(n, derive_seed(seed, r));
    UpdateEvent e = stream.next();
    for (std::size_t k = 0; k < times.size(); ++k) {
      for (; e.time <= times[k]; e = stream.next()) {
        if (!pair.coalesced()) pair.apply(e.site, e.u);
      }
      frac[k][r] = static_cast<double>(pair.disagreements()) / static_cast<double>(n);
    }
  });
  XiCurve out;
  out.curve.times = times;
  out.curve.replicas = replicas;
  out.curve.seed = seed;
  for (const auto& v : frac) out.curve.points.push_back(mean_se(v));

  const auto sides = g.sides();
  const std::size_t k = *std::min_element(sides.begin(), sides.end()) / 2;
  const double deg = static_cast<double>(g.degree());
  const double paths = std::log(deg) + static_cast<double>(k - 1) * std::log(std::max(1.0, deg - 1.0));
  const double tail = poisson_tail(times.back(), k);
  const double risk = tail > 0.0 ? std::exp(paths + std::log(tail)) : 0.0;
  if (risk > 1e-2) {
    std::ostringstream msg;
    msg << "torus side may be too small: dependency paths around the torus within t=" << times.back()
        << " have probability bound " << std::min(risk, 1.0);
    out.warning = msg.str();
  }
  return out;
}

namespace {

struct Fit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;
  double se = 0.0;
};

Fit weighted_line(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& w,
                  bool known_variance) {
  const double sw = std::accumulate(w.begin(), w.end(), 0.0);
  double xm = 0.0, ym = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xm += w[i] * x[i];
    ym += w[i] * y[i];
  }
  xm /= sw;
  ym /= sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - xm) * (x[i] - xm);
    sxy += w[i] * (x[i] - xm) * (y[i] - ym);
  }
  if (!(sxx > 0.0)) throw NumericalError("regression needs at least two distinct times");
  Fit f;
  f.slope = sxy / sxx;
  f.intercept = ym - f.slope * xm;
  double chi2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    chi2 += w[i] * r * r;
  }
  f.residual = std::sqrt(chi2 / sw);
  const double dof = static_cast<double>(x.size()) - 2.0;
  const double scale = dof > 0 ? chi2 / dof : 0.0;
  f.se = std::sqrt((known_variance ? std::max(1.0, scale) : scale) / sxx);
  return f;
}

}  // namespace

GapEstimate gap_from_xi(const Curve& curve, std::size_t side, const GapFitOptions& options) {
  std::vector<std::size_t> usable;
  for (std::size_t k = 0; k < curve.times.size(); ++k) {
    const auto& p = curve.points[k];
    if (p.value > 0.0 && p.value > 5.0 * p.se) usable.push_back(k);
  }
  const bool known_variance = std::all_of(usable.begin(), usable.end(), [&](std::size_t k) { return curve.points[k].se > 0.0; });
  auto fit_on = [&](double lo, double hi) {
    std::vector<double> x, y, w;
    for (std::size_t k : usable) {
      const double t = curve.times[k];
      if (t < lo || t > hi) continue;
      const auto& p = curve.points[k];
      x.push_back(t);
      y.push_back(std::log(p.value));
      w.push_back(known_variance ? (p.value / p.se) * (p.value / p.se) : 1.0);
    }
    if (x.size() < 4) {
      throw NumericalError("gap fit needs at least 4 usable points (xi > 5 SE) in [" + std::to_string(lo) + ", " +
                           std::to_string(hi) + "], found " + std::to_string(x.size()));
    }
    return std::make_pair(weighted_line(x, y, w, known_variance), x);
  };

  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  if (options.window) {
    std::tie(lo, hi) = *options.window;
  } else {
    const auto [pilot, xs] = fit_on(lo, hi);
    if (!(pilot.slope < 0.0)) throw NumericalError("pilot fit does not decay");
    const double l0 = -pilot.slope;
    lo = 2.0 / l0;
    hi = 6.0 / l0;
  }
  const auto [fit, xs] = fit_on(lo, hi);
  GapEstimate est;
  est.side = side;
  est.lambda = -fit.slope;
  if (!(est.lambda > 0.0)) throw NumericalError("fitted decay rate is not positive");
  const double tmax = *std::max_element(xs.begin(), xs.end());
  if (tmax < 2.0 / est.lambda) {
    throw NumericalError("all usable points lie below twice the relaxation time; extend the time grid");
  }
  est.window_low = lo;
  est.window_high = std::min(hi, curve.times.back());
  est.residual = fit.residual;
  est.se = fit.se;
  est.points = xs.size();
  return est;
}

// --- strong spatial mixing -------------------------------------------------

namespace {

std::vector<Site> outer_boundary(const TorusGeometry& g, const Region& lambda) {
  std::vector<char> mark(g.site_count(), 0);
  for (Site s : lambda.sites()) {
    g.for_each_neighbor(s, [&](Site y) {
      if (!lambda.contains(y)) mark[y] = 1;
    });
  }
  std::vector<Site> out;
  for (Site s = 0; s < g.site_count(); ++s) {
    if (mark[s]) out.push_back(s);
  }
  return out;
}

// mu^tau(v = +) for each v in lambda, by enumeration of lambda.
std::vector<double> conditional_marginals(const ModelSpec& m, const TorusGeometry& g, const Region& lambda,
                                          const SpinConfiguration& outside) {
  const auto sites = lambda.sites();
  const std::uint64_t count = std::uint64_t{1} << sites.size();
  std::vector<double> logw(count, -std::numeric_limits<double>::infinity());
  SpinConfiguration x = outside;
  for (std::uint64_t c = 0; c < count; ++c) {
    for (std::size_t k = 0; k < sites.size(); ++k) x.set(sites[k], (c >> k) & 1U);
    if (auto w = gibbs_log_weight(m, g, x)) logw[c] = *w;
  }
  const double top = *std::max_element(logw.begin(), logw.end());
  if (!std::isfinite(top)) throw InvalidArgument("boundary condition admits no configuration");
  std::vector<double> plus(sites.size(), 0.0);
  double z = 0.0;
  for (std::uint64_t c = 0; c < count; ++c) {
    const double w = std::exp(logw[c] - top);
    z += w;
    for (std::size_t k = 0; k < sites.size(); ++k) {
      if ((c >> k) & 1U) plus[k] += w;
    }
  }
  for (double& p : plus) p /= z;
  return plus;
}

std::vector<double> sampled_marginals(const ModelSpec& m, const TorusGeometry& g, const Region& lambda,
                                      const SpinConfiguration& outside, std::size_t replicas, std::uint64_t seed) {
  CftpOptions opts;
  opts.pinned_values = outside;
  for (Site s = 0; s < g.site_count(); ++s) {
    if (!lambda.contains(s)) opts.pinned_sites.push_back(s);
  }
  std::vector<double> plus(lambda.size(), 0.0);
  std::vector<SpinConfiguration> draws(replicas);
  for_each_replica(replicas, Execution::parallel,
                   [&](std::size_t r) { draws[r] = cftp_sample(m, g, derive_seed(seed, r), opts).sample; });
  for (const auto& x : draws) {
    for (std::size_t k = 0; k < lambda.size(); ++k) plus[k] += x.plus(lambda.sites()[k]) ? 1.0 : 0.0;
  }
  for (double& p : plus) p /= static_cast<double>(replicas);
  return plus;
}

}  // namespace

SsmFit ssm_decay_fit(const ModelSpec& m, const TorusGeometry& g, const Region& lambda, const SsmOptions& options) {
  if (lambda.empty() || lambda.size() == g.site_count()) throw InvalidArgument("lambda must be a proper nonempty region");
  const auto boundary = outer_boundary(g, lambda);
  const bool oracle = options.mode == SsmOptions::Mode::oracle;
  if (oracle && lambda.size() > kGeneratorCap) throw SizeCapError("oracle SSM needs |lambda| <= 14");
  if (oracle && boundary.size() > 16) throw SizeCapError("oracle SSM needs at most 16 boundary sites");

  std::vector<SpinConfiguration> taus;
  const std::size_t n = g.site_count();
  if (oracle) {
    for (std::uint64_t c = 0; c < (std::uint64_t{1} << boundary.size()); ++c) {
      SpinConfiguration x(n);
      for (std::size_t k = 0; k < boundary.size(); ++k) x.set(boundary[k], (c >> k) & 1U);
      taus.push_back(std::move(x));
    }
  } else {
    taus.push_back(SpinConfiguration(n, false));
    SpinConfiguration all(n, false);
    for (Site y : boundary) all.set(y, true);
    taus.push_back(all);
    Rng rng(derive_seed(options.seed, 0));
    while (taus.size() < std::max<std::size_t>(2, options.boundary_samples)) {
      SpinConfiguration x(n);
      for (Site y : boundary) x.set(y, rng.bernoulli(0.5));
      taus.push_back(std::move(x));
    }
  }

  std::map<std::size_t, SsmPoint> best;
  std::size_t stream = 1;
  for (const auto& tau : taus) {
    const auto base = oracle ? conditional_marginals(m, g, lambda, tau)
                             : sampled_marginals(m, g, lambda, tau, options.replicas, derive_seed(options.seed, stream++));
    for (Site y : boundary) {
      SpinConfiguration flipped = tau;
      flipped.flip(y);
      const auto other = oracle ? conditional_marginals(m, g, lambda, flipped)
                                : sampled_marginals(m, g, lambda, flipped, options.replicas,
                                                    derive_seed(options.seed, stream++));
      for (std::size_t k = 0; k < lambda.size(); ++k) {
        const std::size_t dist = g.distance(y, lambda.sites()[k], Metric::graph_l1);
        const double tv = std::abs(base[k] - other[k]);
        double se = 0.0;
        if (!oracle) {
          const double r = static_cast<double>(options.replicas);
          se = std::sqrt(base[k] * (1 - base[k]) / r + other[k] * (1 - other[k]) / r);
        }
        auto& slot = best[dist];
        slot.distance = dist;
        if (tv > slot.tv) {
          slot.tv = tv;
          slot.se = se;
        }
      }
    }
  }
  SsmFit fit;
  for (const auto& [d, p] : best) fit.points.push_back(p);

  std::vector<double> x, y, w;
  for (const auto& p : fit.points) {
    const double floor = oracle ? options.noise_floor : 2.0 * p.se;
    if (p.tv > floor && p.tv > 0.0) {
      x.push_back(static_cast<double>(p.distance));
      y.push_back(std::log(p.tv));
      w.push_back(1.0);
    }
  }
  if (x.empty()) {
    fit.refused = "flat signal: every boundary-flip influence is below the noise floor";
    return fit;
  }
  if (x.size() < 2) {
    fit.refused = "fewer than two distances with a signal above the noise floor";
    return fit;
  }
  const auto line = weighted_line(x, y, w, false);
  fit.c1 = std::exp(line.intercept);
  fit.c2 = -line.slope;
  fit.residual = line.residual;
  return fit;
}

// --- mixing profiles ---------------------------------------------------------

std::optional<double> first_crossing(const Curve& c, double eps) {
  for (std::size_t k = 0; k < c.times.size(); ++k) {
    const double v = c.points[k].value;
    if (v <= eps) {
      if (k == 0) return c.times[0];
      const double v0 = c.points[k - 1].value;
      const double t0 = c.times[k - 1];
      const double frac = v0 > v ? (v0 - eps) / (v0 - v) : 1.0;
      return t0 + frac * (c.times[k] - t0);
    }
  }
  return std::nullopt;
}

namespace {

double exact_mixing_time(const SpectralData& s, double eps) {
  auto d = [&](double t) { return exact_tv_curve(s, std::vector<double>{t}).front(); };
  if (d(0.0) <= eps) return 0.0;
  double hi = 1.0;
  while (d(hi) > eps) hi *= 2.0;
  double lo = 0.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (d(mid) > eps ? lo : hi) = mid;
  }
  return hi;
}

}  // namespace

MixingProfile mixing_profile(const ModelSpec& m, const ProfileOptions& options, Execution ex) {
  if (options.sides.empty()) throw ConfigError("mixing profile needs at least one side");
  if (options.epsilons.empty()) throw ConfigError("mixing profile needs an epsilon list");
  for (double e : options.epsilons) {
    if (!(e > 0.0 && e < 1.0)) throw ConfigError("epsilon values must lie in (0, 1)");
  }
  const double eps_min = *std::min_element(options.epsilons.begin(), options.epsilons.end());
  const double eps_max = *std::max_element(options.epsilons.begin(), options.epsilons.end());
  MixingProfile out;
  if (options.reference_gap) {
    out.predicted_location = static_cast<double>(options.dimension) / (2.0 * *options.reference_gap);
  }
  for (std::size_t si = 0; si < options.sides.size(); ++si) {
    const std::size_t n = options.sides[si];
    const auto g = TorusGeometry::cube(options.dimension, n);
    const std::uint64_t seed = derive_seed(options.seed, si);
    ProfileSide side;
    side.side = n;

    std::vector<double> times = options.times;
    std::vector<std::optional<double>> tau;
    if (times.empty()) {
      tau = coalescence_samples(m, g, options.upper_replicas, derive_seed(seed, 1), 1e6, ex);
      double tmax = 0.0;
      for (const auto& t : tau) {
        if (!t) throw NumericalError("coalescence did not occur within the time cap");
        tmax = std::max(tmax, *t);
      }
      const auto steps = static_cast<std::size_t>(std::ceil(tmax / options.time_step)) + 1;
      for (std::size_t k = 0; k <= steps; ++k) times.push_back(static_cast<double>(k) * options.time_step);
    } else {
      require_grid(times);
      tau = coalescence_samples(m, g, options.upper_replicas, derive_seed(seed, 1), times.back(), ex);
    }
    side.upper = upper_from_samples(tau, times, derive_seed(seed, 1));
    side.lower = tv_lower_via_statistic(m, g, times, options.lower_replicas, derive_seed(seed, 2), {}, ex);

    std::optional<SpectralData> spec;
    if (g.site_count() <= 10) {
      spec = spectral_decomposition(build_generator(m, g));
      side.exact_tv = exact_tv_curve(*spec, times);
    }
    std::optional<double> t_lo_eps, t_hi_eps;
    for (double eps : options.epsilons) {
      ProfileEntry e;
      e.side = n;
      e.epsilon = eps;
      for (std::size_t k = 0; k < times.size(); ++k) {
        if (side.lower.points[k].value > eps) e.bracket_low = times[k];
      }
      for (std::size_t k = 0; k < times.size(); ++k) {
        if (side.upper.points[k].value < eps) {
          e.bracket_high = times[k];
          break;
        }
      }
      e.estimate = first_crossing(side.lower, eps);
      if (spec) e.exact = exact_mixing_time(*spec, eps);
      const double low = e.bracket_low.value_or(0.0);
      e.bracket_ok = e.bracket_high.has_value() && low <= *e.bracket_high &&
                     (!e.exact || (low <= *e.exact && *e.exact <= *e.bracket_high));
      if (eps == eps_min) t_lo_eps = e.estimate;
      if (eps == eps_max) t_hi_eps = e.estimate;
      out.entries.push_back(e);
    }
    if (t_lo_eps && t_hi_eps && *t_hi_eps > 0.0 && eps_min < eps_max) side.ratio = *t_lo_eps / *t_hi_eps;
    if (t_lo_eps) side.location = *t_lo_eps / std::log(static_cast<double>(n));
    out.sides.push_back(std::move(side));
  }
  return out;
}

// --- output ------------------------------------------------------------------

void write_curve_csv(std::ostream& os, const CsvMeta& meta, const std::vector<std::string>& names,
                     const std::vector<const Curve*>& curves) {
  if (names.size() != curves.size() || curves.empty()) throw InvalidArgument("write_curve_csv: names/curves mismatch");
  for (const auto& [k, v] : meta.rows) os << "# " << k << ": " << v << "\n";
  os << "t";
  for (const auto& n : names) os << "," << n << "," << n << "_se";
  os << "\n";
  const auto& times = curves.front()->times;
  os << std::setprecision(12);
  for (std::size_t k = 0; k < times.size(); ++k) {
    os << times[k];
    for (const Curve* c : curves) {
      if (c->times.size() != times.size()) throw InvalidArgument("write_curve_csv: grids differ");
      os << "," << c->points[k].value << "," << c->points[k].se;
    }
    os << "\n";
  }
}

void write_svg_chart(std::ostream& os, const std::string& title, const std::string& x_label,
                     const std::string& y_label, const std::vector<SvgSeries>& series, bool log_y) {
  constexpr double W = 640, H = 400, L = 70, R = 160, T = 40, B = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  auto ty = [&](double v) { return log_y ? std::log10(v) : v; };
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (log_y && !(s.y[i] > 0.0)) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) y1 = y0 + 1;
  auto px = [&](double v) { return L + (v - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double v) { return H - B - (ty(v) - y0) / (y1 - y0) * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << " " << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" << title
     << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0;
    const double yv = y0 + (y1 - y0) * i / 4.0;
    const double yp = H - B - (H - T - B) * i / 4.0;
    os << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
       << xv << "</text>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << yp + 4 << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
       << (log_y ? std::pow(10.0, yv) : yv) << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
     << x_label << "</text>\n";
  os << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 16 " << (T + H - B) / 2
     << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << y_label << "</text>\n";
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = colors[si % 8];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (log_y && !(s.y[i] > 0.0)) continue;
      os << px(s.x[i]) << "," << py(s.y[i]) << " ";
    }
    os << "\"/>\n";
    const double ly = T + 16.0 * static_cast<double>(si);
    os << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly << "\" stroke=\""
       << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << W - R + 34 << "\" y=\"" << ly + 4 << "\" font-family=\"sans-serif\" font-size=\"11\">" << s.name
       << "</text>\n";
  }
  os << "</svg>\n";
}

}  // namespace cutoff
