#include "cutoff/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cutoff/rng.hpp"

namespace cutoff {

std::string to_string(Family f) {
  switch (f) {
    case Family::ising_ferro: return "ising_ferro";
    case Family::ising_antiferro: return "ising_antiferro";
    case Family::hardcore: return "hardcore";
  }
  return "?";
}

std::string to_string(RateRule r) { return r == RateRule::heat_bath ? "heat_bath" : "metropolis"; }

Family parse_family(const std::string& s) {
  if (s == "ising_ferro" || s == "ising") return Family::ising_ferro;
  if (s == "ising_antiferro" || s == "antiferro") return Family::ising_antiferro;
  if (s == "hardcore") return Family::hardcore;
  throw ConfigError("unknown model family '" + s + "'");
}

RateRule parse_rate_rule(const std::string& s) {
  if (s == "heat_bath" || s == "heat-bath") return RateRule::heat_bath;
  if (s == "metropolis") return RateRule::metropolis;
  throw ConfigError("unknown rate rule '" + s + "'");
}

ModelSpec ModelSpec::make(Family family, double beta, double h, RateRule rule) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw InvalidArgument("beta must be finite and >= 0");
  if (!std::isfinite(h)) throw InvalidArgument("external field must be finite");
  if (family == Family::hardcore && h != 0.0) {
    throw InvalidArgument("hardcore model takes no external field");
  }
  return ModelSpec{family, beta, h, rule};
}

std::string ModelSpec::describe() const {
  std::ostringstream os;
  os << to_string(family) << " beta=" << beta << " h=" << h << " rule=" << to_string(rule);
  return os.str();
}

std::optional<double> gibbs_log_weight(const ModelSpec& m, const TorusGeometry& g,
                                       const SpinConfiguration& sigma) {
  if (sigma.size() != g.site_count()) throw InvalidArgument("configuration/geometry size mismatch");
  const std::size_t n = g.site_count();
  if (m.family == Family::hardcore) {
    std::size_t occupied = 0;
    for (Site x = 0; x < n; ++x) {
      if (!sigma.plus(x)) continue;
      ++occupied;
      bool blocked = false;
      g.for_each_neighbor(x, [&](Site y) { blocked = blocked || sigma.plus(y); });
      if (blocked) return std::nullopt;
    }
    if (occupied == 0) return 0.0;
    if (m.beta == 0.0) return std::nullopt;
    return static_cast<double>(occupied) * std::log(m.beta);
  }
  long bond_sum = 0;  // each edge visited twice
  long field_sum = 0;
  for (Site x = 0; x < n; ++x) {
    const int sx = sigma.spin(x);
    field_sum += sx;
    g.for_each_neighbor(x, [&](Site y) { bond_sum += sx * sigma.spin(y); });
  }
  const double coupling = m.family == Family::ising_ferro ? m.beta : -m.beta;
  return coupling * static_cast<double>(bond_sum / 2) + m.h * static_cast<double>(field_sum);
}

GibbsTable gibbs_table(const ModelSpec& m, const TorusGeometry& g, std::size_t cap) {
  const auto range = enumerate_configurations(g, cap);
  std::vector<double> logw(range.count());
  std::vector<bool> excluded(range.count(), false);
  double max_logw = -std::numeric_limits<double>::infinity();
  std::uint64_t i = 0;
  for (const auto& sigma : range) {
    auto w = gibbs_log_weight(m, g, sigma);
    if (w) {
      logw[i] = *w;
      max_logw = std::max(max_logw, *w);
    } else {
      excluded[i] = true;
    }
    ++i;
  }
  double total = 0.0;
  for (std::uint64_t j = 0; j < logw.size(); ++j) {
    if (!excluded[j]) total += std::exp(logw[j] - max_logw);
  }
  GibbsTable t;
  t.sites_ = g.site_count();
  t.log_z_ = max_logw + std::log(total);
  t.p_.assign(logw.size(), 0.0);
  for (std::uint64_t j = 0; j < logw.size(); ++j) {
    if (!excluded[j]) t.p_[j] = std::exp(logw[j] - t.log_z_);
  }
  return t;
}

// --- local update rule -------------------------------------------------------

namespace {

double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

LocalUpdate::LocalUpdate(const ModelSpec& m, std::size_t degree)
    : degree_(degree), resets_(m.rule == RateRule::heat_bath) {
  if (degree > kMaxDegree) throw InvalidArgument("lattice degree exceeds LocalUpdate capacity");
  const int deg = static_cast<int>(degree);
  for (int k = 0; k <= deg; ++k) {
    double p_plus = 0.0;
    double rate[2] = {0.0, 0.0};  // [current spin is -1, current spin is +1]
    if (m.family == Family::hardcore) {
      p_plus = k == 0 ? m.beta / (1.0 + m.beta) : 0.0;
      if (m.rule == RateRule::heat_bath) {
        rate[0] = p_plus;
        rate[1] = 1.0 - p_plus;
      } else {
        rate[0] = k == 0 ? std::min(1.0, m.beta) : 0.0;
        rate[1] = k == 0 ? (m.beta <= 1.0 ? 1.0 : 1.0 / m.beta) : 1.0;
      }
    } else {
      const double coupling = m.family == Family::ising_ferro ? m.beta : -m.beta;
      const double field = m.h + coupling * static_cast<double>(2 * k - deg);
      // The spin s at x sees the Gibbs ratio mu(s^x)/mu(s) = exp(-2 s field).
      p_plus = logistic(2.0 * field);
      if (m.rule == RateRule::heat_bath) {
        rate[0] = p_plus;
        rate[1] = 1.0 - p_plus;
      } else {
        rate[0] = std::min(1.0, std::exp(2.0 * field));
        rate[1] = std::min(1.0, std::exp(-2.0 * field));
      }
    }
    plus_prob_[k] = p_plus;
    for (int cur = 0; cur < 2; ++cur) {
      rate_[cur][k] = rate[cur];
      Entry e;
      if (m.rule == RateRule::heat_bath) {
        e = {p_plus, true, false};
      } else {
        e = {rate[cur], cur == 0, cur == 1};
      }
      table_[cur][k] = e;
    }
  }
}

double flip_rate(const ModelSpec& m, const TorusGeometry& g, const SpinConfiguration& sigma, Site x) {
  const LocalUpdate rule(m, g.degree());
  return rule.flip_rate(sigma.plus(x), plus_neighbors(g, sigma, x));
}

double check_detailed_balance(const ModelSpec& m, const TorusGeometry& g, std::size_t samples,
                              std::uint64_t seed) {
  const GibbsTable mu = gibbs_table(m, g);
  const LocalUpdate rule(m, g.degree());
  const std::size_t n = g.site_count();
  auto residual = [&](std::uint64_t index, Site x) {
    const auto s = SpinConfiguration::from_index(index, n);
    auto t = s;
    t.flip(x);
    const double lhs = mu[index] * rule.flip_rate(s.plus(x), plus_neighbors(g, s, x));
    const double rhs = mu[t.to_index()] * rule.flip_rate(t.plus(x), plus_neighbors(g, t, x));
    return std::abs(lhs - rhs);
  };
  double worst = 0.0;
  const std::uint64_t states = std::uint64_t{1} << n;
  if (states * n <= 1'000'000) {
    for (std::uint64_t i = 0; i < states; ++i) {
      for (Site x = 0; x < n; ++x) worst = std::max(worst, residual(i, x));
    }
  }
  Rng rng(seed);
  for (std::size_t k = 0; k < samples; ++k) {
    const std::uint64_t i = rng.uniform_index(states);
    const auto x = static_cast<Site>(rng.uniform_index(n));
    worst = std::max(worst, residual(i, x));
  }
  return worst;
}

ParityMask parity_mask(const TorusGeometry& g) {
  if (!g.bipartite()) {
    throw InvalidArgument("parity mask requires every side to be even (torus " + g.describe() +
                          " has an odd cycle)");
  }
  ParityMask mask;
  mask.odd_.resize(g.site_count());
  for (Site s = 0; s < g.site_count(); ++s) {
    std::size_t sum = 0;
    for (auto c : g.coords(s)) sum += c;
    mask.odd_[s] = sum % 2 == 1;
  }
  return mask;
}

bool partial_order_leq(const SpinConfiguration& a, const SpinConfiguration& b, const ParityMask* mask) {
  if (a.size() != b.size()) throw InvalidArgument("partial order: size mismatch");
  if (mask && mask->size() != a.size()) throw InvalidArgument("partial order: mask size mismatch");
  for (std::size_t v = 0; v < a.size(); ++v) {
    const bool reversed = mask && mask->odd(static_cast<Site>(v));
    const int lo = reversed ? b.spin(v) : a.spin(v);
    const int hi = reversed ? a.spin(v) : b.spin(v);
    if (lo > hi) return false;
  }
  return true;
}

bool is_monotone_instance(const ModelSpec& m, const TorusGeometry& g) {
  if (m.rule != RateRule::heat_bath) return false;
  if (m.family == Family::ising_ferro) return true;
  return g.bipartite();
}

MonotoneFrame monotone_frame(const ModelSpec& m, const TorusGeometry& g) {
  if (m.rule != RateRule::heat_bath) {
    throw InvalidArgument("monotone coupling requires the heat-bath rule");
  }
  const std::size_t n = g.site_count();
  MonotoneFrame f;
  if (m.family == Family::ising_ferro) {
    f.top = SpinConfiguration::all_plus(n);
    f.bottom = SpinConfiguration::all_minus(n);
    return f;
  }
  if (!g.bipartite()) {
    throw InvalidArgument(to_string(m.family) + " is monotone only on bipartite tori (even sides)");
  }
  f.mask = parity_mask(g);
  f.top = SpinConfiguration(n);
  f.bottom = SpinConfiguration(n);
  for (Site s = 0; s < n; ++s) {
    f.top.set(s, f.mask->even(s));
    f.bottom.set(s, f.mask->odd(s));
  }
  return f;
}

}  // namespace cutoff
