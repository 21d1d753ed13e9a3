#pragma once

// Hand-rolled random instance generators for property tests.

#include <cmath>
#include <vector>

#include "cutoff/dynamics.hpp"
#include "cutoff/lattice.hpp"
#include "cutoff/model.hpp"
#include "cutoff/rng.hpp"

namespace gen {

using namespace cutoff;

// Torus with at most `max_sites` sites, d in {1, 2}.
inline TorusGeometry torus(Rng& r, std::size_t max_sites) {
  if (max_sites >= 9 && r.bernoulli(0.4)) {
    for (;;) {
      const std::size_t a = 3 + r.uniform_index(4), b = 3 + r.uniform_index(4);
      if (a * b <= max_sites) return TorusGeometry::build(2, {a, b});
    }
  }
  return TorusGeometry::cube(1, 3 + r.uniform_index(max_sites - 2));
}

inline RateRule rule(Rng& r) { return r.bernoulli(0.5) ? RateRule::heat_bath : RateRule::metropolis; }

inline ModelSpec model(Rng& r) {
  switch (r.uniform_index(3)) {
    case 0: return ModelSpec::ising(1.2 * r.uniform01(), r.uniform01() - 0.5, rule(r));
    case 1: return ModelSpec::antiferro(1.2 * r.uniform01(), r.uniform01() - 0.5, rule(r));
    default: return ModelSpec::hardcore(0.1 + 2.0 * r.uniform01(), rule(r));
  }
}

inline SpinConfiguration config(Rng& r, std::size_t n) {
  SpinConfiguration s(n);
  for (std::size_t i = 0; i < n; ++i) s.set(i, r.bernoulli(0.5));
  return s;
}

// Uniform events on [0, t_end] with a given count.
inline UpdateSequence events(Rng& r, const TorusGeometry& g, std::size_t count, double t_end) {
  std::vector<double> times;
  for (std::size_t k = 0; k < count; ++k) times.push_back(t_end * (k + 1) / (count + 1.0));
  std::vector<UpdateEvent> ev;
  for (double t : times) ev.push_back({t, static_cast<Site>(r.uniform_index(g.site_count())), r.uniform01()});
  return UpdateSequence({g.sides().begin(), g.sides().end()}, t_end, 0, ev);
}

// Reference Glauber step written from the model definition, without the
// lookup tables of the library.
inline bool naive_next(const ModelSpec& m, const TorusGeometry& g, const SpinConfiguration& s, Site x, double u) {
  double sum = 0.0;
  int occupied = 0;
  for (std::size_t k = 0; k < g.degree(); ++k) {
    const Site y = g.neighbor(x, k);
    sum += s.spin(y);
    occupied += s.plus(y) ? 1 : 0;
  }
  double p_plus;
  if (m.family == Family::hardcore) {
    p_plus = occupied > 0 ? 0.0 : m.beta / (1.0 + m.beta);
    if (m.rule == RateRule::metropolis) {
      // Leaving a forbidden state (x occupied next to an occupied site) is always accepted.
      const double c = s.plus(x) ? (occupied > 0 ? 1.0 : std::min(1.0, 1.0 / m.beta))
                                 : (occupied > 0 ? 0.0 : std::min(1.0, m.beta));
      return u < c ? !s.plus(x) : s.plus(x);
    }
    return u < p_plus;
  }
  const double j = m.family == Family::ising_antiferro ? -m.beta : m.beta;
  const double field = m.h + j * sum;
  if (m.rule == RateRule::metropolis) {
    const double delta = s.plus(x) ? 2.0 * field : -2.0 * field;  // energy cost of flipping
    const double c = std::min(1.0, std::exp(-delta));
    return u < c ? !s.plus(x) : s.plus(x);
  }
  p_plus = 1.0 / (1.0 + std::exp(-2.0 * field));
  return u < p_plus;
}

inline SpinConfiguration naive_apply(const ModelSpec& m, const TorusGeometry& g, SpinConfiguration x,
                                     const UpdateSequence& w) {
  for (const auto& e : w.events()) x.set(e.site, naive_next(m, g, x, e.site, e.u));
  return x;
}

}  // namespace gen
