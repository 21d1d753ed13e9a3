#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cutoff/lattice.hpp"

namespace cutoff {

enum class Family { ising_ferro, ising_antiferro, hardcore };
enum class RateRule { heat_bath, metropolis };

std::string to_string(Family f);
std::string to_string(RateRule r);
Family parse_family(const std::string& s);
RateRule parse_rate_rule(const std::string& s);

// For hardcore, `beta` is the fugacity and spin +1 marks an occupied site.
struct ModelSpec {
  Family family = Family::ising_ferro;
  double beta = 0.0;
  double h = 0.0;
  RateRule rule = RateRule::heat_bath;

  static ModelSpec ising(double beta, double h = 0.0, RateRule rule = RateRule::heat_bath) {
    return make(Family::ising_ferro, beta, h, rule);
  }
  static ModelSpec antiferro(double beta, double h = 0.0, RateRule rule = RateRule::heat_bath) {
    return make(Family::ising_antiferro, beta, h, rule);
  }
  static ModelSpec hardcore(double fugacity, RateRule rule = RateRule::heat_bath) {
    return make(Family::hardcore, fugacity, 0.0, rule);
  }
  static ModelSpec make(Family family, double beta, double h, RateRule rule);

  std::string describe() const;
};

// Gibbs log-weight; nullopt marks a hardcore configuration with two adjacent
// occupied sites (probability exactly zero).
std::optional<double> gibbs_log_weight(const ModelSpec& m, const TorusGeometry& g,
                                       const SpinConfiguration& sigma);

// Stationary law over all 2^|V| packed configurations.
class GibbsTable {
 public:
  std::size_t site_count() const noexcept { return sites_; }
  double log_partition() const noexcept { return log_z_; }
  const std::vector<double>& probabilities() const noexcept { return p_; }
  double operator[](std::uint64_t index) const { return p_[index]; }
  double probability(const SpinConfiguration& s) const { return p_[s.to_index()]; }

 private:
  friend GibbsTable gibbs_table(const ModelSpec&, const TorusGeometry&, std::size_t);
  std::size_t sites_ = 0;
  double log_z_ = 0.0;
  std::vector<double> p_;
};

GibbsTable gibbs_table(const ModelSpec& m, const TorusGeometry& g,
                       std::size_t cap = kEnumerationCap);

// Number of +1 neighbors of x.
inline int plus_neighbors(const TorusGeometry& g, const SpinConfiguration& s, Site x) {
  int k = 0;
  g.for_each_neighbor(x, [&](Site y) { k += s.plus(y) ? 1 : 0; });
  return k;
}

// Single-site update rule compiled into lookup tables indexed by the current
// spin and the number of +1 neighbors. Heat-bath: the new spin is +1 iff
// u < P(+1 | neighbors). Metropolis: the spin flips iff u < c(x, sigma).
class LocalUpdate {
 public:
  static constexpr std::size_t kMaxDegree = 16;

  LocalUpdate(const ModelSpec& m, std::size_t degree);

  bool next_spin(bool current_plus, int plus_neighbors, double u) const noexcept {
    const Entry& e = table_[current_plus ? 1 : 0][static_cast<std::size_t>(plus_neighbors)];
    return u < e.threshold ? e.below : e.above;
  }

  // Rate at which the spin at x flips, c(x, sigma).
  double flip_rate(bool current_plus, int plus_neighbors) const noexcept {
    return rate_[current_plus ? 1 : 0][static_cast<std::size_t>(plus_neighbors)];
  }

  // Heat-bath probability of setting +1 (the Gibbs conditional).
  double plus_probability(int plus_neighbors) const noexcept {
    return plus_prob_[static_cast<std::size_t>(plus_neighbors)];
  }

  // True when the new spin never depends on the current one.
  bool resets_site() const noexcept { return resets_; }
  std::size_t degree() const noexcept { return degree_; }

 private:
  struct Entry {
    double threshold = 0.0;
    bool below = false;
    bool above = false;
  };
  std::size_t degree_;
  bool resets_;
  std::array<std::array<Entry, kMaxDegree + 1>, 2> table_{};
  std::array<std::array<double, kMaxDegree + 1>, 2> rate_{};
  std::array<double, kMaxDegree + 1> plus_prob_{};
};

// Transition rate c(x, sigma) for flipping the spin at x.
double flip_rate(const ModelSpec& m, const TorusGeometry& g, const SpinConfiguration& sigma, Site x);

// Max |mu(s) c(x,s) - mu(s^x) c(x,s^x)| over sampled (s, x) pairs, plus every
// pair when 2^|V| * |V| <= 1e6.
double check_detailed_balance(const ModelSpec& m, const TorusGeometry& g, std::size_t samples,
                              std::uint64_t seed);

// Coordinate-sum parity per site (true = odd).
class ParityMask {
 public:
  std::size_t size() const noexcept { return odd_.size(); }
  bool odd(Site s) const { return odd_[s]; }
  bool even(Site s) const { return !odd_[s]; }

 private:
  friend ParityMask parity_mask(const TorusGeometry&);
  std::vector<bool> odd_;
};

ParityMask parity_mask(const TorusGeometry& g);

// a <= b pointwise, or a <=* b (reversed on odd sites) when a mask is given.
bool partial_order_leq(const SpinConfiguration& a, const SpinConfiguration& b,
                       const ParityMask* mask = nullptr);

// Order and extreme states under which heat-bath dynamics is monotone:
// the plain order for ferromagnetic Ising, the parity-twisted order for the
// anti-ferromagnet and hardcore gas on bipartite tori.
struct MonotoneFrame {
  std::optional<ParityMask> mask;
  SpinConfiguration top;
  SpinConfiguration bottom;

  bool leq(const SpinConfiguration& a, const SpinConfiguration& b) const {
    return partial_order_leq(a, b, mask ? &*mask : nullptr);
  }
};

bool is_monotone_instance(const ModelSpec& m, const TorusGeometry& g);
MonotoneFrame monotone_frame(const ModelSpec& m, const TorusGeometry& g);

}  // namespace cutoff
