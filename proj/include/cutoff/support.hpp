#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cutoff/dynamics.hpp"
#include "cutoff/lattice.hpp"
#include "cutoff/model.hpp"
#include "cutoff/parallel.hpp"

namespace cutoff {

// Tiling of a torus into blocks of side b, each enlarged by a halo of width w
// and evolved on its own periodic torus of side b + 2w (the barrier).
class BlockPartition {
 public:
  struct Block {
    std::vector<std::size_t> block_coords;
    Region sites;                    // B, in base indexing
    std::vector<Site> plus_to_base;  // psi^{-1}: B+ torus site -> base site
  };

  static BlockPartition build(const TorusGeometry& g, std::size_t block_side, std::size_t halo);

  const TorusGeometry& base() const noexcept { return base_; }
  const TorusGeometry& plus_geometry() const noexcept { return plus_; }
  std::size_t block_side() const noexcept { return block_side_; }
  std::size_t halo() const noexcept { return halo_; }
  std::size_t block_count() const noexcept { return blocks_.size(); }
  const Block& block(std::size_t i) const { return blocks_.at(i); }

  std::size_t block_of(Site u) const { return block_of_[u]; }
  // psi_{B(u)}(u): the B+ torus site carrying u's output.
  Site own_image(Site u) const { return own_image_[u]; }

  struct Image {
    std::uint32_t block;
    Site plus_site;
  };
  // Every B+ torus site that mirrors base site s.
  std::span<const Image> images(Site s) const {
    return {images_.data() + image_offsets_[s], image_offsets_[s + 1] - image_offsets_[s]};
  }

  // Blocks whose enlarged block intersects block i (the 3^d neighborhood N(B)
  // when halo <= block side).
  const std::vector<std::size_t>& influencers(std::size_t i) const { return influencers_.at(i); }

 private:
  BlockPartition(TorusGeometry base, TorusGeometry plus) : base_(std::move(base)), plus_(std::move(plus)) {}

  TorusGeometry base_;
  TorusGeometry plus_;
  std::size_t block_side_ = 0;
  std::size_t halo_ = 0;
  std::vector<Block> blocks_;
  std::vector<std::uint32_t> block_of_;
  std::vector<Site> own_image_;
  std::vector<std::size_t> image_offsets_;
  std::vector<Image> images_;
  std::vector<std::vector<std::size_t>> influencers_;
};

// State of the barrier dynamics: one configuration per enlarged block.
class BarrierState {
 public:
  BarrierState(const BlockPartition& p, const LocalUpdate& rule, const SpinConfiguration& x0);

  void apply(Site s, double u) {
    for (const auto& img : p_.images(s)) apply_event(rule_, p_.plus_geometry(), tori_[img.block], img.plus_site, u);
  }
  bool output(Site u) const { return tori_[p_.block_of(u)].plus(p_.own_image(u)); }
  SpinConfiguration pull_back() const;
  const std::vector<SpinConfiguration>& tori() const noexcept { return tori_; }

 private:
  const BlockPartition& p_;
  const LocalUpdate& rule_;
  std::vector<SpinConfiguration> tori_;
};

SpinConfiguration run_barrier_dynamics(const ModelSpec& m, const BlockPartition& p,
                                       const SpinConfiguration& x0, const UpdateSequence& w);

struct DiscrepancyEstimate {
  std::size_t replicas = 0;
  std::size_t discrepant = 0;
  double fraction = 0.0;
  double ci_low = 0.0;  // Wilson 95% interval
  double ci_high = 0.0;
};

// Fraction of replicas in which the barrier dynamics and the true dynamics
// differ on some site at some event time in [0, t]. Starts are uniform
// random configurations.
DiscrepancyEstimate coupling_discrepancy(const ModelSpec& m, const BlockPartition& p, double t,
                                         std::size_t replicas, std::uint64_t seed,
                                         Execution ex = Execution::parallel);

enum class SupportMethod { exact, block_certificate, dependency_paths };
std::string to_string(SupportMethod m);

struct SupportSet {
  Region region;
  SupportMethod method = SupportMethod::exact;
  double t_end = 0.0;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kExactSupportCap = 20;

// Minimal support of g_W by tabulating g_W on all 2^|V| inputs. The
// partition overload uses the barrier dynamics, the geometry overload the
// plain dynamics.
SupportSet exact_support(const ModelSpec& m, const BlockPartition& p, const UpdateSequence& w,
                         Execution ex = Execution::parallel);
SupportSet exact_support(const ModelSpec& m, const TorusGeometry& g, const UpdateSequence& w,
                         Execution ex = Execution::parallel);

// Per-block first time at which the extreme chains on the enlarged block
// coalesce (nullopt: not by the end of the events).
std::vector<std::optional<double>> block_coalescence_times(const ModelSpec& m, const BlockPartition& p,
                                                           const UpdateSequence& w);
std::vector<std::optional<double>> block_coalescence_times(const ModelSpec& m, const BlockPartition& p,
                                                           std::uint64_t seed, double t_end);

// Union of blocks with a non-coalesced influencer at time t.
Region block_support_at(const BlockPartition& p, const std::vector<std::optional<double>>& coalesced_at,
                        double t);

// Sound over-approximation of the barrier-dynamics support for monotone
// instances: a block is certified support-free when every influencing
// enlarged block has coalesced from its extremes.
SupportSet support_superset_blocks(const ModelSpec& m, const BlockPartition& p, const UpdateSequence& w);

// Reverse-time dependency closure on the plain dynamics. When updates reset
// the site (heat-bath) the updated site is replaced by its neighbors,
// otherwise the neighbors are added to it.
SupportSet support_superset_paths(const TorusGeometry& g, const UpdateSequence& w, RateRule rule);

struct SparsityThresholds {
  std::size_t max_diameter = 0;    // D
  std::size_t min_separation = 0;  // S
  std::size_t max_components = 0;  // L

  // D = ceil(log^3 n), S = ceil(2 d log^2 n), L = ceil((n / log^5 n)^d).
  static SparsityThresholds defaults(std::size_t n, std::size_t d);
};

// b = divisor of n closest to ceil(log^2 n); w = ceil(log^{3/2} n).
std::size_t default_block_side(std::size_t n);
std::size_t default_halo(std::size_t n);

struct SparsityReport {
  enum class Clause { none, component_count, diameter };
  struct Component {
    std::size_t size = 0;
    std::size_t diameter = 0;
    bool diameter_exact = true;  // false: diameter is a witness exceeding D
  };
  std::vector<Component> components;
  std::optional<std::size_t> min_separation;  // smallest distance between distinct components
  SparsityThresholds thresholds;
  bool sparse = true;
  Clause violated = Clause::none;
};
std::string to_string(SparsityReport::Clause c);

SparsityReport classify_sparse(const TorusGeometry& g, const SupportSet& s, const SparsityThresholds& t);

struct SupportMap {
  std::vector<std::size_t> sides;
  std::vector<double> times;
  std::uint64_t seed = 0;
  std::vector<double> last_support_time;  // per site; 0 if never in support on the grid
  std::vector<double> support_fraction;   // per grid time
  std::vector<SparsityReport> sparsity;   // per grid time
  std::vector<Region> supports;           // per grid time
};

SupportMap support_map(const ModelSpec& m, const BlockPartition& p, std::uint64_t seed,
                       const std::vector<double>& times, const SparsityThresholds& thresholds);
std::vector<SupportMap> support_maps(const ModelSpec& m, const BlockPartition& p,
                                     const std::vector<std::uint64_t>& seeds,
                                     const std::vector<double>& times,
                                     const SparsityThresholds& thresholds,
                                     Execution ex = Execution::parallel);

// P2 grayscale (value / max time scaled to 0..255) and CSV (x, y, last_support_time).
void write_support_pgm(std::ostream& os, const SupportMap& map);
void write_support_csv(std::ostream& os, const SupportMap& map);
// P2 binary mask of one support region (255 = in support).
void write_region_pgm(std::ostream& os, const TorusGeometry& g, const Region& r);

}  // namespace cutoff
