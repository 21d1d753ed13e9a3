#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cutoff/error.hpp"

namespace cutoff {

using Site = std::uint32_t;

enum class Metric { graph_l1, linf };

// Periodic d-dimensional lattice (Z/n_1 Z) x ... x (Z/n_d Z) with row-major
// site indexing: the last axis varies fastest.
class TorusGeometry {
 public:
  static constexpr std::size_t kMinSide = 3;
  static constexpr std::size_t kNeighborTableLimit = std::size_t{1} << 20;

  static TorusGeometry build(std::size_t dimension, std::vector<std::size_t> sides);
  // Cube of side n in d dimensions.
  static TorusGeometry cube(std::size_t dimension, std::size_t side) {
    return build(dimension, std::vector<std::size_t>(dimension, side));
  }

  std::size_t dimension() const noexcept { return sides_.size(); }
  std::span<const std::size_t> sides() const noexcept { return sides_; }
  std::size_t side(std::size_t axis) const { return sides_.at(axis); }
  std::size_t site_count() const noexcept { return site_count_; }
  std::size_t degree() const noexcept { return 2 * sides_.size(); }
  bool has_neighbor_table() const noexcept { return !neighbor_table_.empty(); }

  std::vector<std::size_t> coords(Site s) const;
  Site site_at(std::span<const std::size_t> coords) const;
  // Coordinates reduced modulo the sides, so negative offsets wrap.
  Site site_at_wrapped(std::span<const long> coords) const;
  Site translate(Site s, std::span<const long> shift) const;

  // Neighbor k in [0, 2d): axis k/2, direction -1 for even k, +1 for odd k.
  Site neighbor(Site s, std::size_t k) const;

  template <class F>
  void for_each_neighbor(Site s, F&& f) const {
    const std::size_t deg = degree();
    if (!neighbor_table_.empty()) {
      const Site* row = neighbor_table_.data() + static_cast<std::size_t>(s) * deg;
      for (std::size_t k = 0; k < deg; ++k) f(row[k]);
    } else {
      for (std::size_t k = 0; k < deg; ++k) f(neighbor(s, k));
    }
  }

  // Only valid while has_neighbor_table().
  std::span<const Site> neighbors(Site s) const {
    return {neighbor_table_.data() + static_cast<std::size_t>(s) * degree(), degree()};
  }

  std::size_t distance(Site u, Site v, Metric metric) const;
  bool adjacent(Site u, Site v) const { return distance(u, v, Metric::graph_l1) == 1; }

  // Sides must be even for the torus to be bipartite.
  bool bipartite() const noexcept;

  std::string describe() const;

  friend bool operator==(const TorusGeometry& a, const TorusGeometry& b) noexcept {
    return a.sides_ == b.sides_;
  }

 private:
  TorusGeometry() = default;

  std::vector<std::size_t> sides_;
  std::vector<std::size_t> strides_;
  std::size_t site_count_ = 0;
  std::vector<Site> neighbor_table_;
};

// Assignment of +/-1 spins, one bit per site (1 = +1, 0 = -1).
class SpinConfiguration {
 public:
  SpinConfiguration() = default;
  explicit SpinConfiguration(std::size_t size, bool plus = false);

  static SpinConfiguration all_plus(std::size_t size) { return SpinConfiguration(size, true); }
  static SpinConfiguration all_minus(std::size_t size) { return SpinConfiguration(size, false); }
  // Low `size` bits of `packed` (size <= 64).
  static SpinConfiguration from_index(std::uint64_t packed, std::size_t size);
  static SpinConfiguration from_spins(std::span<const int> spins);

  std::size_t size() const noexcept { return size_; }

  bool plus(std::size_t i) const noexcept { return (words_[i >> 6] >> (i & 63)) & 1U; }
  int spin(std::size_t i) const noexcept { return plus(i) ? 1 : -1; }
  void set(std::size_t i, bool plus) noexcept {
    const std::uint64_t mask = std::uint64_t{1} << (i & 63);
    if (plus) {
      words_[i >> 6] |= mask;
    } else {
      words_[i >> 6] &= ~mask;
    }
  }
  void flip(std::size_t i) noexcept { words_[i >> 6] ^= std::uint64_t{1} << (i & 63); }

  std::uint64_t to_index() const;  // size <= 64
  std::vector<int> to_spins() const;
  std::size_t count_plus() const noexcept;
  long magnetization() const noexcept {
    return 2 * static_cast<long>(count_plus()) - static_cast<long>(size_);
  }
  std::size_t hamming(const SpinConfiguration& other) const;

  std::span<const std::uint64_t> words() const noexcept { return words_; }

  friend bool operator==(const SpinConfiguration&, const SpinConfiguration&) = default;

 private:
  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

// Sorted, duplicate-free set of sites of one geometry.
class Region {
 public:
  Region() = default;
  Region(const TorusGeometry& g, std::vector<Site> sites);
  static Region all(const TorusGeometry& g);

  std::span<const Site> sites() const noexcept { return sites_; }
  std::size_t size() const noexcept { return sites_.size(); }
  bool empty() const noexcept { return sites_.empty(); }
  bool contains(Site s) const;
  std::size_t universe() const noexcept { return universe_; }

  bool subset_of(const Region& other) const;

  friend bool operator==(const Region&, const Region&) = default;

 private:
  std::size_t universe_ = 0;
  std::vector<Site> sites_;
};

// Maximum |V| for exhaustive enumeration of configurations.
inline constexpr std::size_t kEnumerationCap = 24;

// All 2^|V| configurations in increasing packed-integer order.
class ConfigurationRange {
 public:
  class iterator {
   public:
    using value_type = SpinConfiguration;
    using difference_type = std::ptrdiff_t;
    iterator() = default;
    iterator(std::uint64_t index, std::size_t size) : index_(index), size_(size) {}
    SpinConfiguration operator*() const { return SpinConfiguration::from_index(index_, size_); }
    iterator& operator++() {
      ++index_;
      return *this;
    }
    iterator operator++(int) {
      auto copy = *this;
      ++index_;
      return copy;
    }
    bool operator==(const iterator& other) const { return index_ == other.index_; }

   private:
    std::uint64_t index_ = 0;
    std::size_t size_ = 0;
  };

  iterator begin() const { return {0, size_}; }
  iterator end() const { return {count_, size_}; }
  std::uint64_t count() const noexcept { return count_; }

 private:
  friend ConfigurationRange enumerate_configurations(const TorusGeometry&, std::size_t);
  ConfigurationRange(std::size_t size) : size_(size), count_(std::uint64_t{1} << size) {}
  std::size_t size_;
  std::uint64_t count_;
};

ConfigurationRange enumerate_configurations(const TorusGeometry& g, std::size_t cap = kEnumerationCap);

// Connected components of `region` under the relation "graph distance <= linkage".
std::vector<Region> region_components(const TorusGeometry& g, const Region& region,
                                      std::size_t linkage_distance);

}  // namespace cutoff
