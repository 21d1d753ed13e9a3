#include "cutoff/lattice.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace cutoff {

TorusGeometry TorusGeometry::build(std::size_t dimension, std::vector<std::size_t> sides) {
  if (dimension == 0) throw InvalidArgument("torus dimension must be positive");
  if (sides.size() != dimension) {
    throw InvalidArgument("torus: expected " + std::to_string(dimension) + " side lengths, got " +
                          std::to_string(sides.size()));
  }
  std::size_t count = 1;
  for (std::size_t s : sides) {
    if (s < kMinSide) throw InvalidArgument("torus side " + std::to_string(s) + " is below 3");
    if (count > std::numeric_limits<Site>::max() / s) {
      throw InvalidArgument("torus site count overflows the site index type");
    }
    count *= s;
  }

  TorusGeometry g;
  g.sides_ = std::move(sides);
  g.site_count_ = count;
  g.strides_.assign(dimension, 1);
  for (std::size_t a = dimension - 1; a > 0; --a) g.strides_[a - 1] = g.strides_[a] * g.sides_[a];

  if (count <= kNeighborTableLimit) {
    const std::size_t deg = g.degree();
    g.neighbor_table_.resize(count * deg);
    for (std::size_t s = 0; s < count; ++s) {
      for (std::size_t k = 0; k < deg; ++k) {
        g.neighbor_table_[s * deg + k] = g.neighbor(static_cast<Site>(s), k);
      }
    }
  }
  return g;
}

std::vector<std::size_t> TorusGeometry::coords(Site s) const {
  std::vector<std::size_t> c(dimension());
  std::size_t rest = s;
  for (std::size_t a = 0; a < dimension(); ++a) {
    c[a] = rest / strides_[a];
    rest %= strides_[a];
  }
  return c;
}

Site TorusGeometry::site_at(std::span<const std::size_t> coords) const {
  std::size_t s = 0;
  for (std::size_t a = 0; a < dimension(); ++a) s += (coords[a] % sides_[a]) * strides_[a];
  return static_cast<Site>(s);
}

Site TorusGeometry::site_at_wrapped(std::span<const long> coords) const {
  std::size_t s = 0;
  for (std::size_t a = 0; a < dimension(); ++a) {
    const long n = static_cast<long>(sides_[a]);
    const long c = ((coords[a] % n) + n) % n;
    s += static_cast<std::size_t>(c) * strides_[a];
  }
  return static_cast<Site>(s);
}

Site TorusGeometry::translate(Site s, std::span<const long> shift) const {
  auto c = coords(s);
  std::vector<long> shifted(dimension());
  for (std::size_t a = 0; a < dimension(); ++a) shifted[a] = static_cast<long>(c[a]) + shift[a];
  return site_at_wrapped(shifted);
}

Site TorusGeometry::neighbor(Site s, std::size_t k) const {
  const std::size_t axis = k / 2;
  const std::size_t n = sides_[axis];
  const std::size_t stride = strides_[axis];
  const std::size_t c = (s / stride) % n;
  std::size_t nc = (k % 2 == 0) ? (c + n - 1) % n : (c + 1) % n;
  return static_cast<Site>(s - c * stride + nc * stride);
}

std::size_t TorusGeometry::distance(Site u, Site v, Metric metric) const {
  std::size_t total = 0;
  std::size_t ru = u;
  std::size_t rv = v;
  for (std::size_t a = 0; a < dimension(); ++a) {
    const std::size_t cu = ru / strides_[a];
    const std::size_t cv = rv / strides_[a];
    ru %= strides_[a];
    rv %= strides_[a];
    const std::size_t diff = cu > cv ? cu - cv : cv - cu;
    const std::size_t wrapped = std::min(diff, sides_[a] - diff);
    total = metric == Metric::graph_l1 ? total + wrapped : std::max(total, wrapped);
  }
  return total;
}

bool TorusGeometry::bipartite() const noexcept {
  return std::all_of(sides_.begin(), sides_.end(), [](std::size_t s) { return s % 2 == 0; });
}

std::string TorusGeometry::describe() const {
  std::ostringstream os;
  for (std::size_t a = 0; a < dimension(); ++a) os << (a ? "x" : "") << sides_[a];
  return os.str();
}

// --- SpinConfiguration -------------------------------------------------------

SpinConfiguration::SpinConfiguration(std::size_t size, bool plus)
    : size_(size), words_((size + 63) / 64, plus ? ~std::uint64_t{0} : 0) {
  if (plus && size % 64 != 0) words_.back() &= (std::uint64_t{1} << (size % 64)) - 1;
}

SpinConfiguration SpinConfiguration::from_index(std::uint64_t packed, std::size_t size) {
  if (size > 64) throw InvalidArgument("from_index supports at most 64 sites");
  SpinConfiguration c(size);
  if (size > 0) c.words_[0] = size == 64 ? packed : packed & ((std::uint64_t{1} << size) - 1);
  return c;
}

SpinConfiguration SpinConfiguration::from_spins(std::span<const int> spins) {
  SpinConfiguration c(spins.size());
  for (std::size_t i = 0; i < spins.size(); ++i) {
    if (spins[i] != 1 && spins[i] != -1) throw InvalidArgument("spins must be +1 or -1");
    c.set(i, spins[i] == 1);
  }
  return c;
}

std::uint64_t SpinConfiguration::to_index() const {
  if (size_ > 64) throw InvalidArgument("to_index supports at most 64 sites");
  return size_ == 0 ? 0 : words_[0];
}

std::vector<int> SpinConfiguration::to_spins() const {
  std::vector<int> out(size_);
  for (std::size_t i = 0; i < size_; ++i) out[i] = spin(i);
  return out;
}

std::size_t SpinConfiguration::count_plus() const noexcept {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

std::size_t SpinConfiguration::hamming(const SpinConfiguration& other) const {
  if (other.size_ != size_) throw InvalidArgument("hamming: size mismatch");
  std::size_t n = 0;
  for (std::size_t i = 0; i < words_.size(); ++i) {
    n += static_cast<std::size_t>(std::popcount(words_[i] ^ other.words_[i]));
  }
  return n;
}

// --- Region ------------------------------------------------------------------

Region::Region(const TorusGeometry& g, std::vector<Site> sites)
    : universe_(g.site_count()), sites_(std::move(sites)) {
  std::sort(sites_.begin(), sites_.end());
  sites_.erase(std::unique(sites_.begin(), sites_.end()), sites_.end());
  if (!sites_.empty() && sites_.back() >= universe_) {
    throw InvalidArgument("region: site index out of range");
  }
}

Region Region::all(const TorusGeometry& g) {
  std::vector<Site> s(g.site_count());
  std::iota(s.begin(), s.end(), Site{0});
  return Region(g, std::move(s));
}

bool Region::contains(Site s) const { return std::binary_search(sites_.begin(), sites_.end(), s); }

bool Region::subset_of(const Region& other) const {
  return std::includes(other.sites_.begin(), other.sites_.end(), sites_.begin(), sites_.end());
}

ConfigurationRange enumerate_configurations(const TorusGeometry& g, std::size_t cap) {
  if (g.site_count() > cap || g.site_count() > 62) {
    throw SizeCapError("enumeration of " + std::to_string(g.site_count()) +
                       " sites exceeds the cap of " + std::to_string(cap));
  }
  return ConfigurationRange(g.site_count());
}

// --- components --------------------------------------------------------------

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[std::max(a, b)] = std::min(a, b);
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

std::vector<Region> region_components(const TorusGeometry& g, const Region& region,
                                      std::size_t linkage_distance) {
  const auto sites = region.sites();
  const std::size_t k = sites.size();
  if (k == 0) return {};
  DisjointSets sets(k);

  if (linkage_distance == 0) {
    // Distinct sites are never within distance 0.
  } else {
    // Bucket sites into cells of side c with d*(c-1) <= linkage so that every
    // pair inside one cell is linked; then compare only across nearby cells.
    const std::size_t d = g.dimension();
    const std::size_t cell = std::max<std::size_t>(1, linkage_distance / d + 1);
    std::vector<std::size_t> cells_per_axis(d);
    for (std::size_t a = 0; a < d; ++a) cells_per_axis[a] = (g.side(a) + cell - 1) / cell;

    auto cell_key = [&](const std::vector<std::size_t>& cc) {
      std::size_t key = 0;
      for (std::size_t a = 0; a < d; ++a) key = key * cells_per_axis[a] + cc[a];
      return key;
    };
    std::unordered_map<std::size_t, std::vector<std::size_t>> buckets;
    std::vector<std::vector<std::size_t>> site_cell(k);
    for (std::size_t i = 0; i < k; ++i) {
      auto c = g.coords(sites[i]);
      for (auto& x : c) x /= cell;
      buckets[cell_key(c)].push_back(i);
      site_cell[i] = std::move(c);
    }
    for (auto& [key, members] : buckets) {
      for (std::size_t j = 1; j < members.size(); ++j) sets.unite(members[0], members[j]);
    }

    // Range of cell offsets that can contain a site within the linkage distance.
    const long reach = static_cast<long>(linkage_distance / cell + 1);
    std::vector<std::vector<long>> offsets{{}};
    for (std::size_t a = 0; a < d; ++a) {
      std::vector<std::vector<long>> next;
      const long span = std::min<long>(reach, static_cast<long>(cells_per_axis[a]) / 2);
      for (const auto& o : offsets) {
        for (long delta = -span; delta <= span; ++delta) {
          auto e = o;
          e.push_back(delta);
          next.push_back(std::move(e));
        }
      }
      offsets = std::move(next);
    }

    std::vector<std::size_t> probe(d);
    for (auto& [key, members] : buckets) {
      const auto& origin = site_cell[members[0]];
      for (const auto& o : offsets) {
        for (std::size_t a = 0; a < d; ++a) {
          const long n = static_cast<long>(cells_per_axis[a]);
          probe[a] = static_cast<std::size_t>(((static_cast<long>(origin[a]) + o[a]) % n + n) % n);
        }
        const std::size_t other_key = cell_key(probe);
        if (other_key <= key) continue;
        auto it = buckets.find(other_key);
        if (it == buckets.end()) continue;
        if (sets.find(members[0]) == sets.find(it->second[0])) continue;
        bool linked = false;
        for (std::size_t i : members) {
          for (std::size_t j : it->second) {
            if (g.distance(sites[i], sites[j], Metric::graph_l1) <= linkage_distance) {
              sets.unite(i, j);
              linked = true;
              break;
            }
          }
          if (linked) break;
        }
      }
    }
  }

  std::unordered_map<std::size_t, std::vector<Site>> groups;
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t root = sets.find(i);
    auto [it, inserted] = groups.try_emplace(root);
    if (inserted) order.push_back(root);
    it->second.push_back(sites[i]);
  }
  std::vector<Region> out;
  out.reserve(order.size());
  for (std::size_t root : order) out.emplace_back(g, std::move(groups[root]));
  return out;
}

}  // namespace cutoff
