#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cutoff/lattice.hpp"
#include "cutoff/model.hpp"
#include "cutoff/rng.hpp"

namespace cutoff {

struct UpdateEvent {
  double time = 0.0;
  Site site = 0;
  double u = 0.0;

  friend bool operator==(const UpdateEvent&, const UpdateEvent&) = default;
};

// Lazy source of the update events of a torus with `sites` sites: a Poisson
// process of rate |V| with uniform site labels and uniform variates. Events
// for horizon t are a prefix of the events for any longer horizon.
class EventStream {
 public:
  EventStream(std::size_t sites, std::uint64_t seed) : sites_(sites), rng_(seed) {}

  UpdateEvent next() {
    time_ += rng_.exponential(static_cast<double>(sites_));
    UpdateEvent e;
    e.time = time_;
    e.site = static_cast<Site>(rng_.uniform_index(sites_));
    e.u = rng_.uniform01();
    return e;
  }

 private:
  std::size_t sites_;
  Rng rng_;
  double time_ = 0.0;
};

class UpdateSequence {
 public:
  UpdateSequence() = default;
  UpdateSequence(std::vector<std::size_t> sides, double t_end, std::uint64_t seed,
                 std::vector<UpdateEvent> events);

  const std::vector<std::size_t>& sides() const noexcept { return sides_; }
  std::size_t site_count() const noexcept;
  double t_end() const noexcept { return t_end_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<UpdateEvent>& events() const noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }

  // Events with time <= t, as a sequence with horizon t.
  UpdateSequence prefix(double t) const;
  bool compatible_with(const TorusGeometry& g) const;

  friend bool operator==(const UpdateSequence&, const UpdateSequence&) = default;

 private:
  std::vector<std::size_t> sides_;
  double t_end_ = 0.0;
  std::uint64_t seed_ = 0;
  std::vector<UpdateEvent> events_;
};

UpdateSequence sample_update_sequence(const TorusGeometry& g, double t_end, std::uint64_t seed);

// Binary record stream: 8-byte magic, header (u32 d, u32 sides[d], f64 t_end,
// u64 seed, u64 count), then per event f64 time, u32 site, f64 u; all
// little-endian.
inline constexpr char kUpdateSequenceMagic[8] = {'C', 'U', 'T', 'W', 'S', 'Q', '0', '1'};
void write_update_sequence(std::ostream& os, const UpdateSequence& w);
UpdateSequence read_update_sequence(std::istream& is);

// Applies one event in place.
inline void apply_event(const LocalUpdate& rule, const TorusGeometry& g, SpinConfiguration& s,
                        Site site, double u) {
  s.set(site, rule.next_spin(s.plus(site), plus_neighbors(g, s, site), u));
}

// g_W(x0): the deterministic image of x0 under the events of W.
SpinConfiguration apply_updates(const ModelSpec& m, const TorusGeometry& g, SpinConfiguration x0,
                                const UpdateSequence& w);

// Every start replays W; snapshots[c][k] is chain c at record_times[k]
// (record_times must be nondecreasing).
std::vector<std::vector<SpinConfiguration>> run_grand_coupling(
    const ModelSpec& m, const TorusGeometry& g, const std::vector<SpinConfiguration>& starts,
    const UpdateSequence& w, const std::vector<double>& record_times);

// Pair of chains under shared updates with an O(1) disagreement counter.
class CoupledPair {
 public:
  CoupledPair(const TorusGeometry& g, const LocalUpdate& rule, SpinConfiguration upper,
              SpinConfiguration lower);

  void apply(Site site, double u) {
    const bool before = upper_.plus(site) != lower_.plus(site);
    apply_event(rule_, g_, upper_, site, u);
    apply_event(rule_, g_, lower_, site, u);
    const bool after = upper_.plus(site) != lower_.plus(site);
    disagreements_ += static_cast<long>(after) - static_cast<long>(before);
  }

  std::size_t disagreements() const noexcept { return static_cast<std::size_t>(disagreements_); }
  bool coalesced() const noexcept { return disagreements_ == 0; }
  const SpinConfiguration& upper() const noexcept { return upper_; }
  const SpinConfiguration& lower() const noexcept { return lower_; }

 private:
  const TorusGeometry& g_;
  const LocalUpdate& rule_;
  SpinConfiguration upper_;
  SpinConfiguration lower_;
  long disagreements_ = 0;
};

// First event time at which the extreme chains of the monotone frame agree
// everywhere; nullopt if they are still apart at t_cap.
std::optional<double> coalescence_time(const ModelSpec& m, const TorusGeometry& g,
                                       std::uint64_t seed, double t_cap);

struct CftpOptions {
  std::size_t max_doublings = 40;
  // Sites held fixed at their value in `pinned_values` (conditioned sampling).
  std::vector<Site> pinned_sites;
  SpinConfiguration pinned_values;
};

struct CftpResult {
  SpinConfiguration sample;
  double window = 0.0;  // length of the final backward window
};

// Exact stationary sample by monotone coupling from the past with windows of
// length 1, 2, 4, ...; randomness of each window segment is fixed by the seed.
CftpResult cftp_sample(const ModelSpec& m, const TorusGeometry& g, std::uint64_t seed,
                       const CftpOptions& options = {});

}  // namespace cutoff
