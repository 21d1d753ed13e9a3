#include "cutoff/dynamics.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

namespace cutoff {

UpdateSequence::UpdateSequence(std::vector<std::size_t> sides, double t_end, std::uint64_t seed,
                               std::vector<UpdateEvent> events)
    : sides_(std::move(sides)), t_end_(t_end), seed_(seed), events_(std::move(events)) {
  const std::size_t n = site_count();
  double last = -1.0;
  for (const auto& e : events_) {
    if (!(e.time > last) || e.time > t_end_ || e.time < 0.0) {
      throw InvalidArgument("update sequence times must be strictly increasing within [0, t_end]");
    }
    if (e.site >= n) throw InvalidArgument("update sequence site out of range");
    if (!(e.u >= 0.0 && e.u < 1.0)) throw InvalidArgument("update variate outside [0, 1)");
    last = e.time;
  }
}

std::size_t UpdateSequence::site_count() const noexcept {
  std::size_t n = sides_.empty() ? 0 : 1;
  for (auto s : sides_) n *= s;
  return n;
}

UpdateSequence UpdateSequence::prefix(double t) const {
  const double horizon = std::min(t, t_end_);
  auto end = std::upper_bound(events_.begin(), events_.end(), horizon,
                              [](double v, const UpdateEvent& e) { return v < e.time; });
  UpdateSequence out;
  out.sides_ = sides_;
  out.t_end_ = horizon;
  out.seed_ = seed_;
  out.events_.assign(events_.begin(), end);
  return out;
}

bool UpdateSequence::compatible_with(const TorusGeometry& g) const {
  return std::equal(sides_.begin(), sides_.end(), g.sides().begin(), g.sides().end());
}

UpdateSequence sample_update_sequence(const TorusGeometry& g, double t_end, std::uint64_t seed) {
  if (!(t_end >= 0.0)) throw InvalidArgument("t_end must be >= 0");
  std::vector<UpdateEvent> events;
  events.reserve(static_cast<std::size_t>(static_cast<double>(g.site_count()) * t_end * 1.05) + 16);
  EventStream stream(g.site_count(), seed);
  for (;;) {
    const UpdateEvent e = stream.next();
    if (e.time > t_end) break;
    events.push_back(e);
  }
  return UpdateSequence({g.sides().begin(), g.sides().end()}, t_end, seed, std::move(events));
}

// --- serialization -----------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little,
              "update sequence serialization assumes a little-endian host");

template <class T>
void put(std::ostream& os, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  os.write(buf, sizeof(T));
}

template <class T>
T get(std::istream& is) {
  char buf[sizeof(T)];
  if (!is.read(buf, sizeof(T))) throw InvalidArgument("truncated update sequence stream");
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

void write_update_sequence(std::ostream& os, const UpdateSequence& w) {
  os.write(kUpdateSequenceMagic, sizeof(kUpdateSequenceMagic));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(w.sides().size()));
  for (auto s : w.sides()) put<std::uint32_t>(os, static_cast<std::uint32_t>(s));
  put<double>(os, w.t_end());
  put<std::uint64_t>(os, w.seed());
  put<std::uint64_t>(os, w.size());
  for (const auto& e : w.events()) {
    put<double>(os, e.time);
    put<std::uint32_t>(os, e.site);
    put<double>(os, e.u);
  }
}

UpdateSequence read_update_sequence(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kUpdateSequenceMagic, 8) != 0) {
    throw InvalidArgument("not an update sequence stream (bad magic)");
  }
  const auto d = get<std::uint32_t>(is);
  if (d == 0 || d > 16) throw InvalidArgument("update sequence: implausible dimension");
  std::vector<std::size_t> sides(d);
  for (auto& s : sides) s = get<std::uint32_t>(is);
  const auto t_end = get<double>(is);
  const auto seed = get<std::uint64_t>(is);
  const auto count = get<std::uint64_t>(is);
  std::vector<UpdateEvent> events;
  events.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 24)));
  for (std::uint64_t i = 0; i < count; ++i) {
    UpdateEvent e;
    e.time = get<double>(is);
    e.site = get<std::uint32_t>(is);
    e.u = get<double>(is);
    events.push_back(e);
  }
  return UpdateSequence(std::move(sides), t_end, seed, std::move(events));
}

// --- replay ------------------------------------------------------------------

namespace {

void require_compatible(const TorusGeometry& g, const SpinConfiguration& x, const UpdateSequence& w) {
  if (x.size() != g.site_count()) throw InvalidArgument("configuration/geometry size mismatch");
  if (!w.compatible_with(g)) throw InvalidArgument("update sequence belongs to another geometry");
}

}  // namespace

SpinConfiguration apply_updates(const ModelSpec& m, const TorusGeometry& g, SpinConfiguration x0,
                                const UpdateSequence& w) {
  require_compatible(g, x0, w);
  const LocalUpdate rule(m, g.degree());
  for (const auto& e : w.events()) apply_event(rule, g, x0, e.site, e.u);
  return x0;
}

std::vector<std::vector<SpinConfiguration>> run_grand_coupling(
    const ModelSpec& m, const TorusGeometry& g, const std::vector<SpinConfiguration>& starts,
    const UpdateSequence& w, const std::vector<double>& record_times) {
  if (!std::is_sorted(record_times.begin(), record_times.end())) {
    throw InvalidArgument("record times must be nondecreasing");
  }
  const LocalUpdate rule(m, g.degree());
  std::vector<std::vector<SpinConfiguration>> out;
  out.reserve(starts.size());
  for (const auto& start : starts) {
    require_compatible(g, start, w);
    SpinConfiguration x = start;
    std::vector<SpinConfiguration> snaps;
    snaps.reserve(record_times.size());
    auto it = w.events().begin();
    for (double t : record_times) {
      for (; it != w.events().end() && it->time <= t; ++it) apply_event(rule, g, x, it->site, it->u);
      snaps.push_back(x);
    }
    out.push_back(std::move(snaps));
  }
  return out;
}

CoupledPair::CoupledPair(const TorusGeometry& g, const LocalUpdate& rule, SpinConfiguration upper,
                         SpinConfiguration lower)
    : g_(g), rule_(rule), upper_(std::move(upper)), lower_(std::move(lower)) {
  disagreements_ = static_cast<long>(upper_.hamming(lower_));
}

std::optional<double> coalescence_time(const ModelSpec& m, const TorusGeometry& g,
                                       std::uint64_t seed, double t_cap) {
  const MonotoneFrame frame = monotone_frame(m, g);
  const LocalUpdate rule(m, g.degree());
  CoupledPair pair(g, rule, frame.top, frame.bottom);
  if (pair.coalesced()) return 0.0;
  EventStream stream(g.site_count(), seed);
  for (;;) {
    const UpdateEvent e = stream.next();
    if (e.time > t_cap) return std::nullopt;
    pair.apply(e.site, e.u);
    if (pair.coalesced()) return e.time;
  }
}

// --- coupling from the past --------------------------------------------------

CftpResult cftp_sample(const ModelSpec& m, const TorusGeometry& g, std::uint64_t seed,
                       const CftpOptions& options) {
  MonotoneFrame frame = monotone_frame(m, g);
  const std::size_t n = g.site_count();
  std::vector<bool> pinned(n, false);
  if (!options.pinned_sites.empty()) {
    if (options.pinned_values.size() != n) throw InvalidArgument("cftp: pinned values size mismatch");
    for (Site s : options.pinned_sites) {
      if (s >= n) throw InvalidArgument("cftp: pinned site out of range");
      pinned[s] = true;
      frame.top.set(s, options.pinned_values.plus(s));
      frame.bottom.set(s, options.pinned_values.plus(s));
    }
  }
  const LocalUpdate rule(m, g.degree());

  // segments[k] holds the events of window segment k: [-1, 0] for k = 0 and
  // [-2^k, -2^(k-1)] for k >= 1, stored as (site, u) in chronological order.
  std::vector<std::vector<std::pair<Site, double>>> segments;
  auto segment_length = [](std::size_t k) { return k == 0 ? 1.0 : std::ldexp(1.0, static_cast<int>(k) - 1); };

  for (std::size_t k = 0; k <= options.max_doublings; ++k) {
    {
      const double len = segment_length(k);
      EventStream stream(n, derive_seed(seed, k));
      std::vector<std::pair<Site, double>> seg;
      for (;;) {
        const UpdateEvent e = stream.next();
        if (e.time > len) break;
        if (!pinned[e.site]) seg.emplace_back(e.site, e.u);
      }
      segments.push_back(std::move(seg));
    }
    CoupledPair pair(g, rule, frame.top, frame.bottom);
    for (std::size_t j = k + 1; j-- > 0;) {
      for (const auto& [site, u] : segments[j]) pair.apply(site, u);
    }
    if (pair.coalesced()) return {pair.upper(), std::ldexp(1.0, static_cast<int>(k))};
  }
  throw NumericalError("cftp: no coalescence within " + std::to_string(options.max_doublings) +
                       " doublings");
}

}  // namespace cutoff
