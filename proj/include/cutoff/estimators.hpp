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

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

struct Curve {
  std::vector<double> times;
  std::vector<Estimate> points;
  std::size_t replicas = 0;
  std::uint64_t seed = 0;
};

// P(extreme chains not coalesced by t): an upper bound on the worst-start TV
// distance for monotone instances.
Curve tv_upper_via_coalescence(const ModelSpec& m, const TorusGeometry& g, const std::vector<double>& times,
                               std::size_t replicas, std::uint64_t seed, Execution ex = Execution::parallel);

enum class LowerStatistic { magnetization, product_blocks };
std::string to_string(LowerStatistic s);
LowerStatistic parse_lower_statistic(const std::string& s);

struct ProductBlockLayout {
  std::size_t torus_side = 0;  // r: side of each enlarged block torus
  std::size_t box_side = 0;    // side of the observed box B inside it
  std::size_t blocks = 0;      // number of independent blocks L

  // One block covering the whole torus (the degenerate exact case).
  static ProductBlockLayout single(const TorusGeometry& g);
  // Boxes of side floor(2r/3) in tori of side r, floor(n/r)^d of them.
  static ProductBlockLayout tiled(const TorusGeometry& g, std::size_t torus_side);
};

struct LowerBoundOptions {
  LowerStatistic statistic = LowerStatistic::magnetization;
  std::size_t stationary_samples = 0;  // magnetization mode; 0 means 4 x replicas
  std::size_t bins = 0;                // magnetization mode; 0 means automatic
  std::optional<ProductBlockLayout> layout;  // product mode; default single block
  std::optional<SpinConfiguration> start;    // magnetization mode; default top of the monotone frame
};

// Lower bound on the worst-start TV distance at each grid time.
// Magnetization mode: selected-event estimate P(A) - Q(A) between the law of
// the magnetization from a fixed start and its stationary law, with the bins
// of A chosen on one half of the data and evaluated on the other (cross-fitted).
// Product mode: E|exp(sum Z_i) - 1|^- with exact per-block laws on the block
// torus and the start maximising m_t.
Curve tv_lower_via_statistic(const ModelSpec& m, const TorusGeometry& g, const std::vector<double>& times,
                             std::size_t replicas, std::uint64_t seed, const LowerBoundOptions& options = {},
                             Execution ex = Execution::parallel);

struct XiCurve {
  Curve curve;
  std::optional<std::string> warning;  // wraparound risk
};

// xi_t = P(X+_t(o) = +) - P(X-_t(o) = +) from the extreme chains under shared
// updates, averaged over sites.
XiCurve xi_t_curve(const ModelSpec& m, const TorusGeometry& g, const std::vector<double>& times,
                   std::size_t replicas, std::uint64_t seed, Execution ex = Execution::parallel);

struct GapEstimate {
  std::size_t side = 0;
  double lambda = 0.0;
  double window_low = 0.0;
  double window_high = 0.0;
  double residual = 0.0;  // weighted RMS residual of log xi
  double se = 0.0;
  std::size_t points = 0;
};

struct GapFitOptions {
  std::optional<std::pair<double, double>> window;  // default [2/l0, 6/l0] from a pilot fit
};

GapEstimate gap_from_xi(const Curve& curve, std::size_t side, const GapFitOptions& options = {});

struct SsmPoint {
  std::size_t distance = 0;
  double tv = 0.0;
  double se = 0.0;
};

struct SsmFit {
  std::vector<SsmPoint> points;
  std::optional<double> c1;
  std::optional<double> c2;
  double residual = 0.0;
  std::optional<std::string> refused;  // reason when no fit was made
};

struct SsmOptions {
  enum class Mode { oracle, monte_carlo } mode = Mode::oracle;
  std::size_t replicas = 2000;        // Monte Carlo samples per boundary condition
  std::size_t boundary_samples = 4;   // Monte Carlo boundary conditions per flip site
  std::uint64_t seed = 1;
  double noise_floor = 1e-12;         // oracle mode
};

// Boundary-flip influence on single sites of `lambda`: for each graph
// distance d, the sup over boundary sites y, boundary conditions tau and sites
// v in lambda at distance d from y of |mu^tau(v = +) - mu^{tau^y}(v = +)|.
// Sites outside lambda are the boundary; those not adjacent to lambda are
// irrelevant for Ising and held at -1.
SsmFit ssm_decay_fit(const ModelSpec& m, const TorusGeometry& g, const Region& lambda,
                     const SsmOptions& options = {});

struct ProfileOptions {
  std::size_t dimension = 1;
  std::vector<std::size_t> sides;
  std::vector<double> epsilons{0.25, 0.75};
  std::vector<double> times;        // empty: automatic grid per side
  double time_step = 0.25;
  std::size_t upper_replicas = 1000;
  std::size_t lower_replicas = 2000;
  std::uint64_t seed = 1;
  std::optional<double> reference_gap;  // for the normalized location
};

struct ProfileEntry {
  std::size_t side = 0;
  double epsilon = 0.0;
  std::optional<double> bracket_low;   // last grid time with lower bound > eps
  std::optional<double> bracket_high;  // first grid time with upper bound < eps
  std::optional<double> estimate;      // interpolated lower-bound crossing
  std::optional<double> exact;         // oracle value on tiny systems
  bool bracket_ok = false;
};

struct ProfileSide {
  std::size_t side = 0;
  Curve upper;
  Curve lower;
  std::vector<double> exact_tv;  // empty unless the oracle applies
  std::optional<double> ratio;     // t(eps_min) / t(eps_max) from the estimates
  std::optional<double> location;  // t(eps_min) / log n
};

struct MixingProfile {
  std::vector<ProfileSide> sides;
  std::vector<ProfileEntry> entries;
  std::optional<double> predicted_location;  // d / (2 gap), in units of log n
};

MixingProfile mixing_profile(const ModelSpec& m, const ProfileOptions& options, Execution ex = Execution::parallel);

// Interpolated first crossing of `eps` by a decreasing curve.
std::optional<double> first_crossing(const Curve& c, double eps);

// Metadata-prefixed CSV and static SVG line charts.
struct CsvMeta {
  std::vector<std::pair<std::string, std::string>> rows;
};
void write_curve_csv(std::ostream& os, const CsvMeta& meta, const std::vector<std::string>& names,
                     const std::vector<const Curve*>& curves);
struct SvgSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};
void write_svg_chart(std::ostream& os, const std::string& title, const std::string& x_label,
                     const std::string& y_label, const std::vector<SvgSeries>& series, bool log_y = false);

}  // namespace cutoff
