#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cutoff/lattice.hpp"
#include "cutoff/model.hpp"

namespace cutoff {

inline constexpr std::size_t kGeneratorCap = 14;
// Dense eigensolves are O(8^|V|); 2^12 states is the practical ceiling.
inline constexpr std::size_t kSpectralCap = 12;
inline constexpr std::size_t kLogSobolevCap = 10;

// Allowed configurations of a finite system, as packed indices. Hardcore
// models keep only independent sets.
struct StateSpace {
  std::size_t sites = 0;
  std::vector<std::uint64_t> labels;  // packed configuration per state
  std::vector<std::int64_t> lookup;   // packed configuration -> state, -1 if excluded

  std::size_t size() const noexcept { return labels.size(); }
  std::optional<std::size_t> index_of(std::uint64_t label) const;
};

// Generator of the Glauber dynamics restricted to its state space, in
// compressed sparse rows (off-diagonal rates), with the stationary law.
class GeneratorMatrix {
 public:
  struct Entry {
    std::uint32_t col;
    double rate;
  };

  std::size_t dimension() const noexcept { return space_.size(); }
  const StateSpace& states() const noexcept { return space_; }
  const std::vector<double>& stationary() const noexcept { return mu_; }
  std::span<const Entry> row(std::size_t i) const {
    return {entries_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }
  double diagonal(std::size_t i) const { return diag_[i]; }

  // (Lf)(i) = sum_j L_ij (f_j - f_i)
  Eigen::VectorXd apply(const Eigen::VectorXd& f) const;
  Eigen::MatrixXd dense() const;

  double stationarity_residual() const;   // max |(mu^T L)_j|
  double reversibility_residual() const;  // max |mu_i L_ij - mu_j L_ji|
  double row_sum_residual() const;

  GeneratorMatrix(StateSpace space, std::vector<double> mu, std::vector<std::size_t> offsets,
                  std::vector<Entry> entries);

 private:
  StateSpace space_;
  std::vector<double> mu_;
  std::vector<std::size_t> offsets_;
  std::vector<Entry> entries_;
  std::vector<double> diag_;
};

GeneratorMatrix build_generator(const ModelSpec& m, const TorusGeometry& g, std::size_t cap = kGeneratorCap);

// Independent product of two chains on disjoint site sets (Kronecker sum).
// State (i, j) has index i * dim(b) + j and label label_a | label_b << sites_a.
GeneratorMatrix product(const GeneratorMatrix& a, const GeneratorMatrix& b);

struct SpectralData {
  Eigen::VectorXd eigenvalues;   // of -L, ascending
  Eigen::MatrixXd vectors;       // orthonormal eigenvectors of the symmetrized generator
  Eigen::VectorXd sqrt_mu;

  std::size_t dimension() const noexcept { return static_cast<std::size_t>(eigenvalues.size()); }
  double gap() const { return eigenvalues.size() > 1 ? eigenvalues[1] : 0.0; }
  // phi_k = vectors.col(k) / sqrt_mu, orthonormal in L^2(mu).
  Eigen::VectorXd eigenfunction(std::size_t k) const;
};

SpectralData spectral_decomposition(const GeneratorMatrix& gen, std::size_t cap = kSpectralCap);
double spectral_gap_exact(const GeneratorMatrix& gen);

// Row x0 of exp(tL) over the state space.
std::vector<double> heat_kernel_row(const SpectralData& s, std::size_t x0, double t);
// Full matrix exp(tL); rows are starts.
Eigen::MatrixXd heat_kernel(const SpectralData& s, double t);

double tv_distance(std::span<const double> p, std::span<const double> q);
double l2_distance(std::span<const double> p, std::span<const double> mu);

// Worst-start total variation distance to stationarity at each time.
std::vector<double> exact_tv_curve(const SpectralData& s, const std::vector<double>& times);
// Total variation distance from one start at each time.
std::vector<double> exact_tv_curve(const SpectralData& s, std::size_t x0, const std::vector<double>& times);

struct DirichletValues {
  double energy = 0.0;
  double variance = 0.0;
  double entropy = 0.0;
};
DirichletValues dirichlet_form(const GeneratorMatrix& gen, const Eigen::VectorXd& f);

struct LogSobolevEstimate {
  double alpha = 0.0;          // best E/Ent found (upper bound on the constant)
  double best_ratio = 0.0;     // best ratio found by the optimizer before the limit cap
  Eigen::VectorXd minimizer;   // empty when the spectral limit wins
  double gap = 0.0;
  bool certificate = false;    // 2 alpha <= gap + 1e-9
  bool converged = true;
  std::size_t restarts = 0;
};

LogSobolevEstimate log_sobolev_upper_estimate(const GeneratorMatrix& gen, const SpectralData& s,
                                              std::size_t restarts, std::uint64_t seed);

// Marginal of a law over the state space onto the sites of `box`, indexed by
// the packed bits of the box in site order.
std::vector<double> project(const StateSpace& space, std::span<const double> law, const Region& box);

// m_t: worst-start L^2(mu_B) distance of the projection onto `box`.
double m_t_exact(const GeneratorMatrix& gen, const SpectralData& s, const Region& box, double t);
std::vector<double> m_t_exact(const GeneratorMatrix& gen, const SpectralData& s, const Region& box,
                              const std::vector<double>& times);
double m_t_exact(const ModelSpec& m, const TorusGeometry& g, const Region& box, double t);

struct DsBoundCheck {
  std::vector<double> s;
  std::vector<double> lhs;  // L^2 distance from x0 at time s
  std::vector<double> rhs;  // exp(1 - gap (s - loglog(1/mu(x0)) / (4 alpha)))
  double worst_slack = 0.0;
  bool advisory = true;
};

// Evaluates the L^2 / log-Sobolev inequality on a grid. `alpha` is either a
// known constant or an estimate; results are advisory unless `alpha_is_exact`.
DsBoundCheck ds_bound_check(const SpectralData& s, double alpha, std::size_t x0, const std::vector<double>& grid,
                            bool alpha_is_exact = false);

void write_spectrum_csv(std::ostream& os, const SpectralData& s, std::size_t count);
void write_kernel_csv(std::ostream& os, const StateSpace& space, std::span<const double> row);

}  // namespace cutoff
