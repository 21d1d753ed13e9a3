#include "cutoff/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <ostream>

#include <Eigen/Eigenvalues>

#include "cutoff/error.hpp"
#include "cutoff/rng.hpp"

namespace cutoff {

std::optional<std::size_t> StateSpace::index_of(std::uint64_t label) const {
  if (label >= lookup.size() || lookup[label] < 0) return std::nullopt;
  return static_cast<std::size_t>(lookup[label]);
}

GeneratorMatrix::GeneratorMatrix(StateSpace space, std::vector<double> mu, std::vector<std::size_t> offsets,
                                 std::vector<Entry> entries)
    : space_(std::move(space)), mu_(std::move(mu)), offsets_(std::move(offsets)), entries_(std::move(entries)) {
  diag_.assign(space_.size(), 0.0);
  for (std::size_t i = 0; i < space_.size(); ++i) {
    double s = 0.0;
    for (const auto& e : row(i)) s += e.rate;
    diag_[i] = -s;
  }
}

Eigen::VectorXd GeneratorMatrix::apply(const Eigen::VectorXd& f) const {
  Eigen::VectorXd out(f.size());
  for (std::size_t i = 0; i < dimension(); ++i) {
    double acc = 0.0;
    for (const auto& e : row(i)) acc += e.rate * (f[e.col] - f[i]);
    out[i] = acc;
  }
  return out;
}

Eigen::MatrixXd GeneratorMatrix::dense() const {
  const auto n = static_cast<Eigen::Index>(dimension());
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < dimension(); ++i) {
    l(i, i) = diag_[i];
    for (const auto& e : row(i)) l(i, e.col) += e.rate;
  }
  return l;
}

double GeneratorMatrix::stationarity_residual() const {
  std::vector<double> flow(dimension(), 0.0);
  for (std::size_t i = 0; i < dimension(); ++i) {
    flow[i] += mu_[i] * diag_[i];
    for (const auto& e : row(i)) flow[e.col] += mu_[i] * e.rate;
  }
  double worst = 0.0;
  for (double v : flow) worst = std::max(worst, std::abs(v));
  return worst;
}

double GeneratorMatrix::reversibility_residual() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < dimension(); ++i) {
    for (const auto& e : row(i)) {
      double back = 0.0;
      for (const auto& r : row(e.col)) {
        if (r.col == i) back += r.rate;
      }
      worst = std::max(worst, std::abs(mu_[i] * e.rate - mu_[e.col] * back));
    }
  }
  return worst;
}

double GeneratorMatrix::row_sum_residual() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < dimension(); ++i) {
    double s = diag_[i];
    for (const auto& e : row(i)) {
      if (e.rate < 0.0) return std::numeric_limits<double>::infinity();
      s += e.rate;
    }
    worst = std::max(worst, std::abs(s));
  }
  return worst;
}

namespace {

void require_irreducible(const GeneratorMatrix& gen) {
  const std::size_t n = gen.dimension();
  std::vector<char> seen(n, 0);
  std::deque<std::size_t> queue{0};
  seen[0] = 1;
  std::size_t reached = 1;
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    for (const auto& e : gen.row(i)) {
      if (e.rate > 0.0 && !seen[e.col]) {
        seen[e.col] = 1;
        ++reached;
        queue.push_back(e.col);
      }
    }
  }
  if (reached != n) throw InvalidArgument("generator is not irreducible on its state space");
}

}  // namespace

GeneratorMatrix build_generator(const ModelSpec& m, const TorusGeometry& g, std::size_t cap) {
  const std::size_t n = g.site_count();
  if (n > cap || n > 24) {
    throw SizeCapError("generator needs |V| <= " + std::to_string(std::min<std::size_t>(cap, 24)) + ", got " +
                       std::to_string(n));
  }
  const std::uint64_t total = std::uint64_t{1} << n;
  StateSpace space;
  space.sites = n;
  space.lookup.assign(total, -1);
  std::vector<double> logw;
  for (std::uint64_t x = 0; x < total; ++x) {
    const auto w = gibbs_log_weight(m, g, SpinConfiguration::from_index(x, n));
    if (!w) continue;
    space.lookup[x] = static_cast<std::int64_t>(space.labels.size());
    space.labels.push_back(x);
    logw.push_back(*w);
  }
  if (space.size() < 2) throw InvalidArgument("state space has fewer than two allowed configurations");

  const double top = *std::max_element(logw.begin(), logw.end());
  double z = 0.0;
  for (double w : logw) z += std::exp(w - top);
  std::vector<double> mu(logw.size());
  for (std::size_t i = 0; i < mu.size(); ++i) mu[i] = std::exp(logw[i] - top) / z;

  const LocalUpdate rule(m, g.degree());
  std::vector<std::size_t> offsets{0};
  std::vector<GeneratorMatrix::Entry> entries;
  entries.reserve(space.size() * n);
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto sigma = SpinConfiguration::from_index(space.labels[i], n);
    for (Site x = 0; x < n; ++x) {
      const std::uint64_t target = space.labels[i] ^ (std::uint64_t{1} << x);
      const auto j = space.lookup[target];
      if (j < 0) continue;
      const double rate = rule.flip_rate(sigma.plus(x), plus_neighbors(g, sigma, x));
      if (rate > 0.0) entries.push_back({static_cast<std::uint32_t>(j), rate});
    }
    offsets.push_back(entries.size());
  }
  GeneratorMatrix gen(std::move(space), std::move(mu), std::move(offsets), std::move(entries));
  require_irreducible(gen);
  return gen;
}

GeneratorMatrix product(const GeneratorMatrix& a, const GeneratorMatrix& b) {
  const std::size_t sites = a.states().sites + b.states().sites;
  if (sites > 24) throw SizeCapError("product generator needs at most 24 sites in total");
  StateSpace space;
  space.sites = sites;
  space.lookup.assign(std::uint64_t{1} << sites, -1);
  std::vector<double> mu;
  std::vector<std::size_t> offsets{0};
  std::vector<GeneratorMatrix::Entry> entries;
  const std::size_t nb = b.dimension();
  for (std::size_t i = 0; i < a.dimension(); ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      const std::uint64_t label = a.states().labels[i] | (b.states().labels[j] << a.states().sites);
      space.lookup[label] = static_cast<std::int64_t>(space.labels.size());
      space.labels.push_back(label);
      mu.push_back(a.stationary()[i] * b.stationary()[j]);
      for (const auto& e : a.row(i)) entries.push_back({static_cast<std::uint32_t>(e.col * nb + j), e.rate});
      for (const auto& e : b.row(j)) entries.push_back({static_cast<std::uint32_t>(i * nb + e.col), e.rate});
      offsets.push_back(entries.size());
    }
  }
  return GeneratorMatrix(std::move(space), std::move(mu), std::move(offsets), std::move(entries));
}

Eigen::VectorXd SpectralData::eigenfunction(std::size_t k) const {
  return vectors.col(static_cast<Eigen::Index>(k)).cwiseQuotient(sqrt_mu);
}

SpectralData spectral_decomposition(const GeneratorMatrix& gen, std::size_t cap) {
  if (gen.dimension() > (std::size_t{1} << cap)) {
    throw SizeCapError("dense eigensolve needs at most 2^" + std::to_string(cap) + " states, got " +
                       std::to_string(gen.dimension()));
  }
  const auto n = static_cast<Eigen::Index>(gen.dimension());
  SpectralData s;
  s.sqrt_mu.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) s.sqrt_mu[i] = std::sqrt(gen.stationary()[i]);
  // D^{1/2} (-L) D^{-1/2} is symmetric by reversibility.
  Eigen::MatrixXd sym = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sym(i, i) = -gen.diagonal(i);
    for (const auto& e : gen.row(i)) sym(i, e.col) -= s.sqrt_mu[i] * e.rate / s.sqrt_mu[e.col];
  }
  sym = 0.5 * (sym + sym.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed");
  s.eigenvalues = solver.eigenvalues();
  s.vectors = solver.eigenvectors();
  return s;
}

double spectral_gap_exact(const GeneratorMatrix& gen) { return spectral_decomposition(gen).gap(); }

namespace {

constexpr double kClipTolerance = 1e-10;

void check_and_clip(std::vector<double>& row) {
  double sum = 0.0;
  for (double& v : row) {
    if (v < -kClipTolerance) throw NumericalError("heat kernel: negative excursion beyond tolerance");
    v = std::clamp(v, 0.0, 1.0);
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw NumericalError("heat kernel row does not sum to one");
}

}  // namespace

std::vector<double> heat_kernel_row(const SpectralData& s, std::size_t x0, double t) {
  if (!(t >= 0.0)) throw InvalidArgument("heat kernel needs t >= 0");
  if (x0 >= s.dimension()) throw InvalidArgument("heat kernel start out of range");
  const auto xi = static_cast<Eigen::Index>(x0);
  const Eigen::VectorXd decay = (-t * s.eigenvalues.array()).exp();
  const Eigen::VectorXd coef = decay.cwiseProduct(s.vectors.row(xi).transpose());
  const Eigen::VectorXd raw = s.vectors * coef;
  std::vector<double> row(s.dimension());
  for (std::size_t y = 0; y < row.size(); ++y) {
    row[y] = raw[static_cast<Eigen::Index>(y)] * s.sqrt_mu[static_cast<Eigen::Index>(y)] / s.sqrt_mu[xi];
  }
  check_and_clip(row);
  return row;
}

Eigen::MatrixXd heat_kernel(const SpectralData& s, double t) {
  if (!(t >= 0.0)) throw InvalidArgument("heat kernel needs t >= 0");
  const Eigen::VectorXd decay = (-t * s.eigenvalues.array()).exp();
  Eigen::MatrixXd k = s.vectors * decay.asDiagonal() * s.vectors.transpose();
  // P(x, y) = K(x, y) sqrt(mu(y) / mu(x))
  k = s.sqrt_mu.cwiseInverse().asDiagonal() * k * s.sqrt_mu.asDiagonal();
  return k;
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InvalidArgument("tv_distance: size mismatch");
  const double sp = std::accumulate(p.begin(), p.end(), 0.0);
  const double sq = std::accumulate(q.begin(), q.end(), 0.0);
  if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9) {
    throw InvalidArgument("tv_distance: inputs must be normalized");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
  return std::min(1.0, 0.5 * acc);
}

double l2_distance(std::span<const double> p, std::span<const double> mu) {
  if (p.size() != mu.size()) throw InvalidArgument("l2_distance: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (mu[i] <= 0.0) {
      if (p[i] > 0.0) throw InvalidArgument("l2_distance: positive mass on a zero-probability state");
      continue;
    }
    const double r = p[i] / mu[i] - 1.0;
    acc += mu[i] * r * r;
  }
  return std::sqrt(acc);
}

namespace {

std::vector<double> mu_of(const SpectralData& s) {
  std::vector<double> mu(s.dimension());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double r = s.sqrt_mu[static_cast<Eigen::Index>(i)];
    mu[i] = r * r;
  }
  return mu;
}

}  // namespace

std::vector<double> exact_tv_curve(const SpectralData& s, const std::vector<double>& times) {
  const auto mu = mu_of(s);
  std::vector<double> out;
  for (double t : times) {
    const Eigen::MatrixXd k = heat_kernel(s, t);
    double worst = 0.0;
    for (Eigen::Index x = 0; x < k.rows(); ++x) {
      double acc = 0.0;
      for (Eigen::Index y = 0; y < k.cols(); ++y) acc += std::abs(k(x, y) - mu[static_cast<std::size_t>(y)]);
      worst = std::max(worst, 0.5 * acc);
    }
    out.push_back(std::min(1.0, worst));
  }
  return out;
}

std::vector<double> exact_tv_curve(const SpectralData& s, std::size_t x0, const std::vector<double>& times) {
  const auto mu = mu_of(s);
  std::vector<double> out;
  for (double t : times) out.push_back(tv_distance(heat_kernel_row(s, x0, t), mu));
  return out;
}

DirichletValues dirichlet_form(const GeneratorMatrix& gen, const Eigen::VectorXd& f) {
  const auto& mu = gen.stationary();
  DirichletValues v;
  double mean = 0.0;
  double second = 0.0;
  for (std::size_t i = 0; i < gen.dimension(); ++i) {
    const double fi = f[static_cast<Eigen::Index>(i)];
    mean += mu[i] * fi;
    second += mu[i] * fi * fi;
    for (const auto& e : gen.row(i)) {
      const double d = f[e.col] - fi;
      v.energy += 0.5 * mu[i] * e.rate * d * d;
    }
  }
  v.variance = std::max(0.0, second - mean * mean);
  if (second > 0.0) {
    for (std::size_t i = 0; i < gen.dimension(); ++i) {
      const double f2 = f[static_cast<Eigen::Index>(i)] * f[static_cast<Eigen::Index>(i)];
      if (f2 > 0.0) v.entropy += mu[i] * f2 * std::log(f2 / second);
    }
  }
  return v;
}

namespace {

struct RatioEval {
  double ratio;
  Eigen::VectorXd grad;  // gradient in the L^2(mu) metric
};

std::optional<RatioEval> evaluate_ratio(const GeneratorMatrix& gen, const Eigen::VectorXd& f) {
  const auto& mu = gen.stationary();
  const auto v = dirichlet_form(gen, f);
  if (!(v.entropy > 1e-14)) return std::nullopt;
  const Eigen::VectorXd lf = gen.apply(f);
  double second = 0.0;
  for (std::size_t i = 0; i < gen.dimension(); ++i) second += mu[i] * f[static_cast<Eigen::Index>(i)] * f[static_cast<Eigen::Index>(i)];
  RatioEval out;
  out.ratio = v.energy / v.entropy;
  out.grad.resize(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const double f2 = f[i] * f[i];
    // d/df_i divided by mu_i: grad E = -2 Lf, grad Ent = 2 f log(f^2 / E f^2)
    const double de = -2.0 * lf[i];
    const double dent = f2 > 0.0 ? 2.0 * f[i] * std::log(f2 / second) : 0.0;
    out.grad[i] = (de - out.ratio * dent) / v.entropy;
  }
  return out;
}

Eigen::VectorXd normalized(const GeneratorMatrix& gen, Eigen::VectorXd f) {
  double second = 0.0;
  for (std::size_t i = 0; i < gen.dimension(); ++i) second += gen.stationary()[i] * f[static_cast<Eigen::Index>(i)] * f[static_cast<Eigen::Index>(i)];
  return f / std::sqrt(second);
}

struct LocalResult {
  double ratio;
  Eigen::VectorXd f;
  bool converged;
};

std::optional<LocalResult> minimize_ratio(const GeneratorMatrix& gen, Eigen::VectorXd f) {
  f = normalized(gen, std::move(f));
  auto cur = evaluate_ratio(gen, f);
  if (!cur) return std::nullopt;
  double step = 0.1;
  bool converged = false;
  for (int iter = 0; iter < 4000; ++iter) {
    const double gnorm2 = cur->grad.squaredNorm();
    if (gnorm2 < 1e-24) {
      converged = true;
      break;
    }
    bool moved = false;
    for (int k = 0; k < 40; ++k) {
      Eigen::VectorXd trial = normalized(gen, f - step * cur->grad);
      auto next = evaluate_ratio(gen, trial);
      if (next && next->ratio <= cur->ratio - 1e-4 * step * gnorm2) {
        const double gain = cur->ratio - next->ratio;
        f = std::move(trial);
        cur = std::move(next);
        step *= 1.5;
        moved = true;
        if (gain < 1e-13 * std::max(1.0, cur->ratio)) converged = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved || converged) {
      converged = true;
      break;
    }
  }
  return LocalResult{cur->ratio, f, converged};
}

}  // namespace

LogSobolevEstimate log_sobolev_upper_estimate(const GeneratorMatrix& gen, const SpectralData& s,
                                              std::size_t restarts, std::uint64_t seed) {
  if (gen.states().sites > kLogSobolevCap) {
    throw SizeCapError("log-Sobolev search needs |V| <= " + std::to_string(kLogSobolevCap));
  }
  const auto n = static_cast<Eigen::Index>(gen.dimension());
  LogSobolevEstimate est;
  est.gap = s.gap();
  est.restarts = restarts;
  est.best_ratio = std::numeric_limits<double>::infinity();
  const Eigen::VectorXd phi = s.eigenfunction(1);
  for (std::size_t r = 0; r < restarts; ++r) {
    Rng rng(derive_seed(seed, r));
    Eigen::VectorXd f(n);
    if (r % 2 == 0) {
      const double c = 0.25 * static_cast<double>(r / 2 + 1);
      for (Eigen::Index i = 0; i < n; ++i) f[i] = std::exp(c * phi[i] + 0.1 * (rng.uniform01() - 0.5));
    } else {
      for (Eigen::Index i = 0; i < n; ++i) f[i] = std::exp(2.0 * (rng.uniform01() - 0.5));
    }
    const auto local = minimize_ratio(gen, f);
    if (!local) continue;
    est.converged = est.converged && local->converged;
    if (local->ratio < est.best_ratio) {
      est.best_ratio = local->ratio;
      est.minimizer = local->f;
    }
  }
  // E/Ent along 1 + eps * phi_1 tends to gap / 2 as eps -> 0.
  est.alpha = std::min(est.best_ratio, 0.5 * est.gap);
  if (est.alpha < est.best_ratio) est.minimizer.resize(0);
  est.certificate = 2.0 * est.alpha <= est.gap + 1e-9;
  return est;
}

std::vector<double> project(const StateSpace& space, std::span<const double> law, const Region& box) {
  if (law.size() != space.size()) throw InvalidArgument("project: law size mismatch");
  if (box.size() > 24) throw SizeCapError("project: box too large");
  const auto sites = box.sites();
  std::vector<double> out(std::size_t{1} << sites.size(), 0.0);
  for (std::size_t i = 0; i < space.size(); ++i) {
    std::size_t idx = 0;
    for (std::size_t k = 0; k < sites.size(); ++k) idx |= ((space.labels[i] >> sites[k]) & 1U) << k;
    out[idx] += law[i];
  }
  return out;
}

std::vector<double> m_t_exact(const GeneratorMatrix& gen, const SpectralData& s, const Region& box,
                              const std::vector<double>& times) {
  const auto& mu = gen.stationary();
  const auto mu_b = project(gen.states(), mu, box);
  std::vector<double> out;
  std::vector<double> row(gen.dimension());
  for (double t : times) {
    const Eigen::MatrixXd k = heat_kernel(s, t);
    double worst = 0.0;
    for (Eigen::Index x = 0; x < k.rows(); ++x) {
      for (Eigen::Index y = 0; y < k.cols(); ++y) row[static_cast<std::size_t>(y)] = std::max(0.0, k(x, y));
      worst = std::max(worst, l2_distance(project(gen.states(), row, box), mu_b));
    }
    out.push_back(worst);
  }
  return out;
}

double m_t_exact(const GeneratorMatrix& gen, const SpectralData& s, const Region& box, double t) {
  return m_t_exact(gen, s, box, std::vector<double>{t}).front();
}

double m_t_exact(const ModelSpec& m, const TorusGeometry& g, const Region& box, double t) {
  const auto gen = build_generator(m, g);
  return m_t_exact(gen, spectral_decomposition(gen), box, t);
}

DsBoundCheck ds_bound_check(const SpectralData& s, double alpha, std::size_t x0, const std::vector<double>& grid,
                            bool alpha_is_exact) {
  if (!(alpha > 0.0)) throw InvalidArgument("ds_bound_check needs alpha > 0");
  const auto mu = mu_of(s);
  if (x0 >= mu.size()) throw InvalidArgument("ds_bound_check: start out of range");
  if (mu[x0] > std::exp(-1.0)) throw InvalidArgument("ds_bound_check needs mu(x0) <= 1/e");
  const double loglog = std::log(std::log(1.0 / mu[x0]));
  DsBoundCheck out;
  out.advisory = !alpha_is_exact;
  out.worst_slack = std::numeric_limits<double>::infinity();
  for (double sv : grid) {
    const double lhs = l2_distance(heat_kernel_row(s, x0, sv), mu);
    const double rhs = std::exp(1.0 - s.gap() * (sv - loglog / (4.0 * alpha)));
    out.s.push_back(sv);
    out.lhs.push_back(lhs);
    out.rhs.push_back(rhs);
    out.worst_slack = std::min(out.worst_slack, rhs - lhs);
  }
  return out;
}

void write_spectrum_csv(std::ostream& os, const SpectralData& s, std::size_t count) {
  os.precision(17);
  os << "index,eigenvalue\n";
  const std::size_t k = std::min(count, s.dimension());
  for (std::size_t i = 0; i < k; ++i) os << i << "," << s.eigenvalues[static_cast<Eigen::Index>(i)] << "\n";
}

void write_kernel_csv(std::ostream& os, const StateSpace& space, std::span<const double> row) {
  os.precision(17);
  os << "state,probability\n";
  for (std::size_t i = 0; i < row.size(); ++i) os << space.labels[i] << "," << row[i] << "\n";
}

}  // namespace cutoff
