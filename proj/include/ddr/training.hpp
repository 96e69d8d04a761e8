#pragma once

// Alternating optimization of (beta, Q): per batch, forward solve, exact Q
// update from the batch's final states, adjoint solve with the new Q, beta
// gradient, Adam step.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ddr/adam.hpp"
#include "ddr/data.hpp"
#include "ddr/dictionary.hpp"
#include "ddr/dynamics.hpp"
#include "ddr/error.hpp"
#include "ddr/gradients.hpp"
#include "ddr/objective.hpp"
#include "ddr/subspace.hpp"

namespace ddr {

// ---------------------------------------------------------------------------
// Linear-dictionary stationary point machinery
// ---------------------------------------------------------------------------

/// mu as a function of eps for the linear-dictionary candidate
/// beta = (1/T) U diag(0, log eps) U^T, in the closed form
/// 4 eps^2 (log eps + T^2) / (1 - eps^2). Zero at eps = exp(-T^2).
inline double mu_of_epsilon(double eps, double T = 1.0) {
  const double e2 = eps * eps;
  return (4.0 * e2 * std::log(eps) + 4.0 * e2 * T * T) / (1.0 - e2);
}

/// Value of mu at which d_beta J vanishes for the same candidate, obtained by
/// differentiating J along the log-eps direction:
/// 4 T^2 eps^2 / (1 - eps^2 - 2 eps^2 log eps).
inline double stationary_mu_of_epsilon(double eps, double T = 1.0) {
  const double e2 = eps * eps;
  return 4.0 * T * T * e2 / (1.0 - e2 - 2.0 * e2 * std::log(eps));
}

namespace detail {
template <typename F>
double bisect_increasing(F f, double target, double lo, double hi) {
  for (int it = 0; it < 400 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) < target) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}
}  // namespace detail

/// Inverse of mu_of_epsilon on [exp(-T^2), 1) by bisection.
inline double epsilon_star(double mu, double T = 1.0) {
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw InvalidInput("epsilon_star needs finite mu >= 0");
  if (!(T >= 1.0)) throw InvalidInput("epsilon_star needs T >= 1");
  const double lo = std::exp(-T * T);
  if (mu == 0.0) return lo;
  return detail::bisect_increasing([T](double e) { return mu_of_epsilon(e, T); }, mu, lo,
                                   std::nextafter(1.0, 0.0));
}

/// Root of the quadratic truncation mu ~ c1 (eps - 1/e) + c2 (eps - 1/e)^2
/// of mu_of_epsilon about 1/e (T = 1).
inline double epsilon_star_approx(double mu) {
  if (!(mu >= 0.0)) throw InvalidInput("epsilon_star_approx needs mu >= 0");
  const double e = std::exp(1.0);
  const double c1 = 4.0 * e / (e * e - 1.0);
  const double c2 = 2.0 * (e * e + 3.0 * std::pow(e, 4)) / std::pow(e * e - 1.0, 2);
  return 1.0 / e + (-c1 + std::sqrt(c1 * c1 + 4.0 * c2 * mu)) / (2.0 * c2);
}

/// Inverse of stationary_mu_of_epsilon on (0, 1) by bisection; mu > 0.
inline double stationary_epsilon(double mu, double T = 1.0) {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw InvalidInput("stationary_epsilon needs finite mu > 0");
  if (!(T > 0.0)) throw InvalidInput("stationary_epsilon needs T > 0");
  return detail::bisect_increasing([T](double e) { return stationary_mu_of_epsilon(e, T); }, mu,
                                   std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

/// (1/T) U diag(0 (k times), log eps (d-k times)) U^T.
inline Eigen::MatrixXd linear_contraction(const Eigen::MatrixXd& U, int k, double eps, double T) {
  const auto d = U.rows();
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(d);
  diag.tail(d - k).setConstant(std::log(eps));
  return U * diag.asDiagonal() * U.transpose() / T;
}

// ---------------------------------------------------------------------------
// Configuration and parameters
// ---------------------------------------------------------------------------

enum class InitMode { pca_linear, random };

struct TrainConfig {
  int epochs = 900;
  int batch_size = 40;
  double mu = 1e-3;
  double lr_start = 0.01;
  double lr_end = 0.001;
  std::uint64_t seed = 0;
  std::string degrees = "0123";
  int k = 2;
  TimeGrid grid{};
  InitMode init = InitMode::pca_linear;
  double init_std = 0.5;
  double clip = kDefaultClip;
};

struct ModelParams {
  Eigen::MatrixXd beta;  // d x d_n
  Eigen::MatrixXd Q;     // k x d, orthonormal rows
  DictionarySpec spec;
  double mu = 0.0;
  TimeGrid grid{};
  double clip = kDefaultClip;

  int k() const noexcept { return static_cast<int>(Q.rows()); }
  int dim() const noexcept { return spec.dim(); }
};

inline void validate(const ModelParams& m) {
  detail::check_beta(m.beta, m.spec);
  if (m.Q.cols() != m.spec.dim()) throw InvalidInput("projection does not match model dimension");
  check_orthonormal_rows(m.Q);
  if (m.mu < 0.0) throw InvalidInput("mu must be non-negative");
}

inline void validate(const TrainConfig& c, Eigen::Index n_samples) {
  if (c.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (c.batch_size < 1 || c.batch_size > n_samples)
    throw ConfigError("batch size must lie in [1, N]");
  if (!(c.lr_end > 0.0) || !(c.lr_end <= c.lr_start))
    throw ConfigError("learning rates need 0 < lr_end <= lr_start");
  if (c.mu < 0.0) throw ConfigError("mu must be non-negative");
  if (!(c.init_std >= 0.0)) throw ConfigError("init_std must be non-negative");
}

/// Geometric interpolation from lr_start (first epoch) to lr_end (last epoch).
inline double learning_rate(const TrainConfig& c, int epoch) {
  if (c.epochs <= 1) return c.lr_start;
  const double frac = static_cast<double>(epoch) / static_cast<double>(c.epochs - 1);
  return c.lr_start * std::pow(c.lr_end / c.lr_start, frac);
}

/// Initial parameters. pca-linear: the degree-1 block is the linear
/// contraction toward the top-k principal directions with eps = eps*(mu),
/// Q = U_k^T, every other beta entry ~ N(0, init_std^2). random: every beta
/// entry ~ N(0, init_std^2) and Q from the QR factorization of a Gaussian
/// matrix.
inline ModelParams init_params(const Eigen::MatrixXd& X, const TrainConfig& c) {
  if (X.rows() < 1 || X.cols() < 1) throw InvalidInput("cannot initialize from empty data");
  const int d = static_cast<int>(X.rows());
  if (c.k < 1 || c.k >= d) throw ConfigError("k must satisfy 1 <= k < d");

  ModelParams m;
  m.spec = DictionarySpec::parse(d, c.degrees);
  m.mu = c.mu;
  m.grid = c.grid;
  m.clip = c.clip;

  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  m.beta.resize(d, m.spec.size());
  for (Eigen::Index j = 0; j < m.beta.cols(); ++j)
    for (Eigen::Index i = 0; i < m.beta.rows(); ++i) m.beta(i, j) = c.init_std * normal(rng);

  if (c.init == InitMode::pca_linear) {
    if (!m.spec.has_degree(1)) throw ConfigError("pca-linear initialization needs degree 1 in the dictionary");
    const SvdResult s = svd(X);
    const double eps = epsilon_star(c.mu, std::max(1.0, c.grid.final_time()));
    m.beta.block(0, m.spec.offset(1), d, d) = linear_contraction(s.U, c.k, eps, c.grid.final_time());
    m.Q = s.U.leftCols(c.k).transpose();
  } else {
    Eigen::MatrixXd G(d, c.k);
    for (Eigen::Index j = 0; j < G.cols(); ++j)
      for (Eigen::Index i = 0; i < G.rows(); ++i) G(i, j) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    m.Q = (qr.householderQ() * Eigen::MatrixXd::Identity(d, c.k)).transpose();
  }
  return m;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct EpochRecord {
  int epoch = 0;
  ObjectiveReport report;
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainTrace {
  ObjectiveReport initial;  // at the initial parameters, full data
  std::vector<EpochRecord> epochs;
};

/// Raised when training diverges; carries the last parameters that produced
/// a finite full-data report.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, ModelParams last_good, TrainTrace trace, int epoch)
      : Error(what), last_good_(std::move(last_good)), trace_(std::move(trace)), epoch_(epoch) {}

  const ModelParams& last_good() const noexcept { return last_good_; }
  const TrainTrace& trace() const noexcept { return trace_; }
  /// Epoch (0-based) during which the failure happened.
  int epoch() const noexcept { return epoch_; }

 private:
  ModelParams last_good_;
  TrainTrace trace_;
  int epoch_;
};

struct TrainResult {
  ModelParams params;
  TrainTrace trace;
};

/// Full-data objective with Q re-solved on the final states. Returns the
/// report and stores the Q used in `q_out`.
inline ObjectiveReport evaluate_with_optimal_q(const Eigen::MatrixXd& beta, const DictionarySpec& spec,
                                               const Eigen::MatrixXd& X, int k, const TimeGrid& grid, double mu,
                                               double clip, Eigen::MatrixXd* q_out = nullptr) {
  const TrajectoryBatch traj = solve_forward(beta, spec, X, grid, clip);
  const Eigen::MatrixXd HT = traj.final_states();
  QSolution q = solve_q(HT, k);
  const ObjectiveReport r = make_report(projection_residual(HT, q.Q), kinetic_energy(beta, spec, traj, grid), mu,
                                        static_cast<long>(X.cols()));
  if (q_out) *q_out = std::move(q.Q);
  return r;
}

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains from the given initial parameters.
inline TrainResult train_from(const Eigen::MatrixXd& X, const TrainConfig& c, ModelParams m,
                              const EpochCallback& on_epoch = {}) {
  validate(c, X.cols());
  validate(m);
  if (X.rows() != m.spec.dim()) throw InvalidInput("data dimension does not match the model");

  TrainResult out;
  {
    const TrajectoryBatch traj = solve_forward(m.beta, m.spec, X, m.grid, m.clip);
    out.trace.initial = make_report(residual(traj, m.Q), kinetic_energy(m.beta, m.spec, traj, m.grid), m.mu,
                                    static_cast<long>(X.cols()));
  }

  // The shuffle stream is separate from the initialization stream so that
  // train() and train_from(init_params()) agree.
  std::mt19937_64 rng(c.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(X.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Adam adam;
  ModelParams last_good = m;
  const int k = m.k();

  for (int epoch = 0; epoch < c.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = learning_rate(c, epoch);
    std::shuffle(order.begin(), order.end(), rng);
    try {
      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(c.batch_size)) {
        const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(c.batch_size));
        Eigen::MatrixXd batch(X.rows(), static_cast<Eigen::Index>(stop - start));
        for (std::size_t j = start; j < stop; ++j) batch.col(static_cast<Eigen::Index>(j - start)) = X.col(order[j]);

        TrajectoryBatch traj = solve_forward(m.beta, m.spec, batch, m.grid, m.clip);
        m.Q = solve_q(traj.final_states(), k).Q;
        solve_adjoint(m.beta, m.spec, traj, m.Q, m.mu, m.grid, m.clip);
        const Eigen::MatrixXd g = beta_gradient(m.beta, m.spec, traj, m.mu, m.grid);
        adam.step(m.beta, g, lr);
        if (!m.beta.allFinite()) throw NumericalBlowup(0, 0, "beta became non-finite after an optimizer step");
      }
      Eigen::MatrixXd q_full;
      EpochRecord rec;
      rec.epoch = epoch;
      rec.lr = lr;
      rec.report = evaluate_with_optimal_q(m.beta, m.spec, X, k, m.grid, m.mu, m.clip, &q_full);
      if (!std::isfinite(rec.report.J)) throw NumericalBlowup(0, 0, "objective became non-finite");
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      out.trace.epochs.push_back(rec);
      m.Q = std::move(q_full);
      last_good = m;
      if (on_epoch) on_epoch(rec);
    } catch (const NumericalBlowup& e) {
      throw TrainingDiverged(std::string("training diverged at epoch ") + std::to_string(epoch) + ": " + e.what(),
                             last_good, out.trace, epoch);
    }
  }
  out.params = std::move(m);
  return out;
}

inline TrainResult train(const Eigen::MatrixXd& X, const TrainConfig& c, const EpochCallback& on_epoch = {}) {
  validate(c, X.cols());
  return train_from(X, c, init_params(X, c), on_epoch);
}

// ---------------------------------------------------------------------------
// L-curve
// ---------------------------------------------------------------------------

inline std::vector<double> default_mu_list() {
  return {5e-5, 1e-4, 5e-4, 1e-3, 5e-3, 1e-2, 0.05, 0.1, 0.5, 1.0, 1.5, 2.0};
}

struct LCurvePoint {
  double mu = 0.0;
  double J1 = 0.0;
  double J2 = 0.0;
  bool ok = false;
  std::string error;
};

/// Trains one model per mu from a fresh seeded initialization.
inline std::vector<LCurvePoint> lcurve(const Eigen::MatrixXd& X, const TrainConfig& base,
                                       const std::vector<double>& mus,
                                       const std::function<void(const LCurvePoint&)>& on_point = {}) {
  if (mus.empty()) throw InvalidInput("mu list is empty");
  std::vector<LCurvePoint> out;
  out.reserve(mus.size());
  for (double mu : mus) {
    TrainConfig c = base;
    c.mu = mu;
    LCurvePoint p;
    p.mu = mu;
    try {
      const TrainResult r = train(X, c);
      const ObjectiveReport& rep = r.trace.epochs.empty() ? r.trace.initial : r.trace.epochs.back().report;
      p.J1 = rep.J1;
      p.J2 = rep.J2;
      p.ok = true;
    } catch (const Error& e) {
      p.error = e.what();
    }
    out.push_back(p);
    if (on_point) on_point(p);
  }
  return out;
}

/// Index of the corner of the L-curve: the interior point of the successful
/// points (in mu order) with the largest signed Menger curvature of the
/// polyline (log J1, log J2), counting left turns as positive. Returns
/// std::nullopt with fewer than three usable points.
inline std::optional<std::size_t> lcurve_corner(const std::vector<LCurvePoint>& pts) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (pts[i].ok && pts[i].J1 > 0.0 && pts[i].J2 > 0.0) idx.push_back(i);
  if (idx.size() < 3) return std::nullopt;

  std::optional<std::size_t> best;
  double best_kappa = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 1; j + 1 < idx.size(); ++j) {
    const auto& a = pts[idx[j - 1]];
    const auto& b = pts[idx[j]];
    const auto& c = pts[idx[j + 1]];
    const double ax = std::log(a.J1), ay = std::log(a.J2);
    const double bx = std::log(b.J1), by = std::log(b.J2);
    const double cx = std::log(c.J1), cy = std::log(c.J2);
    const double cross = (bx - ax) * (cy - by) - (by - ay) * (cx - bx);
    const double ab = std::hypot(bx - ax, by - ay);
    const double bc = std::hypot(cx - bx, cy - by);
    const double ca = std::hypot(ax - cx, ay - cy);
    const double denom = ab * bc * ca;
    if (denom <= 0.0) continue;
    const double kappa = 2.0 * cross / denom;
    if (kappa > best_kappa) {
      best_kappa = kappa;
      best = idx[j];
    }
  }
  return best;
}

}  // namespace ddr
