#pragma once

// Adjoint-method gradients of J(beta, Q), discretized on the Euler grid
// (optimize-then-discretize), and a central-difference oracle on the
// discretized objective for checking them.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ddr/dictionary.hpp"
#include "ddr/dynamics.hpp"
#include "ddr/objective.hpp"

namespace ddr {

struct GradientPair {
  Eigen::MatrixXd g_beta;  // d x d_n
  Eigen::MatrixXd g_Q;     // k x d
};

/// d_beta J = (1/N) sum_i int_0^T [ (2 mu / T) beta Xi Xi^T - lambda_i Xi^T ] dt,
/// left-Riemann on the grid. traj must carry the adjoint.
inline Eigen::MatrixXd beta_gradient(const Eigen::MatrixXd& beta, const DictionarySpec& spec,
                                     const TrajectoryBatch& traj, double mu, const TimeGrid& grid) {
  if (!traj.has_adjoint()) throw StateError("beta gradient needs the adjoint trajectory");
  const int M = grid.steps();
  const double reg = 2.0 * mu / grid.final_time();
  const auto n = traj.samples();
  std::vector<Eigen::MatrixXd> per_sample(n);

  parallel_for(n, [&](std::size_t i) {
    const Eigen::MatrixXd& h = traj.h[i];
    const Eigen::MatrixXd& lam = traj.lambda[i];
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(beta.rows(), beta.cols());
    Eigen::VectorXd xi, coef;
    for (int m = 0; m < M; ++m) {
      eval_into(spec, h.col(m), xi);
      coef.noalias() = reg * (beta * xi);
      coef -= lam.col(m);
      acc.noalias() += coef * xi.transpose();
    }
    per_sample[i] = grid.step() * acc;
  });

  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(beta.rows(), beta.cols());
  for (const auto& p : per_sample) g += p;
  return g / static_cast<double>(n);
}

/// d_Q J = (1/N) sum_i 2 Q h h^T Q^T Q - 2 Q h h^T with h = h_i(T).
inline Eigen::MatrixXd q_gradient(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& HT) {
  const Eigen::MatrixXd QH = Q * HT;          // k x N
  const Eigen::MatrixXd QHHt = QH * HT.transpose();  // k x d
  return (2.0 * (QHHt * Q.transpose()) * Q - 2.0 * QHHt) / static_cast<double>(HT.cols());
}

inline GradientPair grad(const Eigen::MatrixXd& beta, const Eigen::MatrixXd& Q, const DictionarySpec& spec,
                         const Eigen::MatrixXd& X, const TimeGrid& grid, double mu,
                         double clip = kDefaultClip) {
  TrajectoryBatch traj = solve_forward(beta, spec, X, grid, clip);
  solve_adjoint(beta, spec, traj, Q, mu, grid, clip);
  return {beta_gradient(beta, spec, traj, mu, grid), q_gradient(Q, traj.final_states())};
}

/// J evaluated for an arbitrary k x d matrix Q (no orthonormality check), as
/// needed for ambient finite differences.
inline double objective_ambient(const Eigen::MatrixXd& beta, const Eigen::MatrixXd& Q, const DictionarySpec& spec,
                                const Eigen::MatrixXd& X, const TimeGrid& grid, double mu,
                                double clip = kDefaultClip) {
  const TrajectoryBatch traj = solve_forward(beta, spec, X, grid, clip);
  return projection_residual(traj.final_states(), Q) + mu * kinetic_energy(beta, spec, traj, grid);
}

/// Central differences of the discretized objective over every entry of beta
/// and Q.
inline GradientPair fd_grad(const Eigen::MatrixXd& beta, const Eigen::MatrixXd& Q, const DictionarySpec& spec,
                            const Eigen::MatrixXd& X, const TimeGrid& grid, double mu, double step = 1e-5,
                            double clip = kDefaultClip) {
  if (!(step > 0.0)) throw InvalidInput("finite-difference step must be positive");
  GradientPair out{Eigen::MatrixXd::Zero(beta.rows(), beta.cols()), Eigen::MatrixXd::Zero(Q.rows(), Q.cols())};

  Eigen::MatrixXd b = beta;
  for (Eigen::Index c = 0; c < beta.cols(); ++c) {
    for (Eigen::Index r = 0; r < beta.rows(); ++r) {
      b(r, c) = beta(r, c) + step;
      const double up = objective_ambient(b, Q, spec, X, grid, mu, clip);
      b(r, c) = beta(r, c) - step;
      const double down = objective_ambient(b, Q, spec, X, grid, mu, clip);
      b(r, c) = beta(r, c);
      out.g_beta(r, c) = (up - down) / (2.0 * step);
    }
  }

  // J depends on Q only through the final-state residual, so one forward
  // solve serves every Q perturbation.
  const Eigen::MatrixXd HT = solve_forward(beta, spec, X, grid, clip).final_states();
  Eigen::MatrixXd q = Q;
  for (Eigen::Index c = 0; c < Q.cols(); ++c) {
    for (Eigen::Index r = 0; r < Q.rows(); ++r) {
      q(r, c) = Q(r, c) + step;
      const double up = projection_residual(HT, q);
      q(r, c) = Q(r, c) - step;
      const double down = projection_residual(HT, q);
      q(r, c) = Q(r, c);
      out.g_Q(r, c) = (up - down) / (2.0 * step);
    }
  }
  return out;
}

/// Relative errors between two gradient pairs, treating (g_beta, g_Q) as one
/// stacked vector.
struct GradientComparison {
  double frobenius_rel = 0.0;  // ||a - b|| / ||b||
  double max_entry_rel = 0.0;  // max |a - b| / max |b|, entrywise
  double beta_rel = 0.0;
  double q_rel = 0.0;
};

inline GradientComparison compare_gradients(const GradientPair& a, const GradientPair& ref) {
  GradientComparison c;
  const double db = (a.g_beta - ref.g_beta).squaredNorm();
  const double dq = (a.g_Q - ref.g_Q).squaredNorm();
  const double nb = ref.g_beta.squaredNorm();
  const double nq = ref.g_Q.squaredNorm();
  const double tiny = 1e-300;
  c.frobenius_rel = std::sqrt((db + dq) / std::max(nb + nq, tiny));
  c.beta_rel = std::sqrt(db / std::max(nb, tiny));
  c.q_rel = std::sqrt(dq / std::max(nq, tiny));
  const double scale = std::max(ref.g_beta.cwiseAbs().maxCoeff(), ref.g_Q.cwiseAbs().maxCoeff());
  const double worst = std::max((a.g_beta - ref.g_beta).cwiseAbs().maxCoeff(),
                                (a.g_Q - ref.g_Q).cwiseAbs().maxCoeff());
  c.max_entry_rel = worst / std::max(scale, tiny);
  return c;
}

/// Small seeded instance for gradient checks: X uniform in [-1, 1], beta
/// entries N(0, beta_std^2), Q from the QR factorization of a Gaussian matrix.
struct GradCheckProblem {
  Eigen::MatrixXd X;
  Eigen::MatrixXd beta;
  Eigen::MatrixXd Q;
  DictionarySpec spec;
};

inline GradCheckProblem make_grad_check_problem(int d = 3, int n = 5, int k = 1, const std::string& degrees = "0123",
                                                std::uint64_t seed = 0, double beta_std = 0.3) {
  if (d < 2 || n < 1 || k < 1 || k >= d) throw InvalidInput("gradient check needs d >= 2, N >= 1, 1 <= k < d");
  GradCheckProblem p;
  p.spec = DictionarySpec::parse(d, degrees);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  p.X.resize(d, n);
  for (Eigen::Index j = 0; j < p.X.cols(); ++j)
    for (Eigen::Index i = 0; i < p.X.rows(); ++i) p.X(i, j) = uni(rng);
  p.beta.resize(d, p.spec.size());
  for (Eigen::Index j = 0; j < p.beta.cols(); ++j)
    for (Eigen::Index i = 0; i < p.beta.rows(); ++i) p.beta(i, j) = beta_std * normal(rng);
  Eigen::MatrixXd G(d, k);
  for (Eigen::Index j = 0; j < G.cols(); ++j)
    for (Eigen::Index i = 0; i < G.rows(); ++i) G(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  p.Q = (qr.householderQ() * Eigen::MatrixXd::Identity(d, k)).transpose();
  return p;
}

}  // namespace ddr
