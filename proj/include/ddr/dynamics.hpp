#pragma once

// Forward-Euler integration of the hidden-state ODE h' = beta Xi(h) and of the
// continuous adjoint ODE, both on the same uniform grid with an element-wise
// clamp after every step.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "ddr/data.hpp"
#include "ddr/dictionary.hpp"
#include "ddr/error.hpp"
#include "ddr/parallel.hpp"
#include "ddr/time_grid.hpp"

namespace ddr {

inline constexpr double kDefaultClip = 100.0;
inline constexpr double kNoClip = std::numeric_limits<double>::infinity();

/// Per-sample paths on the grid. h[i] and lambda[i] are d x (M + 1), column m
/// holding the state at t_m.
struct TrajectoryBatch {
  std::vector<Eigen::MatrixXd> h;
  std::vector<Eigen::MatrixXd> lambda;
  std::vector<bool> clipped;         // forward clamp activated for sample i
  std::vector<bool> adjoint_clipped;  // adjoint clamp activated for sample i

  std::size_t samples() const noexcept { return h.size(); }
  bool has_adjoint() const noexcept { return !lambda.empty(); }
  bool any_clipped() const {
    return std::find(clipped.begin(), clipped.end(), true) != clipped.end();
  }

  /// H_T: d x N matrix of final states.
  Eigen::MatrixXd final_states() const {
    if (h.empty()) return {};
    Eigen::MatrixXd out(h.front().rows(), static_cast<Eigen::Index>(h.size()));
    for (std::size_t i = 0; i < h.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = h[i].col(h[i].cols() - 1);
    return out;
  }
};

namespace detail {

/// Clamps in place and reports whether anything moved.
inline bool clamp_inplace(Eigen::Ref<Eigen::VectorXd> v, double clip) {
  if (!std::isfinite(clip)) return false;
  bool hit = false;
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (v[j] > clip) {
      v[j] = clip;
      hit = true;
    } else if (v[j] < -clip) {
      v[j] = -clip;
      hit = true;
    }
  }
  return hit;
}

inline void check_beta(const Eigen::MatrixXd& beta, const DictionarySpec& spec) {
  if (beta.rows() != spec.dim() || beta.cols() != spec.size())
    throw InvalidInput("beta is " + std::to_string(beta.rows()) + "x" + std::to_string(beta.cols()) +
                       ", dictionary requires " + std::to_string(spec.dim()) + "x" +
                       std::to_string(spec.size()));
  if (!beta.allFinite()) throw InvalidInput("beta contains non-finite entries");
}

inline void check_clip(double clip) {
  if (!(clip > 0.0)) throw InvalidInput("clip threshold must be positive");
}

}  // namespace detail

/// Throws InvalidInput unless ||Q Q^T - I_k||_F <= tol.
inline void check_orthonormal_rows(const Eigen::MatrixXd& Q, double tol = 1e-8) {
  if (Q.rows() < 1 || Q.rows() > Q.cols()) throw InvalidInput("projection must be k x d with 1 <= k <= d");
  const double err = (Q * Q.transpose() - Eigen::MatrixXd::Identity(Q.rows(), Q.rows())).norm();
  if (!(err <= tol))
    throw InvalidInput("projection rows are not orthonormal (||QQ^T - I||_F = " + std::to_string(err) + ")");
}

/// Integrates every column of X forward: h_{m+1} = clamp(h_m + dt beta Xi(h_m)).
inline TrajectoryBatch solve_forward(const Eigen::MatrixXd& beta, const DictionarySpec& spec,
                                     const Eigen::MatrixXd& X, const TimeGrid& grid,
                                     double clip = kDefaultClip) {
  detail::check_beta(beta, spec);
  detail::check_clip(clip);
  if (X.rows() != spec.dim())
    throw InvalidInput("data has " + std::to_string(X.rows()) + " rows, model expects " +
                       std::to_string(spec.dim()));

  const auto n = static_cast<std::size_t>(X.cols());
  const int M = grid.steps();
  const double dt = grid.step();
  TrajectoryBatch out;
  out.h.resize(n);
  out.clipped.assign(n, false);
  std::vector<char> clipped(n, 0);

  parallel_for(n, [&](std::size_t i) {
    Eigen::MatrixXd& path = out.h[i];
    path.resize(spec.dim(), M + 1);
    path.col(0) = X.col(static_cast<Eigen::Index>(i));
    Eigen::VectorXd xi, state = path.col(0);
    for (int m = 0; m < M; ++m) {
      eval_into(spec, state, xi);
      state.noalias() += dt * (beta * xi);
      if (!state.allFinite()) throw NumericalBlowup(i, static_cast<std::size_t>(m + 1), "forward solve diverged");
      if (detail::clamp_inplace(state, clip)) clipped[i] = 1;
      path.col(m + 1) = state;
    }
  });
  for (std::size_t i = 0; i < n; ++i) out.clipped[i] = clipped[i] != 0;
  return out;
}

inline TrajectoryBatch solve_forward(const Eigen::MatrixXd& beta, const DictionarySpec& spec,
                                     const DatasetMatrix& X, const TimeGrid& grid,
                                     double clip = kDefaultClip) {
  return solve_forward(beta, spec, X.values, grid, clip);
}

/// Fills traj.lambda with the adjoint
///
///   lambda' = -dXi(h)^T beta^T lambda + (2 mu / T) dXi(h)^T beta^T beta Xi(h),
///   lambda(T) = -2 (I - Q^T Q) h(T),
///
/// stepped backwards with Euler using the stored forward state at the upper
/// node of each interval.
inline void solve_adjoint(const Eigen::MatrixXd& beta, const DictionarySpec& spec, TrajectoryBatch& traj,
                          const Eigen::MatrixXd& Q, double mu, const TimeGrid& grid,
                          double clip = kDefaultClip) {
  detail::check_beta(beta, spec);
  detail::check_clip(clip);
  if (traj.h.empty()) throw StateError("adjoint solve needs a forward trajectory");
  if (Q.cols() != spec.dim()) throw InvalidInput("projection column count does not match state dimension");
  check_orthonormal_rows(Q);
  if (mu < 0.0) throw InvalidInput("mu must be non-negative");

  const int M = grid.steps();
  const double dt = grid.step();
  const double reg = 2.0 * mu / grid.final_time();
  const auto n = traj.samples();
  for (const auto& path : traj.h)
    if (path.cols() != M + 1 || path.rows() != spec.dim())
      throw StateError("stored trajectory does not match the time grid");

  traj.lambda.resize(n);
  traj.adjoint_clipped.assign(n, false);
  std::vector<char> clipped(n, 0);
  const Eigen::MatrixXd proj = Q.transpose() * Q;

  parallel_for(n, [&](std::size_t i) {
    const Eigen::MatrixXd& path = traj.h[i];
    Eigen::MatrixXd& lam = traj.lambda[i];
    lam.resize(spec.dim(), M + 1);
    const Eigen::VectorXd hT = path.col(M);
    Eigen::VectorXd state = -2.0 * (hT - proj * hT);
    if (detail::clamp_inplace(state, clip)) clipped[i] = 1;
    lam.col(M) = state;

    Eigen::VectorXd xi, w, rhs;
    for (int m = M - 1; m >= 0; --m) {
      const auto h = path.col(m + 1);
      eval_into(spec, h, xi);
      // w = beta^T (-lambda + (2 mu / T) beta Xi)
      w.noalias() = beta.transpose() * (reg * (beta * xi) - state);
      apply_jacobian_transpose(spec, h, w, rhs);
      state.noalias() -= dt * rhs;
      if (!state.allFinite()) throw NumericalBlowup(i, static_cast<std::size_t>(m), "adjoint solve diverged");
      if (detail::clamp_inplace(state, clip)) clipped[i] = 1;
      lam.col(m) = state;
    }
  });
  for (std::size_t i = 0; i < n; ++i) traj.adjoint_clipped[i] = clipped[i] != 0;
}

/// Runs h' = beta Xi(h) backwards from h(T) = hT to t = 0.
inline Eigen::VectorXd solve_reverse(const Eigen::MatrixXd& beta, const DictionarySpec& spec,
                                     const Eigen::Ref<const Eigen::VectorXd>& hT, const TimeGrid& grid,
                                     double clip = kDefaultClip, bool* clipped = nullptr) {
  detail::check_beta(beta, spec);
  detail::check_clip(clip);
  if (hT.size() != spec.dim()) throw InvalidInput("final state has the wrong dimension");
  if (!hT.allFinite()) throw InvalidInput("final state is not finite");
  const double dt = grid.step();
  Eigen::VectorXd state = hT, xi;
  bool hit = false;
  for (int m = grid.steps(); m > 0; --m) {
    eval_into(spec, state, xi);
    state.noalias() -= dt * (beta * xi);
    if (!state.allFinite()) throw NumericalBlowup(0, static_cast<std::size_t>(m - 1), "reverse solve diverged");
    hit = detail::clamp_inplace(state, clip) || hit;
  }
  if (clipped) *clipped = hit;
  return state;
}

/// Debug dump of one sample's forward path: columns t, h_1..h_d.
inline void write_trajectory_csv(const TrajectoryBatch& traj, std::size_t sample, const TimeGrid& grid,
                                 const std::string& path) {
  if (sample >= traj.samples()) throw InvalidInput("sample index out of range");
  const Eigen::MatrixXd& h = traj.h[sample];
  Eigen::MatrixXd table(h.rows() + 1, h.cols());
  for (Eigen::Index m = 0; m < h.cols(); ++m) table(0, m) = grid.time(static_cast<int>(m));
  table.bottomRows(h.rows()) = h;
  std::vector<std::string> header{"t"};
  for (Eigen::Index j = 0; j < h.rows(); ++j) header.push_back("h" + std::to_string(j + 1));
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open '" + path + "' for writing");
  write_csv(out, table, header);
}

}  // namespace ddr
