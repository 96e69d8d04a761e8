#pragma once

#include <Eigen/Dense>

#include <vector>

#include "ddr/dictionary.hpp"
#include "ddr/dynamics.hpp"
#include "ddr/time_grid.hpp"

namespace ddr {

/// J = J1 + mu * J2. J2 is the raw mean kinetic energy (no mu factor).
struct ObjectiveReport {
  double J1 = 0.0;
  double J2 = 0.0;
  double J = 0.0;
  double mu = 0.0;
  long N = 0;
};

/// (1/N) sum_i ||(I - Q^T Q) h_i(T)||^2 over the columns of H.
inline double projection_residual(const Eigen::MatrixXd& H, const Eigen::MatrixXd& Q) {
  if (H.cols() == 0) return 0.0;
  const Eigen::MatrixXd R = H - Q.transpose() * (Q * H);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < R.cols(); ++i) sum += R.col(i).squaredNorm();
  return sum / static_cast<double>(H.cols());
}

inline double residual(const TrajectoryBatch& traj, const Eigen::MatrixXd& Q) {
  if (traj.h.empty()) throw StateError("residual needs a forward trajectory");
  if (Q.cols() != traj.h.front().rows()) throw InvalidInput("projection does not match state dimension");
  check_orthonormal_rows(Q);
  return projection_residual(traj.final_states(), Q);
}

/// (1/(N T)) sum_i sum_{m<M} ||beta Xi(h_i(t_m))||^2 dt. The 1/T factor keeps
/// the loss consistent with the (2 mu / T) terms in the gradient.
inline double kinetic_energy(const Eigen::MatrixXd& beta, const DictionarySpec& spec,
                             const TrajectoryBatch& traj, const TimeGrid& grid) {
  if (traj.h.empty()) throw StateError("kinetic energy needs a forward trajectory");
  const int M = grid.steps();
  const auto n = traj.samples();
  std::vector<double> per_sample(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    const Eigen::MatrixXd& path = traj.h[i];
    if (path.cols() != M + 1) throw StateError("stored trajectory does not match the time grid");
    Eigen::VectorXd xi;
    double acc = 0.0;
    for (int m = 0; m < M; ++m) {
      eval_into(spec, path.col(m), xi);
      acc += (beta * xi).squaredNorm();
    }
    per_sample[i] = acc * grid.step();
  });
  double sum = 0.0;
  for (double v : per_sample) sum += v;
  return sum / (static_cast<double>(n) * grid.final_time());
}

inline ObjectiveReport make_report(double J1, double J2, double mu, long N) {
  return {J1, J2, J1 + mu * J2, mu, N};
}

inline ObjectiveReport evaluate(const Eigen::MatrixXd& beta, const Eigen::MatrixXd& Q, const DictionarySpec& spec,
                                const Eigen::MatrixXd& X, const TimeGrid& grid, double mu,
                                double clip = kDefaultClip) {
  if (mu < 0.0) throw InvalidInput("mu must be non-negative");
  const TrajectoryBatch traj = solve_forward(beta, spec, X, grid, clip);
  return make_report(residual(traj, Q), kinetic_energy(beta, spec, traj, grid), mu, static_cast<long>(X.cols()));
}

}  // namespace ddr
