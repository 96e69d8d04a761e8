#pragma once

// Exact solution of the projection subproblem
//
//   min_{Q Q^T = I_k} ||(I - Q^T Q) H||_F^2  =  sum_{i>k} sigma_i(H)^2,
//
// attained by the top-k left singular vectors, plus the PCA baseline built on
// the same routine.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

#include "ddr/data.hpp"
#include "ddr/error.hpp"

namespace ddr {

struct SvdResult {
  Eigen::MatrixXd U;                // d x d orthogonal
  Eigen::VectorXd singular_values;  // length d, non-increasing, zero-padded when N < d
  Eigen::MatrixXd V;                // N x min(d, N), orthonormal columns
};

/// Flips each left singular vector so its largest-magnitude entry is
/// positive (lowest index on ties); V follows so U S V^T is unchanged.
inline void apply_sign_convention(Eigen::MatrixXd& U, Eigen::MatrixXd* V = nullptr) {
  for (Eigen::Index c = 0; c < U.cols(); ++c) {
    Eigen::Index best = 0;
    double mag = -1.0;
    for (Eigen::Index r = 0; r < U.rows(); ++r) {
      const double a = std::abs(U(r, c));
      if (a > mag) {
        mag = a;
        best = r;
      }
    }
    if (U(best, c) < 0.0) {
      U.col(c) *= -1.0;
      if (V && c < V->cols()) V->col(c) *= -1.0;
    }
  }
}

inline SvdResult svd(const Eigen::MatrixXd& H) {
  if (H.rows() < 1 || H.cols() < 1) throw InvalidInput("svd of an empty matrix");
  if (!H.allFinite()) throw InvalidInput("svd input contains non-finite values");
  Eigen::JacobiSVD<Eigen::MatrixXd> solver(H, Eigen::ComputeFullU | Eigen::ComputeThinV);
  SvdResult out;
  out.U = solver.matrixU();
  out.V = solver.matrixV();
  out.singular_values = Eigen::VectorXd::Zero(H.rows());
  out.singular_values.head(solver.singularValues().size()) = solver.singularValues();
  apply_sign_convention(out.U, &out.V);
  return out;
}

struct QSolution {
  Eigen::MatrixXd Q;       // k x d, rows = leading left singular vectors
  double residual = 0.0;   // sum_{i>k} sigma_i^2 (not divided by N)
  bool degenerate = false; // sigma_k == sigma_{k+1}: minimizer not unique
};

inline QSolution solve_q(const Eigen::MatrixXd& H, int k) {
  if (k < 1 || k >= H.rows())
    throw InvalidInput("target dimension k = " + std::to_string(k) + " must satisfy 1 <= k < d = " +
                       std::to_string(H.rows()));
  const SvdResult s = svd(H);
  QSolution out;
  out.Q = s.U.leftCols(k).transpose();
  out.residual = s.singular_values.tail(H.rows() - k).squaredNorm();
  const double scale = std::max(s.singular_values[0], 1e-300);
  out.degenerate = std::abs(s.singular_values[k - 1] - s.singular_values[k]) <= 1e-12 * scale;
  return out;
}

struct PcaEmbedding {
  Eigen::MatrixXd Q;       // k x d
  Eigen::MatrixXd Y;       // k x N
  double residual = 0.0;   // (1/N) sum_{j>k} sigma_j(X)^2
  bool degenerate = false;
};

/// Uncentered PCA: Y = U_k^T X.
inline PcaEmbedding pca_embed(const Eigen::MatrixXd& X, int k) {
  QSolution q = solve_q(X, k);
  PcaEmbedding out;
  out.Y = q.Q * X;
  out.Q = std::move(q.Q);
  out.residual = q.residual / static_cast<double>(X.cols());
  out.degenerate = q.degenerate;
  return out;
}

inline PcaEmbedding pca_embed(const DatasetMatrix& X, int k) { return pca_embed(X.values, k); }

/// Centered PCA projection onto the top d_target directions. The mean and
/// basis are kept in the result's provenance.
inline DatasetMatrix pca_reduce(const DatasetMatrix& X, int d_target) {
  validate(X);
  if (d_target < 1 || d_target >= X.dim())
    throw InvalidInput("pca_reduce target " + std::to_string(d_target) + " must satisfy 1 <= target < d = " +
                       std::to_string(X.dim()));
  const Eigen::VectorXd mean = X.values.rowwise().mean();
  const Eigen::MatrixXd centered = X.values.colwise() - mean;
  const SvdResult s = svd(centered);
  PcaProvenance prov{mean, s.U.leftCols(d_target)};
  DatasetMatrix out(prov.basis.transpose() * centered);
  for (int j = 0; j < d_target; ++j) out.feature_names.push_back("pc" + std::to_string(j + 1));
  out.pca = std::move(prov);
  return out;
}

}  // namespace ddr
