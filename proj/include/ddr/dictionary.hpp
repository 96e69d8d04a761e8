#pragma once

// Candidate-function dictionary for the learned vector field h' = beta * Xi(h).
//
// Xi(h) stacks coordinatewise monomials block by block:
//
//   [ 1 | h_1 .. h_d | h_1^2 .. h_d^2 | h_1^3 .. h_d^3 ]
//
// restricted to the degrees present in the spec. The block order is fixed so
// that column indices of beta mean the same thing in every checkpoint.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ddr/error.hpp"

namespace ddr {

inline constexpr int kMaxDegree = 3;

class DictionarySpec {
 public:
  DictionarySpec() = default;

  DictionarySpec(int d, std::vector<int> degrees) : d_(d), degrees_(std::move(degrees)) {
    if (d_ < 1) throw InvalidInput("dictionary dimension must be >= 1");
    std::sort(degrees_.begin(), degrees_.end());
    degrees_.erase(std::unique(degrees_.begin(), degrees_.end()), degrees_.end());
    if (degrees_.empty()) throw InvalidInput("dictionary needs at least one degree");
    for (int deg : degrees_) {
      if (deg < 0 || deg > kMaxDegree)
        throw InvalidInput("dictionary degree " + std::to_string(deg) + " outside {0,1,2,3}");
    }
    offsets_.fill(-1);
    int off = 0;
    for (int deg : degrees_) {
      offsets_[static_cast<std::size_t>(deg)] = off;
      off += deg == 0 ? 1 : d_;
    }
    size_ = off;
  }

  /// Parses a compact degree string such as "0123" or "13".
  static DictionarySpec parse(int d, const std::string& degrees) {
    std::vector<int> degs;
    for (char c : degrees) {
      if (c == ',' || c == ' ') continue;
      if (c < '0' || c > '9') throw InvalidInput("bad degree character '" + std::string(1, c) + "'");
      degs.push_back(c - '0');
    }
    return DictionarySpec(d, std::move(degs));
  }

  /// Default polynomial dictionary up to degree 3: 3d + 1 functions.
  static DictionarySpec cubic(int d) { return DictionarySpec(d, {0, 1, 2, 3}); }
  static DictionarySpec linear(int d) { return DictionarySpec(d, {1}); }

  int dim() const noexcept { return d_; }
  /// Number of dictionary functions d_n.
  int size() const noexcept { return size_; }
  const std::vector<int>& degrees() const noexcept { return degrees_; }
  bool has_degree(int deg) const noexcept {
    return deg >= 0 && deg <= kMaxDegree && offsets_[static_cast<std::size_t>(deg)] >= 0;
  }
  /// First column of the block holding degree `deg`, or -1 when absent.
  int offset(int deg) const noexcept { return offsets_[static_cast<std::size_t>(deg)]; }

  std::string degree_string() const {
    std::string s;
    for (int deg : degrees_) s += static_cast<char>('0' + deg);
    return s;
  }

  friend bool operator==(const DictionarySpec& a, const DictionarySpec& b) {
    return a.d_ == b.d_ && a.degrees_ == b.degrees_;
  }

 private:
  int d_ = 0;
  std::vector<int> degrees_;
  std::array<int, kMaxDegree + 1> offsets_{-1, -1, -1, -1};
  int size_ = 0;
};

namespace detail {
inline void check_dim(const DictionarySpec& spec, Eigen::Index n) {
  if (n != spec.dim())
    throw InvalidInput("state has dimension " + std::to_string(n) + ", dictionary expects " +
                       std::to_string(spec.dim()));
}
}  // namespace detail

/// Writes Xi(h) into `out` (resized to d_n).
inline void eval_into(const DictionarySpec& spec, const Eigen::Ref<const Eigen::VectorXd>& h,
                      Eigen::VectorXd& out) {
  detail::check_dim(spec, h.size());
  const int d = spec.dim();
  out.resize(spec.size());
  if (spec.has_degree(0)) out[spec.offset(0)] = 1.0;
  for (int deg = 1; deg <= kMaxDegree; ++deg) {
    if (!spec.has_degree(deg)) continue;
    const int off = spec.offset(deg);
    for (int j = 0; j < d; ++j) {
      const double x = h[j];
      out[off + j] = deg == 1 ? x : (deg == 2 ? x * x : x * x * x);
    }
  }
}

inline Eigen::VectorXd eval(const DictionarySpec& spec, const Eigen::Ref<const Eigen::VectorXd>& h) {
  Eigen::VectorXd out;
  eval_into(spec, h, out);
  return out;
}

/// Jacobian dXi/dh as a d_n x d matrix. Row l holds the gradient of xi_l.
inline Eigen::MatrixXd eval_jacobian(const DictionarySpec& spec,
                                     const Eigen::Ref<const Eigen::VectorXd>& h) {
  detail::check_dim(spec, h.size());
  const int d = spec.dim();
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(spec.size(), d);
  for (int deg = 1; deg <= kMaxDegree; ++deg) {
    if (!spec.has_degree(deg)) continue;
    const int off = spec.offset(deg);
    for (int j = 0; j < d; ++j) {
      const double x = h[j];
      jac(off + j, j) = deg == 1 ? 1.0 : (deg == 2 ? 2.0 * x : 3.0 * x * x);
    }
  }
  return jac;
}

/// Computes dXi(h)^T * w without forming the Jacobian. Each column of the
/// Jacobian touches one row per monomial block, so this is O(d_n).
inline void apply_jacobian_transpose(const DictionarySpec& spec,
                                     const Eigen::Ref<const Eigen::VectorXd>& h,
                                     const Eigen::Ref<const Eigen::VectorXd>& w,
                                     Eigen::VectorXd& out) {
  const int d = spec.dim();
  out.setZero(d);
  const int o1 = spec.offset(1), o2 = spec.offset(2), o3 = spec.offset(3);
  for (int j = 0; j < d; ++j) {
    double acc = 0.0;
    const double x = h[j];
    if (o1 >= 0) acc += w[o1 + j];
    if (o2 >= 0) acc += 2.0 * x * w[o2 + j];
    if (o3 >= 0) acc += 3.0 * x * x * w[o3 + j];
    out[j] = acc;
  }
}

/// Upper bound on the operator 2-norm of beta * dXi(h) over the box
/// |h_j| <= radius[j]. Columns of the product are beta_1j + 2 h_j beta_2j +
/// 3 h_j^2 beta_3j (beta_kj = column j of the degree-k block), so the
/// Frobenius norm of the per-column triangle bound dominates the 2-norm.
inline double field_lipschitz_bound(const DictionarySpec& spec, const Eigen::MatrixXd& beta,
                                    const Eigen::Ref<const Eigen::VectorXd>& radius) {
  const int d = spec.dim();
  double sum = 0.0;
  for (int j = 0; j < d; ++j) {
    const double r = std::abs(radius[j]);
    double col = 0.0;
    if (spec.has_degree(1)) col += beta.col(spec.offset(1) + j).norm();
    if (spec.has_degree(2)) col += 2.0 * r * beta.col(spec.offset(2) + j).norm();
    if (spec.has_degree(3)) col += 3.0 * r * r * beta.col(spec.offset(3) + j).norm();
    sum += col * col;
  }
  return std::sqrt(sum);
}

}  // namespace ddr
