#pragma once

#include <Eigen/Dense>

#include <cmath>

namespace ddr {

/// Adam with bias-corrected moments. State is shaped on the first step.
class Adam {
 public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(Eigen::MatrixXd& params, const Eigen::MatrixXd& grad, double lr) {
    if (m_.size() == 0) {
      m_ = Eigen::MatrixXd::Zero(params.rows(), params.cols());
      v_ = Eigen::MatrixXd::Zero(params.rows(), params.cols());
    }
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  }

  long steps() const noexcept { return t_; }

 private:
  double beta1_, beta2_, eps_;
  Eigen::MatrixXd m_, v_;
  long t_ = 0;
};

}  // namespace ddr
