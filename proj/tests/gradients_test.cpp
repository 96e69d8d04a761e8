#include <gtest/gtest.h>

#include <random>

#include "ddr/gradients.hpp"
#include "ddr/subspace.hpp"
#include "ddr/training.hpp"
#include "test_util.hpp"

using namespace ddr;

namespace {

struct LinearPoint {
  Eigen::MatrixXd X, beta, Q;
};

// beta = A_eps built from the principal directions of X, Q = U_k^T.
LinearPoint linear_point(int d, int k, int n, double eps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LinearPoint p;
  p.X = fixture::uniform(d, n, rng);
  const SvdResult s = svd(p.X);
  p.beta = linear_contraction(s.U, k, eps, 1.0);
  p.Q = s.U.leftCols(k).transpose();
  return p;
}

}  // namespace

TEST(Gradients, VanishForFullProjectionWithoutRegularizer) {
  std::mt19937_64 rng(1);
  const DictionarySpec spec = DictionarySpec::cubic(3);
  const Eigen::MatrixXd beta = fixture::gaussian(3, spec.size(), rng, 0.1);
  const GradientPair g =
      grad(beta, fixture::random_orthonormal_rows(3, 3, rng), spec, fixture::uniform(3, 6, rng), TimeGrid(), 0.0);
  // The terminal adjoint is rounding-level, so everything downstream is too.
  EXPECT_LE(g.g_beta.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(g.g_Q.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Gradients, StationaryAtCorrectedLinearRoot) {
  const double mu = 1e-3;
  const LinearPoint p = linear_point(3, 2, 40, stationary_epsilon(mu), 2);
  const GradientPair g = grad(p.beta, p.Q, DictionarySpec::linear(3), p.X, TimeGrid(1.0, 1e-3), mu);
  EXPECT_LE(g.g_beta.norm(), 1e-3);
  EXPECT_LE(g.g_Q.norm(), 1e-6);
}

TEST(Gradients, ClosedFormRootIsStationaryOnlyWhereRootsMeet) {
  // The two eps(mu) relations agree at mu = 2 and nowhere else on (0, 2].
  EXPECT_NEAR(epsilon_star(2.0), stationary_epsilon(2.0), 1e-9);
  const LinearPoint at2 = linear_point(3, 2, 40, epsilon_star(2.0), 3);
  const LinearPoint at01 = linear_point(3, 2, 40, epsilon_star(0.1), 3);
  const LinearPoint fixed01 = linear_point(3, 2, 40, stationary_epsilon(0.1), 3);
  const TimeGrid fine(1.0, 1e-3);
  const auto spec = DictionarySpec::linear(3);
  const double g2 = grad(at2.beta, at2.Q, spec, at2.X, fine, 2.0).g_beta.norm();
  const double g01 = grad(at01.beta, at01.Q, spec, at01.X, fine, 0.1).g_beta.norm();
  const double f01 = grad(fixed01.beta, fixed01.Q, spec, fixed01.X, fine, 0.1).g_beta.norm();
  EXPECT_LE(g2, 1e-3);
  EXPECT_LE(f01, 1e-3);
  EXPECT_GT(g01, 10 * f01);
}

TEST(Gradients, MatchFiniteDifferencesOnSmallInstance) {
  const GradCheckProblem p = make_grad_check_problem(3, 5, 1, "0123", 0);
  double prev = 0.0;
  for (double dt : {1e-2, 1e-3}) {
    const TimeGrid g(1.0, dt);
    const GradientComparison c = compare_gradients(grad(p.beta, p.Q, p.spec, p.X, g, 0.01, kNoClip),
                                                   fd_grad(p.beta, p.Q, p.spec, p.X, g, 0.01, 1e-5, kNoClip));
    EXPECT_LE(c.frobenius_rel, dt == 1e-2 ? 2e-2 : 5e-3) << "dt " << dt;
    if (prev > 0.0) EXPECT_LT(c.frobenius_rel, prev);
    prev = c.frobenius_rel;
  }
}

TEST(Gradients, ContinuousAdjointGapShrinksWithStep) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const GradCheckProblem p = make_grad_check_problem(3, 5, 1, "0123", seed);
    auto gap = [&](double dt) {
      const TimeGrid g(1.0, dt);
      return compare_gradients(grad(p.beta, p.Q, p.spec, p.X, g, 0.01, kNoClip),
                               fd_grad(p.beta, p.Q, p.spec, p.X, g, 0.01, 1e-5, kNoClip))
          .frobenius_rel;
    };
    EXPECT_LT(gap(1e-3), gap(1e-2) / 5.0) << "seed " << seed;
  }
}

TEST(Gradients, ProjectionGradientMatchesAmbientDifferencesAtFeasiblePoints) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    const Eigen::MatrixXd H = fixture::gaussian(4, 12, rng);
    const Eigen::MatrixXd Q = fixture::random_orthonormal_rows(2, 4, rng);
    const Eigen::MatrixXd g = q_gradient(Q, H);
    Eigen::MatrixXd fd(2, 4), q = Q;
    const double step = 1e-5;
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 4; ++c) {
        q(r, c) = Q(r, c) + step;
        const double up = projection_residual(H, q);
        q(r, c) = Q(r, c) - step;
        const double down = projection_residual(H, q);
        q(r, c) = Q(r, c);
        fd(r, c) = (up - down) / (2 * step);
      }
    EXPECT_LE((g - fd).norm(), 1e-6 * (1.0 + g.norm()));
  }
}

TEST(FiniteDifferences, ProjectionGradientOfLinearResidual) {
  std::mt19937_64 rng(5);
  const DictionarySpec spec = DictionarySpec::cubic(3);
  const Eigen::MatrixXd X = fixture::uniform(3, 10, rng);
  const Eigen::MatrixXd Q = fixture::random_orthonormal_rows(1, 3, rng);
  const GradientPair fd = fd_grad(Eigen::MatrixXd::Zero(3, spec.size()), Q, spec, X, TimeGrid(), 0.0);
  const Eigen::MatrixXd XXt = X * X.transpose();
  const Eigen::MatrixXd closed = (2.0 * Q * XXt * Q.transpose() * Q - 2.0 * Q * XXt) / 10.0;
  EXPECT_LE((fd.g_Q - closed).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(FiniteDifferences, ZeroDataGivesZeroGradients) {
  std::mt19937_64 rng(6);
  const DictionarySpec spec = DictionarySpec::cubic(3);
  const Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(3, spec.size());
  const Eigen::MatrixXd Q = fixture::random_orthonormal_rows(2, 3, rng);
  const Eigen::MatrixXd X = Eigen::MatrixXd::Zero(3, 4);
  const GradientPair fd = fd_grad(beta, Q, spec, X, TimeGrid(), 0.1);
  const GradientPair an = grad(beta, Q, spec, X, TimeGrid(), 0.1);
  EXPECT_LE(fd.g_beta.cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE(fd.g_Q.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(an.g_beta.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(an.g_Q.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(fd_grad(beta, Q, spec, X, TimeGrid(), 0.1, 0.0), InvalidInput);
}

TEST(Gradients, DeterministicAndSideEffectFree) {
  const GradCheckProblem p = make_grad_check_problem(3, 7, 2, "0123", 9);
  const GradCheckProblem copy = p;
  const GradientPair a = grad(p.beta, p.Q, p.spec, p.X, TimeGrid(), 0.05);
  const GradientPair b = grad(p.beta, p.Q, p.spec, p.X, TimeGrid(), 0.05);
  EXPECT_EQ(a.g_beta, b.g_beta);
  EXPECT_EQ(a.g_Q, b.g_Q);
  EXPECT_EQ(p.beta, copy.beta);
  EXPECT_EQ(p.Q, copy.Q);
  EXPECT_EQ(p.X, copy.X);
}

TEST(Gradients, BetaGradientNeedsAdjoint) {
  const GradCheckProblem p = make_grad_check_problem();
  const TrajectoryBatch t = solve_forward(p.beta, p.spec, p.X, TimeGrid());
  EXPECT_THROW(beta_gradient(p.beta, p.spec, t, 0.1, TimeGrid()), StateError);
}

TEST(Gradients, ComparisonMetrics) {
  GradientPair ref{Eigen::MatrixXd::Constant(2, 2, 1.0), Eigen::MatrixXd::Constant(1, 2, 2.0)};
  GradientPair same = ref;
  EXPECT_EQ(compare_gradients(same, ref).frobenius_rel, 0.0);
  GradientPair off = ref;
  off.g_Q(0, 0) += 0.2;
  const GradientComparison c = compare_gradients(off, ref);
  EXPECT_NEAR(c.max_entry_rel, 0.1, 1e-15);
  EXPECT_NEAR(c.frobenius_rel, 0.2 / std::sqrt(12.0), 1e-15);
  EXPECT_EQ(c.beta_rel, 0.0);
}

TEST(GradCheckProblem, ShapesAndValidation) {
  const GradCheckProblem p = make_grad_check_problem(4, 6, 2, "13", 1);
  EXPECT_EQ(p.X.rows(), 4);
  EXPECT_EQ(p.X.cols(), 6);
  EXPECT_EQ(p.beta.cols(), 8);
  EXPECT_LE((p.Q * p.Q.transpose() - Eigen::MatrixXd::Identity(2, 2)).norm(), 1e-12);
  EXPECT_THROW(make_grad_check_problem(3, 5, 3), InvalidInput);
}
