#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "ddr/dynamics.hpp"
#include "ddr/parallel.hpp"
#include "test_util.hpp"

using namespace ddr;

namespace {

// Random orthogonal U and the symmetric generator (1/T) U diag(0.., log eps..) U^T.
struct LinearFlow {
  Eigen::MatrixXd U;
  Eigen::MatrixXd A;
  double eps;
  int k;
};

LinearFlow linear_flow(int d, int k, double eps, double T, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LinearFlow f{fixture::random_orthonormal_rows(d, d, rng).transpose(), {}, eps, k};
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(d);
  diag.tail(d - k).setConstant(std::log(eps));
  f.A = f.U * diag.asDiagonal() * f.U.transpose() / T;
  return f;
}

// Exact time-T map of the linear flow: U diag(1.., eps..) U^T.
Eigen::MatrixXd exact_map(const LinearFlow& f) {
  Eigen::VectorXd diag = Eigen::VectorXd::Ones(f.U.rows());
  diag.tail(f.U.rows() - f.k).setConstant(f.eps);
  return f.U * diag.asDiagonal() * f.U.transpose();
}

Eigen::MatrixXd cubic_beta(double coef) {
  return Eigen::MatrixXd::Constant(1, 1, coef);
}

// beta for z1' = 2 z3^3, z3' = -2 z1^3 on the degree-3-only dictionary.
Eigen::MatrixXd generator_beta() {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(3, 3);
  b(0, 2) = 2.0;
  b(2, 0) = -2.0;
  return b;
}

double quartic_invariant(const Eigen::VectorXd& z) { return std::pow(z[0], 4) + std::pow(z[2], 4); }

}  // namespace

TEST(TimeGrid, StepCountAndValidation) {
  const TimeGrid g;
  EXPECT_EQ(g.steps(), 100);
  EXPECT_NEAR(g.steps() * g.step(), g.final_time(), 1e-12);
  EXPECT_EQ(TimeGrid(2.0, 0.5).steps(), 4);
  EXPECT_THROW(TimeGrid(1.0, 0.3), InvalidInput);
  EXPECT_THROW(TimeGrid(1.0, 0.0), InvalidInput);
  EXPECT_THROW(TimeGrid(-1.0, 0.1), InvalidInput);
  EXPECT_THROW(TimeGrid(0.1, 0.3), InvalidInput);
}

TEST(Forward, ZeroFieldKeepsStatesBitwiseConstant) {
  std::mt19937_64 rng(1);
  const DictionarySpec spec = DictionarySpec::cubic(3);
  const Eigen::MatrixXd X = fixture::uniform(3, 7, rng);
  const TrajectoryBatch t = solve_forward(Eigen::MatrixXd::Zero(3, spec.size()), spec, X, TimeGrid());
  ASSERT_EQ(t.samples(), 7u);
  for (std::size_t i = 0; i < t.samples(); ++i)
    for (Eigen::Index m = 0; m < t.h[i].cols(); ++m) EXPECT_EQ(t.h[i].col(m), X.col(static_cast<Eigen::Index>(i)));
  EXPECT_EQ(t.final_states(), X);
  EXPECT_FALSE(t.any_clipped());
}

TEST(Forward, InitialColumnIsTheSample) {
  std::mt19937_64 rng(2);
  const DictionarySpec spec = DictionarySpec::cubic(2);
  const Eigen::MatrixXd X = fixture::uniform(2, 4, rng);
  const TrajectoryBatch t = solve_forward(fixture::gaussian(2, spec.size(), rng, 0.3), spec, X, TimeGrid());
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(t.h[i].col(0), X.col(static_cast<Eigen::Index>(i)));
}

TEST(Forward, LinearContractionApproachesProjection) {
  const LinearFlow f = linear_flow(4, 2, 0.2, 1.0, 5);
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd X = fixture::uniform(4, 10, rng);
  const Eigen::MatrixXd exact = exact_map(f) * X;
  double prev = 0.0;
  for (double dt : {1e-2, 1e-3}) {
    const TimeGrid g(1.0, dt);
    const Eigen::MatrixXd HT = solve_forward(f.A, DictionarySpec::linear(4), X, g).final_states();
    const double err = (HT - exact).cwiseAbs().maxCoeff();
    EXPECT_LE(err, 2.0 * dt) << "dt " << dt;
    if (prev > 0.0) EXPECT_LT(err, prev / 5.0);
    prev = err;
  }
}

TEST(Forward, CubicDecayMatchesClosedForm) {
  // h' = -h^3, h(0) = 1 has h(t) = 1 / sqrt(1 + 2t).
  const TrajectoryBatch t =
      solve_forward(cubic_beta(-1.0), DictionarySpec(1, {3}), Eigen::MatrixXd::Ones(1, 1), TimeGrid());
  EXPECT_NEAR(t.h[0](0, 100), 1.0 / std::sqrt(3.0), 5e-3);
}

TEST(Forward, FirstOrderConvergenceOnLinearFlow) {
  const LinearFlow f = linear_flow(3, 1, 0.3, 1.0, 4);
  const Eigen::MatrixXd X = Eigen::MatrixXd::Constant(3, 1, 0.7);
  const Eigen::MatrixXd exact = exact_map(f) * X;
  auto error = [&](double dt) {
    return (solve_forward(f.A, DictionarySpec::linear(3), X, TimeGrid(1.0, dt)).final_states() - exact).norm();
  };
  for (double dt : {0.02, 0.01, 0.005}) {
    const double factor = error(dt) / error(dt / 2);
    EXPECT_GE(factor, 1.5) << dt;
    EXPECT_LE(factor, 2.5) << dt;
  }
}

TEST(Forward, GeneratorInvariantDriftShrinksLinearly) {
  const DictionarySpec spec(3, {3});
  Eigen::MatrixXd X(3, 3);
  X << 0.9, -0.4, 1.0,
       0.1, 0.5, -1.0,
       0.0, 0.0, 0.0;
  auto drift = [&](double dt) {
    const Eigen::MatrixXd HT = solve_forward(generator_beta(), spec, X, TimeGrid(1.0, dt), kNoClip).final_states();
    double worst = 0.0;
    for (Eigen::Index i = 0; i < X.cols(); ++i)
      worst = std::max(worst, std::abs(quartic_invariant(HT.col(i)) - quartic_invariant(X.col(i))));
    return worst;
  };
  const double a = drift(0.01), b = drift(0.005), c = drift(0.0025);
  EXPECT_GT(a, 0.0);
  EXPECT_NEAR(a / b, 2.0, 0.5);
  EXPECT_NEAR(b / c, 2.0, 0.5);
}

TEST(Forward, ClampsAndFlags) {
  // h' = h^3 from 5 escapes quickly; the clamp holds it at 20.
  Eigen::MatrixXd X(1, 2);
  X << 5.0, 0.1;
  const TrajectoryBatch t = solve_forward(cubic_beta(1.0), DictionarySpec(1, {3}), X, TimeGrid(), 20.0);
  EXPECT_TRUE(t.clipped[0]);
  EXPECT_FALSE(t.clipped[1]);
  EXPECT_EQ(t.h[0](0, 100), 20.0);
  for (const auto& path : t.h) EXPECT_LE(path.cwiseAbs().maxCoeff(), 20.0);
}

TEST(Forward, UnclippedBlowupReportsSampleAndStep) {
  Eigen::MatrixXd X(1, 3);
  X << 0.1, 1e3, 0.2;
  try {
    solve_forward(cubic_beta(1.0), DictionarySpec(1, {3}), X, TimeGrid(), kNoClip);
    FAIL() << "expected a blowup";
  } catch (const NumericalBlowup& e) {
    EXPECT_EQ(e.sample(), 1u);
    EXPECT_GE(e.step(), 1u);
  }
}

TEST(Forward, RejectsBadInputs) {
  const DictionarySpec spec = DictionarySpec::cubic(2);
  const Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(2, spec.size());
  EXPECT_THROW(solve_forward(beta, spec, Eigen::MatrixXd::Zero(3, 1), TimeGrid()), InvalidInput);
  EXPECT_THROW(solve_forward(Eigen::MatrixXd::Zero(2, 3), spec, Eigen::MatrixXd::Zero(2, 1), TimeGrid()),
               InvalidInput);
  EXPECT_THROW(solve_forward(beta, spec, Eigen::MatrixXd::Zero(2, 1), TimeGrid(), 0.0), InvalidInput);
}

TEST(Forward, ResultIndependentOfThreadCount) {
  std::mt19937_64 rng(21);
  const DictionarySpec spec = DictionarySpec::cubic(3);
  const Eigen::MatrixXd beta = fixture::gaussian(3, spec.size(), rng, 0.5);
  const Eigen::MatrixXd X = fixture::uniform(3, 37, rng);
  set_thread_count(1);
  const TrajectoryBatch a = solve_forward(beta, spec, X, TimeGrid());
  set_thread_count(4);
  const TrajectoryBatch b = solve_forward(beta, spec, X, TimeGrid());
  set_thread_count(1);
  for (std::size_t i = 0; i < a.samples(); ++i) EXPECT_EQ(a.h[i], b.h[i]);
}

TEST(Adjoint, TerminalConditionIsExact) {
  std::mt19937_64 rng(3);
  const DictionarySpec spec = DictionarySpec::cubic(3);
  const Eigen::MatrixXd beta = fixture::gaussian(3, spec.size(), rng, 0.1);
  const Eigen::MatrixXd Q = fixture::random_orthonormal_rows(2, 3, rng);
  TrajectoryBatch t = solve_forward(beta, spec, fixture::uniform(3, 5, rng), TimeGrid());
  ASSERT_FALSE(t.any_clipped());
  solve_adjoint(beta, spec, t, Q, 0.1, TimeGrid());
  const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(3, 3) - Q.transpose() * Q;
  for (std::size_t i = 0; i < t.samples(); ++i) {
    const Eigen::VectorXd hT = t.h[i].col(100);
    const Eigen::VectorXd expected = -2.0 * (hT - Q.transpose() * Q * hT);
    EXPECT_EQ(t.lambda[i].col(100), expected);
    EXPECT_LE((t.lambda[i].col(100) + 2.0 * P * hT).norm(), 1e-14);
  }
}

TEST(Adjoint, VanishesForFullRankProjectionWithoutRegularizer) {
  std::mt19937_64 rng(4);
  const DictionarySpec spec = DictionarySpec::cubic(3);
  const Eigen::MatrixXd beta = fixture::gaussian(3, spec.size(), rng, 0.3);
  TrajectoryBatch t = solve_forward(beta, spec, fixture::uniform(3, 4, rng), TimeGrid());
  solve_adjoint(beta, spec, t, fixture::random_orthonormal_rows(3, 3, rng), 0.0, TimeGrid());
  for (const auto& lam : t.lambda) EXPECT_LE(lam.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Adjoint, ConstantForZeroField) {
  std::mt19937_64 rng(5);
  const DictionarySpec spec = DictionarySpec::cubic(3);
  const Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(3, spec.size());
  const Eigen::MatrixXd X = fixture::uniform(3, 3, rng);
  const Eigen::MatrixXd Q = fixture::random_orthonormal_rows(1, 3, rng);
  TrajectoryBatch t = solve_forward(beta, spec, X, TimeGrid());
  solve_adjoint(beta, spec, t, Q, 0.0, TimeGrid());
  for (std::size_t i = 0; i < t.samples(); ++i) {
    const Eigen::VectorXd x = X.col(static_cast<Eigen::Index>(i));
    const Eigen::VectorXd expected = -2.0 * (x - Q.transpose() * (Q * x));
    for (Eigen::Index m = 0; m < t.lambda[i].cols(); ++m) EXPECT_LE((t.lambda[i].col(m) - expected).norm(), 1e-15);
  }
}

TEST(Adjoint, MatchesClosedFormOnLinearContraction) {
  // At beta = A_eps, Q = U_k^T the adjoint is
  // -[2 eps^(2 - s) + (mu eps log eps / T^2)(eps^(1 - s) - eps^(-(1 - s)))] P x, s = t / T,
  // with P the projector onto the contracted directions.
  const double eps = 0.4, mu = 0.3, T = 1.0;
  const LinearFlow f = linear_flow(3, 1, eps, T, 8);
  const Eigen::MatrixXd Q = f.U.leftCols(1).transpose();
  const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(3, 3) - Q.transpose() * Q;
  const Eigen::VectorXd x = Eigen::Vector3d(0.3, -0.8, 0.5);
  const DictionarySpec spec = DictionarySpec::linear(3);
  double prev = 0.0;
  for (double dt : {1e-2, 1e-3}) {
    const TimeGrid g(T, dt);
    TrajectoryBatch t = solve_forward(f.A, spec, x, g);
    solve_adjoint(f.A, spec, t, Q, mu, g);
    double worst = 0.0;
    for (int m = 0; m <= g.steps(); ++m) {
      const double s = g.time(m) / T;
      const double c = 2.0 * std::pow(eps, 2.0 - s) +
                       mu * eps * std::log(eps) / (T * T) * (std::pow(eps, 1.0 - s) - std::pow(eps, s - 1.0));
      worst = std::max(worst, (t.lambda[0].col(m) + c * P * x).norm());
    }
    EXPECT_LE(worst, 2.0 * dt) << "dt " << dt;
    if (prev > 0.0) EXPECT_LT(worst, prev / 5.0);
    prev = worst;
  }
}

TEST(Adjoint, ValidatesState) {
  const DictionarySpec spec = DictionarySpec::linear(2);
  const Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(2, 2);
  TrajectoryBatch empty;
  EXPECT_THROW(solve_adjoint(beta, spec, empty, Eigen::MatrixXd::Identity(1, 2), 0.0, TimeGrid()), StateError);
  TrajectoryBatch t = solve_forward(beta, spec, Eigen::MatrixXd::Ones(2, 1), TimeGrid());
  Eigen::MatrixXd bad(1, 2);
  bad << 1.0, 1.0;
  EXPECT_THROW(solve_adjoint(beta, spec, t, bad, 0.0, TimeGrid()), InvalidInput);
  EXPECT_THROW(solve_adjoint(beta, spec, t, Eigen::MatrixXd::Identity(1, 2), 0.0, TimeGrid(1.0, 0.5)), StateError);
}

TEST(Reverse, ZeroFieldIsIdentity) {
  const DictionarySpec spec = DictionarySpec::cubic(2);
  const Eigen::Vector2d y(0.3, -4.0);
  EXPECT_EQ(solve_reverse(Eigen::MatrixXd::Zero(2, spec.size()), spec, y, TimeGrid()), Eigen::VectorXd(y));
}

TEST(Reverse, CubicDecayRecoversInitialValue) {
  const Eigen::VectorXd hT = Eigen::VectorXd::Constant(1, 1.0 / std::sqrt(3.0));
  const double coarse = solve_reverse(cubic_beta(-1.0), DictionarySpec(1, {3}), hT, TimeGrid())[0];
  const double fine = solve_reverse(cubic_beta(-1.0), DictionarySpec(1, {3}), hT, TimeGrid(1.0, 1e-3))[0];
  EXPECT_NEAR(coarse, 1.0, 1e-2);
  EXPECT_NEAR(fine, 1.0, 1e-3);
  EXPECT_LT(std::abs(fine - 1.0), std::abs(coarse - 1.0) / 5.0);
}

TEST(Reverse, RoundTripConvergesAtFirstOrder) {
  std::mt19937_64 rng(12);
  const DictionarySpec spec = DictionarySpec::cubic(3);
  const Eigen::MatrixXd beta = fixture::gaussian(3, spec.size(), rng, 0.3);
  const Eigen::MatrixXd X = fixture::uniform(3, 6, rng);
  auto error = [&](double dt) {
    const TimeGrid g(1.0, dt);
    const Eigen::MatrixXd HT = solve_forward(beta, spec, X, g).final_states();
    double worst = 0.0;
    for (Eigen::Index i = 0; i < X.cols(); ++i)
      worst = std::max(worst, (solve_reverse(beta, spec, HT.col(i), g) - X.col(i)).norm());
    return worst;
  };
  const double coarse = error(1e-2), fine = error(1e-3);
  EXPECT_LT(coarse, 0.05);
  EXPECT_GT(coarse / fine, 5.0);
  EXPECT_LT(coarse / fine, 20.0);
}

TEST(Reverse, ReportsBlowup) {
  EXPECT_THROW(solve_reverse(cubic_beta(-1.0), DictionarySpec(1, {3}), Eigen::VectorXd::Constant(1, 1e3),
                             TimeGrid(), kNoClip),
               NumericalBlowup);
  EXPECT_THROW(solve_reverse(cubic_beta(-1.0), DictionarySpec(1, {3}), Eigen::VectorXd::Constant(1, NAN), TimeGrid()),
               InvalidInput);
}

TEST(Trajectory, DumpWritesTimeAndStateColumns) {
  const auto dir = fixture::scratch_dir("trajectory");
  const DictionarySpec spec = DictionarySpec::linear(2);
  const TrajectoryBatch t = solve_forward(-Eigen::MatrixXd::Identity(2, 2), spec, Eigen::MatrixXd::Ones(2, 2),
                                          TimeGrid(1.0, 0.25));
  const auto path = (dir / "traj.csv").string();
  write_trajectory_csv(t, 1, TimeGrid(1.0, 0.25), path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,h1,h2");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 5);
  EXPECT_THROW(write_trajectory_csv(t, 2, TimeGrid(1.0, 0.25), path), InvalidInput);
}
