#include <gtest/gtest.h>

#include <random>

#include "fednewton/spectral.hpp"
#include "oracle.hpp"

using namespace fednewton;

namespace {

auto matrix_op(const oracle::Mat& a) {
  return [a](const Vector& v) { return oracle::to_std(a * oracle::to_eigen(v)); };
}

}  // namespace

TEST(LambdaMax, Identity) {
  auto id = [](const Vector& v) { return v; };
  EXPECT_NEAR(estimate_lambda_max(id, 3, 5, 1), 1.0, 1e-15);
}

TEST(LambdaMax, Diagonal) {
  auto op = [](const Vector& v) { return Vector{2 * v[0], v[1]}; };
  EXPECT_NEAR(estimate_lambda_max(op, 2, 50, 1), 2.0, 1e-6);
}

TEST(LambdaMax, RandomSpdMatchesDenseEigensolver) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 10; ++trial) {
    const oracle::Mat a = oracle::random_spd(8, 0.1, 10.0, gen);
    const double expect = oracle::lambda_max(a);
    EXPECT_NEAR(estimate_lambda_max(matrix_op(a), 8, 500, trial), expect, 1e-4 * expect) << trial;
  }
}

TEST(LambdaMax, NonDecreasingInIterations) {
  std::mt19937_64 gen(12);
  const oracle::Mat a = oracle::random_spd(8, 0.1, 5.0, gen);
  double prev = 0.0;
  for (int it = 1; it <= 60; ++it) {
    const double est = estimate_lambda_max(matrix_op(a), 8, it, 3);
    EXPECT_GE(est, prev - 1e-12) << it;
    prev = est;
  }
}

TEST(LambdaMax, ZeroOperatorThrows) {
  auto zero = [](const Vector& v) { return Vector(v.size(), 0.0); };
  EXPECT_THROW(estimate_lambda_max(zero, 3, 10, 1), ContractError);
  auto id = [](const Vector& v) { return v; };
  EXPECT_THROW(estimate_lambda_max(id, 3, 0, 1), ContractError);
}

TEST(LambdaMin, ShiftedPowerIteration) {
  std::mt19937_64 gen(13);
  const oracle::Mat a = oracle::random_spd(6, 0.5, 4.0, gen);
  EXPECT_NEAR(estimate_lambda_min(matrix_op(a), 6, oracle::lambda_max(a), 2000, 1), oracle::lambda_min(a), 1e-6);
  auto id = [](const Vector& v) { return v; };
  EXPECT_DOUBLE_EQ(estimate_lambda_min(id, 3, 1.0, 10, 1), 1.0);
}

TEST(SymmetricNorm, IndefiniteMatrix) {
  oracle::Mat b(3, 3);
  b << 1, 2, 0, 2, -3, 1, 0, 1, 0.5;
  EXPECT_NEAR(estimate_symmetric_norm(matrix_op(b), 3, 300, 1), oracle::spectral_norm(b), 1e-8);
}

TEST(Constants, RidgeMatchesDenseHessian) {
  std::mt19937_64 gen(14);
  const GlmModel m = GlmModel::ridge(4, 0.01);
  const Shard s1 = oracle::random_shard(Family::Ridge, 4, 30, 0, gen);
  const Shard s2 = oracle::random_shard(Family::Ridge, 4, 30, 0, gen);
  const Vector w(4, 0.0);
  const ConvergenceConstants c = estimate_constants(m, {&s1, &s2}, w, {500, 1, true});
  const oracle::Mat h1 = oracle::hessian(m, s1, w), h2 = oracle::hessian(m, s2, w);
  const oracle::Mat h = 0.5 * (h1 + h2);
  EXPECT_NEAR(c.smoothness, std::max(oracle::lambda_max(h1), oracle::lambda_max(h2)), 1e-6);
  EXPECT_NEAR(c.lambda_strong, oracle::lambda_min(h), 1e-6);
  EXPECT_EQ(c.hessian_lipschitz, 0.0);
  const oracle::Mat diff = h * h - 0.5 * (h1 * h1 + h2 * h2);
  EXPECT_NEAR(c.nu, oracle::spectral_norm(diff), 1e-6 * std::max(1.0, oracle::spectral_norm(diff)));
  EXPECT_NO_THROW(c.validate());
}

TEST(Constants, LogisticUsesRegularizationFloor) {
  std::mt19937_64 gen(15);
  const GlmModel m = GlmModel::logistic(3, 0.05);
  const Shard s = oracle::random_shard(Family::BinaryLogistic, 3, 20, 0, gen);
  const ConvergenceConstants c = estimate_constants(m, {&s}, Vector(3, 0.0), {});
  EXPECT_EQ(c.lambda_strong, 0.05);
  EXPECT_GT(c.hessian_lipschitz, 0.0);
  EXPECT_GE(c.smoothness, c.lambda_strong);
}

TEST(Diagnostics, DeltaApproximation) {
  EXPECT_DOUBLE_EQ(delta_approximation(Vector{1, 0}, Vector{1, 0}), 0.0);
  EXPECT_DOUBLE_EQ(delta_approximation(Vector{2, 0}, Vector{1, 0}), 0.5);
  EXPECT_THROW(delta_approximation(Vector{0, 0}, Vector{1, 0}), ContractError);
}

TEST(Diagnostics, DampedPhase) {
  ConvergenceConstants c{1.0, 2.0, 2.0, 0.0};
  // M ||g0|| / lambda^2 = 4: t0 = ceil(8) - 2 = 6, gamma = 2 - 6/4 = 0.5.
  const DampedPhase p = damped_phase(c, 2.0);
  EXPECT_EQ(p.t0, 6);
  EXPECT_DOUBLE_EQ(p.gamma, 0.5);
  EXPECT_EQ(damped_phase(c, 0.1).t0, 0);
}
