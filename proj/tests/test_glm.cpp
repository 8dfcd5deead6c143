#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fednewton/glm.hpp"
#include "oracle.hpp"

using namespace fednewton;

namespace {

GlmModel model_for(Family f, std::size_t d, double lambda) {
  switch (f) {
    case Family::Ridge: return GlmModel::ridge(d, lambda);
    case Family::BinaryLogistic: return GlmModel::logistic(d, lambda);
    case Family::Multinomial: return GlmModel::multinomial(d, 3, lambda);
  }
  return GlmModel::ridge(d, lambda);
}

Vector fd_gradient(const GlmModel& m, const Shard& sh, const Vector& w, double h = 1e-6) {
  Vector g(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) {
    Vector wp = w, wm = w;
    wp[k] += h;
    wm[k] -= h;
    g[k] = (loss(m, sh, wp) - loss(m, sh, wm)) / (2 * h);
  }
  return g;
}

Vector fd_hvp(const GlmModel& m, const Shard& sh, const Vector& w, const Vector& v, double h = 1e-5) {
  Vector wp = w, wm = w;
  axpy(h, v, wp);
  axpy(-h, v, wm);
  return (1.0 / (2 * h)) * (gradient(m, sh, wp) - gradient(m, sh, wm));
}

Sample sample(Vector a, double y) { return {std::move(a), y}; }

const Family kFamilies[] = {Family::Ridge, Family::BinaryLogistic, Family::Multinomial};

}  // namespace

TEST(Loss, RidgeAtZeroIsHalfSquaredLabel) {
  EXPECT_DOUBLE_EQ(loss(GlmModel::ridge(2, 0.0), Shard{sample({1, 0}, 1)}, Vector{0, 0}), 0.5);
}

TEST(Loss, LogisticAtZeroIsLn2) {
  std::mt19937_64 gen(3);
  const Shard sh = oracle::random_shard(Family::BinaryLogistic, 4, 7, 0, gen);
  EXPECT_NEAR(loss(GlmModel::logistic(4, 0.0), sh, Vector(4, 0.0)), std::log(2.0), 1e-15);
}

TEST(Loss, MultinomialAtZeroIsLnC) {
  std::mt19937_64 gen(4);
  const Shard sh = oracle::random_shard(Family::Multinomial, 3, 9, 10, gen);
  EXPECT_NEAR(loss(GlmModel::multinomial(3, 10, 0.0), sh, Vector(30, 0.0)), std::log(10.0), 1e-14);
}

TEST(Loss, RegularizerAdded) {
  const GlmModel m = GlmModel::ridge(2, 0.5);
  EXPECT_DOUBLE_EQ(loss(m, Shard{sample({0, 0}, 0)}, Vector{1, 2}), 0.25 * 5);
}

TEST(Loss, LogisticStableForLargeMargins) {
  const GlmModel m = GlmModel::logistic(1, 0.0);
  EXPECT_NEAR(loss(m, Shard{sample({1}, -1)}, Vector{800}), 800.0, 1e-9);
  EXPECT_EQ(loss(m, Shard{sample({1}, 1)}, Vector{800}), 0.0);
  EXPECT_TRUE(std::isfinite(gradient(m, Shard{sample({1}, -1)}, Vector{800})[0]));
}

TEST(Loss, ContractViolations) {
  const GlmModel m = GlmModel::ridge(2, 0.0);
  EXPECT_THROW(loss(m, {}, Vector{0, 0}), ContractError);
  EXPECT_THROW(loss(m, Shard{sample({1, 0}, 1)}, Vector{0, 0, 0}), ContractError);
  EXPECT_THROW(loss(m, Shard{sample({1, 0, 0}, 1)}, Vector{0, 0}), ContractError);
  EXPECT_THROW(GlmModel::multinomial(2, 1, 0.0), ContractError);
  EXPECT_THROW(GlmModel::ridge(2, -1.0), ContractError);
  EXPECT_THROW(loss(GlmModel::multinomial(2, 3, 0.0), Shard{sample({1, 0}, 3)}, Vector(6, 0.0)), ContractError);
}

TEST(Gradient, RidgeSingleSample) {
  const Vector g = gradient(GlmModel::ridge(2, 0.0), Shard{sample({1, 0}, 1)}, Vector{0, 0});
  EXPECT_DOUBLE_EQ(g[0], -1.0);
  EXPECT_DOUBLE_EQ(g[1], 0.0);
}

TEST(Gradient, LogisticSingleSample) {
  const Vector g = gradient(GlmModel::logistic(2, 0.0), Shard{sample({1, 0}, 1)}, Vector{0, 0});
  EXPECT_DOUBLE_EQ(g[0], -0.5);
  EXPECT_DOUBLE_EQ(g[1], 0.0);
}

TEST(Gradient, MatchesFiniteDifferencesAllFamilies) {
  for (Family f : kFamilies) {
    for (int seed = 0; seed < 10; ++seed) {
      std::mt19937_64 gen(100 + seed);
      const GlmModel m = model_for(f, 5, 0.1);
      const Shard sh = oracle::random_shard(f, 5, 12, 3, gen);
      const Vector w = oracle::random_vector(m.param_size(), gen, 0.5);
      const Vector g = gradient(m, sh, w);
      const double rel = norm(g - fd_gradient(m, sh, w)) / std::max(1.0, norm(g));
      EXPECT_LE(rel, 1e-5) << family_name(f) << " seed " << seed;
    }
  }
}

TEST(Gradient, RidgeMatchesClosedForm) {
  std::mt19937_64 gen(7);
  const GlmModel m = GlmModel::ridge(4, 0.3);
  const Shard sh = oracle::random_shard(Family::Ridge, 4, 9, 0, gen);
  const Vector w = oracle::random_vector(4, gen);
  const Vector g = gradient(m, sh, w);
  EXPECT_LE((oracle::to_eigen(g) - oracle::ridge_gradient(m, sh, w)).norm(), 1e-13);
}

TEST(Hvp, RidgeSingleSample) {
  const Vector hv = hvp(GlmModel::ridge(2, 0.5), Shard{sample({1, 0}, 3)}, Vector{0, 0}, Vector{1, 1});
  EXPECT_DOUBLE_EQ(hv[0], 1.5);
  EXPECT_DOUBLE_EQ(hv[1], 0.5);
}

TEST(Hvp, LogisticAtZero) {
  const Vector hv = hvp(GlmModel::logistic(2, 0.0), Shard{sample({1, 0}, 1)}, Vector{0, 0}, Vector{1, 0});
  EXPECT_DOUBLE_EQ(hv[0], 0.25);
  EXPECT_DOUBLE_EQ(hv[1], 0.0);
}

TEST(Hvp, MatchesFiniteDifferenceOfGradient) {
  for (Family f : kFamilies) {
    for (int seed = 0; seed < 10; ++seed) {
      std::mt19937_64 gen(200 + seed);
      const GlmModel m = model_for(f, 5, 0.05);
      const Shard sh = oracle::random_shard(f, 5, 15, 3, gen);
      const Vector w = oracle::random_vector(m.param_size(), gen, 0.5);
      const Vector v = oracle::random_vector(m.param_size(), gen);
      const Vector hv = hvp(m, sh, w, v);
      const double rel = norm(hv - fd_hvp(m, sh, w, v)) / std::max(1.0, norm(hv));
      EXPECT_LE(rel, 1e-4) << family_name(f) << " seed " << seed;
    }
  }
}

TEST(Hvp, MatchesExplicitHessian) {
  for (Family f : {Family::Ridge, Family::BinaryLogistic}) {
    std::mt19937_64 gen(300);
    const GlmModel m = model_for(f, 6, 0.2);
    const Shard sh = oracle::random_shard(f, 6, 11, 0, gen);
    const Vector w = oracle::random_vector(6, gen);
    const Vector v = oracle::random_vector(6, gen);
    const oracle::Vec expect = oracle::hessian(m, sh, w) * oracle::to_eigen(v);
    EXPECT_LE((oracle::to_eigen(hvp(m, sh, w, v)) - expect).norm(), 1e-12 * std::max(1.0, expect.norm()));
  }
}

TEST(Hvp, StrongConvexityFloor) {
  for (Family f : kFamilies) {
    std::mt19937_64 gen(400);
    const GlmModel m = model_for(f, 4, 0.3);
    const Shard sh = oracle::random_shard(f, 4, 10, 3, gen);
    for (int k = 0; k < 20; ++k) {
      const Vector w = oracle::random_vector(m.param_size(), gen, 3.0);
      Vector v = oracle::random_vector(m.param_size(), gen);
      scale(1.0 / norm(v), v);
      EXPECT_GE(dot(v, hvp(m, sh, w, v)), m.lambda - 1e-10) << family_name(f);
    }
  }
}

TEST(Hvp, LinearAndSymmetric) {
  for (Family f : kFamilies) {
    std::mt19937_64 gen(500);
    const GlmModel m = model_for(f, 4, 0.1);
    const Shard sh = oracle::random_shard(f, 4, 10, 3, gen);
    const Vector w = oracle::random_vector(m.param_size(), gen);
    const Vector u = oracle::random_vector(m.param_size(), gen);
    const Vector v = oracle::random_vector(m.param_size(), gen);
    const double a = 0.7, b = -1.3;
    const Vector lhs = hvp(m, sh, w, a * u + b * v);
    const Vector rhs = a * hvp(m, sh, w, u) + b * hvp(m, sh, w, v);
    EXPECT_LE(norm(lhs - rhs), 1e-12 * std::max(1.0, norm(rhs))) << family_name(f);
    const double uhv = dot(u, hvp(m, sh, w, v));
    const double vhu = dot(v, hvp(m, sh, w, u));
    EXPECT_LE(std::abs(uhv - vhu), 1e-12 * std::max(1.0, std::abs(uhv))) << family_name(f);
  }
}

TEST(Hvp, RidgeIndependentOfW) {
  std::mt19937_64 gen(600);
  const GlmModel m = GlmModel::ridge(5, 0.1);
  const Shard sh = oracle::random_shard(Family::Ridge, 5, 8, 0, gen);
  const Vector v = oracle::random_vector(5, gen);
  const Vector h1 = hvp(m, sh, oracle::random_vector(5, gen), v);
  const Vector h2 = hvp(m, sh, oracle::random_vector(5, gen), v);
  EXPECT_EQ(h1, h2);
}

TEST(Predict, BinaryTieAndMultinomialArgmax) {
  EXPECT_EQ(predict(GlmModel::logistic(1, 0.0), sample({0}, 1), Vector{1}), 1.0);
  const GlmModel m = GlmModel::multinomial(2, 3, 0.0);
  // Class 2 weights dominate on the first feature.
  EXPECT_EQ(predict(m, sample({1, 0}, 0), Vector{0, 0, 1, 0, 2, 0}), 2.0);
  EXPECT_EQ(count_correct(m, Shard{sample({1, 0}, 2), sample({1, 0}, 1)}, Vector{0, 0, 1, 0, 2, 0}), 1u);
}
