#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "batchedit/solver.hpp"
#include "oracles.hpp"

namespace batchedit {
namespace {

using oracle::random_vector;

LatentCode start_latent(std::uint64_t seed) { return sample_latents(seed, 1, 32).front(); }

// Same objective written against the explicit Jacobian.
double oracle_loss(const GeneratorParams& p, const Vector& w0, const Vector& targets, const std::vector<bool>& targeted,
                   double mu, const Vector& w, Vector* grad) {
  const Vector a0 = features(p, w0);
  const Vector a = features(p, w);
  Vector r = Vector::Zero(a.size());
  for (Eigen::Index j = 0; j < a.size(); ++j) r(j) = targeted[static_cast<std::size_t>(j)] ? a(j) - targets(j) : a(j) - a0(j);
  if (grad != nullptr) *grad = 2.0 * features_jacobian(p, w).transpose() * r + 2.0 * mu * (w - w0);
  return r.squaredNorm() + mu * (w - w0).squaredNorm();
}

TEST(SolveEdit, IdentityTargetReturnsStart) {
  const auto p = init_generator(0);
  const auto w0 = start_latent(1);
  const Vector a0 = features(p, w0);
  EditTarget target(5);
  for (std::size_t j = 0; j < 5; ++j) target.target(j, a0(static_cast<Eigen::Index>(j)));
  const auto result = solve_edit(p, w0, target);
  EXPECT_LT((result.pair.end.values() - w0.values()).norm(), 1e-3);
  EXPECT_EQ(result.loss_trace.size(), 201U);
}

// A +0.2 move is reachable at μ = 0.05. At +0.3 the optimum itself already
// falls 0.05–0.07 short on seeds 0 and 4.
TEST(SolveEdit, ReachableTargetMatchesRestartOracle) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = init_generator(seed);
    const auto w0 = start_latent(100 + seed);
    const Vector a0 = features(p, w0);
    const double goal = a0(0) + 0.2;
    const auto result = solve_edit(p, w0, EditTarget(5).target(0, goal));
    const double solver_attr = features(p, result.pair.end)(0);
    EXPECT_LT(std::abs(solver_attr - goal), 0.05) << "seed " << seed;

    Vector targets = a0;
    targets(0) = goal;
    const std::vector<bool> targeted{true, false, false, false, false};
    std::mt19937_64 rng(seed);
    double best = INFINITY;
    for (int restart = 0; restart < 20; ++restart) {
      Vector w = w0.values() + random_vector(rng, 32, 0.3);
      Vector g;
      for (int it = 0; it < 3000; ++it) {
        oracle_loss(p, w0.values(), targets, targeted, 0.05, w, &g);
        w -= 0.02 * g;
      }
      best = std::min(best, oracle_loss(p, w0.values(), targets, targeted, 0.05, w, nullptr));
    }
    EXPECT_LE(result.loss_trace.back(), 1.1 * best) << "seed " << seed << " oracle " << best;
  }
}

TEST(SolveEdit, FreeAttributesZeroProximityDescends) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = init_generator(seed);
    const auto w0 = start_latent(200 + seed);
    EditTarget target(5);
    target.target(3, features(p, w0)(3) - 0.4);
    for (std::size_t j : {0U, 1U, 2U, 4U}) target.free(j);
    SolverConfig cfg;
    cfg.proximity = 0.0;
    const auto trace = solve_edit(p, w0, target, cfg).loss_trace;
    EXPECT_LE(trace.back(), trace.front());
    for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_LE(trace[i], 1.05 * trace[i - 1]) << "step " << i;
  }
}

TEST(SolveEdit, DescentAndDeterminism) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = init_generator(seed);
    const auto w0 = start_latent(300 + seed);
    const EditTarget target = EditTarget(5).target(1, 0.8);
    const auto a = solve_edit(p, w0, target);
    const auto b = solve_edit(p, w0, target);
    EXPECT_LE(a.loss_trace.back(), a.loss_trace.front());
    EXPECT_EQ(a.pair, b.pair);
    EXPECT_DOUBLE_EQ(a.loss_trace.back(), edit_loss(p, w0, target, a.pair.end.values(), 0.05));
  }
}

TEST(SolveEdit, AnchoredAttributesStayPut) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = init_generator(seed);
    const auto w0 = start_latent(400 + seed);
    const Vector a0 = features(p, w0);
    const auto result = solve_edit(p, w0, EditTarget(5).target(0, 0.0));
    const Vector a1 = features(p, result.pair.end);
    for (Eigen::Index j = 1; j < 5; ++j) EXPECT_LT(std::abs(a1(j) - a0(j)), 0.1) << "seed " << seed << " attr " << j;
  }
}

TEST(SolveEdit, ObjectiveGradientMatchesFiniteDifference) {
  const auto p = init_generator(4);
  const auto w0 = start_latent(7);
  const EditTarget target = EditTarget(5).target(2, 0.5).free(4);
  const AttributeVector a0 = features(p, w0);
  const detail::EditObjective obj{p, target, w0.values(), a0, 0.05};
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10; ++i) {
    const Vector w = w0.values() + random_vector(rng, 32, 0.5);
    Vector g;
    obj.evaluate(w, &g);
    const Vector fd = oracle::fd_gradient([&](const Vector& x) { return obj.evaluate(x, nullptr); }, w);
    EXPECT_LT(oracle::relative_error(g, fd), 1e-6);
  }
}

TEST(SolveEdit, DivergenceKeepsTrace) {
  const auto p = init_generator(0);
  const auto w0 = start_latent(1);
  SolverConfig cfg;
  cfg.learning_rate = 1e200;
  cfg.proximity = 1.0;
  try {
    solve_edit(p, w0, EditTarget(5).target(0, 1.0), cfg);
    FAIL() << "expected divergence";
  } catch (const SolverDiverged& e) {
    EXPECT_FALSE(e.trace.empty());
    EXPECT_EQ(e.code(), ErrorCode::solver_failed);
  }
}

TEST(SolveEdit, RejectsBadInput) {
  const auto p = init_generator(0);
  const auto w0 = start_latent(1);
  EXPECT_THROW(solve_edit(p, w0, EditTarget(5)), InvalidArgument);
  EXPECT_THROW(solve_edit(p, w0, EditTarget(4).target(0, 1.0)), DimensionMismatch);
  EXPECT_THROW(EditTarget(5).target(5, 1.0), InvalidArgument);
  SolverConfig cfg;
  cfg.steps = 0;
  EXPECT_THROW(solve_edit(p, w0, EditTarget(5).target(0, 1.0), cfg), InvalidArgument);
  EXPECT_THROW(solve_edit(p, LatentCode::zeros(8), EditTarget(5).target(0, 1.0)), DimensionMismatch);
}

}  // namespace
}  // namespace batchedit
