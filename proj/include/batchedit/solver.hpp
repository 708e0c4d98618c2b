#pragma once

// Example-edit solver: moves w₀ by plain gradient descent until chosen
// attributes reach target values, holding anchored attributes in place and
// penalising distance from w₀.

#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "batchedit/error.hpp"
#include "batchedit/generator.hpp"
#include "batchedit/latent.hpp"

namespace batchedit {

struct TargetValue {
  double value = 0.0;
};
struct Anchor {};
struct Free {};

using AttributeGoal = std::variant<TargetValue, Anchor, Free>;

/// One goal per attribute; at least one must be a TargetValue.
class EditTarget {
 public:
  /// All attributes anchored, nothing targeted yet.
  explicit EditTarget(std::size_t k) : goals_(k, Anchor{}) {}

  EditTarget& target(std::size_t attr, double value) {
    at(attr) = TargetValue{value};
    return *this;
  }
  EditTarget& anchor(std::size_t attr) {
    at(attr) = Anchor{};
    return *this;
  }
  EditTarget& free(std::size_t attr) {
    at(attr) = Free{};
    return *this;
  }

  [[nodiscard]] std::size_t size() const noexcept { return goals_.size(); }
  [[nodiscard]] const AttributeGoal& operator[](std::size_t i) const { return goals_[i]; }

  void validate(std::size_t k) const {
    detail::require_same_dim(goals_.size(), k, "edit target");
    for (const auto& g : goals_) {
      if (const auto* t = std::get_if<TargetValue>(&g)) {
        if (!std::isfinite(t->value)) throw InvalidArgument("edit target value must be finite");
      }
    }
    for (const auto& g : goals_) {
      if (std::holds_alternative<TargetValue>(g)) return;
    }
    throw InvalidArgument("edit target needs at least one targeted attribute");
  }

 private:
  AttributeGoal& at(std::size_t attr) {
    if (attr >= goals_.size()) throw InvalidArgument("attribute index " + std::to_string(attr) + " out of range");
    return goals_[attr];
  }

  std::vector<AttributeGoal> goals_;
};

struct SolverConfig {
  std::size_t steps = 200;
  double learning_rate = 0.05;
  double proximity = 0.05;  // μ

  void validate() const {
    if (steps < 1) throw InvalidArgument("solver steps must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw InvalidArgument("solver lr must be > 0");
    if (!(proximity >= 0.0) || !std::isfinite(proximity)) throw InvalidArgument("solver proximity must be >= 0");
  }
};

struct SolveResult {
  EditPair pair;
  std::vector<double> loss_trace;  // loss before each step, then the final loss
  double target_error = 0.0;       // max |a_j(w'₀) − t_j| over targeted attributes
};

/// Solver failure that keeps the partial loss trace.
struct SolverDiverged : NonFinite {
  SolverDiverged(const std::string& msg, std::vector<double> trace) : NonFinite(msg), trace(std::move(trace)) {}
  std::vector<double> trace;
};

namespace detail {

struct EditObjective {
  const GeneratorParams& params;
  const EditTarget& target;
  const Vector& start;
  const AttributeVector& start_attrs;
  double proximity;

  // Loss and its gradient at w.
  double evaluate(const Vector& w, Vector* grad) const {
    const AttributeVector a = features(params, w);
    Vector cot = Vector::Zero(a.size());
    double loss = 0.0;
    for (Eigen::Index j = 0; j < a.size(); ++j) {
      const auto& goal = target[static_cast<std::size_t>(j)];
      double residual = 0.0;
      if (const auto* t = std::get_if<TargetValue>(&goal)) {
        residual = a(j) - t->value;
      } else if (std::holds_alternative<Anchor>(goal)) {
        residual = a(j) - start_attrs(j);
      } else {
        continue;
      }
      loss += residual * residual;
      cot(j) = 2.0 * residual;
    }
    const Vector offset = w - start;
    loss += proximity * offset.squaredNorm();
    if (grad != nullptr) *grad = features_vjp(params, w, cot) + 2.0 * proximity * offset;
    return loss;
  }
};

}  // namespace detail

inline SolveResult solve_edit(const GeneratorParams& params, const LatentCode& w0, const EditTarget& target,
                              const SolverConfig& cfg = {}) {
  detail::require_same_dim(w0.dim(), params.d(), "solve_edit");
  target.validate(params.k());
  cfg.validate();

  const AttributeVector start_attrs = features(params, w0);
  const detail::EditObjective objective{params, target, w0.values(), start_attrs, cfg.proximity};

  SolveResult result;
  result.loss_trace.reserve(cfg.steps + 1);
  Vector w = w0.values();
  Vector grad;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const double loss = objective.evaluate(w, &grad);
    if (!std::isfinite(loss) || !grad.allFinite()) {
      throw SolverDiverged("edit solver diverged at step " + std::to_string(step) + "; lower the learning rate",
                           std::move(result.loss_trace));
    }
    result.loss_trace.push_back(loss);
    w -= cfg.learning_rate * grad;
  }
  const double final_loss = objective.evaluate(w, nullptr);
  if (!std::isfinite(final_loss) || !w.allFinite()) {
    throw SolverDiverged("edit solver diverged; lower the learning rate", std::move(result.loss_trace));
  }
  result.loss_trace.push_back(final_loss);

  const AttributeVector end_attrs = features(params, w);
  for (std::size_t j = 0; j < target.size(); ++j) {
    if (const auto* t = std::get_if<TargetValue>(&target[j])) {
      result.target_error = std::max(result.target_error, std::abs(end_attrs(static_cast<Eigen::Index>(j)) - t->value));
    }
  }
  result.pair = EditPair(w0, LatentCode(std::move(w)));
  return result;
}

/// Total solver loss at `w`, for diagnostics and oracles.
inline double edit_loss(const GeneratorParams& params, const LatentCode& w0, const EditTarget& target,
                        const Vector& w, double proximity) {
  const AttributeVector start_attrs = features(params, w0);
  const detail::EditObjective objective{params, target, w0.values(), start_attrs, proximity};
  return objective.evaluate(w, nullptr);
}

}  // namespace batchedit
