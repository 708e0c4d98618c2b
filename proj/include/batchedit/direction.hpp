#pragma once

// Fitting a globally consistent edit direction from a single example pair.
//
// The fitted displacement Δ* starts at zero and minimises
//     L = L_img + λ·L_att
// where L_img = ‖a(w₀ + Δw) − a(w₀ + Δ*)‖₂ compares generator features of the
// user's edit and the fitted edit, and L_att is the distance of the edited
// point w₀ + Δ* from the hyperplane normal to Δ*:
//     no target distance:   |(w₀ + Δ*)·Δ*|
//     target distance d:    |(w₀ + Δ*)·Δ*/‖Δ*‖ − d|

#include <chrono>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "batchedit/adamw.hpp"
#include "batchedit/error.hpp"
#include "batchedit/generator.hpp"
#include "batchedit/latent.hpp"

namespace batchedit {

struct DirectionFitConfig {
  double lambda = 0.02;
  std::size_t iterations = 1000;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  // Accepted for configuration compatibility; losses are computed in full each iteration.
  std::size_t batch_size = 16;
  std::optional<double> target_distance;

  void validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("lambda must be >= 0");
    if (iterations < 1) throw InvalidArgument("iterations must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw InvalidArgument("learning rate must be > 0");
    if (target_distance && !std::isfinite(*target_distance)) throw InvalidArgument("target distance must be finite");
  }

  [[nodiscard]] AdamWConfig optimizer() const {
    return AdamWConfig{learning_rate, beta1, beta2, epsilon, weight_decay};
  }
};

struct LossSample {
  double img = 0.0;
  double att = 0.0;
  double total = 0.0;

  friend bool operator==(const LossSample&, const LossSample&) = default;
};

struct FitReport {
  std::vector<LossSample> trace;  // loss at each iterate, before its update
  LossSample final_loss;          // loss at the returned Δ*
  Vector final_delta;
  double wall_seconds = 0.0;
};

/// Fit failure that keeps the report accumulated so far.
struct FitDiverged : NonFinite {
  FitDiverged(const std::string& msg, FitReport r) : NonFinite(msg), report(std::move(r)) {}
  FitReport report;
};

/// The example edit has no length and the fit stayed at zero.
struct FitZeroDirection : ZeroDirection {
  explicit FitZeroDirection(FitReport r)
      : ZeroDirection("example edit has zero length; fitted direction stayed at zero"), report(std::move(r)) {}
  FitReport report;
};

struct FitResult {
  EditDirection direction;
  FitReport report;
};

inline double loss_img(const GeneratorParams& params, const Vector& w0, const Vector& delta_user, const Vector& delta) {
  detail::require_same_dim(static_cast<std::size_t>(w0.size()), params.d(), "loss_img latent");
  detail::require_same_dim(static_cast<std::size_t>(delta_user.size()), params.d(), "loss_img user delta");
  detail::require_same_dim(static_cast<std::size_t>(delta.size()), params.d(), "loss_img delta");
  return (features(params, w0 + delta_user) - features(params, w0 + delta)).norm();
}

/// Throws ZeroDirection when a target distance is given and ‖delta‖ ≤ 1e-12.
inline double loss_att(const Vector& w0, const Vector& delta, std::optional<double> d_user = std::nullopt) {
  detail::require_same_dim(static_cast<std::size_t>(w0.size()), static_cast<std::size_t>(delta.size()), "loss_att");
  const double raw = (w0 + delta).dot(delta);
  if (!d_user) return std::abs(raw);
  const double norm = delta.norm();
  if (!(norm > kZeroDirectionThreshold)) throw ZeroDirection("normalized hyperplane distance needs a nonzero delta");
  return std::abs(raw / norm - *d_user);
}

namespace detail {

struct LossAndGrad {
  LossSample loss;
  Vector grad;
};

// With a target distance the hyperplane term is undefined at Δ = 0; it is
// treated as inactive there (zero value and gradient).
inline LossAndGrad total_loss_and_grad(const GeneratorParams& params, const Vector& w0, const Vector& user_features,
                                       const Vector& delta, const DirectionFitConfig& cfg) {
  LossAndGrad out;
  const Vector edited = w0 + delta;
  const Vector residual = features(params, edited) - user_features;
  out.loss.img = residual.norm();
  out.grad = out.loss.img > 0.0 ? Vector(features_vjp(params, edited, residual / out.loss.img))
                                : Vector(Vector::Zero(delta.size()));

  const auto sign = [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); };
  if (!cfg.target_distance) {
    const double x = edited.dot(delta);
    out.loss.att = std::abs(x);
    if (cfg.lambda != 0.0) out.grad += cfg.lambda * sign(x) * (w0 + 2.0 * delta);
  } else {
    const double norm = delta.norm();
    if (norm > kZeroDirectionThreshold) {
      const Vector unit = delta / norm;
      const double x = w0.dot(unit) + norm - *cfg.target_distance;
      out.loss.att = std::abs(x);
      if (cfg.lambda != 0.0) {
        out.grad += cfg.lambda * sign(x) * ((w0 - w0.dot(unit) * unit) / norm + unit);
      }
    }
  }
  out.loss.total = out.loss.img + cfg.lambda * out.loss.att;
  return out;
}

}  // namespace detail

/// ∇_Δ (L_img + λ·L_att). The subgradient of |·| at 0 is taken as 0.
inline Vector gradient_of_total_loss(const GeneratorParams& params, const Vector& w0, const Vector& delta_user,
                                     const Vector& delta, const DirectionFitConfig& cfg = {}) {
  detail::require_same_dim(static_cast<std::size_t>(w0.size()), params.d(), "gradient latent");
  detail::require_same_dim(static_cast<std::size_t>(delta_user.size()), params.d(), "gradient user delta");
  detail::require_same_dim(static_cast<std::size_t>(delta.size()), params.d(), "gradient delta");
  return detail::total_loss_and_grad(params, w0, features(params, w0 + delta_user), delta, cfg).grad;
}

/// Loss triple at Δ, using the same conventions as the fit loop.
inline LossSample total_loss(const GeneratorParams& params, const Vector& w0, const Vector& delta_user,
                             const Vector& delta, const DirectionFitConfig& cfg = {}) {
  return detail::total_loss_and_grad(params, w0, features(params, w0 + delta_user), delta, cfg).loss;
}

inline FitResult fit_direction(const GeneratorParams& params, const EditPair& pair, const DirectionFitConfig& cfg = {}) {
  detail::require_same_dim(pair.dim(), params.d(), "fit_direction");
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  };

  const Vector& w0 = pair.start.values();
  const Vector user_features = features(params, pair.end);

  FitReport report;
  report.trace.reserve(cfg.iterations);
  Vector delta = Vector::Zero(w0.size());
  AdamW<Vector> optimizer(cfg.optimizer(), delta.size());

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    detail::LossAndGrad lg = detail::total_loss_and_grad(params, w0, user_features, delta, cfg);
    if (!std::isfinite(lg.loss.total) || !lg.grad.allFinite()) {
      report.final_delta = delta;
      report.wall_seconds = elapsed();
      throw FitDiverged("direction fit diverged at iteration " + std::to_string(it), std::move(report));
    }
    report.trace.push_back(lg.loss);
    optimizer.step(delta, lg.grad);
  }

  report.final_loss = detail::total_loss_and_grad(params, w0, user_features, delta, cfg).loss;
  report.final_delta = delta;
  report.wall_seconds = elapsed();
  if (!delta.allFinite() || !std::isfinite(report.final_loss.total)) {
    throw FitDiverged("direction fit produced non-finite values", std::move(report));
  }
  if (!(delta.norm() > kZeroDirectionThreshold)) throw FitZeroDirection(std::move(report));
  return FitResult{normalize(delta), std::move(report)};
}

/// iteration,L_img,L_att,L_total
inline void write_fit_csv(std::ostream& os, const FitReport& report) {
  os << "iteration,L_img,L_att,L_total\n";
  os.precision(17);
  for (std::size_t i = 0; i < report.trace.size(); ++i) {
    const auto& s = report.trace[i];
    os << i << ',' << s.img << ',' << s.att << ',' << s.total << '\n';
  }
}

}  // namespace batchedit
