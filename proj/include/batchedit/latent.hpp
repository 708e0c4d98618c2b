#pragma once

// Latent-space geometry: unit directions, hyperplanes, closed-form editing
// strengths and edit application.

#include <Eigen/Dense>

#include <cmath>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "batchedit/error.hpp"

namespace batchedit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Norm at or below which a displacement has no usable direction.
inline constexpr double kZeroDirectionThreshold = 1e-12;

/// A point in the d-dimensional latent space. Entries are always finite.
class LatentCode {
 public:
  LatentCode() = default;

  explicit LatentCode(Vector values) : values_(std::move(values)) { check_finite(); }

  LatentCode(std::initializer_list<double> values)
      : values_(Eigen::Map<const Vector>(values.begin(), static_cast<Eigen::Index>(values.size()))) {
    check_finite();
  }

  static LatentCode from_std(std::span<const double> values) {
    return LatentCode(Vector(Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()))));
  }

  static LatentCode zeros(std::size_t d) { return LatentCode(Vector::Zero(static_cast<Eigen::Index>(d))); }

  [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(values_.size()); }
  [[nodiscard]] const Vector& values() const noexcept { return values_; }
  [[nodiscard]] double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }

  [[nodiscard]] std::vector<double> to_std() const { return {values_.data(), values_.data() + values_.size()}; }

  friend bool operator==(const LatentCode& a, const LatentCode& b) {
    return a.values_.size() == b.values_.size() && a.values_ == b.values_;
  }

 private:
  void check_finite() const {
    if (!values_.allFinite()) throw InvalidArgument("latent code contains non-finite entries");
  }

  Vector values_;
};

/// A raw displacement together with its unit-length normal.
class EditDirection {
 public:
  [[nodiscard]] const Vector& delta() const noexcept { return delta_; }
  [[nodiscard]] const Vector& unit() const noexcept { return unit_; }
  [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(delta_.size()); }
  [[nodiscard]] double magnitude() const noexcept { return magnitude_; }

  friend EditDirection normalize(const Vector& delta);

 private:
  EditDirection(Vector delta, Vector unit, double magnitude)
      : delta_(std::move(delta)), unit_(std::move(unit)), magnitude_(magnitude) {}

  Vector delta_;
  Vector unit_;
  double magnitude_ = 0.0;
};

/// Build an EditDirection; throws ZeroDirection when ‖delta‖ ≤ 1e-12.
inline EditDirection normalize(const Vector& delta) {
  if (!delta.allFinite()) throw InvalidArgument("direction contains non-finite entries");
  const double norm = delta.norm();
  if (!(norm > kZeroDirectionThreshold)) throw ZeroDirection();
  return EditDirection(delta, delta / norm, norm);
}

/// {w : w·normal + offset = 0}, normal of unit length.
struct Hyperplane {
  Vector normal;
  double offset = 0.0;
};

/// Example edit w₀ → w'₀.
struct EditPair {
  LatentCode start;
  LatentCode end;

  EditPair() = default;
  EditPair(LatentCode s, LatentCode e) : start(std::move(s)), end(std::move(e)) {
    detail::require_same_dim(start.dim(), end.dim(), "edit pair");
  }

  [[nodiscard]] std::size_t dim() const noexcept { return start.dim(); }
  [[nodiscard]] Vector displacement() const { return end.values() - start.values(); }

  friend bool operator==(const EditPair&, const EditPair&) = default;
};

/// Per-latent editing strengths, in latent length units along the unit normal.
struct AlphaAssignment {
  std::vector<double> alphas;

  [[nodiscard]] std::size_t size() const noexcept { return alphas.size(); }
  [[nodiscard]] double operator[](std::size_t i) const { return alphas[i]; }

  friend bool operator==(const AlphaAssignment&, const AlphaAssignment&) = default;
};

inline Hyperplane hyperplane_through(const LatentCode& anchor, const EditDirection& dir) {
  detail::require_same_dim(anchor.dim(), dir.dim(), "hyperplane_through");
  return Hyperplane{dir.unit(), -anchor.values().dot(dir.unit())};
}

inline double signed_distance(const LatentCode& w, const Hyperplane& h) {
  detail::require_same_dim(w.dim(), static_cast<std::size_t>(h.normal.size()), "signed_distance");
  return w.values().dot(h.normal) + h.offset;
}

/// Strength that moves `w_test` along the direction onto the hyperplane
/// through `target_state`: α = (target − w)·n.
inline double compute_alpha(const LatentCode& target_state, const LatentCode& w_test,
                            const EditDirection& dir) {
  detail::require_same_dim(target_state.dim(), dir.dim(), "compute_alpha target");
  detail::require_same_dim(w_test.dim(), dir.dim(), "compute_alpha test latent");
  return (target_state.values() - w_test.values()).dot(dir.unit());
}

/// w' = w + α·n
inline LatentCode apply_edit(const LatentCode& w, double alpha, const EditDirection& dir) {
  detail::require_same_dim(w.dim(), dir.dim(), "apply_edit");
  if (!std::isfinite(alpha)) throw InvalidArgument("apply_edit: non-finite alpha");
  return LatentCode(Vector(w.values() + alpha * dir.unit()));
}

inline AlphaAssignment batch_alphas(const LatentCode& target_state, std::span<const LatentCode> tests,
                                    const EditDirection& dir) {
  detail::require_same_dim(target_state.dim(), dir.dim(), "batch_alphas target");
  const Vector& n = dir.unit();
  AlphaAssignment out;
  out.alphas.reserve(tests.size());
  for (std::size_t i = 0; i < tests.size(); ++i) {
    if (tests[i].dim() != dir.dim()) {
      throw DimensionMismatch("batch_alphas: test latent " + std::to_string(i) + " has dimension " +
                              std::to_string(tests[i].dim()) + ", expected " + std::to_string(dir.dim()));
    }
    out.alphas.push_back((target_state.values() - tests[i].values()).dot(n));
  }
  return out;
}

}  // namespace batchedit
