#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>

namespace batchedit {

struct AdamWConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

/// Adam with decoupled weight decay. Decay is applied to the parameters
/// before the moment update, as in the reference formulation.
template <typename VectorT>
class AdamW {
 public:
  AdamW(const AdamWConfig& cfg, Eigen::Index size)
      : cfg_(cfg), m_(VectorT::Zero(size)), v_(VectorT::Zero(size)) {}

  void step(VectorT& params, const VectorT& grad) {
    ++t_;
    if (cfg_.weight_decay != 0.0) params *= 1.0 - cfg_.learning_rate * cfg_.weight_decay;
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
    v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
    const double bias1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bias2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    params.array() -= cfg_.learning_rate * (m_.array() / bias1) / ((v_.array() / bias2).sqrt() + cfg_.epsilon);
  }

  [[nodiscard]] std::size_t steps_taken() const noexcept { return t_; }

 private:
  AdamWConfig cfg_;
  VectorT m_;
  VectorT v_;
  std::size_t t_ = 0;
};

}  // namespace batchedit
