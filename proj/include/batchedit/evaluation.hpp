#pragma once

// Consistency metrics: how linearly an attribute follows the distance along a
// direction, and how tightly an attribute clusters after batch transfer.

#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "batchedit/error.hpp"
#include "batchedit/generator.hpp"
#include "batchedit/latent.hpp"
#include "batchedit/session.hpp"

namespace batchedit {

struct CorrelationReport {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t samples = 0;
  bool degenerate = false;  // x or y had zero variance; r_squared reported as 0
};

/// Ordinary least squares y = slope·x + intercept on centered data.
inline CorrelationReport ols(std::span<const double> x, std::span<const double> y) {
  detail::require_same_dim(x.size(), y.size(), "ols");
  if (x.empty()) throw InvalidArgument("regression needs at least one sample");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  CorrelationReport r;
  r.samples = x.size();
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    r.degenerate = true;
    r.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    r.intercept = my - r.slope * mx;
    return r;
  }
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  r.r_squared = std::clamp((sxy * sxy) / (sxx * syy), 0.0, 1.0);
  return r;
}

/// Scatter data for one direction: x = w·n, y = raw attribute.
struct ScatterData {
  std::vector<double> distance;
  std::vector<double> attribute;
};

inline ScatterData scatter(const GeneratorParams& params, const EditDirection& dir, std::span<const LatentCode> latents,
                           std::size_t attribute_index) {
  if (attribute_index >= params.k()) throw InvalidArgument("attribute index out of range");
  ScatterData out;
  out.distance.reserve(latents.size());
  out.attribute.reserve(latents.size());
  for (const auto& w : latents) {
    detail::require_same_dim(w.dim(), dir.dim(), "scatter");
    out.distance.push_back(w.values().dot(dir.unit()));
    out.attribute.push_back(features(params, w)(static_cast<Eigen::Index>(attribute_index)));
  }
  return out;
}

inline CorrelationReport linearity(const GeneratorParams& params, const EditDirection& dir,
                                   std::span<const LatentCode> latents, std::size_t attribute_index) {
  if (latents.empty()) throw InvalidArgument("linearity needs at least one latent");
  const ScatterData s = scatter(params, dir, latents, attribute_index);
  return ols(s.distance, s.attribute);
}

struct SpreadReport {
  std::size_t attribute_index = 0;
  double target_value = 0.0;
  double pre_std = 0.0;
  double post_std = 0.0;
  double pre_mae = 0.0;
  double post_mae = 0.0;
  std::vector<double> pre;
  std::vector<double> post;
};

/// Population standard deviation.
inline double population_std(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

inline double mean_abs_error(std::span<const double> v, double target) {
  if (v.empty()) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += std::abs(x - target);
  return acc / static_cast<double>(v.size());
}

/// Attribute statistics before and after transfer. The target value defaults
/// to the attribute of the session's target state w₀ + s·Δ*.
inline SpreadReport spread(const GeneratorParams& params, const Session& session, std::size_t attribute_index,
                           std::optional<double> target_value = std::nullopt) {
  if (!session.alphas) throw MissingAlphas();
  if (attribute_index >= params.k()) throw InvalidArgument("attribute index out of range");
  const auto j = static_cast<Eigen::Index>(attribute_index);

  SpreadReport r;
  r.attribute_index = attribute_index;
  r.target_value = target_value ? *target_value : features(params, target_state(session, session.slider_s))(j);
  r.pre.reserve(session.test_latents.size());
  r.post.reserve(session.test_latents.size());
  for (std::size_t i = 0; i < session.test_latents.size(); ++i) {
    r.pre.push_back(features(params, session.test_latents[i])(j));
    r.post.push_back(features(params, edited_latent(session, i))(j));
  }
  r.pre_std = population_std(r.pre);
  r.post_std = population_std(r.post);
  r.pre_mae = mean_abs_error(r.pre, r.target_value);
  r.post_mae = mean_abs_error(r.post, r.target_value);
  return r;
}

inline SpreadReport spread(const Session& session, std::size_t attribute_index,
                           std::optional<double> target_value = std::nullopt) {
  return spread(generator_of(session), session, attribute_index, target_value);
}

/// index,distance_pre,attribute_pre,distance_post,attribute_post,alpha
inline void write_spread_csv(std::ostream& os, const Session& session, const SpreadReport& r) {
  if (!session.alphas || !session.direction) throw MissingAlphas();
  os.precision(17);
  os << "index,distance_pre,attribute_pre,distance_post,attribute_post,alpha\n";
  const Vector& n = session.direction->unit();
  for (std::size_t i = 0; i < r.pre.size(); ++i) {
    const double alpha = (*session.alphas)[i];
    const double x_pre = session.test_latents[i].values().dot(n);
    os << i << ',' << x_pre << ',' << r.pre[i] << ',' << x_pre + alpha << ',' << r.post[i] << ',' << alpha << '\n';
  }
}

inline void write_scatter_csv(std::ostream& os, const ScatterData& s) {
  os.precision(17);
  os << "distance,attribute\n";
  for (std::size_t i = 0; i < s.distance.size(); ++i) os << s.distance[i] << ',' << s.attribute[i] << '\n';
}

}  // namespace batchedit
