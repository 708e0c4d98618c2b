#pragma once

// Seeded differentiable stand-in for an image generator. The feature map
// a(w) = A·act(W1·w + b1) + c plays the role of the generator's semantic
// content and is the only differentiated stage; the glyph rasterizer turns
// attributes into a viewable picture and is never differentiated.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "batchedit/error.hpp"
#include "batchedit/latent.hpp"

namespace batchedit {

enum class Activation { tanh, identity };

struct GeneratorShape {
  std::uint64_t seed = 0;
  std::size_t d = 32;
  std::size_t h = 64;
  std::size_t k = 5;
};

/// Weights of the toy generator. A pure function of (seed, d, h, k) and the activation.
struct GeneratorParams {
  GeneratorShape shape;
  Activation activation = Activation::tanh;
  Matrix W1;  // h × d
  Vector b1;  // h
  Matrix A;   // k × h
  Vector c;   // k

  [[nodiscard]] std::size_t d() const noexcept { return shape.d; }
  [[nodiscard]] std::size_t h() const noexcept { return shape.h; }
  [[nodiscard]] std::size_t k() const noexcept { return shape.k; }
};

/// Raw attribute coordinates, one per feature.
using AttributeVector = Vector;

/// Names for the default five attributes, in feature order.
inline constexpr std::array<std::string_view, 5> kAttributeNames = {"orientation", "size", "aspect", "mouth",
                                                                    "eyes"};

/// Resolve an attribute by name or by decimal index.
inline std::size_t attribute_index(std::string_view name, std::size_t k) {
  for (std::size_t i = 0; i < kAttributeNames.size() && i < k; ++i) {
    if (kAttributeNames[i] == name) return i;
  }
  std::size_t idx = 0;
  if (name.empty()) throw InvalidArgument("empty attribute name");
  for (char ch : name) {
    if (ch < '0' || ch > '9') throw InvalidArgument("unknown attribute '" + std::string(name) + "'");
    idx = idx * 10 + static_cast<std::size_t>(ch - '0');
  }
  if (idx >= k) throw InvalidArgument("attribute index " + std::string(name) + " out of range");
  return idx;
}

inline void validate(const GeneratorShape& shape) {
  if (shape.d < 1 || shape.h < 1 || shape.k < 1) {
    throw InvalidArgument("generator dimensions must all be >= 1 (d=" + std::to_string(shape.d) +
                          ", h=" + std::to_string(shape.h) + ", k=" + std::to_string(shape.k) + ")");
  }
}

/// Gaussian weights: W1 and b1 with std 1/√d, A and c with std 1/√h.
inline GeneratorParams init_generator(const GeneratorShape& shape, Activation activation = Activation::tanh) {
  validate(shape);
  std::mt19937_64 rng(shape.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(shape.d);
  const auto h = static_cast<Eigen::Index>(shape.h);
  const auto k = static_cast<Eigen::Index>(shape.k);
  const double in_scale = 1.0 / std::sqrt(static_cast<double>(shape.d));
  const double out_scale = 1.0 / std::sqrt(static_cast<double>(shape.h));

  GeneratorParams p;
  p.shape = shape;
  p.activation = activation;
  p.W1.resize(h, d);
  p.b1.resize(h);
  p.A.resize(k, h);
  p.c.resize(k);
  // Fill order is fixed (row-major, W1, b1, A, c) so weights are reproducible.
  for (Eigen::Index i = 0; i < h; ++i)
    for (Eigen::Index j = 0; j < d; ++j) p.W1(i, j) = in_scale * normal(rng);
  for (Eigen::Index i = 0; i < h; ++i) p.b1(i) = in_scale * normal(rng);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < h; ++j) p.A(i, j) = out_scale * normal(rng);
  for (Eigen::Index i = 0; i < k; ++i) p.c(i) = out_scale * normal(rng);
  return p;
}

inline GeneratorParams init_generator(std::uint64_t seed, std::size_t d = 32, std::size_t h = 64, std::size_t k = 5,
                                      Activation activation = Activation::tanh) {
  return init_generator(GeneratorShape{seed, d, h, k}, activation);
}

namespace detail {

inline Vector hidden(const GeneratorParams& p, const Vector& w) {
  Vector z = p.W1 * w + p.b1;
  if (p.activation == Activation::tanh) z = z.array().tanh().matrix();
  return z;
}

// act'(pre-activation) expressed through the activation output.
inline Vector hidden_slope(const GeneratorParams& p, const Vector& hidden_out) {
  if (p.activation == Activation::identity) return Vector::Ones(hidden_out.size());
  return (1.0 - hidden_out.array().square()).matrix();
}

}  // namespace detail

inline AttributeVector features(const GeneratorParams& p, const Vector& w) {
  detail::require_same_dim(static_cast<std::size_t>(w.size()), p.d(), "features");
  return p.A * detail::hidden(p, w) + p.c;
}

inline AttributeVector features(const GeneratorParams& p, const LatentCode& w) { return features(p, w.values()); }

/// Jᵀ·cotangent with J = ∂a/∂w = A·diag(act')·W1.
inline Vector features_vjp(const GeneratorParams& p, const Vector& w, const Vector& cotangent) {
  detail::require_same_dim(static_cast<std::size_t>(w.size()), p.d(), "features_vjp latent");
  detail::require_same_dim(static_cast<std::size_t>(cotangent.size()), p.k(), "features_vjp cotangent");
  const Vector hid = detail::hidden(p, w);
  const Vector back = (p.A.transpose() * cotangent).cwiseProduct(detail::hidden_slope(p, hid));
  return p.W1.transpose() * back;
}

/// Full Jacobian (k × d).
inline Matrix features_jacobian(const GeneratorParams& p, const Vector& w) {
  detail::require_same_dim(static_cast<std::size_t>(w.size()), p.d(), "features_jacobian");
  const Vector hid = detail::hidden(p, w);
  return p.A * detail::hidden_slope(p, hid).asDiagonal() * p.W1;
}

/// Largest singular value.
inline double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

/// Deterministic i.i.d. standard-normal latents.
inline std::vector<LatentCode> sample_latents(std::uint64_t seed, std::size_t count, std::size_t d) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<LatentCode> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Vector v(static_cast<Eigen::Index>(d));
    for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = normal(rng);
    out.emplace_back(std::move(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Glyph rendering

struct GlyphSpec {
  double orientation = 0.0;  // radians, (−π/2, π/2)
  double size = 0.5;         // fraction of canvas, [0.2, 0.8]
  double aspect = 0.7;       // width / height, [0.4, 1.0]
  double mouth_curve = 0.0;  // −1 frown … +1 smile
  double eye_open = 0.5;     // [0, 1]
};

inline GlyphSpec attributes_to_glyph(const AttributeVector& a) {
  if (a.size() != 5) throw InvalidArgument("attributes_to_glyph needs exactly 5 attributes, got " +
                                           std::to_string(a.size()));
  const auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  GlyphSpec g;
  g.orientation = (std::numbers::pi / 2.0) * std::tanh(0.5 * a(0));
  g.size = 0.2 + 0.6 * sigmoid(a(1));
  g.aspect = 0.4 + 0.6 * sigmoid(a(2));
  g.mouth_curve = std::tanh(a(3));
  g.eye_open = sigmoid(a(4));
  return g;
}

/// 64×64 grayscale raster, row-major, intensities in [0, 1].
struct ImageRaster {
  static constexpr std::size_t kWidth = 64;
  static constexpr std::size_t kHeight = 64;

  std::vector<double> pixels = std::vector<double>(kWidth * kHeight, 0.0);

  [[nodiscard]] double at(std::size_t x, std::size_t y) const { return pixels[y * kWidth + x]; }
  double& at(std::size_t x, std::size_t y) { return pixels[y * kWidth + x]; }

  friend bool operator==(const ImageRaster&, const ImageRaster&) = default;
};

namespace detail {

// Coverage of a soft edge: 1 inside (sd < 0), 0 outside, linear ramp over one pixel.
inline double coverage(double sd) { return std::clamp(0.5 - sd, 0.0, 1.0); }

// Approximate signed distance (in pixels) to an axis-aligned ellipse.
inline double ellipse_sd(double x, double y, double rx, double ry) {
  const double k = std::sqrt((x * x) / (rx * rx) + (y * y) / (ry * ry));
  return (k - 1.0) * std::min(rx, ry);
}

}  // namespace detail

/// Oriented ellipse face with two eyes and a mouth arc.
inline ImageRaster render(const GlyphSpec& g) {
  constexpr double kFace = 0.85;
  constexpr double kFeature = 0.1;
  const double half = static_cast<double>(ImageRaster::kWidth) / 2.0;
  const double ry = g.size * half;
  const double rx = ry * g.aspect;
  const double cos_t = std::cos(g.orientation);
  const double sin_t = std::sin(g.orientation);

  const double eye_dx = 0.4 * rx;
  const double eye_y = -0.3 * ry;
  const double eye_rx = std::max(0.12 * rx, 0.8);
  const double eye_ry = std::max(0.15 * ry * g.eye_open, 0.35);
  const double mouth_y = 0.45 * ry;
  const double mouth_half_width = 0.5 * rx;
  const double mouth_depth = 0.25 * ry * g.mouth_curve;
  const double stroke = std::max(0.06 * ry, 0.8);

  ImageRaster img;
  for (std::size_t py = 0; py < ImageRaster::kHeight; ++py) {
    for (std::size_t px = 0; px < ImageRaster::kWidth; ++px) {
      const double dx = static_cast<double>(px) + 0.5 - half;
      const double dy = static_cast<double>(py) + 0.5 - half;
      // Glyph-local frame: +y points down the face.
      const double u = cos_t * dx + sin_t * dy;
      const double v = -sin_t * dx + cos_t * dy;

      const double face = detail::coverage(detail::ellipse_sd(u, v, rx, ry));
      if (face <= 0.0) continue;

      double feature = 0.0;
      for (double side : {-1.0, 1.0}) {
        feature = std::max(feature, detail::coverage(detail::ellipse_sd(u - side * eye_dx, v - eye_y, eye_rx, eye_ry)));
      }
      if (std::abs(u) <= mouth_half_width) {
        const double t = u / mouth_half_width;
        // Smile bends the arc's ends upward (towards −v).
        const double arc_v = mouth_y + mouth_depth * (1.0 - t * t) - 0.5 * mouth_depth;
        feature = std::max(feature, detail::coverage(std::abs(v - arc_v) - stroke));
      }
      const double shade = kFace * (1.0 - feature) + kFeature * feature;
      img.at(px, py) = std::clamp(face * shade, 0.0, 1.0);
    }
  }
  return img;
}

inline ImageRaster render_latent(const GeneratorParams& p, const LatentCode& w) {
  return render(attributes_to_glyph(features(p, w)));
}

}  // namespace batchedit
