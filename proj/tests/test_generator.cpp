#include <gtest/gtest.h>

#include <zlib.h>

#include <cmath>
#include <numbers>
#include <random>

#include "batchedit/generator.hpp"
#include "batchedit/raster_io.hpp"
#include "oracles.hpp"

namespace batchedit {
namespace {

using oracle::random_vector;

TEST(InitGenerator, Deterministic) {
  const auto a = init_generator(42);
  const auto b = init_generator(42);
  EXPECT_EQ(a.W1, b.W1);
  EXPECT_EQ(a.b1, b.b1);
  EXPECT_EQ(a.A, b.A);
  EXPECT_EQ(a.c, b.c);
}

TEST(InitGenerator, SeedsDiffer) {
  const auto a = init_generator(1);
  const auto b = init_generator(2);
  EXPECT_NE(a.W1, b.W1);
}

TEST(InitGenerator, Shapes) {
  const auto p = init_generator(0, 7, 9, 3);
  EXPECT_EQ(p.W1.rows(), 9);
  EXPECT_EQ(p.W1.cols(), 7);
  EXPECT_EQ(p.A.rows(), 3);
  EXPECT_EQ(p.A.cols(), 9);
  EXPECT_THROW(init_generator(0, 0, 4, 4), InvalidArgument);
  EXPECT_THROW(init_generator(0, 4, 0, 4), InvalidArgument);
  EXPECT_THROW(init_generator(0, 4, 4, 0), InvalidArgument);
}

// Seed 0 at default shape gives ‖W1‖₂ ≈ 2.26. A 64×32 Gaussian matrix with
// entry std 1/√32 concentrates around 1 + √2.
TEST(InitGenerator, SpectralNormBand) {
  const double s = spectral_norm(init_generator(0).W1);
  EXPECT_TRUE(std::isfinite(s));
  EXPECT_GT(s, 2.0);
  EXPECT_LT(s, 2.7);
}

TEST(Features, AtOrigin) {
  const auto p = init_generator(3);
  const Vector expected = p.A * p.b1.array().tanh().matrix() + p.c;
  EXPECT_LT((features(p, Vector::Zero(32)) - expected).norm(), 1e-15);
}

TEST(Features, LinearMode) {
  const auto p = init_generator(3, 32, 64, 5, Activation::identity);
  std::mt19937_64 rng(1);
  const Vector w = random_vector(rng, 32);
  const Vector expected = p.A * p.W1 * w + p.A * p.b1 + p.c;
  EXPECT_LT((features(p, w) - expected).norm(), 1e-12);
}

TEST(Features, DimensionMismatch) {
  const auto p = init_generator(3);
  EXPECT_THROW(features(p, Vector::Zero(31)), DimensionMismatch);
  EXPECT_THROW(features_vjp(p, Vector::Zero(32), Vector::Zero(4)), DimensionMismatch);
}

TEST(Features, DirectionalDerivativeMatchesFiniteDifference) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 20; ++i) {
    const auto p = init_generator(100 + i);
    const Vector w = random_vector(rng, 32);
    const Vector v = random_vector(rng, 32).normalized();
    const double h = 1e-5;
    const Vector fd = (features(p, Vector(w + h * v)) - features(p, Vector(w - h * v))) / (2.0 * h);
    const Vector analytic = features_jacobian(p, w) * v;
    EXPECT_LT(oracle::relative_error(analytic, fd), 1e-5);
  }
}

TEST(FeaturesVjp, ZeroCotangent) {
  const auto p = init_generator(5);
  std::mt19937_64 rng(2);
  EXPECT_EQ(features_vjp(p, random_vector(rng, 32), Vector::Zero(5)), Vector::Zero(32));
}

TEST(FeaturesVjp, LinearModeExact) {
  const auto p = init_generator(5, 32, 64, 5, Activation::identity);
  std::mt19937_64 rng(2);
  const Vector ct = random_vector(rng, 5);
  const Vector expected = (p.A * p.W1).transpose() * ct;
  EXPECT_LT(oracle::relative_error(features_vjp(p, random_vector(rng, 32), ct), expected), 1e-13);
}

TEST(FeaturesVjp, MatchesBruteForceJacobian) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 50; ++i) {
    const auto p = init_generator(1000 + i);
    const Vector w = random_vector(rng, 32);
    const Vector ct = random_vector(rng, 5);
    const Matrix J = oracle::fd_jacobian([&](const Vector& x) { return features(p, x); }, w);
    EXPECT_LT(oracle::relative_error(features_vjp(p, w, ct), J.transpose() * ct), 1e-4) << "instance " << i;
  }
}

TEST(Features, LipschitzBound) {
  std::mt19937_64 rng(31);
  const auto p = init_generator(8);
  const double L = spectral_norm(p.A) * spectral_norm(p.W1);
  for (int i = 0; i < 200; ++i) {
    const Vector w = random_vector(rng, 32);
    const Vector delta = random_vector(rng, 32, 0.5);
    EXPECT_LE((features(p, Vector(w + delta)) - features(p, w)).norm(), L * delta.norm() * (1.0 + 1e-12));
  }
}

TEST(Glyph, Midpoints) {
  const auto g = attributes_to_glyph(Vector::Zero(5));
  EXPECT_EQ(g.orientation, 0.0);
  EXPECT_DOUBLE_EQ(g.size, 0.5);
  EXPECT_DOUBLE_EQ(g.aspect, 0.7);
  EXPECT_EQ(g.mouth_curve, 0.0);
  EXPECT_DOUBLE_EQ(g.eye_open, 0.5);
}

TEST(Glyph, SaturationAndRanges) {
  Vector a = Vector::Zero(5);
  a(0) = 1e3;
  EXPECT_NEAR(attributes_to_glyph(a).orientation, std::numbers::pi / 2.0, 1e-12);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    const auto g = attributes_to_glyph(random_vector(rng, 5, 5.0));
    EXPECT_GE(g.orientation, -std::numbers::pi / 2.0);
    EXPECT_LE(g.orientation, std::numbers::pi / 2.0);
    EXPECT_GE(g.size, 0.2);
    EXPECT_LE(g.size, 0.8);
    EXPECT_GE(g.aspect, 0.4);
    EXPECT_LE(g.aspect, 1.0);
    EXPECT_GE(g.mouth_curve, -1.0);
    EXPECT_LE(g.mouth_curve, 1.0);
    EXPECT_GE(g.eye_open, 0.0);
    EXPECT_LE(g.eye_open, 1.0);
  }
}

TEST(Glyph, MonotoneInEachComponent) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector base = random_vector(rng, 5, 2.0);
    for (int c = 0; c < 5; ++c) {
      Vector lo = base, hi = base;
      hi(c) += 0.25;
      const auto g0 = attributes_to_glyph(lo);
      const auto g1 = attributes_to_glyph(hi);
      const double before[] = {g0.orientation, g0.size, g0.aspect, g0.mouth_curve, g0.eye_open};
      const double after[] = {g1.orientation, g1.size, g1.aspect, g1.mouth_curve, g1.eye_open};
      EXPECT_LT(before[c], after[c]) << "component " << c;
    }
  }
}

TEST(Glyph, WrongAttributeCount) { EXPECT_THROW(attributes_to_glyph(Vector::Zero(4)), InvalidArgument); }

// Default glyph covers ≈ 13% of the canvas above 0.5.
TEST(Render, DefaultOccupancy) {
  const auto img = render(GlyphSpec{});
  std::size_t bright = 0;
  for (double v : img.pixels) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    bright += v > 0.5 ? 1 : 0;
  }
  const double frac = static_cast<double>(bright) / static_cast<double>(img.pixels.size());
  EXPECT_GE(frac, 0.05);
  EXPECT_LE(frac, 0.25);
}

TEST(Render, MirrorSymmetricAtZeroOrientation) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 10; ++i) {
    GlyphSpec g = attributes_to_glyph(random_vector(rng, 5));
    g.orientation = 0.0;
    const auto img = render(g);
    for (std::size_t y = 0; y < ImageRaster::kHeight; ++y)
      for (std::size_t x = 0; x < ImageRaster::kWidth; ++x)
        ASSERT_NEAR(img.at(x, y), img.at(ImageRaster::kWidth - 1 - x, y), 1e-6);
  }
}

TEST(Render, Deterministic) {
  GlyphSpec g;
  g.orientation = 0.4;
  g.mouth_curve = 0.7;
  EXPECT_EQ(render(g), render(g));
}

TEST(Render, OrientationChangesPicture) {
  GlyphSpec a, b;
  b.orientation = 0.6;
  EXPECT_NE(render(a), render(b));
}

TEST(SampleLatents, EmptyAndDeterministic) {
  EXPECT_TRUE(sample_latents(1, 0, 32).empty());
  EXPECT_EQ(sample_latents(9, 20, 8), sample_latents(9, 20, 8));
  EXPECT_NE(sample_latents(9, 20, 8), sample_latents(10, 20, 8));
}

TEST(SampleLatents, StandardNormalMoments) {
  const auto latents = sample_latents(2024, 10000, 16);
  for (std::size_t j = 0; j < 16; ++j) {
    double mean = 0.0, sq = 0.0;
    for (const auto& w : latents) {
      mean += w[j];
      sq += w[j] * w[j];
    }
    mean /= 10000.0;
    const double var = sq / 10000.0 - mean * mean;
    EXPECT_NEAR(mean, 0.0, 0.05);
    EXPECT_GE(var, 0.9);
    EXPECT_LE(var, 1.1);
  }
}

TEST(RasterIo, PgmLayout) {
  ImageRaster img;
  img.at(0, 0) = 1.0;
  img.at(1, 0) = 0.5;
  img.at(63, 63) = 0.2;
  const auto bytes = encode_pgm(img);
  const std::string header = "P5\n64 64\n255\n";
  ASSERT_EQ(bytes.size(), header.size() + 64 * 64);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + static_cast<long>(header.size())), header);
  EXPECT_EQ(bytes[header.size()], 255);
  EXPECT_EQ(bytes[header.size() + 1], 128);
  EXPECT_EQ(bytes[header.size() + 2], 0);
  EXPECT_EQ(bytes.back(), 51);
}

std::uint32_t read_u32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) | b[at + 3];
}

TEST(RasterIo, PngDecodesToSamePixels) {
  const auto img = render(GlyphSpec{});
  const auto png = encode_png(img);
  const std::uint8_t sig[] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  ASSERT_TRUE(std::equal(std::begin(sig), std::end(sig), png.begin()));

  std::vector<std::uint8_t> idat;
  std::size_t at = 8;
  std::vector<std::string> chunk_types;
  while (at < png.size()) {
    const std::uint32_t len = read_u32(png, at);
    const std::string type(png.begin() + static_cast<long>(at) + 4, png.begin() + static_cast<long>(at) + 8);
    chunk_types.push_back(type);
    const uLong crc = crc32(0L, png.data() + at + 4, 4 + len);
    EXPECT_EQ(crc, read_u32(png, at + 8 + len)) << type;
    if (type == "IDAT") idat.insert(idat.end(), png.begin() + static_cast<long>(at) + 8,
                                    png.begin() + static_cast<long>(at + 8 + len));
    at += 12 + len;
  }
  EXPECT_EQ(chunk_types, (std::vector<std::string>{"IHDR", "IDAT", "IEND"}));

  std::vector<std::uint8_t> raw(64 * 65);
  uLongf raw_len = raw.size();
  ASSERT_EQ(uncompress(raw.data(), &raw_len, idat.data(), idat.size()), Z_OK);
  ASSERT_EQ(raw_len, raw.size());
  const auto pgm = encode_pgm(img);
  const std::size_t header = pgm.size() - 64 * 64;
  for (std::size_t y = 0; y < 64; ++y) {
    EXPECT_EQ(raw[y * 65], 0);
    for (std::size_t x = 0; x < 64; ++x) ASSERT_EQ(raw[y * 65 + 1 + x], pgm[header + y * 64 + x]);
  }
}

}  // namespace
}  // namespace batchedit
