#include <doctest.h>

#include <cmath>
#include <random>

#include "bridge/error.hpp"
#include "bridge/linalg.hpp"
#include "bridge/vectorizers.hpp"

using namespace bridge;

namespace {

Matrix<float> nonneg_features(std::size_t n, std::size_t f, std::uint64_t seed) {
  Rng rng(seed);
  std::gamma_distribution<double> g(2.0, 0.5);
  Matrix<float> m(n, f);
  for (auto& v : m.flat()) v = float(g(rng));
  return m;
}

double rel_l2(std::span<const float> a, std::span<const float> b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (double(a[i]) - b[i]) * (double(a[i]) - b[i]);
    den += double(b[i]) * b[i];
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("cholesky solve") {
  Rng rng(1);
  std::normal_distribution<double> g;
  Matrix<double> a(6, 6);
  for (auto& v : a.flat()) v = g(rng);
  Matrix<double> spd = matmul(simd::Trans::Yes, simd::Trans::No, a, a);
  for (std::size_t i = 0; i < 6; ++i) spd(i, i) += 1.0;
  Matrix<double> b(6, 2);
  for (auto& v : b.flat()) v = g(rng);
  auto l = spd;
  cholesky(l);
  auto x = b;
  cholesky_solve(l, x);
  const auto back = matmul(simd::Trans::No, simd::Trans::No, spd, x);
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(back.data()[i] == doctest::Approx(b.data()[i]).epsilon(1e-10));
  Matrix<double> neg(2, 2, std::vector<double>{-1, 0, 0, 1});
  CHECK_THROWS_AS(cholesky(neg), NumericError);
}

TEST_CASE("pseudoinverse times projection is the identity when dim >= F") {
  Rng rng(2);
  const auto feats = nonneg_features(200, 64, 3);
  const auto v = ImageVectorizer::fit(feats, 128, rng);
  const auto prod = matmul(simd::Trans::No, simd::Trans::No, v.pinv(), v.projection());
  double worst = 0.0;
  for (std::size_t i = 0; i < 64; ++i)
    for (std::size_t j = 0; j < 64; ++j) worst = std::max(worst, std::abs(prod(i, j) - (i == j ? 1.0 : 0.0)));
  CHECK(worst <= 1e-6);
}

TEST_CASE("pseudoinverse for a wide projection is a right inverse") {
  Rng rng(3);
  Matrix<double> p(16, 40);
  std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(40.0));
  for (auto& x : p.flat()) x = g(rng);
  const auto pi = pseudoinverse(p);
  const auto prod = matmul(simd::Trans::No, simd::Trans::No, p, pi);
  for (std::size_t i = 0; i < 16; ++i)
    for (std::size_t j = 0; j < 16; ++j) CHECK(std::abs(prod(i, j) - (i == j ? 1.0 : 0.0)) < 1e-6);
}

TEST_CASE("image vectorizer") {
  const auto feats = nonneg_features(400, 32, 4);
  Rng a(5), b(5);
  const auto v = ImageVectorizer::fit(feats, 96, a);
  CHECK(v == ImageVectorizer::fit(feats, 96, b));
  for (double s : v.stddev()) CHECK(s >= kStdFloor);

  SUBCASE("3-sigma band holds nearly all calibration projections") {
    const auto z = v.normalized(feats);
    std::size_t inside = 0;
    for (float x : z.flat()) inside += std::abs(x) <= 1.0f;
    CHECK(double(inside) / double(z.size()) >= 0.985);
  }
  SUBCASE("outputs stay in [-1, 1)") {
    Matrix<float> extreme(3, 32);
    for (std::size_t k = 0; k < 32; ++k) {
      extreme(0, k) = 1e4f;
      extreme(1, k) = 0.0f;
      extreme(2, k) = float(k);
    }
    const auto enc = v.encode(extreme);
    const auto z = v.normalized(extreme);
    for (float x : enc.flat()) {
      CHECK(x >= -1.0f);
      CHECK(x < 1.0f);
    }
    for (std::size_t k = 0; k < 96; ++k) {
      if (z(0, k) >= 1.0f) CHECK(enc(0, k) == phase_ceiling());
      if (z(0, k) <= -1.0f) CHECK(enc(0, k) == -1.0f);
    }
  }
  SUBCASE("round trip on unclipped calibration samples") {
    const auto z = v.normalized(feats);
    std::size_t checked = 0;
    for (std::size_t i = 0; i < feats.rows() && checked < 50; ++i) {
      bool clipped = false;
      for (float x : z.row(i)) clipped |= std::abs(x) >= 1.0f;
      if (clipped) continue;
      Matrix<float> one(1, 32, std::vector<float>(feats.row(i).begin(), feats.row(i).end()));
      const auto back = v.decode(v.encode(one));
      CHECK(rel_l2(back.row(0), feats.row(i)) <= 1e-3);
      ++checked;
    }
    CHECK(checked >= 20);
  }
  SUBCASE("zero symbol decodes to pinv * mean clipped at zero") {
    const auto f = v.decode(Matrix<float>(1, 96));
    for (std::size_t j = 0; j < 32; ++j) {
      double want = 0.0;
      for (std::size_t k = 0; k < 96; ++k) want += v.pinv()(j, k) * v.mean()[k];
      CHECK(f(0, j) == doctest::Approx(std::max(want, 0.0)).epsilon(1e-4));
    }
  }
  SUBCASE("symbol API is consistent with the batch path") {
    const auto s = v.image_to_symbol(feats.row(0));
    Matrix<float> one(1, 32, std::vector<float>(feats.row(0).begin(), feats.row(0).end()));
    const auto batch = v.encode(one);
    for (std::size_t k = 0; k < 96; ++k) CHECK(s[k] == double(batch(0, k)));
    CHECK(v.symbol_to_features(s) == v.decode(batch).storage());
  }
  CHECK_THROWS_AS(v.encode(Matrix<float>(1, 31)), InvalidArgument);
  CHECK_THROWS_AS(v.decode(Matrix<float>(1, 95)), InvalidArgument);
  Rng c(1);
  CHECK_THROWS_AS(ImageVectorizer::fit(nonneg_features(1, 32, 1), 16, c), InvalidArgument);
}

TEST_CASE("decode is affine before the clip") {
  const auto feats = nonneg_features(300, 16, 6);
  Rng rng(7);
  const auto v = ImageVectorizer::fit(feats, 48, rng);
  // compare u = 3 std s + mean mapped through pinv without the clip
  Matrix<float> s(1, 48);
  std::uniform_real_distribution<float> u(-0.3f, 0.3f);
  for (auto& x : s.flat()) x = u(rng);
  auto pre = [&](const Matrix<float>& sym, std::size_t j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < 48; ++k) acc += v.pinv()(j, k) * (3.0 * v.stddev()[k] * sym(0, k) + v.mean()[k]);
    return acc;
  };
  Matrix<float> half = s;
  for (auto& x : half.flat()) x *= 0.5f;
  const Matrix<float> zero(1, 48);
  for (std::size_t j = 0; j < 16; ++j)
    CHECK(pre(half, j) - pre(zero, j) == doctest::Approx(0.5 * (pre(s, j) - pre(zero, j))).epsilon(1e-9));
}

TEST_CASE("control algebra stores (z + 1) / 2") {
  const auto feats = nonneg_features(200, 16, 8);
  Rng rng(9);
  const auto v = ImageVectorizer::fit(feats, 32, rng, Algebra::Control);
  const auto s = v.encode(feats);
  for (float x : s.flat()) {
    CHECK(x >= 0.0f);
    CHECK(x <= 1.0f);
  }
  const auto z = v.normalized(feats);
  CHECK(s(0, 0) == doctest::Approx(0.5 * (std::clamp(z(0, 0), -1.0f, 1.0f) + 1.0)));
}

TEST_CASE("label vectorizer") {
  Rng rng(10);
  const auto cb = Codebook::random(10, 1024, rng);
  const LabelVectorizer clean(cb, 0.0);
  std::vector<double> e(cb.entry(3).begin(), cb.entry(3).end());
  CHECK(clean.encode(3, rng) == e);
  const LabelVectorizer noisy(cb, 0.05);
  std::size_t correct = 0;
  double min_sim = 1.0;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t c = std::size_t(i % 10);
    const auto s = noisy.label_to_symbol(c, rng);
    min_sim = std::min(min_sim, similarity(s.phases(), cb.entry(c)));
    correct += cb.cleanup(s).label == c;
  }
  CHECK(min_sim >= 0.95);
  CHECK(double(correct) / 10000.0 >= 0.999);
  CHECK_THROWS_AS(noisy.encode(10, rng), InvalidArgument);
  CHECK_THROWS_AS(LabelVectorizer(cb, -1.0), InvalidArgument);
}
