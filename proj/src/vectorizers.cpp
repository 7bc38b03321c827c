#include "bridge/vectorizers.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "bridge/error.hpp"
#include "bridge/linalg.hpp"

namespace bridge {

float phase_ceiling() { return std::nextafter(1.0f, 0.0f); }

void wrap_phases(std::span<float> x) {
  for (auto& v : x) {
    float w = float(wrap_phase(double(v)));
    if (w >= 1.0f) w = -1.0f;
    v = w;
  }
}

ImageVectorizer::ImageVectorizer(Algebra algebra, Matrix<double> projection,
                                 std::vector<double> mean, std::vector<double> stddev,
                                 Matrix<double> pinv)
    : algebra_(algebra),
      projection_(std::move(projection)),
      mean_(std::move(mean)),
      std_(std::move(stddev)),
      pinv_(std::move(pinv)) {
  require(projection_.rows() >= 1 && projection_.cols() >= 1, "ImageVectorizer: empty projection");
  require(mean_.size() == dim() && std_.size() == dim(), "ImageVectorizer: statistics length != dim");
  for (double s : std_) require(std::isfinite(s) && s > 0.0, "ImageVectorizer: std must be positive");
  if (pinv_.empty()) pinv_ = pseudoinverse(projection_);
  require(pinv_.rows() == feature_width() && pinv_.cols() == dim(),
          "ImageVectorizer: pseudoinverse shape mismatch");
  projection_f_ = cast<float>(projection_);
  pinv_f_ = cast<float>(pinv_);
}

ImageVectorizer ImageVectorizer::fit(const Matrix<float>& features, std::size_t dim, Rng& rng,
                                     Algebra algebra) {
  require(dim >= 1, "fit_image_vectorizer: dim must be >= 1");
  require(features.cols() >= 1, "fit_image_vectorizer: feature width must be >= 1");
  if (features.rows() < 2)
    throw InvalidArgument("fit_image_vectorizer: need at least 2 calibration samples");
  const std::size_t F = features.cols();
  std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(double(F)));
  Matrix<double> p(dim, F);
  for (auto& v : p.flat()) v = g(rng);

  Matrix<float> proj(features.rows(), dim);
  gemm<float>(Trans::No, Trans::Yes, 1.0f, features, cast<float>(p), 0.0f, proj);
  std::vector<double> sum(dim, 0.0), sq(dim, 0.0);
  for (std::size_t i = 0; i < proj.rows(); ++i) {
    const auto r = proj.row(i);
    for (std::size_t k = 0; k < dim; ++k) sum[k] += r[k];
  }
  const double n = double(proj.rows());
  std::vector<double> mean(dim), sd(dim);
  for (std::size_t k = 0; k < dim; ++k) mean[k] = sum[k] / n;
  for (std::size_t i = 0; i < proj.rows(); ++i) {
    const auto r = proj.row(i);
    for (std::size_t k = 0; k < dim; ++k) {
      const double d = r[k] - mean[k];
      sq[k] += d * d;
    }
  }
  for (std::size_t k = 0; k < dim; ++k) sd[k] = std::max(std::sqrt(sq[k] / n), kStdFloor);
  return ImageVectorizer(algebra, std::move(p), std::move(mean), std::move(sd));
}

Matrix<float> ImageVectorizer::normalized(const Matrix<float>& features) const {
  if (features.cols() != feature_width())
    throw InvalidArgument("image_to_symbol: feature width " + std::to_string(features.cols()) +
                          " != " + std::to_string(feature_width()));
  Matrix<float> z(features.rows(), dim());
  gemm<float>(Trans::No, Trans::Yes, 1.0f, features, projection_f_, 0.0f, z);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto r = z.row(i);
    for (std::size_t k = 0; k < r.size(); ++k)
      r[k] = float((double(r[k]) - mean_[k]) / (3.0 * std_[k]));
  }
  return z;
}

Matrix<float> ImageVectorizer::encode(const Matrix<float>& features) const {
  Matrix<float> z = normalized(features);
  const float top = phase_ceiling();
  for (auto& v : z.flat()) {
    v = std::clamp(v, -1.0f, 1.0f);
    if (algebra_ == Algebra::Fhrr) {
      if (v >= 1.0f) v = top;
    } else {
      v = 0.5f * (v + 1.0f);
    }
  }
  return z;
}

Matrix<float> ImageVectorizer::decode(const Matrix<float>& symbols) const {
  if (symbols.cols() != dim())
    throw InvalidArgument("symbol_to_features: symbol dim " + std::to_string(symbols.cols()) +
                          " != " + std::to_string(dim()));
  Matrix<float> u(symbols.rows(), dim());
  for (std::size_t i = 0; i < u.rows(); ++i) {
    const auto s = symbols.row(i);
    auto r = u.row(i);
    for (std::size_t k = 0; k < r.size(); ++k) {
      const double z = algebra_ == Algebra::Fhrr ? double(s[k]) : 2.0 * double(s[k]) - 1.0;
      r[k] = float(3.0 * std_[k] * z + mean_[k]);
    }
  }
  Matrix<float> f(symbols.rows(), feature_width());
  gemm<float>(Trans::No, Trans::Yes, 1.0f, u, pinv_f_, 0.0f, f);
  for (auto& v : f.flat()) v = std::max(v, 0.0f);
  return f;
}

Symbol ImageVectorizer::image_to_symbol(std::span<const float> features) const {
  require(algebra_ == Algebra::Fhrr, "image_to_symbol: symbols are FHRR only");
  Matrix<float> m(1, features.size(), std::vector<float>(features.begin(), features.end()));
  const auto s = encode(m);
  return Symbol(std::vector<double>(s.flat().begin(), s.flat().end()));
}

std::vector<float> ImageVectorizer::symbol_to_features(const Symbol& s) const {
  Matrix<float> m(1, s.dim());
  for (std::size_t k = 0; k < s.dim(); ++k) m.data()[k] = float(s[k]);
  return decode(m).storage();
}

LabelVectorizer::LabelVectorizer(Codebook codebook, double noise_sigma)
    : codebook_(std::move(codebook)), sigma_(noise_sigma) {
  require(std::isfinite(sigma_) && sigma_ >= 0.0, "LabelVectorizer: noise sigma must be >= 0");
}

std::vector<double> LabelVectorizer::encode(std::size_t label, Rng& rng) const {
  return encode(label, rng, sigma_);
}

std::vector<double> LabelVectorizer::encode(std::size_t label, Rng& rng, double sigma) const {
  const auto e = codebook_.entry(label);
  std::vector<double> v(e.begin(), e.end());
  if (sigma > 0.0) {
    std::normal_distribution<double> g(0.0, sigma);
    for (auto& x : v) x += g(rng);
  }
  for (auto& x : v) x = algebra() == Algebra::Fhrr ? wrap_phase(x) : std::max(x, 0.0);
  return v;
}

Matrix<float> LabelVectorizer::encode_clean(std::span<const std::uint8_t> labels) const {
  Matrix<float> m(labels.size(), dim());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto e = codebook_.entry(labels[i]);
    auto r = m.row(i);
    for (std::size_t k = 0; k < r.size(); ++k) r[k] = float(e[k]);
  }
  return m;
}

Symbol LabelVectorizer::label_to_symbol(std::size_t label, Rng& rng) const {
  require(algebra() == Algebra::Fhrr, "label_to_symbol: symbols are FHRR only");
  return Symbol(encode(label, rng));
}

}  // namespace bridge
