#include "bridge/features.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "bridge/error.hpp"
#include "bridge/nn.hpp"

namespace bridge {

const char* to_string(ExtractorKind k) {
  switch (k) {
    case ExtractorKind::RawPixel: return "raw";
    case ExtractorKind::DenseAutoencoder: return "autoencoder";
    case ExtractorKind::Precomputed: return "precomputed";
  }
  return "?";
}

ExtractorKind parse_extractor_kind(const std::string& s) {
  if (s == "raw") return ExtractorKind::RawPixel;
  if (s == "autoencoder") return ExtractorKind::DenseAutoencoder;
  if (s == "precomputed") return ExtractorKind::Precomputed;
  throw InvalidArgument("unknown extractor '" + s + "' (expected raw|autoencoder|precomputed)");
}

FeatureExtractor FeatureExtractor::raw_pixel(std::size_t pixels) {
  require(pixels >= 1, "raw_pixel: zero pixels");
  FeatureExtractor fx;
  fx.kind_ = ExtractorKind::RawPixel;
  fx.pixels_ = fx.width_ = pixels;
  return fx;
}

FeatureExtractor FeatureExtractor::precomputed(std::size_t width) {
  require(width >= 1, "precomputed: zero feature width");
  FeatureExtractor fx;
  fx.kind_ = ExtractorKind::Precomputed;
  fx.width_ = width;
  fx.pixels_ = 0;
  return fx;
}

FeatureExtractor FeatureExtractor::autoencoder(Matrix<float> enc_w, std::vector<float> enc_b,
                                               Matrix<float> dec_w, std::vector<float> dec_b) {
  require(enc_w.rows() == enc_b.size() && dec_w.cols() == enc_w.rows() &&
              dec_w.rows() == enc_w.cols() && dec_b.size() == dec_w.rows(),
          "autoencoder: inconsistent weight shapes");
  FeatureExtractor fx;
  fx.kind_ = ExtractorKind::DenseAutoencoder;
  fx.pixels_ = enc_w.cols();
  fx.width_ = enc_w.rows();
  fx.enc_w_ = std::move(enc_w);
  fx.enc_b_ = std::move(enc_b);
  fx.dec_w_ = std::move(dec_w);
  fx.dec_b_ = std::move(dec_b);
  return fx;
}

Matrix<float> FeatureExtractor::extract_pixels(const Matrix<float>& images) const {
  if (kind_ == ExtractorKind::Precomputed)
    throw InvalidArgument("precomputed extractor needs sample indices, not pixels");
  if (images.cols() != pixels_)
    throw InvalidArgument("extract: image width " + std::to_string(images.cols()) + " != " +
                          std::to_string(pixels_));
  if (kind_ == ExtractorKind::RawPixel) return images;
  Matrix<float> z(images.rows(), width_);
  gemm<float>(Trans::No, Trans::Yes, 1.0f, images, enc_w_, 0.0f, z);
  add_row_bias<float>(z, enc_b_);
  for (auto& v : z.flat()) v = std::max(v, 0.0f);
  return z;
}

Matrix<float> FeatureExtractor::extract(const Dataset& ds, std::span<const std::size_t> idx) const {
  std::vector<std::size_t> all;
  if (idx.empty()) {
    all.resize(ds.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    idx = all;
  }
  if (kind_ == ExtractorKind::Precomputed) {
    if (ds.features.cols() != width_)
      throw DataError("precomputed extractor expects " + std::to_string(width_) +
                      "-wide features, dataset has " + std::to_string(ds.features.cols()));
    for (auto i : idx)
      if (i >= ds.features.rows())
        throw InvalidArgument("precomputed features: index " + std::to_string(i) +
                              " out of range (" + std::to_string(ds.features.rows()) + " rows)");
    return gather_rows(ds.features, idx);
  }
  return extract_pixels(gather_rows(ds.images, idx));
}

Matrix<float> FeatureExtractor::invert(const Matrix<float>& features) const {
  if (kind_ == ExtractorKind::Precomputed)
    throw InvalidArgument("inverse unavailable: generation requires an invertible extractor");
  if (features.cols() != width_)
    throw InvalidArgument("invert: feature width " + std::to_string(features.cols()) + " != " +
                          std::to_string(width_));
  Matrix<float> img = features;
  if (kind_ == ExtractorKind::DenseAutoencoder) {
    img = Matrix<float>(features.rows(), pixels_);
    gemm<float>(Trans::No, Trans::Yes, 1.0f, features, dec_w_, 0.0f, img);
    add_row_bias<float>(img, dec_b_);
  }
  for (auto& v : img.flat()) v = std::clamp(v, 0.0f, 1.0f);
  return img;
}

FeatureExtractor train_autoencoder(const Matrix<float>& images, const AutoencoderConfig& cfg,
                                   Rng& rng, AutoencoderReport* report) {
  if (images.rows() == 0) throw InvalidArgument("train_autoencoder: empty dataset");
  require(cfg.latent >= 1 && cfg.batch >= 1, "train_autoencoder: latent and batch must be >= 1");
  const std::size_t P = images.cols(), L = cfg.latent, n = images.rows();
  const double bound = std::sqrt(6.0 / double(P + L));
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix<float> we(L, P), wd(P, L);
  for (auto& w : we.flat()) w = float(u(rng));
  for (auto& w : wd.flat()) w = float(u(rng));
  std::vector<float> be(L, 0.0f), bd(P, 0.0f);

  std::vector<TensorRef<float>> params{{"encoder.w", we.flat()}, {"encoder.b", be},
                                       {"decoder.w", wd.flat()}, {"decoder.b", bd}};
  AdamConfig acfg;
  acfg.lr = cfg.lr;
  auto state = adam_init<float>(acfg, params);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Matrix<float> gwe(L, P), gwd(P, L);
  std::vector<float> gbe(L), gbd(P);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sse = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch) {
      const std::size_t bsz = std::min(cfg.batch, n - start);
      const auto x = gather_rows(images, std::span(order).subspan(start, bsz));
      Matrix<float> z(bsz, L);
      gemm<float>(Trans::No, Trans::Yes, 1.0f, x, we, 0.0f, z);
      add_row_bias<float>(z, be);
      for (auto& v : z.flat()) v = std::max(v, 0.0f);
      Matrix<float> y(bsz, P);
      gemm<float>(Trans::No, Trans::Yes, 1.0f, z, wd, 0.0f, y);
      add_row_bias<float>(y, bd);
      const float scale = 2.0f / float(bsz * P);
      for (std::size_t i = 0; i < y.size(); ++i) {
        const float d = y.data()[i] - x.data()[i];
        sse += double(d) * d;
        y.data()[i] = scale * d;  // dL/dy
      }
      gemm<float>(Trans::Yes, Trans::No, 1.0f, y, z, 0.0f, gwd);
      column_sums<float>(y, gbd);
      Matrix<float> dz(bsz, L);
      gemm<float>(Trans::No, Trans::No, 1.0f, y, wd, 0.0f, dz);
      for (std::size_t i = 0; i < dz.size(); ++i)
        if (z.data()[i] <= 0.0f) dz.data()[i] = 0.0f;
      gemm<float>(Trans::Yes, Trans::No, 1.0f, dz, x, 0.0f, gwe);
      column_sums<float>(dz, gbe);
      const std::span<const float> grads[] = {gwe.flat(), gbe, gwd.flat(), gbd};
      adam_step<float>(params, grads, state);
    }
    if (report != nullptr) report->epoch_mse.push_back(sse / double(n * P));
  }
  return FeatureExtractor::autoencoder(std::move(we), std::move(be), std::move(wd), std::move(bd));
}

double reconstruction_mse(const FeatureExtractor& fx, const Matrix<float>& images) {
  const auto rec = fx.invert(fx.extract_pixels(images));
  double s = 0.0;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    const double d = double(rec.data()[i]) - images.data()[i];
    s += d * d;
  }
  return s / double(rec.size());
}

}  // namespace bridge
