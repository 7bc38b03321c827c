#pragma once

// Feature extractors: pixels -> non-negative features and back.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bridge/data_io.hpp"
#include "bridge/rng.hpp"
#include "bridge/tensor.hpp"

namespace bridge {

enum class ExtractorKind : std::uint8_t { RawPixel, DenseAutoencoder, Precomputed };

const char* to_string(ExtractorKind k);
ExtractorKind parse_extractor_kind(const std::string& s);

struct AutoencoderConfig {
  std::size_t latent = 256;
  std::size_t epochs = 5;
  std::size_t batch = 64;
  double lr = 1e-3;
};

class FeatureExtractor {
 public:
  static FeatureExtractor raw_pixel(std::size_t pixels = kImagePixels);
  // Precomputed extractors read the table attached to the dataset.
  static FeatureExtractor precomputed(std::size_t width);
  static FeatureExtractor autoencoder(Matrix<float> enc_w, std::vector<float> enc_b,
                                      Matrix<float> dec_w, std::vector<float> dec_b);

  ExtractorKind kind() const noexcept { return kind_; }
  std::size_t pixels() const noexcept { return pixels_; }
  std::size_t width() const noexcept { return width_; }
  bool invertible() const noexcept { return kind_ != ExtractorKind::Precomputed; }

  // Rows idx of ds, or all rows when idx is empty.
  Matrix<float> extract(const Dataset& ds, std::span<const std::size_t> idx = {}) const;
  // Pixel rows only; throws for Precomputed.
  Matrix<float> extract_pixels(const Matrix<float>& images) const;
  // Images clipped to [0, 1]; throws for Precomputed.
  Matrix<float> invert(const Matrix<float>& features) const;

  const Matrix<float>& enc_w() const noexcept { return enc_w_; }
  const std::vector<float>& enc_b() const noexcept { return enc_b_; }
  const Matrix<float>& dec_w() const noexcept { return dec_w_; }
  const std::vector<float>& dec_b() const noexcept { return dec_b_; }

  bool operator==(const FeatureExtractor&) const = default;

 private:
  ExtractorKind kind_ = ExtractorKind::RawPixel;
  std::size_t pixels_ = kImagePixels;
  std::size_t width_ = kImagePixels;
  Matrix<float> enc_w_;  // latent x pixels
  std::vector<float> enc_b_;
  Matrix<float> dec_w_;  // pixels x latent
  std::vector<float> dec_b_;
};

struct AutoencoderReport {
  std::vector<double> epoch_mse;
};

// Dense 784 -> latent (ReLU) -> 784 (linear) trained on per-pixel squared error.
FeatureExtractor train_autoencoder(const Matrix<float>& images, const AutoencoderConfig& cfg,
                                   Rng& rng, AutoencoderReport* report = nullptr);

// Mean per-pixel squared error of invert(extract(images)).
double reconstruction_mse(const FeatureExtractor& fx, const Matrix<float>& images);

}  // namespace bridge
