#pragma once

// Features <-> symbols (random projection, 3-sigma normalization, clipping and
// pseudoinverse) and labels -> symbols (codebook lookup plus optional noise).
//
// Batched symbols are float rows. Under FHRR each row holds phases in [-1, 1);
// under the control algebra the normalized value z in [-1, 1] is stored as
// (z + 1) / 2 so that every representation is non-negative.

#include <span>
#include <vector>

#include "bridge/rng.hpp"
#include "bridge/tensor.hpp"
#include "bridge/vsa.hpp"

namespace bridge {

inline constexpr double kStdFloor = 1e-6;

class ImageVectorizer {
 public:
  ImageVectorizer() = default;
  // pinv is recomputed when empty.
  ImageVectorizer(Algebra algebra, Matrix<double> projection, std::vector<double> mean,
                  std::vector<double> stddev, Matrix<double> pinv = {});

  // Fits statistics over all rows of features. Throws on fewer than two rows.
  static ImageVectorizer fit(const Matrix<float>& features, std::size_t dim, Rng& rng,
                             Algebra algebra = Algebra::Fhrr);

  Algebra algebra() const noexcept { return algebra_; }
  std::size_t dim() const noexcept { return projection_.rows(); }
  std::size_t feature_width() const noexcept { return projection_.cols(); }
  const Matrix<double>& projection() const noexcept { return projection_; }
  const Matrix<double>& pinv() const noexcept { return pinv_; }
  const std::vector<double>& mean() const noexcept { return mean_; }
  const std::vector<double>& stddev() const noexcept { return std_; }

  // Normalized projection (P f - mean) / (3 std), before clipping.
  Matrix<float> normalized(const Matrix<float>& features) const;
  Matrix<float> encode(const Matrix<float>& features) const;
  // Inverse path; rows are wrapped phases (FHRR) or stored values (control).
  Matrix<float> decode(const Matrix<float>& symbols) const;

  Symbol image_to_symbol(std::span<const float> features) const;
  std::vector<float> symbol_to_features(const Symbol& s) const;

  bool operator==(const ImageVectorizer&) const = default;

 private:
  Algebra algebra_ = Algebra::Fhrr;
  Matrix<double> projection_;  // dim x F
  std::vector<double> mean_;
  std::vector<double> std_;
  Matrix<double> pinv_;        // F x dim
  Matrix<float> projection_f_;
  Matrix<float> pinv_f_;
};

class LabelVectorizer {
 public:
  LabelVectorizer() = default;
  LabelVectorizer(Codebook codebook, double noise_sigma);

  const Codebook& codebook() const noexcept { return codebook_; }
  double noise_sigma() const noexcept { return sigma_; }
  Algebra algebra() const noexcept { return codebook_.algebra(); }
  std::size_t dim() const noexcept { return codebook_.dim(); }

  // FHRR: wrap(entry + N(0, sigma)); control: max(entry + N(0, sigma), 0).
  std::vector<double> encode(std::size_t label, Rng& rng) const;
  std::vector<double> encode(std::size_t label, Rng& rng, double sigma) const;
  // Clean entries for a batch of labels.
  Matrix<float> encode_clean(std::span<const std::uint8_t> labels) const;
  Symbol label_to_symbol(std::size_t label, Rng& rng) const;

  bool operator==(const LabelVectorizer&) const = default;

 private:
  Codebook codebook_;
  double sigma_ = 0.0;
};

// Largest float strictly below 1, used in place of a clipped +1 phase.
float phase_ceiling();
// wrap_phase for float rows.
void wrap_phases(std::span<float> x);

}  // namespace bridge
