#pragma once

// IDX datasets, BRGF feature tables, PGM images and small file helpers.
// Checkpoints live in checkpoint.hpp.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bridge/tensor.hpp"

namespace bridge {

inline constexpr std::size_t kImageSide = 28;
inline constexpr std::size_t kImagePixels = kImageSide * kImageSide;

// Images are rows of pixels scaled to [0, 1]. When a precomputed feature table
// is attached it is row-aligned with the images.
struct Dataset {
  Matrix<float> images;
  std::vector<std::uint8_t> labels;
  std::size_t rows = kImageSide;
  std::size_t cols = kImageSide;
  Matrix<float> features;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t num_classes() const;
};

// Subset with rows in the given order (features follow when attached).
Dataset subset(const Dataset& ds, std::span<const std::size_t> idx);

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
// Inverse of load_idx; pixels are quantized with round(p * 255).
void save_idx(const Dataset& ds, const std::filesystem::path& images,
              const std::filesystem::path& labels);

// "<dir>/<split>-images-idx3-ubyte" and the matching labels file; a split of
// "test" maps to the t10k prefix.
Dataset load_idx_split(const std::filesystem::path& dir, const std::string& split);

Matrix<float> load_features(const std::filesystem::path& path);
void save_features(const Matrix<float>& table, const std::filesystem::path& path);

void write_pgm(std::span<const float> pixels, const std::filesystem::path& path,
               std::size_t rows = kImageSide, std::size_t cols = kImageSide);
std::vector<float> read_pgm(const std::filesystem::path& path);

std::vector<char> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const char> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace bridge
