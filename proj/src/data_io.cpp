#include "bridge/data_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "bridge/error.hpp"

namespace bridge {

namespace fs = std::filesystem;

std::size_t Dataset::num_classes() const {
  std::size_t n = 0;
  for (auto l : labels) n = std::max<std::size_t>(n, std::size_t(l) + 1);
  return n;
}

Dataset subset(const Dataset& ds, std::span<const std::size_t> idx) {
  Dataset out;
  out.rows = ds.rows;
  out.cols = ds.cols;
  out.images = gather_rows(ds.images, idx);
  out.labels.reserve(idx.size());
  for (auto i : idx) out.labels.push_back(ds.labels[i]);
  if (!ds.features.empty()) out.features = gather_rows(ds.features, idx);
  return out;
}

std::vector<char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const fs::path& path, std::span<const char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::span<const char>(text.data(), text.size()));
}

namespace {

std::uint32_t be32(const std::vector<char>& b, std::size_t off) {
  return (std::uint32_t(std::uint8_t(b[off])) << 24) | (std::uint32_t(std::uint8_t(b[off + 1])) << 16) |
         (std::uint32_t(std::uint8_t(b[off + 2])) << 8) | std::uint32_t(std::uint8_t(b[off + 3]));
}

void put_be32(std::vector<char>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<char>((v >> s) & 0xff));
}

void need(const std::vector<char>& b, std::size_t expected, const fs::path& path) {
  if (b.size() < expected)
    throw DataError("truncated file '" + path.string() + "': expected " +
                    std::to_string(expected) + " bytes, got " + std::to_string(b.size()));
}

void check_magic(const std::vector<char>& b, std::uint32_t want, const fs::path& path) {
  need(b, 4, path);
  const std::uint32_t magic = be32(b, 0);
  if (magic != want)
    throw DataError("not an IDX file (magic=" + std::to_string(magic) + ", expected " +
                    std::to_string(want) + "): " + path.string());
}

}  // namespace

Dataset load_idx(const fs::path& images, const fs::path& labels) {
  const auto ib = read_file(images);
  check_magic(ib, 2051, images);
  need(ib, 16, images);
  const std::size_t n = be32(ib, 4), rows = be32(ib, 8), cols = be32(ib, 12);
  need(ib, 16 + n * rows * cols, images);

  const auto lb = read_file(labels);
  check_magic(lb, 2049, labels);
  need(lb, 8, labels);
  const std::size_t nl = be32(lb, 4);
  if (nl != n)
    throw DataError("image/label count mismatch: " + std::to_string(n) + " images vs " +
                    std::to_string(nl) + " labels");
  need(lb, 8 + n, labels);

  Dataset ds;
  ds.rows = rows;
  ds.cols = cols;
  ds.images = Matrix<float>(n, rows * cols);
  for (std::size_t i = 0; i < n * rows * cols; ++i)
    ds.images.data()[i] = static_cast<float>(std::uint8_t(ib[16 + i])) / 255.0f;
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.labels[i] = std::uint8_t(lb[8 + i]);
  return ds;
}

void save_idx(const Dataset& ds, const fs::path& images, const fs::path& labels) {
  require(ds.images.rows() == ds.labels.size(), "save_idx: images and labels misaligned");
  require(ds.images.cols() == ds.rows * ds.cols, "save_idx: image width does not match shape");
  std::vector<char> ib;
  ib.reserve(16 + ds.images.size());
  put_be32(ib, 2051);
  put_be32(ib, static_cast<std::uint32_t>(ds.size()));
  put_be32(ib, static_cast<std::uint32_t>(ds.rows));
  put_be32(ib, static_cast<std::uint32_t>(ds.cols));
  for (float p : ds.images.flat())
    ib.push_back(static_cast<char>(std::lround(std::clamp(p, 0.0f, 1.0f) * 255.0f)));
  write_file(images, ib);
  std::vector<char> lb;
  put_be32(lb, 2049);
  put_be32(lb, static_cast<std::uint32_t>(ds.size()));
  for (auto l : ds.labels) lb.push_back(static_cast<char>(l));
  write_file(labels, lb);
}

Dataset load_idx_split(const fs::path& dir, const std::string& split) {
  const std::string prefix = split == "test" ? "t10k" : split;
  return load_idx(dir / (prefix + "-images-idx3-ubyte"), dir / (prefix + "-labels-idx1-ubyte"));
}

Matrix<float> load_features(const fs::path& path) {
  const auto b = read_file(path);
  const auto nl = std::find(b.begin(), b.end(), '\n');
  if (nl == b.end()) throw DataError("feature file '" + path.string() + "': missing header line");
  std::istringstream hdr(std::string(b.begin(), nl));
  std::string magic, version;
  long long count = -1, width = -1;
  hdr >> magic >> version >> count >> width;
  if (!hdr || magic != "BRGF" || version != "v1" || count < 0 || width < 1)
    throw DataError("feature file '" + path.string() + "': bad header (expected 'BRGF v1 count width')");
  const std::size_t off = static_cast<std::size_t>(nl - b.begin()) + 1;
  const std::size_t n = std::size_t(count) * std::size_t(width);
  const std::size_t expected = off + n * 4;
  if (b.size() < expected)
    throw DataError("feature file '" + path.string() + "': truncated payload, missing " +
                    std::to_string(expected - b.size()) + " bytes");
  if (b.size() > expected)
    throw DataError("feature file '" + path.string() + "': " + std::to_string(b.size() - expected) +
                    " trailing bytes");
  Matrix<float> t(static_cast<std::size_t>(count), static_cast<std::size_t>(width));
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t u;
    std::memcpy(&u, b.data() + off + 4 * i, 4);
    if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
    const float v = std::bit_cast<float>(u);
    if (!std::isfinite(v)) throw DataError("features must be finite");
    if (v < 0.0f) throw DataError("features must be non-negative");
    t.data()[i] = v;
  }
  return t;
}

void save_features(const Matrix<float>& table, const fs::path& path) {
  for (float v : table.flat())
    require(std::isfinite(v) && v >= 0.0f, "save_features: features must be finite and non-negative");
  std::string out = "BRGF v1 " + std::to_string(table.rows()) + " " + std::to_string(table.cols()) + "\n";
  const std::size_t off = out.size();
  out.resize(off + table.size() * 4);
  for (std::size_t i = 0; i < table.size(); ++i) {
    auto u = std::bit_cast<std::uint32_t>(table.data()[i]);
    if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
    std::memcpy(out.data() + off + 4 * i, &u, 4);
  }
  write_text(path, out);
}

void write_pgm(std::span<const float> pixels, const fs::path& path, std::size_t rows,
               std::size_t cols) {
  require(pixels.size() == rows * cols, "write_pgm: pixel count does not match shape");
  std::string out = "P5\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
  for (float p : pixels) {
    const float q = std::isfinite(p) ? std::clamp(p, 0.0f, 1.0f) : 0.0f;
    out.push_back(static_cast<char>(std::lround(q * 255.0f)));
  }
  write_text(path, out);
}

std::vector<float> read_pgm(const fs::path& path) {
  const auto b = read_file(path);
  std::istringstream in(std::string(b.begin(), b.end()));
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (!in || magic != "P5" || maxval != 255) throw DataError("unsupported PGM '" + path.string() + "'");
  in.get();
  const auto off = static_cast<std::size_t>(in.tellg());
  need(b, off + w * h, path);
  std::vector<float> px(w * h);
  for (std::size_t i = 0; i < px.size(); ++i)
    px[i] = static_cast<float>(std::uint8_t(b[off + i])) / 255.0f;
  return px;
}

}  // namespace bridge
