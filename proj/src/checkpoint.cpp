#include "bridge/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <sstream>
#include <type_traits>

#include "bridge/data_io.hpp"
#include "bridge/error.hpp"

namespace bridge {

namespace fs = std::filesystem;

namespace {

std::string hex_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_real(const std::string& s, const std::string& key) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw DataError("checkpoint: bad number for " + key);
  return v;
}

std::uint64_t parse_uint(const std::string& s, const std::string& key) {
  char* end = nullptr;
  const auto v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0' || s[0] == '-') throw DataError("checkpoint: bad integer for " + key);
  return v;
}

template <class T>
std::vector<char> to_bytes(std::span<const T> v) {
  std::vector<char> out(v.size() * sizeof(T));
  for (std::size_t i = 0; i < v.size(); ++i) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    auto u = std::bit_cast<U>(v[i]);
    if constexpr (std::endian::native == std::endian::big) {
      if constexpr (sizeof(T) == 4) u = __builtin_bswap32(u);
      else u = __builtin_bswap64(u);
    }
    std::memcpy(out.data() + i * sizeof(T), &u, sizeof(T));
  }
  return out;
}

template <class T>
std::vector<T> from_bytes(const std::vector<char>& b) {
  std::vector<T> v(b.size() / sizeof(T));
  for (std::size_t i = 0; i < v.size(); ++i) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    U u;
    std::memcpy(&u, b.data() + i * sizeof(T), sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      if constexpr (sizeof(T) == 4) u = __builtin_bswap32(u);
      else u = __builtin_bswap64(u);
    }
    v[i] = std::bit_cast<T>(u);
  }
  return v;
}

struct TensorEntry {
  std::string dtype;
  std::size_t rows = 0, cols = 0, bytes = 0;
  std::string file;
};

class Writer {
 public:
  Writer(const fs::path& dir, Manifest& m) : dir_(dir), m_(m) {}

  template <class T>
  void put(const std::string& name, std::size_t rows, std::size_t cols, std::span<const T> v) {
    const auto bytes = to_bytes(v);
    const std::string file = name + ".bin";
    write_file(dir_ / file, bytes);
    m_["tensor." + name] = std::string(sizeof(T) == 4 ? "f32" : "f64") + " " +
                           std::to_string(rows) + "x" + std::to_string(cols) + " " +
                           std::to_string(bytes.size()) + " " + file;
  }
  template <class T>
  void put(const std::string& name, const Matrix<T>& m) {
    put<T>(name, m.rows(), m.cols(), m.flat());
  }
  template <class T>
  void put(const std::string& name, const std::vector<T>& v) {
    put<T>(name, 1, v.size(), std::span<const T>(v));
  }
  void put_block(const std::string& p, const ResidualBlock<float>& b) {
    put(p + ".w1", b.w1);
    put(p + ".b1", b.b1);
    put(p + ".w2", b.w2);
    put(p + ".b2", b.b2);
  }

 private:
  fs::path dir_;
  Manifest& m_;
};

class Reader {
 public:
  Reader(const fs::path& dir, const Manifest& m) : dir_(dir) {
    for (const auto& [k, v] : m) {
      if (k.rfind("tensor.", 0) != 0) continue;
      TensorEntry e;
      std::istringstream in(v);
      std::string shape;
      in >> e.dtype >> shape >> e.bytes >> e.file;
      const auto x = shape.find('x');
      if (!in || x == std::string::npos || (e.dtype != "f32" && e.dtype != "f64"))
        throw DataError("checkpoint: malformed tensor entry '" + k + "'");
      e.rows = parse_uint(shape.substr(0, x), k);
      e.cols = parse_uint(shape.substr(x + 1), k);
      const std::size_t esz = e.dtype == "f32" ? 4 : 8;
      if (e.rows * e.cols * esz != e.bytes)
        throw DataError("checkpoint: tensor " + k.substr(7) + " shape " + shape +
                        " does not match byte length " + std::to_string(e.bytes));
      const auto path = dir_ / e.file;
      std::error_code ec;
      const auto size = fs::file_size(path, ec);
      if (ec) throw DataError("checkpoint: missing tensor file for " + k.substr(7));
      if (size != e.bytes)
        throw DataError("checkpoint: tensor " + k.substr(7) + " expected " +
                        std::to_string(e.bytes) + " bytes, file has " + std::to_string(size));
      entries_[k.substr(7)] = e;
    }
  }

  // Checks presence, dtype and shape of a tensor without reading it.
  void expect(const std::string& name, const char* dtype, std::size_t rows, std::size_t cols) const {
    const auto it = entries_.find(name);
    if (it == entries_.end()) throw DataError("checkpoint: missing tensor " + name);
    if (it->second.dtype != dtype || it->second.rows != rows || it->second.cols != cols)
      throw DataError("checkpoint: tensor " + name + " has shape " +
                      std::to_string(it->second.rows) + "x" + std::to_string(it->second.cols) +
                      " " + it->second.dtype + ", expected " + std::to_string(rows) + "x" +
                      std::to_string(cols) + " " + dtype);
  }

  std::size_t cols_of(const std::string& name) const {
    const auto it = entries_.find(name);
    if (it == entries_.end()) throw DataError("checkpoint: missing tensor " + name);
    return it->second.cols;
  }

  template <class T>
  Matrix<T> matrix(const std::string& name) const {
    const auto& e = entries_.at(name);
    return Matrix<T>(e.rows, e.cols, from_bytes<T>(read_file(dir_ / e.file)));
  }
  template <class T>
  std::vector<T> vector(const std::string& name) const {
    return matrix<T>(name).storage();
  }
  ResidualBlock<float> block(const std::string& p) const {
    ResidualBlock<float> b;
    b.w1 = matrix<float>(p + ".w1");
    b.b1 = vector<float>(p + ".b1");
    b.w2 = matrix<float>(p + ".w2");
    b.b2 = vector<float>(p + ".b2");
    return b;
  }
  void expect_block(const std::string& p, std::size_t dim, std::size_t hidden) const {
    expect(p + ".w1", "f32", hidden, dim);
    expect(p + ".b1", "f32", 1, hidden);
    expect(p + ".w2", "f32", dim, hidden);
    expect(p + ".b2", "f32", 1, dim);
  }

 private:
  fs::path dir_;
  std::map<std::string, TensorEntry> entries_;
};

const char* const kChannelNames[] = {"image", "label", "initial_image", "initial_label"};

}  // namespace

void save_checkpoint(const BridgeNetwork& net, const fs::path& dir, const Manifest& extra) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create checkpoint directory '" + dir.string() + "'");
  const auto& c = net.config();
  Manifest m;
  m["format"] = "bridge-checkpoint";
  m["version"] = std::to_string(kCheckpointVersion);
  m["dim"] = std::to_string(c.dim);
  m["hidden"] = std::to_string(c.hidden_width());
  m["algebra"] = to_string(c.algebra);
  m["num_classes"] = std::to_string(c.num_classes);
  m["noise_sigma"] = hex_real(c.noise_sigma);
  m["output_init_scale"] = hex_real(c.output_init_scale);
  m["seed"] = std::to_string(c.seed);
  const auto& fx = net.extractor();
  m["extractor"] = to_string(fx.kind());
  m["extractor.pixels"] = std::to_string(fx.pixels());
  m["extractor.width"] = std::to_string(fx.width());
  for (const auto& [k, v] : extra) m["meta." + k] = v;

  Writer w(dir, m);
  const auto& cb = net.codebook();
  std::vector<double> flat;
  for (std::size_t i = 0; i < cb.size(); ++i) {
    const auto e = cb.entry(i);
    flat.insert(flat.end(), e.begin(), e.end());
  }
  w.put<double>("codebook", cb.size(), cb.dim(), flat);
  const auto& iv = net.image_vectorizer();
  w.put("vectorizer.projection", iv.projection());
  w.put("vectorizer.pinv", iv.pinv());
  w.put("vectorizer.mean", iv.mean());
  w.put("vectorizer.std", iv.stddev());
  const Channel<float>* chans[] = {&net.image_channel, &net.label_channel,
                                   &net.initial_image_channel, &net.initial_label_channel};
  for (int i = 0; i < 4; ++i) {
    w.put_block(std::string(kChannelNames[i]) + ".forward", chans[i]->forward);
    w.put_block(std::string(kChannelNames[i]) + ".reverse", chans[i]->reverse);
  }
  if (fx.kind() == ExtractorKind::DenseAutoencoder) {
    w.put("extractor.enc_w", fx.enc_w());
    w.put("extractor.enc_b", fx.enc_b());
    w.put("extractor.dec_w", fx.dec_w());
    w.put("extractor.dec_b", fx.dec_b());
  }
  std::string text;
  for (const auto& [k, v] : m) text += k + "=" + v + "\n";
  write_text(dir / "manifest.txt", text);
}

Manifest read_manifest(const fs::path& dir) {
  const auto bytes = read_file(dir / "manifest.txt");
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  Manifest m;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("checkpoint manifest: malformed line '" + line + "'");
    m[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return m;
}

Manifest checkpoint_meta(const fs::path& dir) {
  Manifest out;
  for (const auto& [k, v] : read_manifest(dir))
    if (k.rfind("meta.", 0) == 0) out[k.substr(5)] = v;
  return out;
}

BridgeNetwork load_checkpoint(const fs::path& dir) {
  const auto m = read_manifest(dir);
  auto get = [&](const std::string& k) -> const std::string& {
    const auto it = m.find(k);
    if (it == m.end()) throw DataError("checkpoint manifest: missing key " + k);
    return it->second;
  };
  if (get("format") != "bridge-checkpoint") throw DataError("not a bridge checkpoint: " + dir.string());
  const auto version = parse_uint(get("version"), "version");
  if (version != kCheckpointVersion)
    throw DataError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  NetConfig c;
  c.dim = parse_uint(get("dim"), "dim");
  c.hidden = parse_uint(get("hidden"), "hidden");
  try {
    c.algebra = parse_algebra(get("algebra"));
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  c.num_classes = parse_uint(get("num_classes"), "num_classes");
  c.noise_sigma = parse_real(get("noise_sigma"), "noise_sigma");
  c.output_init_scale = parse_real(get("output_init_scale"), "output_init_scale");
  c.seed = parse_uint(get("seed"), "seed");
  ExtractorKind kind;
  try {
    kind = parse_extractor_kind(get("extractor"));
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  const std::size_t pixels = parse_uint(get("extractor.pixels"), "extractor.pixels");
  const std::size_t width = parse_uint(get("extractor.width"), "extractor.width");

  const Reader r(dir, m);
  const std::size_t N = c.dim, H = c.hidden_width();
  r.expect("codebook", "f64", c.num_classes, N);
  r.expect("vectorizer.projection", "f64", N, width);
  r.expect("vectorizer.pinv", "f64", width, N);
  r.expect("vectorizer.mean", "f64", 1, N);
  r.expect("vectorizer.std", "f64", 1, N);
  for (const char* name : kChannelNames) {
    r.expect_block(std::string(name) + ".forward", N, H);
    r.expect_block(std::string(name) + ".reverse", N, H);
  }
  if (kind == ExtractorKind::DenseAutoencoder) {
    r.expect("extractor.enc_w", "f32", width, pixels);
    r.expect("extractor.enc_b", "f32", 1, width);
    r.expect("extractor.dec_w", "f32", pixels, width);
    r.expect("extractor.dec_b", "f32", 1, pixels);
  }

  const auto cbm = r.matrix<double>("codebook");
  std::vector<std::vector<double>> entries;
  for (std::size_t i = 0; i < cbm.rows(); ++i) entries.emplace_back(cbm.row(i).begin(), cbm.row(i).end());
  FeatureExtractor fx = kind == ExtractorKind::RawPixel      ? FeatureExtractor::raw_pixel(pixels)
                        : kind == ExtractorKind::Precomputed ? FeatureExtractor::precomputed(width)
                                                             : FeatureExtractor::autoencoder(
                                                                   r.matrix<float>("extractor.enc_w"),
                                                                   r.vector<float>("extractor.enc_b"),
                                                                   r.matrix<float>("extractor.dec_w"),
                                                                   r.vector<float>("extractor.dec_b"));
  ImageVectorizer iv(c.algebra, r.matrix<double>("vectorizer.projection"),
                     r.vector<double>("vectorizer.mean"), r.vector<double>("vectorizer.std"),
                     r.matrix<double>("vectorizer.pinv"));
  LabelVectorizer lv(Codebook(c.algebra, N, std::move(entries)), c.noise_sigma);
  BridgeNetwork net(c, std::move(fx), std::move(iv), std::move(lv),
                    {r.block("image.forward"), r.block("image.reverse")},
                    {r.block("label.forward"), r.block("label.reverse")});
  net.initial_image_channel = {r.block("initial_image.forward"), r.block("initial_image.reverse")};
  net.initial_label_channel = {r.block("initial_label.forward"), r.block("initial_label.reverse")};
  return net;
}

void save_distilled(const DistilledSet& d, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory '" + dir.string() + "'");
  Manifest m;
  m["format"] = "bridge-distilled";
  m["version"] = std::to_string(kCheckpointVersion);
  m["count"] = std::to_string(d.size());
  Writer w(dir, m);
  w.put("fused", d.fused);
  w.put("image_symbols", d.image_symbols);
  w.put("label_symbols", d.label_symbols);
  w.put("loop_losses", d.loop_losses);
  w.put("initial_losses", d.initial_losses);
  w.put("history", d.history);
  std::string text;
  for (const auto& [k, v] : m) text += k + "=" + v + "\n";
  write_text(dir / "manifest.txt", text);
}

DistilledSet load_distilled(const fs::path& dir) {
  const auto m = read_manifest(dir);
  const auto f = m.find("format");
  if (f == m.end() || f->second != "bridge-distilled")
    throw DataError("not a distilled set: " + dir.string());
  const auto v = m.find("version");
  if (v == m.end() || v->second != std::to_string(kCheckpointVersion))
    throw DataError("distilled set version mismatch in " + dir.string());
  const auto c = m.find("count");
  if (c == m.end()) throw DataError("distilled set: missing count");
  const std::size_t n = parse_uint(c->second, "count");
  const Reader r(dir, m);
  const std::size_t dim = r.cols_of("fused");
  r.expect("fused", "f32", n, dim);
  r.expect("image_symbols", "f32", n, dim);
  r.expect("label_symbols", "f32", n, dim);
  r.expect("loop_losses", "f64", 1, n);
  r.expect("initial_losses", "f64", 1, n);
  r.cols_of("history");
  DistilledSet d;
  d.fused = r.matrix<float>("fused");
  d.image_symbols = r.matrix<float>("image_symbols");
  d.label_symbols = r.matrix<float>("label_symbols");
  d.loop_losses = r.vector<double>("loop_losses");
  d.initial_losses = r.vector<double>("initial_losses");
  d.history = r.vector<double>("history");
  return d;
}

}  // namespace bridge
