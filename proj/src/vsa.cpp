#include "bridge/vsa.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "bridge/error.hpp"

namespace bridge {

const char* to_string(Algebra a) { return a == Algebra::Fhrr ? "fhrr" : "control"; }

Algebra parse_algebra(std::string_view s) {
  if (s == "fhrr") return Algebra::Fhrr;
  if (s == "control") return Algebra::Control;
  throw InvalidArgument("unknown algebra '" + std::string(s) + "' (expected fhrr|control)");
}

double wrap_phase(double x) {
  if (!std::isfinite(x)) throw InvalidArgument("non-finite phase");
  double r = std::fmod(x + 1.0, 2.0);
  if (r < 0.0) r += 2.0;
  r -= 1.0;
  // fmod of a tiny negative plus 2 can round up to exactly 2
  if (r >= 1.0) r -= 2.0;
  return r;
}

Symbol::Symbol(std::vector<double> phases) : phases_(std::move(phases)) {
  require(!phases_.empty(), "Symbol: dimension must be >= 1");
  for (auto& p : phases_) p = wrap_phase(p);
}

Symbol Symbol::zeros(std::size_t dim) { return Symbol(std::vector<double>(dim, 0.0)); }

Symbol random_symbol(Rng& rng, std::size_t dim) {
  require(dim >= 1, "random_symbol: dimension must be >= 1");
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(dim);
  for (auto& p : v) p = u(rng);
  return Symbol(std::move(v));
}

namespace {
void check_dims(std::size_t a, std::size_t b, const char* op) {
  if (a != b)
    throw InvalidArgument(std::string(op) + ": dimension mismatch (" + std::to_string(a) +
                          " vs " + std::to_string(b) + ")");
}
}  // namespace

double similarity(std::span<const double> a, std::span<const double> b) {
  check_dims(a.size(), b.size(), "similarity");
  require(!a.empty(), "similarity: empty symbols");
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += std::cos(std::numbers::pi * (a[k] - b[k]));
  return acc / static_cast<double>(a.size());
}

double similarity(const Symbol& a, const Symbol& b) { return similarity(a.phases(), b.phases()); }

Symbol bundle(std::span<const Symbol> symbols) {
  require(!symbols.empty(), "bundle: empty symbol list");
  const std::size_t dim = symbols.front().dim();
  for (const auto& s : symbols) check_dims(dim, s.dim(), "bundle");
  if (symbols.size() == 1) return symbols.front();
  std::vector<double> out(dim);
  for (std::size_t k = 0; k < dim; ++k) {
    double re = 0.0, im = 0.0;
    for (const auto& s : symbols) {
      re += std::cos(std::numbers::pi * s[k]);
      im += std::sin(std::numbers::pi * s[k]);
    }
    out[k] = std::hypot(re, im) < 1e-12 ? 0.0 : std::atan2(im, re) / std::numbers::pi;
  }
  return Symbol(std::move(out));
}

Symbol bundle(const Symbol& a, const Symbol& b) {
  const Symbol pair[] = {a, b};
  return bundle(std::span<const Symbol>(pair));
}

Symbol bind(const Symbol& a, const Symbol& b) {
  check_dims(a.dim(), b.dim(), "bind");
  std::vector<double> out(a.dim());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = a[k] + b[k];
  return Symbol(std::move(out));
}

Symbol unbind(const Symbol& a, const Symbol& b) {
  check_dims(a.dim(), b.dim(), "unbind");
  std::vector<double> out(a.dim());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = a[k] - b[k];
  return Symbol(std::move(out));
}

ControlVector::ControlVector(std::vector<double> values) : values_(std::move(values)) {
  require(!values_.empty(), "ControlVector: dimension must be >= 1");
  for (double v : values_)
    require(std::isfinite(v) && v >= 0.0, "ControlVector: values must be finite and >= 0");
}

ControlVector control_bundle(std::span<const ControlVector> vectors) {
  require(!vectors.empty(), "control_bundle: empty vector list");
  std::vector<double> out(vectors.front().dim(), 0.0);
  for (const auto& v : vectors) {
    check_dims(out.size(), v.dim(), "control_bundle");
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += v.values()[k];
  }
  return ControlVector(std::move(out));
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  check_dims(a.size(), b.size(), "cosine_similarity");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double control_similarity(const ControlVector& a, const ControlVector& b) {
  return cosine_similarity(a.values(), b.values());
}

Codebook::Codebook(Algebra algebra, std::size_t dim, std::vector<std::vector<double>> entries)
    : algebra_(algebra), dim_(dim), entries_(std::move(entries)) {
  require(!entries_.empty(), "Codebook: at least one class required");
  require(dim_ >= 1, "Codebook: dimension must be >= 1");
  for (const auto& e : entries_) check_dims(dim_, e.size(), "Codebook");
}

Codebook Codebook::random(std::size_t num_classes, std::size_t dim, Rng& rng, Algebra algebra) {
  require(num_classes >= 1, "codebook: zero classes");
  require(dim >= 1, "codebook: dimension must be >= 1");
  std::vector<std::vector<double>> entries;
  entries.reserve(num_classes);
  if (algebra == Algebra::Fhrr) {
    for (std::size_t c = 0; c < num_classes; ++c) {
      const Symbol s = random_symbol(rng, dim);
      entries.emplace_back(s.phases().begin(), s.phases().end());
    }
  } else {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t c = 0; c < num_classes; ++c) {
      std::vector<double> v(dim);
      for (auto& x : v) x = u(rng);
      entries.push_back(std::move(v));
    }
  }
  return Codebook(algebra, dim, std::move(entries));
}

std::span<const double> Codebook::entry(std::size_t label) const {
  if (label >= entries_.size())
    throw InvalidArgument("codebook: unknown class " + std::to_string(label));
  return entries_[label];
}

Symbol Codebook::symbol(std::size_t label) const {
  const auto e = entry(label);
  return Symbol(std::vector<double>(e.begin(), e.end()));
}

CleanupResult Codebook::cleanup(std::span<const double> query) const {
  check_dims(dim_, query.size(), "cleanup");
  CleanupResult r;
  r.scores.reserve(entries_.size());
  for (std::size_t c = 0; c < entries_.size(); ++c) {
    const double s = algebra_ == Algebra::Fhrr ? similarity(entries_[c], query)
                                               : cosine_similarity(entries_[c], query);
    r.scores.push_back(s);
    if (c == 0 || s > r.score) {
      r.score = s;
      r.label = c;
    }
  }
  return r;
}

}  // namespace bridge
