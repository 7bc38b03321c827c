#pragma once

// Fourier holographic reduced representation (FHRR) over phase vectors, plus
// the non-VSA control algebra that simply sums non-negative vectors.
//
// A phase p stands for the unit phasor exp(i pi p); phases live in [-1, 1).
// Similarity is the mean cosine of the phase differences, bundling is the angle
// of the phasor sum, binding is phase addition.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "bridge/rng.hpp"

namespace bridge {

enum class Algebra : std::uint8_t { Fhrr, Control };

const char* to_string(Algebra a);
Algebra parse_algebra(std::string_view s);

// ((x + 1) mod 2) - 1, in [-1, 1). Throws on non-finite input.
double wrap_phase(double x);

class Symbol {
 public:
  Symbol() = default;
  // Wraps every element.
  explicit Symbol(std::vector<double> phases);
  static Symbol zeros(std::size_t dim);

  std::size_t dim() const noexcept { return phases_.size(); }
  std::span<const double> phases() const noexcept { return phases_; }
  double operator[](std::size_t k) const noexcept { return phases_[k]; }

  bool operator==(const Symbol&) const = default;

 private:
  std::vector<double> phases_;
};

Symbol random_symbol(Rng& rng, std::size_t dim);

double similarity(const Symbol& a, const Symbol& b);
// Same kernel on raw (possibly unwrapped) phase sequences.
double similarity(std::span<const double> a, std::span<const double> b);

// Degenerate dimensions (resultant magnitude below 1e-12) get phase 0.
Symbol bundle(std::span<const Symbol> symbols);
Symbol bundle(const Symbol& a, const Symbol& b);

Symbol bind(const Symbol& a, const Symbol& b);
Symbol unbind(const Symbol& a, const Symbol& b);

class ControlVector {
 public:
  ControlVector() = default;
  // Throws when any value is negative or non-finite.
  explicit ControlVector(std::vector<double> values);

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }

  bool operator==(const ControlVector&) const = default;

 private:
  std::vector<double> values_;
};

ControlVector control_bundle(std::span<const ControlVector> vectors);
// Cosine similarity; two zero vectors give 0.
double control_similarity(const ControlVector& a, const ControlVector& b);
double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct CleanupResult {
  std::size_t label = 0;
  double score = 0.0;
  std::vector<double> scores;
};

// Class-label -> symbol table. FHRR entries are uniform phases in [-1, 1);
// control entries are uniform values in [0, 1). Immutable once built.
class Codebook {
 public:
  Codebook() = default;
  Codebook(Algebra algebra, std::size_t dim, std::vector<std::vector<double>> entries);

  static Codebook random(std::size_t num_classes, std::size_t dim, Rng& rng,
                         Algebra algebra = Algebra::Fhrr);

  Algebra algebra() const noexcept { return algebra_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::span<const double> entry(std::size_t label) const;
  Symbol symbol(std::size_t label) const;

  // Nearest entry under the algebra's similarity; ties go to the lowest label.
  CleanupResult cleanup(std::span<const double> query) const;
  CleanupResult cleanup(const Symbol& s) const { return cleanup(s.phases()); }

  bool operator==(const Codebook&) const = default;

 private:
  Algebra algebra_ = Algebra::Fhrr;
  std::size_t dim_ = 0;
  std::vector<std::vector<double>> entries_;
};

}  // namespace bridge
