#include "bridge/vsa_bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "bridge/vsa.hpp"

namespace bridge {

VsaBenchResult run_vsa_bench(std::size_t dim, std::size_t pairs, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  VsaBenchResult r;
  r.dim = dim;
  r.pairs = pairs;
  auto rng = make_rng(seed);
  double sum = 0.0, sq = 0.0, bsum = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const auto a = random_symbol(rng, dim);
    const auto b = random_symbol(rng, dim);
    r.self_similarity_error = std::max(r.self_similarity_error, std::abs(similarity(a, a) - 1.0));
    const auto back = unbind(bind(a, b), b);
    for (std::size_t k = 0; k < dim; ++k)
      r.bind_roundtrip_error =
          std::max(r.bind_roundtrip_error, std::abs(wrap_phase(back[k] - a[k])));
    const double s = similarity(a, b);
    sum += s;
    sq += s * s;
    bsum += similarity(bundle(a, b), a);
  }
  const double n = double(pairs);
  r.random_mean = sum / n;
  r.random_std = std::sqrt(std::max(0.0, sq / n - r.random_mean * r.random_mean));
  r.expected_random_std = 1.0 / std::sqrt(2.0 * double(dim));
  r.bundle_member_mean = bsum / n;
  r.expected_bundle_member = 2.0 / std::numbers::pi;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace bridge
