#include <atomic>
#include <cstdlib>
#include <string_view>

#include "bridge/simd/kernels.hpp"
#include "kernels_internal.hpp"

namespace bridge::simd {
namespace {

bool cpu_has_avx2() {
#if defined(BRIDGE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* pick() {
  const KernelTable* best = avx2_kernels();
  if (const char* forced = std::getenv("BRIDGE_SIMD")) {
    const std::string_view want{forced};
    if (want == "scalar") return &scalar_kernels();
    if (want == "avx2" && best != nullptr) return best;
  }
  return best != nullptr ? best : &scalar_kernels();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{pick()};
  return current;
}

}  // namespace

const KernelTable* avx2_kernels() {
#if defined(BRIDGE_HAVE_AVX2)
  static const bool supported = cpu_has_avx2();
  return supported ? &avx2::table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active_kernels() { return *slot().load(std::memory_order_acquire); }

void set_active_kernels(const KernelTable& table) {
  slot().store(&table, std::memory_order_release);
}

}  // namespace bridge::simd
