#include <chrono>
#include <cstdio>
#include <random>
#include "bridge/tensor.hpp"
using namespace bridge;
int main() {
  std::mt19937 g(1); std::normal_distribution<float> d;
  for (auto [m,n,k,ta,tb] : {std::tuple{64ul,1024ul,1024ul,Trans::No,Trans::Yes}, {64ul,1024ul,1024ul,Trans::No,Trans::No}, {1024ul,1024ul,64ul,Trans::Yes,Trans::No}}) {
    Matrix<float> a(ta==Trans::Yes?k:m, ta==Trans::Yes?m:k), b(tb==Trans::Yes?n:k, tb==Trans::Yes?k:n), c(m,n);
    for (auto& x : a.flat()) x = d(g); for (auto& x : b.flat()) x = d(g);
    for (const auto* t : {&simd::scalar_kernels(), simd::avx2_kernels()}) {
      if (!t) continue; simd::set_active_kernels(*t);
      int reps = t->name == "scalar" ? 3 : 50;
      auto t0 = std::chrono::steady_clock::now();
      for (int r = 0; r < reps; ++r) gemm<float>(ta, tb, 1.f, a, b, 0.f, c);
      double s = std::chrono::duration<double>(std::chrono::steady_clock::now()-t0).count();
      std::printf("%s m=%zu n=%zu k=%zu %.1f GFLOP/s\n", std::string(t->name).c_str(), m,n,k, 2.0*m*n*k*reps/s/1e9);
    }
  }
}
