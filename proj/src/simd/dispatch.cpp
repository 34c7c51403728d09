#include <cstdlib>
#include <string_view>

#include "gnlab/simd/kernels.hpp"

namespace gnlab::simd {

#ifndef GNLAB_HAVE_AVX2
const KernelTable* avx2_kernels() { return nullptr; }
#endif

bool cpu_supports_avx2() {
#if defined(GNLAB_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

namespace {

const KernelTable& select() {
  if (const char* forced = std::getenv("GNLAB_SIMD"); forced && std::string_view(forced) == "scalar") {
    return scalar_kernels();
  }
  if (const KernelTable* table = avx2_kernels(); table != nullptr && cpu_supports_avx2()) {
    return *table;
  }
  return scalar_kernels();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

}  // namespace gnlab::simd
