#pragma once

#include <cstddef>

// Inner loops shared by the tensor and autodiff layers. Every backend must be
// bit-identical to the scalar reference: vector variants only spread
// independent output elements across lanes and never reorder a reduction.

namespace gnlab::simd {

struct KernelTable {
  const char* name;

  /// c[m×n] = a[m×k] · b[k×n]; each c[i][j] accumulates p = 0..k-1 in order from +0.0.
  void (*matmul)(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n);

  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  void (*scale)(const double* a, double c, double* out, std::size_t n);
  void (*add_scalar)(const double* a, double c, double* out, std::size_t n);

  void (*relu)(const double* a, double* out, std::size_t n);
  /// 1 where a > 0, else 0.
  void (*relu_mask)(const double* a, double* out, std::size_t n);
  void (*leaky_relu)(const double* a, double slope, double* out, std::size_t n);
  /// 1 where a > 0, else slope.
  void (*leaky_mask)(const double* a, double slope, double* out, std::size_t n);
  void (*abs)(const double* a, double* out, std::size_t n);
  /// +1, -1 or 0.
  void (*sign)(const double* a, double* out, std::size_t n);
};

const KernelTable& scalar_kernels();

/// nullptr when the build has no AVX2 backend.
const KernelTable* avx2_kernels();

bool cpu_supports_avx2();

/// Backend picked once per process: AVX2 when compiled in and supported by the
/// CPU, scalar otherwise. GNLAB_SIMD=scalar forces the reference path.
const KernelTable& active();

}  // namespace gnlab::simd
