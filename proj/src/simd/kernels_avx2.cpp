// Compiled with -mavx2 and -ffp-contract=off; only reached after a runtime CPU check.
#include <immintrin.h>

#include <cmath>

#include "gnlab/simd/kernels.hpp"

namespace gnlab::simd {
namespace {

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    std::size_t j = 0;
    for (; j + 16 <= n; j += 16) {
      __m256d acc0 = _mm256_setzero_pd();
      __m256d acc1 = _mm256_setzero_pd();
      __m256d acc2 = _mm256_setzero_pd();
      __m256d acc3 = _mm256_setzero_pd();
      for (std::size_t p = 0; p < k; ++p) {
        const __m256d av = _mm256_set1_pd(arow[p]);
        const double* bp = b + p * n + j;
        acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(av, _mm256_loadu_pd(bp)));
        acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(av, _mm256_loadu_pd(bp + 4)));
        acc2 = _mm256_add_pd(acc2, _mm256_mul_pd(av, _mm256_loadu_pd(bp + 8)));
        acc3 = _mm256_add_pd(acc3, _mm256_mul_pd(av, _mm256_loadu_pd(bp + 12)));
      }
      _mm256_storeu_pd(crow + j, acc0);
      _mm256_storeu_pd(crow + j + 4, acc1);
      _mm256_storeu_pd(crow + j + 8, acc2);
      _mm256_storeu_pd(crow + j + 12, acc3);
    }
    for (; j + 4 <= n; j += 4) {
      __m256d acc = _mm256_setzero_pd();
      for (std::size_t p = 0; p < k; ++p) {
        acc = _mm256_add_pd(acc,
                            _mm256_mul_pd(_mm256_set1_pd(arow[p]), _mm256_loadu_pd(b + p * n + j)));
      }
      _mm256_storeu_pd(crow + j, acc);
    }
    for (; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * b[p * n + j];
      crow[j] = acc;
    }
  }
}

template <class VecOp, class ScalarOp>
inline void binary(const double* a, const double* b, double* out, std::size_t n, VecOp vop,
                   ScalarOp sop) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, vop(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = sop(a[i], b[i]);
}

template <class VecOp, class ScalarOp>
inline void unary(const double* a, double* out, std::size_t n, VecOp vop, ScalarOp sop) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, vop(_mm256_loadu_pd(a + i)));
  for (; i < n; ++i) out[i] = sop(a[i]);
}

void add(const double* a, const double* b, double* out, std::size_t n) {
  binary(a, b, out, n, [](__m256d x, __m256d y) { return _mm256_add_pd(x, y); },
         [](double x, double y) { return x + y; });
}

void sub(const double* a, const double* b, double* out, std::size_t n) {
  binary(a, b, out, n, [](__m256d x, __m256d y) { return _mm256_sub_pd(x, y); },
         [](double x, double y) { return x - y; });
}

void mul(const double* a, const double* b, double* out, std::size_t n) {
  binary(a, b, out, n, [](__m256d x, __m256d y) { return _mm256_mul_pd(x, y); },
         [](double x, double y) { return x * y; });
}

void scale(const double* a, double c, double* out, std::size_t n) {
  const __m256d cv = _mm256_set1_pd(c);
  unary(a, out, n, [cv](__m256d x) { return _mm256_mul_pd(x, cv); },
        [c](double x) { return x * c; });
}

void add_scalar(const double* a, double c, double* out, std::size_t n) {
  const __m256d cv = _mm256_set1_pd(c);
  unary(a, out, n, [cv](__m256d x) { return _mm256_add_pd(x, cv); },
        [c](double x) { return x + c; });
}

// _mm256_max_pd(x, 0) returns the second operand for -0.0 and NaN, matching x > 0 ? x : 0.
void relu(const double* a, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  unary(a, out, n, [zero](__m256d x) { return _mm256_max_pd(x, zero); },
        [](double x) { return x > 0.0 ? x : 0.0; });
}

void relu_mask(const double* a, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  unary(a, out, n,
        [zero, one](__m256d x) { return _mm256_and_pd(_mm256_cmp_pd(x, zero, _CMP_GT_OQ), one); },
        [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

void leaky_relu(const double* a, double slope, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d s = _mm256_set1_pd(slope);
  unary(a, out, n,
        [zero, s](__m256d x) {
          return _mm256_blendv_pd(_mm256_mul_pd(x, s), x, _mm256_cmp_pd(x, zero, _CMP_GT_OQ));
        },
        [slope](double x) { return x > 0.0 ? x : x * slope; });
}

void leaky_mask(const double* a, double slope, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d s = _mm256_set1_pd(slope);
  unary(a, out, n,
        [zero, one, s](__m256d x) {
          return _mm256_blendv_pd(s, one, _mm256_cmp_pd(x, zero, _CMP_GT_OQ));
        },
        [slope](double x) { return x > 0.0 ? 1.0 : slope; });
}

void abs(const double* a, double* out, std::size_t n) {
  const __m256d sign_bit = _mm256_set1_pd(-0.0);
  unary(a, out, n, [sign_bit](__m256d x) { return _mm256_andnot_pd(sign_bit, x); },
        [](double x) { return std::fabs(x); });
}

void sign(const double* a, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d minus_one = _mm256_set1_pd(-1.0);
  unary(a, out, n,
        [zero, one, minus_one](__m256d x) {
          const __m256d pos = _mm256_and_pd(_mm256_cmp_pd(x, zero, _CMP_GT_OQ), one);
          const __m256d neg = _mm256_and_pd(_mm256_cmp_pd(x, zero, _CMP_LT_OQ), minus_one);
          return _mm256_or_pd(pos, neg);
        },
        [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

constexpr KernelTable kAvx2{
    "avx2", matmul, add, sub, mul, scale, add_scalar, relu, relu_mask, leaky_relu, leaky_mask,
    abs,    sign,
};

}  // namespace

const KernelTable* avx2_kernels() { return &kAvx2; }

}  // namespace gnlab::simd
