// Compiled with -mavx2 and without FMA so results match the scalar kernels exactly.
#include "hieroglyph/simd.hpp"

#include <immintrin.h>

namespace hieroglyph::simd::avx2 {

void convolve_row(const double* in, std::size_t n, const double* taps, std::size_t ntaps, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t k = 0; k < ntaps; ++k) {
      const __m256d w = _mm256_set1_pd(taps[k]);
      acc = _mm256_add_pd(acc, _mm256_mul_pd(w, _mm256_loadu_pd(in + i + k)));
    }
    _mm256_storeu_pd(out + i, acc);
  }
  if (i < n) scalar::convolve_row(in + i, n - i, taps, ntaps, out + i);
}

void axpy(double* acc, const double* src, double w, std::size_t n) {
  const __m256d wv = _mm256_set1_pd(w);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d a = _mm256_loadu_pd(acc + i);
    _mm256_storeu_pd(acc + i, _mm256_add_pd(a, _mm256_mul_pd(wv, _mm256_loadu_pd(src + i))));
  }
  if (i < n) scalar::axpy(acc + i, src + i, w, n - i);
}

void hessian_row(const HessianRows& r, std::size_t n, const HessianScale& k, const HessianOut& out) {
  const __m256d kxx = _mm256_set1_pd(k.xx), kyy = _mm256_set1_pd(k.yy), kzz = _mm256_set1_pd(k.zz);
  const __m256d kxy = _mm256_set1_pd(k.xy), kxz = _mm256_set1_pd(k.xz), kyz = _mm256_set1_pd(k.yz);
  auto ld = [](const double* p) { return _mm256_loadu_pd(p); };
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const std::size_t x = i + 1;
    const __m256d c = ld(r.c + x);
    const __m256d c2 = _mm256_add_pd(c, c);
    const __m256d xx = _mm256_sub_pd(_mm256_add_pd(ld(r.c + x + 1), ld(r.c + x - 1)), c2);
    const __m256d yy = _mm256_sub_pd(_mm256_add_pd(ld(r.yp + x), ld(r.ym + x)), c2);
    const __m256d zz = _mm256_sub_pd(_mm256_add_pd(ld(r.zp + x), ld(r.zm + x)), c2);
    const __m256d xy = _mm256_sub_pd(_mm256_sub_pd(ld(r.yp + x + 1), ld(r.yp + x - 1)),
                                     _mm256_sub_pd(ld(r.ym + x + 1), ld(r.ym + x - 1)));
    const __m256d xz = _mm256_sub_pd(_mm256_sub_pd(ld(r.zp + x + 1), ld(r.zp + x - 1)),
                                     _mm256_sub_pd(ld(r.zm + x + 1), ld(r.zm + x - 1)));
    const __m256d yz = _mm256_sub_pd(_mm256_sub_pd(ld(r.ypzp + x), ld(r.ypzm + x)),
                                     _mm256_sub_pd(ld(r.ymzp + x), ld(r.ymzm + x)));
    _mm256_storeu_pd(out.xx + i, _mm256_mul_pd(xx, kxx));
    _mm256_storeu_pd(out.yy + i, _mm256_mul_pd(yy, kyy));
    _mm256_storeu_pd(out.zz + i, _mm256_mul_pd(zz, kzz));
    _mm256_storeu_pd(out.xy + i, _mm256_mul_pd(xy, kxy));
    _mm256_storeu_pd(out.xz + i, _mm256_mul_pd(xz, kxz));
    _mm256_storeu_pd(out.yz + i, _mm256_mul_pd(yz, kyz));
  }
  if (i < n) {
    HessianRows tail = r;
    for (const double** p : {&tail.c, &tail.ym, &tail.yp, &tail.zm, &tail.zp, &tail.ymzm, &tail.ymzp, &tail.ypzm,
                             &tail.ypzp})
      *p += i;
    scalar::hessian_row(tail, n - i, k, {out.xx + i, out.yy + i, out.zz + i, out.xy + i, out.xz + i, out.yz + i});
  }
}

}  // namespace hieroglyph::simd::avx2
