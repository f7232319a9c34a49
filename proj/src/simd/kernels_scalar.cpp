#include "hieroglyph/simd.hpp"

namespace hieroglyph::simd::scalar {

void convolve_row(const double* in, std::size_t n, const double* taps, std::size_t ntaps, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < ntaps; ++k) acc = acc + taps[k] * in[i + k];
    out[i] = acc;
  }
}

void axpy(double* acc, const double* src, double w, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] = acc[i] + w * src[i];
}

void hessian_row(const HessianRows& r, std::size_t n, const HessianScale& k, const HessianOut& out) {
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t x = i + 1;
    const double c2 = r.c[x] + r.c[x];
    out.xx[i] = ((r.c[x + 1] + r.c[x - 1]) - c2) * k.xx;
    out.yy[i] = ((r.yp[x] + r.ym[x]) - c2) * k.yy;
    out.zz[i] = ((r.zp[x] + r.zm[x]) - c2) * k.zz;
    out.xy[i] = ((r.yp[x + 1] - r.yp[x - 1]) - (r.ym[x + 1] - r.ym[x - 1])) * k.xy;
    out.xz[i] = ((r.zp[x + 1] - r.zp[x - 1]) - (r.zm[x + 1] - r.zm[x - 1])) * k.xz;
    out.yz[i] = ((r.ypzp[x] - r.ypzm[x]) - (r.ymzp[x] - r.ymzm[x])) * k.yz;
  }
}

}  // namespace hieroglyph::simd::scalar
