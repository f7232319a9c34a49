#include <cstdlib>
#include <string>

#include "hieroglyph/simd.hpp"

namespace hieroglyph::simd {
namespace {

constexpr Kernels kScalar{Isa::Scalar, scalar::convolve_row, scalar::axpy, scalar::hessian_row};
#if defined(__x86_64__) || defined(_M_X64)
constexpr Kernels kAvx2{Isa::Avx2, avx2::convolve_row, avx2::axpy, avx2::hessian_row};
#endif

Isa detect() {
  if (const char* env = std::getenv("HIEROGLYPH_SIMD")) {
    if (std::string(env) == "scalar") return Isa::Scalar;
  }
  return isa_available(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
}

}  // namespace

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

bool isa_available(Isa isa) {
  if (isa == Isa::Scalar) return true;
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Isa active_isa() {
  static const Isa isa = detect();
  return isa;
}

const Kernels& kernels(Isa isa) {
#if defined(__x86_64__) || defined(_M_X64)
  if (isa == Isa::Avx2 && isa_available(Isa::Avx2)) return kAvx2;
#endif
  return kScalar;
}

}  // namespace hieroglyph::simd
