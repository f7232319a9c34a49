#pragma once

// Data-parallel row kernels used by the Gaussian and Hessian stages.
//
// Each kernel has a scalar reference and an AVX2 variant. The variants perform the
// same operations in the same order (no FMA contraction), so their outputs are
// bit-identical; the AVX2 path is picked at runtime when the CPU supports it.
// HIEROGLYPH_SIMD=scalar forces the reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace hieroglyph::simd {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);
bool isa_available(Isa isa);
/// Best available ISA, honouring HIEROGLYPH_SIMD.
Isa active_isa();

/// out[i] = sum_k taps[k] * in[i + k] for i in [0, n); `in` holds n + taps.size() - 1 values.
using ConvolveRowFn = void (*)(const double* in, std::size_t n, const double* taps, std::size_t ntaps, double* out);

/// acc[i] += w * src[i]
using AxpyFn = void (*)(double* acc, const double* src, double w, std::size_t n);

/// Second-derivative stencils along one x-row. The row pointers are already
/// reflected at the y/z borders; every row has n + 2 entries with element 0 at
/// x = -1, so row[i + 1] is voxel x = i.
struct HessianRows {
  const double* c;    // (y, z)
  const double* ym;   // (y-1, z)
  const double* yp;   // (y+1, z)
  const double* zm;   // (y, z-1)
  const double* zp;   // (y, z+1)
  const double* ymzm; // (y-1, z-1)
  const double* ymzp; // (y-1, z+1)
  const double* ypzm; // (y+1, z-1)
  const double* ypzp; // (y+1, z+1)
};

/// Per-entry scale factors (sigma^2 normalisation and spacing division folded in).
struct HessianScale {
  double xx, yy, zz, xy, xz, yz;
};

/// Output arrays, each of length n: H entries for one row.
struct HessianOut {
  double* xx;
  double* yy;
  double* zz;
  double* xy;
  double* xz;
  double* yz;
};

using HessianRowFn = void (*)(const HessianRows& rows, std::size_t n, const HessianScale& k, const HessianOut& out);

struct Kernels {
  Isa isa;
  ConvolveRowFn convolve_row;
  AxpyFn axpy;
  HessianRowFn hessian_row;
};

const Kernels& kernels(Isa isa);
inline const Kernels& kernels() { return kernels(active_isa()); }

namespace scalar {
void convolve_row(const double* in, std::size_t n, const double* taps, std::size_t ntaps, double* out);
void axpy(double* acc, const double* src, double w, std::size_t n);
void hessian_row(const HessianRows& rows, std::size_t n, const HessianScale& k, const HessianOut& out);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
void convolve_row(const double* in, std::size_t n, const double* taps, std::size_t ntaps, double* out);
void axpy(double* acc, const double* src, double w, std::size_t n);
void hessian_row(const HessianRows& rows, std::size_t n, const HessianScale& k, const HessianOut& out);
}  // namespace avx2
#endif

}  // namespace hieroglyph::simd
