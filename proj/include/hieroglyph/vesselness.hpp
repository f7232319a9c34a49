#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "hieroglyph/simd.hpp"
#include "hieroglyph/types.hpp"

namespace hieroglyph {

/// Symmetric 3x3 matrix stored as its upper triangle.
struct SymMat3 {
  double xx = 0, yy = 0, zz = 0, xy = 0, xz = 0, yz = 0;

  double operator()(int r, int c) const;
  std::array<std::array<double, 3>, 3> full() const;
  double frobenius() const;
};

/// Eigenpairs ordered by increasing |lambda| (ties by signed value ascending).
/// vectors[i] is the unit eigenvector of values[i].
struct HessianEigen {
  std::array<double, 3> values{};
  std::array<std::array<double, 3>, 3> vectors{};
};

/// Full eigen-decomposition by cyclic Jacobi rotations.
/// Throws InvalidArgument when the input is not symmetric to 1e-9.
HessianEigen eigen_sym3(const std::array<std::array<double, 3>, 3>& h);
HessianEigen eigen_sym3(const SymMat3& h);

/// Eigenvalues only, closed form, ordered like eigen_sym3.
std::array<double, 3> eigenvalues_sym3(const SymMat3& h);

/// Orders three eigenvalues by |lambda|, ties by signed value.
std::array<double, 3> order_by_magnitude(std::array<double, 3> v);

/// Separable Gaussian (sigma in voxels), truncated at 4 sigma, half-sample
/// symmetric reflection at the borders. sigma == 0 returns the input.
Volume3 gaussian_smooth(const Volume3& v, double sigma, simd::Isa isa = simd::active_isa());

/// Normalised, truncated Gaussian taps of radius ceil(4 sigma).
std::vector<double> gaussian_kernel(double sigma);

/// Central second differences of the sigma-smoothed volume, divided by spacing
/// per axis and multiplied by sigma^2 (sigma == 0: no normalisation).
std::vector<SymMat3> hessian_field(const Volume3& v, double sigma, simd::Isa isa = simd::active_isa());

enum class Polarity { Bright, Dark };

struct VesselnessParams {
  double alpha = 0.5;
  double beta = 0.5;
  /// Unset: half of the maximum Hessian norm at each scale.
  std::optional<double> c;
  Polarity polarity = Polarity::Bright;
};

/// Tubularity response from the eigenvalues (|l1| <= |l2| <= |l3|).
double vesselness_measure(const std::array<double, 3>& lambda, const VesselnessParams& p, double c);

/// Multiscale tubularity: maximum of the per-scale response.
Volume3 vesselness_response(const Volume3& v, std::span<const double> sigmas, const VesselnessParams& p = {},
                            simd::Isa isa = simd::active_isa());

/// Objective map for morphing: positive responses kept, everything else set to -x_avg.
struct VesselMap {
  Volume3 volume;
  double x_avg = 0.0;

  double operator[](Voxel v) const { return volume[v]; }
};

/// x_avg is the mean of the strictly positive responses. Throws InvalidArgument
/// when there are none.
VesselMap iv_transform(const Volume3& response);
/// Same transform with an explicitly supplied penalty magnitude (> 0).
VesselMap iv_transform(const Volume3& response, double x_avg);

/// Mean intensity of a volume; the alternative penalty source.
double mean_intensity(const Volume3& v);

}  // namespace hieroglyph
