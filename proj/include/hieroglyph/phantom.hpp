#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "hieroglyph/skeleton.hpp"
#include "hieroglyph/types.hpp"

namespace hieroglyph {

// Random source: std::mt19937_64 seeded with `seed`. Uniform doubles take the top
// 53 bits of one draw; normals use Box-Muller on two uniforms.
struct PhantomSpec {
  std::uint64_t seed = 1;
  int n_primary = 3;
  int max_depth = 2;                                   // hierarchy levels; binary splits below the first
  std::pair<double, double> branch_length_range{12.0, 18.0};
  double tube_radius = 1.5;
  double soma_radius = 4.0;
  Dims dims{80, 80, 80};
  Spacing spacing{};
  double noise_sigma = 0.0;
  double motion_amplitude = 0.0;                       // max tip displacement per frame, voxels

  /// Throws InvalidArgument on non-positive geometry or a range with min > max.
  void validate() const;
};

struct Phantom {
  Volume3 image;
  SegMask mask;
  SkeletonGraph truth;
};

/// Straight-segment tree around a spherical soma at the volume centre.
/// Throws InvalidArgument when no admissible tree fits after bounded retries.
Phantom generate(const PhantomSpec& spec);

/// Frame 1 is generate(spec). Later frames move every tip by at most
/// motion_amplitude from its previous position and every bifurcation by at most
/// one voxel from its frame-1 position; topology is unchanged.
std::vector<Phantom> generate_series(const PhantomSpec& spec, int n_frames);

/// Mask and image for a given centerline tree (tubes around every path voxel).
Phantom render(const PhantomSpec& spec, const SkeletonGraph& truth, std::uint64_t noise_seed);

}  // namespace hieroglyph
