#pragma once

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "hieroglyph/types.hpp"

namespace hieroglyph {

struct Neighbor {
  Voxel voxel;
  double weight;
};

/// Offsets of the 26-neighbourhood in lexicographic (x, y, z) order.
std::span<const Voxel> offsets26();

/// Euclidean length of an index offset scaled per axis by spacing.
double step_weight(Voxel offset, const Spacing& s);

/// Foreground 26-neighbours of v with spacing-scaled Euclidean weights.
/// Throws InvalidArgument when v is not foreground.
std::vector<Neighbor> neighbors26(Voxel v, const SegMask& m);

inline constexpr std::size_t kNoPred = std::numeric_limits<std::size_t>::max();

/// Single-source shortest paths over the implicit voxel graph. Arrays are indexed
/// by the linear voxel index of the mask.
struct PathResult {
  Dims dims;
  Voxel source;
  std::vector<double> dist;       // +inf when unreached
  std::vector<std::size_t> pred;  // kNoPred at the source and unreached voxels

  bool reached(Voxel v) const {
    return dims.contains(v) && dist[dims.index(v)] != std::numeric_limits<double>::infinity();
  }
  double distance(Voxel v) const { return dist[dims.index(v)]; }
};

/// Dijkstra from source over foreground voxels. Equal priorities pop in
/// lexicographic voxel order, and a predecessor is only replaced on strict
/// improvement, so results are reproducible bit for bit. When stop_set is given
/// the search ends once every member has been finalized.
PathResult dijkstra(const SegMask& m, Voxel source, std::optional<std::span<const Voxel>> stop_set = std::nullopt);

/// Same search with a per-voxel cost factor (indexed like the mask, all > 0): a
/// step u -> v weighs step_weight * (cost[u] + cost[v]) / 2.
PathResult dijkstra(const SegMask& m, Voxel source, std::span<const double> voxel_cost,
                    std::optional<std::span<const Voxel>> stop_set = std::nullopt);

/// Euclidean distance (spacing-scaled) from every foreground voxel to the nearest
/// background voxel; voxels outside the volume count as background. Background is 0.
Volume3 distance_transform(const SegMask& m);

/// Source-to-target voxel path. Throws InvalidArgument when target is unreached.
std::vector<Voxel> extract_path(const PathResult& p, Voxel target);

/// Sum of step weights along a path.
double path_length(std::span<const Voxel> path, const Spacing& s);

/// Restricts the mask to the 26-connected component containing seed.
SegMask connected_component(const SegMask& m, Voxel seed);

}  // namespace hieroglyph
