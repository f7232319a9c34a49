#pragma once

#include <optional>
#include <vector>

#include "hieroglyph/skeleton.hpp"
#include "hieroglyph/voxel_graph.hpp"

namespace hieroglyph {

/// Rounded centre of mass of the soma, snapped to the nearest foreground voxel
/// (lexicographic tie-break) when the rounded voxel is background.
Voxel soma_centroid(const SegMask& m);

struct TerminalOptions {
  double ball_radius = 3.0;  // voxels; local-maximum neighbourhood
  /// Minimum geodesic distance from the root. Unset means "beyond every soma voxel".
  std::optional<double> min_distance;
  /// Candidates whose path joins an already accepted branch (within ball_radius)
  /// less than this far from the tip are suppressed. Unset means 2 * ball_radius.
  std::optional<double> min_branch_length;
};

struct TerminalResult {
  std::vector<Voxel> terminals;  // decreasing geodesic distance
  std::size_t unreachable = 0;   // foreground voxels not connected to the root
};

/// Geodesic-distance local maxima away from the soma.
TerminalResult detect_terminals(const SegMask& m, Voxel root, const TerminalOptions& opt = {});
TerminalResult detect_terminals(const SegMask& m, const PathResult& from_root, const TerminalOptions& opt = {});

struct TraceOptions {
  TerminalOptions terminals;
  /// Path cost factor 1 + centring / r^2, r = distance to background in voxels.
  /// Keeps traced paths near the medial axis; 0 gives plain geodesics.
  double centring = 4.0;
};

/// Initial loop-free skeleton. Terminals come from geodesic distance; each tip is
/// joined to the tree along a centred shortest path that stops where it first
/// touches (26-adjacency) an already traced branch. Branches reaching the soma
/// are routed to the root through untraced soma voxels.
SkeletonGraph trace_initial_skeleton(const SegMask& m, const TraceOptions& opt = {});

}  // namespace hieroglyph
