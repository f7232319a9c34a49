#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hieroglyph/skeleton.hpp"
#include "hieroglyph/tracer.hpp"
#include "hieroglyph/vesselness.hpp"

namespace hieroglyph {

struct MorphConfig {
  double max_bifurcation_shift = 2.0;   // voxels, Euclidean, from the previous frame
  double max_bifurcation_drift = 2.0;   // voxels, Euclidean, from the anchor skeleton when one is given
  int max_endpoint_shift_per_iter = 1;  // Chebyshev radius of the move set (1 = 26 neighbours)
  int max_iters = 200;
  double improvement_epsilon = 1e-9;
  double length_penalty = 0.01;         // path cost per unit length, as a fraction of x_avg
  int search_margin = 8;                // voxels around a segment searched for new paths

  /// Throws InvalidArgument unless every field is positive.
  void validate() const;
};

/// Occupancy over the volume: non-zero voxels are taken by other segments.
using Occupancy = Grid<std::uint8_t>;

/// Sum of the objective over every voxel of the path, proximal node included.
/// Throws InvalidArgument when a voxel lies outside the map.
double segment_score(std::span<const Voxel> path, const VesselMap& iv);
inline double segment_score(const Segment& s, const VesselMap& iv) { return segment_score(s.path, iv); }

/// Limit on how far the distal end may move: within max_shift of its previous
/// position and, when an anchor is set, within max_drift of the anchor.
struct EndpointBound {
  Voxel origin;
  double max_shift;
  std::optional<Voxel> anchor;
  double max_drift = 0.0;

  bool admits(Voxel q) const {
    return voxel_distance(q, origin) <= max_shift && (!anchor || voxel_distance(q, *anchor) <= max_drift);
  }
};

struct SegmentMorph {
  Segment segment;
  std::vector<Segment> followers;  // children re-attached to the final distal end
  double score = 0.0;              // segment plus followers
  int iterations = 0;
  std::vector<double> accepted_scores;  // score after each accepted move, starting with the baseline
  bool flagged = false;
  std::string flag_reason;
};

/// Greedy hill climb of one segment's distal end over its Chebyshev neighbourhood.
/// For every candidate end the path from `fixed_proximal` is re-derived as the
/// cheapest route under per-step cost length * (eps + max(I) - I(head)), which
/// favours high-response voxels, and avoids occupied voxels. Followers (the
/// segment's children) are re-attached to the candidate end as reroute_tree
/// would, must stay clear of occupied voxels and of each other, and add their
/// scores to the candidate's. A candidate is accepted when its score beats the
/// current one by more than improvement_epsilon.
SegmentMorph morph_segment(const Segment& seg, const VesselMap& iv, Voxel fixed_proximal, const Occupancy& occupied,
                           const MorphConfig& cfg, std::optional<EndpointBound> bound = std::nullopt,
                           std::span<const Segment> followers = {});

/// `path` moved to start at `attach`: cut at the last occurrence of attach when
/// the path contains it, else bridged from attach to path[1] with a voxel line.
std::vector<Voxel> reattach(const std::vector<Voxel>& path, Voxel attach);

struct MorphResult {
  SkeletonGraph skeleton;
  double total_score = 0.0;
  std::vector<double> per_segment_scores;
  int iterations_used = 0;
  std::vector<SegmentMorph> segment_log;  // indexed like skeleton.segments

  std::vector<int> flagged_segments() const;
};

/// Morphs every segment in increasing hierarchy order (ties by index). Segments on
/// the root stay pinned to it, and bifurcations stay within max_bifurcation_shift
/// of their previous position and, given an anchor with the same topology, within
/// max_bifurcation_drift of the anchor's. Topology is unchanged.
MorphResult morph_skeleton(const SkeletonGraph& prev, const VesselMap& iv, const MorphConfig& cfg = {},
                           const SkeletonGraph* anchor = nullptr);

/// Re-attaches every child to its parent's current distal voxel (bridging the gap
/// with a voxel line) and recomputes hierarchy. Throws StructureError naming the
/// segment when a child's proximal end is more than max_gap voxels (Chebyshev)
/// away from every voxel of its parent.
SkeletonGraph reroute_tree(const SkeletonGraph& s, int max_gap = 1);

enum class PenaltySource { PositiveResponse, ImageMean };

struct TimeSeriesOptions {
  MorphConfig morph;
  std::vector<double> scales{1.0, 2.0, 3.0, 4.0};
  VesselnessParams vessel;
  PenaltySource penalty = PenaltySource::PositiveResponse;
  bool hist_eq = false;
  int hist_bins = 256;
  /// Morph the traced first skeleton against its own frame until it stops changing.
  bool refine_initial = true;
  int max_refine_passes = 25;
  TraceOptions trace;
};

/// Objective map of one frame (optional equalisation, vesselness, penalty transform).
VesselMap frame_objective(const Volume3& frame, const TimeSeriesOptions& opt);

/// Repeatedly morphs s against iv, anchored to the input, until a pass leaves it
/// unchanged. Returns the last skeleton and whether it converged.
std::pair<SkeletonGraph, bool> refine_skeleton(SkeletonGraph s, const VesselMap& iv, const MorphConfig& cfg,
                                               int max_passes);

struct FrameResult {
  SkeletonGraph skeleton;
  std::optional<MorphResult> morph;  // absent for the first frame
  bool refine_converged = true;
};

/// Skeleton of frame 1 from its segmentation, then each later frame morphed from
/// its predecessor, anchored to the traced frame-1 skeleton. Errors name the
/// failing frame (1-based).
std::vector<FrameResult> run_time_series(std::span<const Volume3> frames, const SegMask& seg1,
                                         const TimeSeriesOptions& opt = {});

}  // namespace hieroglyph
