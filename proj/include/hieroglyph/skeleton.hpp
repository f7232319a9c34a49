#pragma once

#include <optional>
#include <vector>

#include "hieroglyph/types.hpp"

namespace hieroglyph {

/// One branch of the skeleton: an ordered voxel path from its attachment node
/// (path.front(), shared with the parent or the root) to its distal node.
struct Segment {
  std::vector<Voxel> path;
  int hierarchy = 1;
  int parent = -1;  // index into SkeletonGraph::segments, -1 when attached to the root

  Voxel proximal() const { return path.front(); }
  Voxel distal() const { return path.back(); }

  friend bool operator==(const Segment&, const Segment&) = default;
};

enum class NodeKind { Soma, Bifurcation, Terminal, Continuation };

struct Node {
  Voxel position;
  NodeKind kind;
  int segment = -1;  // segment whose distal end this node is; -1 for the soma
};

/// Rooted tree of segments. Segment order is significant: it is the DFS preorder
/// used for SWC output and the identity of each branch across time frames.
struct SkeletonGraph {
  Dims dims;
  Spacing spacing;
  Voxel root;
  std::vector<Segment> segments;

  std::vector<std::vector<int>> children() const;
  /// Soma plus one node per segment distal end.
  std::vector<Node> nodes() const;
  std::size_t node_count() const { return segments.size() + 1; }
  int max_hierarchy() const;

  /// Checks tree structure, path contiguity and voxel-disjointness. Throws StructureError.
  void validate() const;

  friend bool operator==(const SkeletonGraph&, const SkeletonGraph&) = default;
};

/// Recomputes hierarchy labels from the parent links: segments on the root get 1,
/// each child gets parent + 1. Throws StructureError on a cycle or a bad parent index.
SkeletonGraph decompose_hierarchy(SkeletonGraph s);

/// Reorders segments into DFS preorder, keeping sibling order by current index.
SkeletonGraph canonicalize(const SkeletonGraph& s);

/// Bifurcation positions (distal ends with >= 2 children) in segment order.
std::vector<Voxel> bifurcation_points(const SkeletonGraph& s);
/// Terminal positions (distal ends of leaf segments) in segment order.
std::vector<Voxel> terminal_points(const SkeletonGraph& s);

/// All distinct voxels of the skeleton including the root.
std::vector<Voxel> skeleton_voxels(const SkeletonGraph& s);

/// Rasterizes a 26-connected voxel line from a to b (inclusive).
std::vector<Voxel> line_voxels(Voxel a, Voxel b);

}  // namespace hieroglyph
