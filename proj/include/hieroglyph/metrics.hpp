#pragma once

#include <optional>
#include <span>
#include <vector>

#include "hieroglyph/skeleton.hpp"

namespace hieroglyph {

struct HierarchyCounts {
  int hierarchy = 0;
  int tp = 0;
  int fp = 0;
  int fn = 0;

  friend bool operator==(const HierarchyCounts&, const HierarchyCounts&) = default;
};

struct HierarchyAccuracy {
  int hierarchy = 0;
  int tp = 0;
  int fp = 0;
  int fn = 0;
  double accuracy = 0.0;

  friend bool operator==(const HierarchyAccuracy&, const HierarchyAccuracy&) = default;
};

struct EvalReport {
  std::vector<HierarchyAccuracy> per_hierarchy;
  double weighted_normalized = 0.0;
  double weighted_paper_raw = 0.0;
  int bifurcations_test = 0;
  int bifurcations_gt = 0;
  int terminals_test = 0;
  int terminals_gt = 0;
  std::optional<double> mean_bif_dist_um;
  std::optional<double> mean_term_dist_um;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Mean over the points of `from` of the physical distance to the nearest point of `to`.
double mean_nearest_distance(std::span<const Voxel> from, std::span<const Voxel> to, const Spacing& s);

/// Per-hierarchy TP/FP/FN from greedy one-to-one branch matching. Branch distance
/// is the symmetric mean nearest-point distance in micrometres; pairs within
/// tol_um are matched in ascending distance order. Entries cover hierarchies
/// 1..max(test, gt). Throws InvalidArgument on a spacing mismatch.
std::vector<HierarchyCounts> match_branches(const SkeletonGraph& test, const SkeletonGraph& gt, double tol_um = 2.0);

/// A_n = TP / (TP + FP + FN); hierarchies without any branch are dropped.
std::vector<HierarchyAccuracy> hierarchy_accuracy(std::span<const HierarchyCounts> counts);

struct WeightedAccuracy {
  double normalized;
  double paper_raw;
};

/// a[n-1] is the accuracy of hierarchy n. paper_raw = h_max_gt! * sum(a);
/// normalized = sum(w_n a_n) / sum(w_n) with w_n = (h_max_gt - n + 1)!, clamped
/// to 1 for hierarchies deeper than the ground truth.
WeightedAccuracy weighted_accuracy(std::span<const double> a, int h_max_gt);

struct StructureCounts {
  int bifurcations = 0;
  int terminals = 0;
};
StructureCounts count_structures(const SkeletonGraph& s);

struct LandmarkDistances {
  std::optional<double> mean_bif_dist_um;
  std::optional<double> mean_term_dist_um;
};
/// For each ground-truth landmark, distance to the nearest test landmark of the same class.
LandmarkDistances landmark_distance(const SkeletonGraph& test, const SkeletonGraph& gt);

/// Mean over all ground-truth bifurcations and terminals of the distance (in
/// voxels) to the nearest test landmark of the same class. Empty classes on
/// either side are skipped; nullopt when nothing could be compared.
std::optional<double> mean_landmark_distance_voxels(const SkeletonGraph& test, const SkeletonGraph& gt);

/// Full report of test against gt.
EvalReport evaluate(const SkeletonGraph& test, const SkeletonGraph& gt, double tol_um = 2.0);

}  // namespace hieroglyph
