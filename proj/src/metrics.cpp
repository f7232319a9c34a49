#include "hieroglyph/metrics.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <tuple>

namespace hieroglyph {
namespace {

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

std::optional<double> mean_nearest_landmark(std::span<const Voxel> gt, std::span<const Voxel> test, const Spacing& s) {
  if (gt.empty() || test.empty()) return std::nullopt;
  return mean_nearest_distance(gt, test, s);
}

}  // namespace

double mean_nearest_distance(std::span<const Voxel> from, std::span<const Voxel> to, const Spacing& s) {
  if (from.empty()) return 0.0;
  if (to.empty()) return std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (const Voxel a : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const Voxel b : to) best = std::min(best, physical_distance(a, b, s));
    sum += best;
  }
  return sum / double(from.size());
}

std::vector<HierarchyCounts> match_branches(const SkeletonGraph& test, const SkeletonGraph& gt, double tol_um) {
  if (!(test.spacing == gt.spacing)) throw InvalidArgument("test and ground-truth spacing differ");
  const int h_max = std::max(test.max_hierarchy(), gt.max_hierarchy());
  std::vector<HierarchyCounts> out;
  for (int h = 1; h <= h_max; ++h) {
    std::vector<int> ti, gi;
    for (int i = 0; i < int(test.segments.size()); ++i)
      if (test.segments[i].hierarchy == h) ti.push_back(i);
    for (int i = 0; i < int(gt.segments.size()); ++i)
      if (gt.segments[i].hierarchy == h) gi.push_back(i);

    std::vector<std::tuple<double, int, int>> pairs;
    for (int a = 0; a < int(ti.size()); ++a)
      for (int b = 0; b < int(gi.size()); ++b) {
        const auto& tp = test.segments[ti[a]].path;
        const auto& gp = gt.segments[gi[b]].path;
        const double d = 0.5 * (mean_nearest_distance(tp, gp, gt.spacing) + mean_nearest_distance(gp, tp, gt.spacing));
        if (d <= tol_um) pairs.emplace_back(d, a, b);
      }
    std::sort(pairs.begin(), pairs.end());
    std::vector<char> t_used(ti.size(), 0), g_used(gi.size(), 0);
    int tp = 0;
    for (const auto& [d, a, b] : pairs) {
      if (t_used[a] || g_used[b]) continue;
      t_used[a] = g_used[b] = 1;
      ++tp;
    }
    out.push_back({h, tp, int(ti.size()) - tp, int(gi.size()) - tp});
  }
  return out;
}

std::vector<HierarchyAccuracy> hierarchy_accuracy(std::span<const HierarchyCounts> counts) {
  std::vector<HierarchyAccuracy> out;
  for (const auto& c : counts) {
    const int denom = c.tp + c.fp + c.fn;
    if (denom == 0) continue;
    out.push_back({c.hierarchy, c.tp, c.fp, c.fn, double(c.tp) / double(denom)});
  }
  return out;
}

WeightedAccuracy weighted_accuracy(std::span<const double> a, int h_max_gt) {
  if (h_max_gt < 1) throw InvalidArgument("ground-truth hierarchy count must be >= 1");
  if (a.empty()) throw InvalidArgument("accuracy list is empty");
  double sum = 0.0, wsum = 0.0, wa = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const int n = int(i) + 1;
    const double w = factorial(std::max(h_max_gt - n + 1, 1));
    sum += a[i];
    wsum += w;
    wa += w * a[i];
  }
  return {wa / wsum, factorial(h_max_gt) * sum};
}

StructureCounts count_structures(const SkeletonGraph& s) {
  return {int(bifurcation_points(s).size()), int(terminal_points(s).size())};
}

LandmarkDistances landmark_distance(const SkeletonGraph& test, const SkeletonGraph& gt) {
  const auto tb = bifurcation_points(test), gb = bifurcation_points(gt);
  const auto tt = terminal_points(test), gtt = terminal_points(gt);
  return {mean_nearest_landmark(gb, tb, gt.spacing), mean_nearest_landmark(gtt, tt, gt.spacing)};
}

std::optional<double> mean_landmark_distance_voxels(const SkeletonGraph& test, const SkeletonGraph& gt) {
  double sum = 0.0;
  std::size_t n = 0;
  auto add = [&](const std::vector<Voxel>& g, const std::vector<Voxel>& t) {
    if (g.empty() || t.empty()) return;
    for (const Voxel a : g) {
      double best = std::numeric_limits<double>::infinity();
      for (const Voxel b : t) best = std::min(best, voxel_distance(a, b));
      sum += best;
      ++n;
    }
  };
  add(bifurcation_points(gt), bifurcation_points(test));
  add(terminal_points(gt), terminal_points(test));
  if (n == 0) return std::nullopt;
  return sum / double(n);
}

EvalReport evaluate(const SkeletonGraph& test, const SkeletonGraph& gt, double tol_um) {
  EvalReport r;
  const auto counts = match_branches(test, gt, tol_um);
  r.per_hierarchy = hierarchy_accuracy(counts);

  const int h_gt = gt.max_hierarchy();
  if (h_gt == 0) {
    r.weighted_normalized = test.segments.empty() ? 1.0 : 0.0;
    r.weighted_paper_raw = 0.0;
  } else {
    std::vector<double> a(r.per_hierarchy.empty() ? 0 : std::size_t(r.per_hierarchy.back().hierarchy), 0.0);
    for (const auto& h : r.per_hierarchy) a[std::size_t(h.hierarchy - 1)] = h.accuracy;
    const auto w = weighted_accuracy(a, h_gt);
    r.weighted_normalized = w.normalized;
    r.weighted_paper_raw = w.paper_raw;
  }

  const auto ct = count_structures(test), cg = count_structures(gt);
  r.bifurcations_test = ct.bifurcations;
  r.bifurcations_gt = cg.bifurcations;
  r.terminals_test = ct.terminals;
  r.terminals_gt = cg.terminals;
  const auto ld = landmark_distance(test, gt);
  r.mean_bif_dist_um = ld.mean_bif_dist_um;
  r.mean_term_dist_um = ld.mean_term_dist_um;
  return r;
}

}  // namespace hieroglyph
