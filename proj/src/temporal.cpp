#include "hieroglyph/temporal.hpp"

#include <algorithm>
#include <limits>
#include <initializer_list>
#include <map>
#include <queue>
#include <set>
#include <tuple>

#include "hieroglyph/volume_io.hpp"
#include "hieroglyph/voxel_graph.hpp"

namespace hieroglyph {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kContactExemption = 2;

// True when v lies next to an occupied voxel that is not within
// kContactExemption (Chebyshev) of one of the shared nodes in `near`.
bool touches(const Occupancy& occ, Voxel v, std::initializer_list<Voxel> near) {
  for (const Voxel o : offsets26()) {
    const Voxel u = v + o;
    if (!occ.dims.contains(u) || !occ[u]) continue;
    if (std::none_of(near.begin(), near.end(), [&](Voxel c) { return chebyshev(u, c) <= kContactExemption; }))
      return true;
  }
  return false;
}

// Cheapest-route search from one voxel inside an axis-aligned box.
class BoxSearch {
 public:
  BoxSearch(const VesselMap& iv, const Occupancy& occupied, Voxel source, Voxel lo, Voxel hi, double eps_len)
      : lo_(lo), size_{hi.x - lo.x + 1, hi.y - lo.y + 1, hi.z - lo.z + 1}, source_(source) {
    const std::size_t n = size_.count();
    dist_.assign(n, kInf);
    pred_.assign(n, kNoPred);
    blocked_.assign(n, 0);

    double i_max = -kInf;
    for (int z = lo.z; z <= hi.z; ++z)
      for (int y = lo.y; y <= hi.y; ++y)
        for (int x = lo.x; x <= hi.x; ++x) {
          const Voxel v{x, y, z};
          i_max = std::max(i_max, iv[v]);
          if (v != source && (occupied[v] || touches(occupied, v, {source}))) blocked_[local(v)] = 1;
        }

    const Spacing& sp = iv.volume.spacing;
    const double unit = sp.min();
    struct Entry {
      double d;
      Voxel v;
      bool operator>(const Entry& o) const { return std::tie(d, v) > std::tie(o.d, o.v); }
    };
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    std::vector<std::uint8_t> done(n, 0);
    dist_[local(source)] = 0.0;
    heap.push({0.0, source});
    while (!heap.empty()) {
      const Entry e = heap.top();
      heap.pop();
      const std::size_t ei = local(e.v);
      if (done[ei] || e.d != dist_[ei]) continue;
      done[ei] = 1;
      for (const Voxel o : offsets26()) {
        const Voxel u = e.v + o;
        if (!inside(u)) continue;
        const std::size_t ui = local(u);
        if (blocked_[ui] || done[ui]) continue;
        const double step = step_weight(o, sp) / unit;
        const double nd = e.d + step * (eps_len + (i_max - iv[u]));
        if (nd < dist_[ui]) {
          dist_[ui] = nd;
          pred_[ui] = ei;
          heap.push({nd, u});
        }
      }
    }
  }

  bool inside(Voxel v) const {
    const Voxel r = v - lo_;
    return size_.contains(r);
  }
  bool reached(Voxel v) const { return inside(v) && dist_[local(v)] != kInf; }

  std::vector<Voxel> path_to(Voxel target) const {
    std::vector<Voxel> out;
    for (std::size_t cur = local(target); cur != kNoPred; cur = pred_[cur]) out.push_back(size_.voxel(cur) + lo_);
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  std::size_t local(Voxel v) const { return size_.index(v - lo_); }

  Voxel lo_;
  Dims size_;
  Voxel source_;
  std::vector<double> dist_;
  std::vector<std::size_t> pred_;
  std::vector<std::uint8_t> blocked_;
};

bool path_is_valid(const std::vector<Voxel>& path, Voxel proximal, const Occupancy& occ,
                   const std::optional<EndpointBound>& bound) {
  if (path.size() < 2 || path.front() != proximal) return false;
  std::set<Voxel> seen{path.front()};
  for (std::size_t k = 1; k < path.size(); ++k) {
    if (!occ.dims.contains(path[k]) || occ[path[k]] || touches(occ, path[k], {proximal})) return false;
    if (!adjacent26(path[k - 1], path[k])) return false;
    if (!seen.insert(path[k]).second) return false;
  }
  if (bound && !bound->admits(path.back())) return false;
  return true;
}

// Voxels taken by segments other than `self` and its children: every path voxel
// except each segment's attachment node, plus the root; the node `self` hangs
// from is free.
Occupancy occupancy_for(const SkeletonGraph& s, int self, Voxel fixed) {
  Occupancy occ(s.dims, s.spacing, 0);
  occ[s.root] = 1;
  for (int j = 0; j < int(s.segments.size()); ++j) {
    if (j == self || s.segments[std::size_t(j)].parent == self) continue;
    const auto& p = s.segments[std::size_t(j)].path;
    for (std::size_t k = 1; k < p.size(); ++k)
      if (occ.dims.contains(p[k])) occ[p[k]] = 1;
  }
  occ[fixed] = 0;
  return occ;
}

}  // namespace

void MorphConfig::validate() const {
  if (!(max_bifurcation_shift > 0) || !(max_bifurcation_drift > 0) || max_endpoint_shift_per_iter < 1 || max_iters < 1 || !(improvement_epsilon > 0) ||
      !(length_penalty > 0) || search_margin < 1)
    throw InvalidArgument("morph configuration values must all be positive");
}

double segment_score(std::span<const Voxel> path, const VesselMap& iv) {
  double total = 0.0;
  for (const Voxel v : path) {
    if (!iv.volume.dims.contains(v)) throw InvalidArgument("segment voxel outside the objective map");
    total += iv[v];
  }
  return total;
}


std::vector<Voxel> reattach(const std::vector<Voxel>& path, Voxel attach) {
  if (path.empty() || path.front() == attach) return path;
  const auto hit = std::find(path.rbegin(), path.rend(), attach);
  if (hit != path.rend()) return {std::prev(hit.base()), path.end()};
  std::vector<Voxel> out = line_voxels(attach, path.size() > 1 ? path[1] : path[0]);
  if (path.size() > 1) out.insert(out.end(), path.begin() + 2, path.end());
  return out;
}

SegmentMorph morph_segment(const Segment& seg, const VesselMap& iv, Voxel fixed_proximal, const Occupancy& occupied,
                           const MorphConfig& cfg, std::optional<EndpointBound> bound,
                           std::span<const Segment> followers) {
  cfg.validate();
  const Dims& d = iv.volume.dims;
  if (!(occupied.dims == d)) throw InvalidArgument("occupancy and objective map dims differ");
  if (!d.contains(fixed_proximal)) throw InvalidArgument("proximal voxel outside the objective map");
  for (const Voxel v : seg.path)
    if (!d.contains(v)) throw InvalidArgument("segment voxel outside the objective map");
  for (const auto& f : followers)
    for (const Voxel v : f.path)
      if (!d.contains(v)) throw InvalidArgument("follower voxel outside the objective map");

  SegmentMorph out;
  out.segment = seg;
  out.followers.assign(followers.begin(), followers.end());
  if (seg.path.empty()) {
    out.flagged = true;
    out.flag_reason = "empty path";
    return out;
  }

  // Search box around the segment.
  const int margin = cfg.search_margin + int(std::ceil(bound ? bound->max_shift : 0.0));
  Voxel lo = fixed_proximal, hi = fixed_proximal;
  for (const Voxel v : seg.path) {
    lo = {std::min(lo.x, v.x), std::min(lo.y, v.y), std::min(lo.z, v.z)};
    hi = {std::max(hi.x, v.x), std::max(hi.y, v.y), std::max(hi.z, v.z)};
  }
  lo = {std::max(0, lo.x - margin), std::max(0, lo.y - margin), std::max(0, lo.z - margin)};
  hi = {std::min(d.nx - 1, hi.x + margin), std::min(d.ny - 1, hi.y + margin), std::min(d.nz - 1, hi.z + margin)};
  const BoxSearch search(iv, occupied, fixed_proximal, lo, hi, cfg.length_penalty * iv.x_avg);

  auto in_bound = [&](Voxel q) { return !bound || bound->admits(q); };
  auto reachable = [&](Voxel q) { return q != fixed_proximal && search.reached(q) && in_bound(q); };

  struct Candidate {
    bool valid = false;
    double score = 0.0;
    std::vector<Voxel> path;
    std::vector<std::vector<Voxel>> followers;
  };
  // Scores a path together with the followers re-attached to its distal end.
  auto assess = [&](std::vector<Voxel> path) {
    Candidate c;
    c.path = std::move(path);
    if (!path_is_valid(c.path, fixed_proximal, occupied, bound)) return c;
    const Voxel node = c.path.back();
    Occupancy taken(d, occupied.spacing, 0);
    for (std::size_t k = 1; k + 1 < c.path.size(); ++k) taken[c.path[k]] = 1;
    c.score = segment_score(c.path, iv);
    std::vector<Voxel> claimed;
    for (const auto& f : followers) {
      auto fp = reattach(f.path, node);
      if (fp.size() < 2) return c;
      for (std::size_t k = 1; k < fp.size(); ++k) {
        const Voxel v = fp[k];
        if (!d.contains(v) || occupied[v] || taken[v] || touches(occupied, v, {node, fp.back()}) ||
            touches(taken, v, {node}))
          return c;
      }
      c.score += segment_score(fp, iv);
      for (std::size_t k = 1; k < fp.size(); ++k) claimed.push_back(fp[k]);
      c.followers.push_back(std::move(fp));
      for (const Voxel v : claimed) taken[v] = 1;
    }
    c.valid = true;
    return c;
  };
  std::map<Voxel, Candidate> cache;
  auto derived = [&](Voxel q) -> const Candidate& {
    auto it = cache.find(q);
    if (it == cache.end()) it = cache.emplace(q, reachable(q) ? assess(search.path_to(q)) : Candidate{}).first;
    return it->second;
  };

  // Baseline: the current layout when it is still admissible, else a re-derived one.
  Voxel end = seg.path.back();
  Candidate cur = assess(seg.path);
  if (!cur.valid) {
    if (!derived(end).valid) {
      // Nearest admissible voxel to the old end inside the box.
      std::optional<Voxel> best;
      double best_d = kInf;
      for (int z = lo.z; z <= hi.z; ++z)
        for (int y = lo.y; y <= hi.y; ++y)
          for (int x = lo.x; x <= hi.x; ++x) {
            const Voxel q{x, y, z};
            const double dq = voxel_distance(q, end);
            if (dq >= best_d || !reachable(q) || !derived(q).valid) continue;
            best_d = dq;
            best = q;
          }
      if (!best) {
        out.flagged = true;
        out.flag_reason = "no feasible path from the proximal node";
        return out;
      }
      end = *best;
    }
    cur = derived(end);
  }
  out.accepted_scores.push_back(cur.score);

  const int step = cfg.max_endpoint_shift_per_iter;
  int iter = 0;
  for (; iter < cfg.max_iters; ++iter) {
    // Keeping the end (with a re-derived path) wins ties, then lexicographic order.
    std::optional<Voxel> best;
    double best_score = -kInf;
    if (derived(end).valid) {
      best = end;
      best_score = derived(end).score;
    }
    for (int dx = -step; dx <= step; ++dx)
      for (int dy = -step; dy <= step; ++dy)
        for (int dz = -step; dz <= step; ++dz) {
          const Voxel q = end + Voxel{dx, dy, dz};
          if (q == end || !d.contains(q)) continue;
          const Candidate& c = derived(q);
          if (c.valid && c.score > best_score) {
            best = q;
            best_score = c.score;
          }
        }
    if (!best || !(best_score > cur.score + cfg.improvement_epsilon)) break;
    end = *best;
    cur = derived(end);
    out.accepted_scores.push_back(cur.score);
  }
  out.iterations = std::min(iter + 1, cfg.max_iters);
  out.segment.path = std::move(cur.path);
  for (std::size_t k = 0; k < followers.size(); ++k) out.followers[k].path = std::move(cur.followers[k]);
  out.score = cur.score;
  return out;
}

std::vector<int> MorphResult::flagged_segments() const {
  std::vector<int> out;
  for (int i = 0; i < int(segment_log.size()); ++i)
    if (segment_log[std::size_t(i)].flagged) out.push_back(i);
  return out;
}

SkeletonGraph reroute_tree(const SkeletonGraph& s, int max_gap) {
  SkeletonGraph out = s;
  const int n = int(out.segments.size());
  // Parents first, so a child sees its parent's final geometry.
  const SkeletonGraph ranked = decompose_hierarchy(s);
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[std::size_t(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return ranked.segments[std::size_t(a)].hierarchy < ranked.segments[std::size_t(b)].hierarchy;
  });
  for (const int i : order) {
    auto& seg = out.segments[std::size_t(i)];
    const Voxel attach = seg.parent < 0 ? out.root : out.segments[std::size_t(seg.parent)].distal();
    if (seg.path.empty()) throw StructureError("segment " + std::to_string(i) + ": empty path");
    if (seg.path.front() == attach) continue;

    int gap = chebyshev(seg.path.front(), attach);
    if (seg.parent >= 0)
      for (const Voxel v : out.segments[std::size_t(seg.parent)].path) gap = std::min(gap, chebyshev(seg.path.front(), v));
    if (gap > max_gap)
      throw StructureError("segment " + std::to_string(i) + ": proximal end detached from its parent");

    auto path = reattach(seg.path, attach);
    seg.path = std::move(path);
  }
  return decompose_hierarchy(std::move(out));
}

MorphResult morph_skeleton(const SkeletonGraph& prev, const VesselMap& iv, const MorphConfig& cfg,
                           const SkeletonGraph* anchor) {
  cfg.validate();
  if (!(prev.dims == iv.volume.dims)) throw InvalidArgument("skeleton and frame dimensions differ");
  prev.validate();
  if (anchor && (anchor->segments.size() != prev.segments.size() || anchor->children() != prev.children()))
    throw InvalidArgument("anchor skeleton topology differs from the previous skeleton");

  SkeletonGraph s = prev;
  const auto kids = s.children();
  const int n = int(s.segments.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[std::size_t(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return s.segments[std::size_t(a)].hierarchy < s.segments[std::size_t(b)].hierarchy;
  });

  MorphResult result;
  result.segment_log.resize(std::size_t(n));
  const int gap = int(std::ceil(cfg.max_bifurcation_shift)) + 1;
  for (const int i : order) {
    const auto& seg = s.segments[std::size_t(i)];
    const Voxel fixed = seg.parent < 0 ? s.root : s.segments[std::size_t(seg.parent)].distal();
    std::optional<EndpointBound> bound;
    if (!kids[std::size_t(i)].empty())
      bound = EndpointBound{prev.segments[std::size_t(i)].distal(), cfg.max_bifurcation_shift,
                            anchor ? std::optional(anchor->segments[std::size_t(i)].distal()) : std::nullopt,
                            cfg.max_bifurcation_drift};
    const Occupancy occ = occupancy_for(s, i, fixed);
    std::vector<Segment> followers;
    for (const int c : kids[std::size_t(i)]) followers.push_back(s.segments[std::size_t(c)]);
    SegmentMorph m = morph_segment(seg, iv, fixed, occ, cfg, bound, followers);
    s.segments[std::size_t(i)] = m.segment;
    for (std::size_t k = 0; k < followers.size(); ++k)
      s.segments[std::size_t(kids[std::size_t(i)][k])] = m.followers[k];
    result.iterations_used += m.iterations;
    result.segment_log[std::size_t(i)] = std::move(m);
    if (!kids[std::size_t(i)].empty()) s = reroute_tree(s, gap);
  }

  result.skeleton = reroute_tree(s, gap);
  for (auto& entry : result.segment_log) entry.segment = result.skeleton.segments[&entry - result.segment_log.data()];
  for (const auto& seg : result.skeleton.segments) {
    result.per_segment_scores.push_back(segment_score(seg, iv));
    result.total_score += result.per_segment_scores.back();
  }
  return result;
}

VesselMap frame_objective(const Volume3& frame, const TimeSeriesOptions& opt) {
  const Volume3 input = opt.hist_eq ? hist_equalize(frame, opt.hist_bins) : frame;
  const Volume3 response = vesselness_response(input, opt.scales, opt.vessel);
  if (opt.penalty == PenaltySource::ImageMean) return iv_transform(response, mean_intensity(input));
  return iv_transform(response);
}

std::pair<SkeletonGraph, bool> refine_skeleton(SkeletonGraph s, const VesselMap& iv, const MorphConfig& cfg,
                                               int max_passes) {
  const SkeletonGraph anchor = s;
  for (int pass = 0; pass < max_passes; ++pass) {
    SkeletonGraph next = morph_skeleton(s, iv, cfg, &anchor).skeleton;
    if (next == s) return {std::move(s), true};
    s = std::move(next);
  }
  return {std::move(s), false};
}

std::vector<FrameResult> run_time_series(std::span<const Volume3> frames, const SegMask& seg1,
                                         const TimeSeriesOptions& opt) {
  if (frames.empty()) throw InvalidArgument("time series needs at least one frame");
  std::vector<FrameResult> out;
  SkeletonGraph anchor;
  auto frame_error = [](std::size_t t, const std::exception& e) {
    return Error("frame " + std::to_string(t + 1) + ": " + e.what());
  };
  try {
    if (!(frames[0].dims == seg1.dims)) throw InvalidArgument("segmentation and first frame dimensions differ");
    FrameResult first;
    first.skeleton = trace_initial_skeleton(seg1, opt.trace);
    anchor = first.skeleton;
    if (opt.refine_initial && !first.skeleton.segments.empty()) {
      auto [refined, converged] =
          refine_skeleton(first.skeleton, frame_objective(frames[0], opt), opt.morph, opt.max_refine_passes);
      first.skeleton = std::move(refined);
      first.refine_converged = converged;
    }
    out.push_back(std::move(first));
  } catch (const std::exception& e) {
    throw frame_error(0, e);
  }
  for (std::size_t t = 1; t < frames.size(); ++t) {
    try {
      FrameResult fr;
      const SkeletonGraph& prev = out.back().skeleton;
      if (prev.segments.empty()) {
        fr.skeleton = prev;
      } else {
        fr.morph = morph_skeleton(prev, frame_objective(frames[t], opt), opt.morph, &anchor);
        fr.skeleton = fr.morph->skeleton;
      }
      out.push_back(std::move(fr));
    } catch (const std::exception& e) {
      throw frame_error(t, e);
    }
  }
  return out;
}

}  // namespace hieroglyph
