#include "hieroglyph/tracer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <unordered_map>

namespace hieroglyph {
namespace {

std::vector<Voxel> ball_offsets(double radius) {
  std::vector<Voxel> out;
  const int r = int(std::floor(radius));
  for (int dx = -r; dx <= r; ++dx)
    for (int dy = -r; dy <= r; ++dy)
      for (int dz = -r; dz <= r; ++dz)
        if ((dx || dy || dz) && dx * dx + dy * dy + dz * dz <= radius * radius) out.push_back({dx, dy, dz});
  return out;
}

// Position of a voxel on the traced tree: (segment, index into its path).
struct Owner {
  int segment;
  std::size_t pos;
};

}  // namespace

Voxel soma_centroid(const SegMask& m) {
  double sx = 0, sy = 0, sz = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < m.soma.size(); ++i) {
    if (!m.soma[i]) continue;
    const Voxel v = m.dims.voxel(i);
    sx += v.x;
    sy += v.y;
    sz += v.z;
    ++n;
  }
  if (n == 0) throw InvalidArgument("soma mask is empty");
  const double mx = sx / double(n), my = sy / double(n), mz = sz / double(n);
  const Voxel rounded{int(std::lround(mx)), int(std::lround(my)), int(std::lround(mz))};
  if (m.is_foreground(rounded)) return rounded;

  // Nearest foreground voxel to the mean; scan order makes ties lexicographic.
  Voxel best{};
  double best_d = std::numeric_limits<double>::infinity();
  for (int x = 0; x < m.dims.nx; ++x)
    for (int y = 0; y < m.dims.ny; ++y)
      for (int z = 0; z < m.dims.nz; ++z) {
        const Voxel v{x, y, z};
        if (!m.is_foreground(v)) continue;
        const double d = (x - mx) * (x - mx) + (y - my) * (y - my) + (z - mz) * (z - mz);
        if (d < best_d) {
          best_d = d;
          best = v;
        }
      }
  return best;
}

TerminalResult detect_terminals(const SegMask& m, Voxel root, const TerminalOptions& opt) {
  return detect_terminals(m, dijkstra(m, root), opt);
}

TerminalResult detect_terminals(const SegMask& m, const PathResult& p, const TerminalOptions& opt) {
  const Dims& d = m.dims;
  constexpr double inf = std::numeric_limits<double>::infinity();
  TerminalResult result;

  double d_min = 0.0;
  if (opt.min_distance) {
    d_min = *opt.min_distance;
  } else {
    for (std::size_t i = 0; i < d.count(); ++i)
      if (m.soma[i] && p.dist[i] != inf) d_min = std::max(d_min, p.dist[i]);
  }
  const double min_branch = opt.min_branch_length.value_or(2.0 * opt.ball_radius);
  const auto ball = ball_offsets(opt.ball_radius);

  struct Candidate {
    double dist;
    Voxel v;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < d.count(); ++i) {
    if (!m.foreground[i]) continue;
    if (p.dist[i] == inf) {
      ++result.unreachable;
      continue;
    }
    if (m.soma[i] || p.dist[i] < d_min) continue;
    const Voxel v = d.voxel(i);
    const double dv = p.dist[i];
    bool is_max = true;
    for (const Voxel o : ball) {
      const Voxel u = v + o;
      if (!d.contains(u)) continue;
      const double du = p.dist[d.index(u)];
      if (du == inf) continue;
      if (du > dv || (du == dv && u < v)) {
        is_max = false;
        break;
      }
    }
    if (is_max) candidates.push_back({dv, v});
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return a.dist != b.dist ? a.dist > b.dist : a.v < b.v;
  });

  // Suppress tips that sit on short spurs of already accepted branches.
  std::vector<std::uint8_t> covered(d.count(), 0);
  std::vector<std::uint8_t> on_tree(d.count(), 0);
  on_tree[d.index(p.source)] = 1;
  auto cover = [&](Voxel v) {
    covered[d.index(v)] = 1;
    for (const Voxel o : ball) {
      const Voxel u = v + o;
      if (d.contains(u)) covered[d.index(u)] = 1;
    }
  };
  cover(p.source);

  for (const Candidate& c : candidates) {
    const std::size_t ci = d.index(c.v);
    if (covered[ci]) continue;
    std::size_t cur = ci;
    while (cur != kNoPred && !covered[cur]) cur = p.pred[cur];
    if (cur != kNoPred && c.dist - p.dist[cur] < min_branch) continue;
    result.terminals.push_back(c.v);
    for (cur = ci; cur != kNoPred && !on_tree[cur]; cur = p.pred[cur]) {
      on_tree[cur] = 1;
      cover(d.voxel(cur));
    }
  }
  return result;
}

std::vector<double> centring_cost(const SegMask& m, double weight) {
  const Volume3 dt = distance_transform(m);
  const double unit = m.spacing.min();
  std::vector<double> cost(m.dims.count(), 1.0);
  for (std::size_t i = 0; i < cost.size(); ++i)
    if (m.foreground[i]) {
      const double r = dt.data[i] / unit;
      cost[i] = 1.0 + weight / (r * r);
    }
  return cost;
}

SkeletonGraph trace_initial_skeleton(const SegMask& m, const TraceOptions& opt) {
  m.validate();
  if (m.foreground_count() == 0) throw InvalidArgument("mask has no foreground");
  if (!(opt.centring >= 0)) throw InvalidArgument("centring weight must be >= 0");
  const Dims& d = m.dims;
  const Voxel root = soma_centroid(m);
  const TerminalResult terms = detect_terminals(m, dijkstra(m, root), opt.terminals);
  const PathResult p = dijkstra(m, root, centring_cost(m, opt.centring));

  SkeletonGraph s;
  s.dims = d;
  s.spacing = m.spacing;
  s.root = root;

  std::unordered_map<std::size_t, Owner> owner;  // excludes the root
  const std::size_t root_index = d.index(root);
  auto claim = [&](int seg, std::size_t from) {
    const auto& path = s.segments[seg].path;
    for (std::size_t k = from; k < path.size(); ++k) owner[d.index(path[k])] = {seg, k};
  };
  auto owned = [&](Voxel v) { return d.contains(v) && owner.contains(d.index(v)); };
  // Tree voxel outside the soma adjacent to v, preferring the one nearest the root.
  auto adjacent_tree_voxel = [&](Voxel v) -> std::optional<Voxel> {
    std::optional<Voxel> best;
    for (const Voxel o : offsets26()) {
      const Voxel u = v + o;
      if (!owned(u) || m.is_soma(u)) continue;
      if (!best || std::pair(p.distance(u), u) < std::pair(p.distance(*best), *best)) best = u;
    }
    return best;
  };
  // Route inside the soma from the root to `target` that avoids traced voxels.
  auto soma_route = [&](Voxel target) -> std::optional<std::vector<Voxel>> {
    auto line = line_voxels(root, target);
    if (std::none_of(line.begin() + 1, line.end(), [&](Voxel v) { return owned(v) || !m.is_foreground(v); }))
      return line;
    SegMask free(d, m.spacing);
    for (std::size_t i = 0; i < d.count(); ++i)
      if (m.soma[i] && !owner.contains(i)) free.foreground[i] = 1;
    free.foreground[root_index] = 1;
    free.foreground[d.index(target)] = 1;
    const PathResult q = dijkstra(free, root, std::span<const Voxel>(&target, 1));
    if (!q.reached(target)) return std::nullopt;
    return extract_path(q, target);
  };

  for (const Voxel t : terms.terminals) {
    if (owned(t)) continue;
    const auto path = extract_path(p, t);

    // Walk back from the tip until the path touches the tree or enters the soma.
    std::vector<Voxel> branch;
    std::optional<Voxel> attach;
    for (std::size_t j = path.size() - 1;; --j) {
      const Voxel v = path[j];
      if (j == 0 || m.is_soma(v)) {
        if (j + 1 < path.size()) {
          if (auto route = soma_route(path[j + 1])) {
            branch = std::move(*route);
            branch.insert(branch.end(), path.begin() + std::ptrdiff_t(j) + 2, path.end());
            break;
          }
        }
        if (!owned(v)) throw StructureError("no free route through the soma for the terminal branch");
        attach = v;
        branch.assign(path.begin() + std::ptrdiff_t(j), path.end());
        break;
      }
      if (owned(v)) {
        attach = v;
        branch.assign(path.begin() + std::ptrdiff_t(j), path.end());
        break;
      }
      if (const auto a = adjacent_tree_voxel(v)) {
        attach = a;
        branch.push_back(*a);
        branch.insert(branch.end(), path.begin() + std::ptrdiff_t(j), path.end());
        break;
      }
    }

    int parent = -1;
    if (attach) {
      const Owner o = owner.at(d.index(*attach));
      auto& host = s.segments[o.segment];
      const bool host_is_leaf = std::none_of(s.segments.begin(), s.segments.end(),
                                             [&](const Segment& x) { return x.parent == o.segment; });
      if (o.pos + 1 == host.path.size() && host_is_leaf) {
        // Tip continues an existing leaf: extend it.
        host.path.insert(host.path.end(), branch.begin() + 1, branch.end());
        claim(o.segment, o.pos + 1);
        continue;
      }
      if (o.pos + 1 < host.path.size()) {
        // Split the host at the divergence point; the distal part keeps the host's children.
        Segment tail;
        tail.path.assign(host.path.begin() + std::ptrdiff_t(o.pos), host.path.end());
        tail.parent = o.segment;
        host.path.resize(o.pos + 1);
        const int tail_id = int(s.segments.size());
        for (auto& x : s.segments)
          if (x.parent == o.segment) x.parent = tail_id;
        s.segments.push_back(std::move(tail));
        claim(tail_id, 1);
      }
      parent = o.segment;
    }
    Segment seg;
    seg.path = std::move(branch);
    seg.parent = parent;
    s.segments.push_back(std::move(seg));
    claim(int(s.segments.size()) - 1, 1);
  }

  // Children in the order of their first step away from the attachment node.
  SkeletonGraph ordered = s;
  {
    std::vector<int> idx(s.segments.size());
    for (int i = 0; i < int(idx.size()); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return s.segments[a].path[1] < s.segments[b].path[1]; });
    std::vector<int> inv(idx.size());
    for (int i = 0; i < int(idx.size()); ++i) inv[idx[i]] = i;
    for (int i = 0; i < int(idx.size()); ++i) {
      ordered.segments[i] = s.segments[idx[i]];
      const int par = ordered.segments[i].parent;
      ordered.segments[i].parent = par < 0 ? -1 : inv[par];
    }
  }
  return decompose_hierarchy(canonicalize(ordered));
}

}  // namespace hieroglyph
