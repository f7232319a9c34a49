#include "hieroglyph/voxel_graph.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <tuple>

namespace hieroglyph {
namespace {

constexpr std::array<Voxel, 26> make_offsets() {
  std::array<Voxel, 26> out{};
  std::size_t k = 0;
  for (int dx = -1; dx <= 1; ++dx)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dz = -1; dz <= 1; ++dz)
        if (dx != 0 || dy != 0 || dz != 0) out[k++] = {dx, dy, dz};
  return out;
}

constexpr std::array<Voxel, 26> kOffsets = make_offsets();

void require_foreground(const SegMask& m, Voxel v, const char* what) {
  if (!m.is_foreground(v))
    throw InvalidArgument(std::string(what) + " (" + std::to_string(v.x) + "," + std::to_string(v.y) + "," +
                          std::to_string(v.z) + ") is not a foreground voxel");
}

struct QueueEntry {
  double dist;
  Voxel v;
  bool operator>(const QueueEntry& o) const { return std::tie(dist, v) > std::tie(o.dist, o.v); }
};

}  // namespace

std::span<const Voxel> offsets26() { return kOffsets; }

double step_weight(Voxel o, const Spacing& s) {
  const double dx = o.x * s.x, dy = o.y * s.y, dz = o.z * s.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

std::vector<Neighbor> neighbors26(Voxel v, const SegMask& m) {
  require_foreground(m, v, "voxel");
  std::vector<Neighbor> out;
  for (const Voxel o : kOffsets) {
    const Voxel u = v + o;
    if (m.is_foreground(u)) out.push_back({u, step_weight(o, m.spacing)});
  }
  return out;
}

namespace {

template <class Weight>
PathResult shortest_paths(const SegMask& m, Voxel source, std::optional<std::span<const Voxel>> stop_set,
                          Weight&& step) {
  require_foreground(m, source, "source");
  const Dims& d = m.dims;
  constexpr double inf = std::numeric_limits<double>::infinity();
  PathResult r{d, source, std::vector<double>(d.count(), inf), std::vector<std::size_t>(d.count(), kNoPred)};

  std::array<double, 26> weights{};
  for (std::size_t k = 0; k < kOffsets.size(); ++k) weights[k] = step_weight(kOffsets[k], m.spacing);

  std::vector<std::uint8_t> done(d.count(), 0);
  std::vector<std::uint8_t> wanted;
  std::size_t remaining = 0;
  if (stop_set) {
    wanted.assign(d.count(), 0);
    for (const Voxel t : *stop_set)
      if (m.is_foreground(t) && !wanted[d.index(t)]) {
        wanted[d.index(t)] = 1;
        ++remaining;
      }
  }

  std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>> heap;
  r.dist[d.index(source)] = 0.0;
  heap.push({0.0, source});
  while (!heap.empty()) {
    const QueueEntry top = heap.top();
    heap.pop();
    const std::size_t vi = d.index(top.v);
    if (done[vi] || top.dist != r.dist[vi]) continue;
    done[vi] = 1;
    if (stop_set && wanted[vi] && --remaining == 0) break;
    for (std::size_t k = 0; k < kOffsets.size(); ++k) {
      const Voxel u = top.v + kOffsets[k];
      if (!m.is_foreground(u)) continue;
      const std::size_t ui = d.index(u);
      if (done[ui]) continue;
      const double nd = top.dist + step(weights[k], vi, ui);
      if (nd < r.dist[ui]) {
        r.dist[ui] = nd;
        r.pred[ui] = vi;
        heap.push({nd, u});
      }
    }
  }
  return r;
}

// Squared distance to the nearest zero of f along one line, sample i at i * h.
// f holds 0 (background) or +inf; positions -1 and n are background.
void edt_1d(std::vector<double>& f, double h, std::vector<double>& tmp) {
  const int n = int(f.size());
  tmp.assign(f.begin(), f.end());
  // Lower envelope of parabolas rooted at every finite sample plus the two borders.
  std::vector<int> site;
  std::vector<double> height, from;
  auto push_parabola = [&](int q, double fq) {
    const double pq = q * h;
    while (!site.empty()) {
      const double pv = site.back() * h;
      const double s = ((fq + pq * pq) - (height.back() + pv * pv)) / (2.0 * (pq - pv));
      if (s <= from.back()) {
        site.pop_back();
        height.pop_back();
        from.pop_back();
        continue;
      }
      site.push_back(q);
      height.push_back(fq);
      from.push_back(s);
      return;
    }
    site.push_back(q);
    height.push_back(fq);
    from.push_back(-std::numeric_limits<double>::infinity());
  };
  push_parabola(-1, 0.0);
  for (int q = 0; q < n; ++q)
    if (std::isfinite(tmp[std::size_t(q)])) push_parabola(q, tmp[std::size_t(q)]);
  push_parabola(n, 0.0);
  std::size_t k = 0;
  for (int q = 0; q < n; ++q) {
    const double x = q * h;
    while (k + 1 < site.size() && from[k + 1] < x) ++k;
    const double dx = x - site[k] * h;
    f[std::size_t(q)] = dx * dx + height[k];
  }
}

}  // namespace

PathResult dijkstra(const SegMask& m, Voxel source, std::optional<std::span<const Voxel>> stop_set) {
  return shortest_paths(m, source, stop_set, [](double w, std::size_t, std::size_t) { return w; });
}

PathResult dijkstra(const SegMask& m, Voxel source, std::span<const double> voxel_cost,
                    std::optional<std::span<const Voxel>> stop_set) {
  if (voxel_cost.size() != m.dims.count()) throw InvalidArgument("voxel cost array does not match the mask");
  return shortest_paths(m, source, stop_set, [&](double w, std::size_t a, std::size_t b) {
    return w * (0.5 * (voxel_cost[a] + voxel_cost[b]));
  });
}

Volume3 distance_transform(const SegMask& m) {
  const Dims& d = m.dims;
  Volume3 out(d, m.spacing, 0.0);
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < d.count(); ++i) out.data[i] = m.foreground[i] ? inf : 0.0;
  std::vector<double> line, tmp;
  const std::array<int, 3> n{d.nx, d.ny, d.nz};
  const std::array<double, 3> h{m.spacing.x, m.spacing.y, m.spacing.z};
  for (int axis = 0; axis < 3; ++axis) {
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    line.resize(std::size_t(n[axis]));
    for (int j = 0; j < n[a2]; ++j)
      for (int i = 0; i < n[a1]; ++i) {
        auto at = [&](int k) -> double& {
          std::array<int, 3> c{};
          c[axis] = k;
          c[a1] = i;
          c[a2] = j;
          return out[{c[0], c[1], c[2]}];
        };
        for (int k = 0; k < n[axis]; ++k) line[std::size_t(k)] = at(k);
        edt_1d(line, h[axis], tmp);
        for (int k = 0; k < n[axis]; ++k) at(k) = line[std::size_t(k)];
      }
  }
  for (double& x : out.data) x = std::sqrt(x);
  return out;
}

std::vector<Voxel> extract_path(const PathResult& p, Voxel target) {
  if (!p.reached(target)) throw InvalidArgument("target voxel is not reachable from the source");
  std::vector<Voxel> out;
  std::size_t cur = p.dims.index(target);
  while (cur != kNoPred) {
    out.push_back(p.dims.voxel(cur));
    if (out.size() > p.dims.count()) throw StructureError("predecessor chain does not terminate");
    cur = p.pred[cur];
  }
  std::reverse(out.begin(), out.end());
  return out;
}

double path_length(std::span<const Voxel> path, const Spacing& s) {
  double total = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) total += step_weight(path[i] - path[i - 1], s);
  return total;
}

SegMask connected_component(const SegMask& m, Voxel seed) {
  require_foreground(m, seed, "seed");
  SegMask out(m.dims, m.spacing);
  std::vector<Voxel> stack{seed};
  out.set_foreground(seed);
  while (!stack.empty()) {
    const Voxel v = stack.back();
    stack.pop_back();
    for (const Voxel o : kOffsets) {
      const Voxel u = v + o;
      if (m.is_foreground(u) && !out.is_foreground(u)) {
        out.set_foreground(u);
        stack.push_back(u);
      }
    }
  }
  for (std::size_t i = 0; i < out.soma.size(); ++i) out.soma[i] = (m.soma[i] && out.foreground[i]) ? 1 : 0;
  return out;
}

}  // namespace hieroglyph
