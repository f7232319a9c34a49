#include "hieroglyph/skeleton.hpp"

#include <algorithm>
#include <set>
#include <string>
#include <unordered_map>

namespace hieroglyph {

std::size_t SegMask::foreground_count() const {
  return std::size_t(std::count_if(foreground.begin(), foreground.end(), [](auto b) { return b != 0; }));
}

std::size_t SegMask::soma_count() const {
  return std::size_t(std::count_if(soma.begin(), soma.end(), [](auto b) { return b != 0; }));
}

void SegMask::validate() const {
  if (foreground.size() != dims.count() || soma.size() != dims.count())
    throw StructureError("mask storage does not match dims");
  for (std::size_t i = 0; i < soma.size(); ++i)
    if (soma[i] && !foreground[i]) throw StructureError("soma voxel outside foreground");
}

SegMask mask_from_labels(const Volume3& labels) {
  SegMask m(labels.dims, labels.spacing);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double v = labels.data[i];
    if (v >= 1.5) {
      m.foreground[i] = 1;
      m.soma[i] = 1;
    } else if (v >= 0.5) {
      m.foreground[i] = 1;
    }
  }
  return m;
}

Volume3 labels_from_mask(const SegMask& m) {
  Volume3 out(m.dims, m.spacing, 0.0);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data[i] = m.soma[i] ? 2.0 : (m.foreground[i] ? 1.0 : 0.0);
  return out;
}

std::vector<std::vector<int>> SkeletonGraph::children() const {
  std::vector<std::vector<int>> out(segments.size());
  for (int i = 0; i < int(segments.size()); ++i) {
    const int p = segments[i].parent;
    if (p >= 0 && p < int(segments.size())) out[p].push_back(i);
  }
  return out;
}

std::vector<Node> SkeletonGraph::nodes() const {
  std::vector<Node> out;
  out.push_back({root, NodeKind::Soma, -1});
  const auto kids = children();
  for (int i = 0; i < int(segments.size()); ++i) {
    const auto n = kids[i].size();
    const NodeKind k = n == 0 ? NodeKind::Terminal : (n >= 2 ? NodeKind::Bifurcation : NodeKind::Continuation);
    out.push_back({segments[i].distal(), k, i});
  }
  return out;
}

int SkeletonGraph::max_hierarchy() const {
  int h = 0;
  for (const auto& s : segments) h = std::max(h, s.hierarchy);
  return h;
}

void SkeletonGraph::validate() const {
  const int n = int(segments.size());
  std::set<Voxel> seen{root};
  for (int i = 0; i < n; ++i) {
    const auto& s = segments[i];
    const std::string id = "segment " + std::to_string(i);
    if (s.path.size() < 2) throw StructureError(id + ": path shorter than 2 voxels");
    if (s.parent < -1 || s.parent >= n || s.parent == i) throw StructureError(id + ": bad parent index");
    const Voxel attach = s.parent < 0 ? root : segments[s.parent].distal();
    if (s.proximal() != attach) throw StructureError(id + ": proximal end is not at its attachment node");
    for (std::size_t k = 1; k < s.path.size(); ++k) {
      if (!adjacent26(s.path[k - 1], s.path[k])) throw StructureError(id + ": path is not 26-connected");
      if (dims.valid() && !dims.contains(s.path[k])) throw StructureError(id + ": voxel outside volume");
      if (!seen.insert(s.path[k]).second) throw StructureError(id + ": voxel shared with another segment");
    }
  }
  // Every parent chain must reach the root.
  for (int i = 0; i < n; ++i) {
    int cur = i, steps = 0;
    while (cur >= 0) {
      cur = segments[cur].parent;
      if (++steps > n) throw StructureError("cycle in segment parent links");
    }
  }
}

SkeletonGraph decompose_hierarchy(SkeletonGraph s) {
  const int n = int(s.segments.size());
  std::vector<int> depth(n, 0);
  for (int i = 0; i < n; ++i) {
    int cur = i, d = 0;
    while (cur >= 0) {
      const int p = s.segments[cur].parent;
      if (p < -1 || p >= n) throw StructureError("segment " + std::to_string(cur) + ": bad parent index");
      cur = p;
      if (++d > n) throw StructureError("cycle in segment parent links");
    }
    depth[i] = d;
  }
  for (int i = 0; i < n; ++i) s.segments[i].hierarchy = depth[i];
  return s;
}

SkeletonGraph canonicalize(const SkeletonGraph& s) {
  const auto kids = s.children();
  std::vector<int> order;
  std::vector<int> stack;
  for (int i = int(s.segments.size()) - 1; i >= 0; --i)
    if (s.segments[i].parent < 0) stack.push_back(i);
  while (!stack.empty()) {
    const int cur = stack.back();
    stack.pop_back();
    order.push_back(cur);
    for (auto it = kids[cur].rbegin(); it != kids[cur].rend(); ++it) stack.push_back(*it);
  }
  if (order.size() != s.segments.size()) throw StructureError("segments not connected to the root");
  std::vector<int> new_index(s.segments.size());
  for (int i = 0; i < int(order.size()); ++i) new_index[order[i]] = i;
  SkeletonGraph out = s;
  for (int i = 0; i < int(order.size()); ++i) {
    out.segments[i] = s.segments[order[i]];
    const int p = out.segments[i].parent;
    out.segments[i].parent = p < 0 ? -1 : new_index[p];
  }
  return out;
}

std::vector<Voxel> bifurcation_points(const SkeletonGraph& s) {
  std::vector<Voxel> out;
  const auto kids = s.children();
  for (std::size_t i = 0; i < s.segments.size(); ++i)
    if (kids[i].size() >= 2) out.push_back(s.segments[i].distal());
  return out;
}

std::vector<Voxel> terminal_points(const SkeletonGraph& s) {
  std::vector<Voxel> out;
  const auto kids = s.children();
  for (std::size_t i = 0; i < s.segments.size(); ++i)
    if (kids[i].empty()) out.push_back(s.segments[i].distal());
  return out;
}

std::vector<Voxel> skeleton_voxels(const SkeletonGraph& s) {
  std::set<Voxel> all{s.root};
  for (const auto& seg : s.segments) all.insert(seg.path.begin(), seg.path.end());
  return {all.begin(), all.end()};
}

std::vector<Voxel> line_voxels(Voxel a, Voxel b) {
  const Voxel d = b - a;
  const int steps = std::max({std::abs(d.x), std::abs(d.y), std::abs(d.z)});
  std::vector<Voxel> out;
  out.reserve(std::size_t(steps) + 1);
  for (int i = 0; i <= steps; ++i) {
    const double t = steps == 0 ? 0.0 : double(i) / steps;
    Voxel v{a.x + int(std::lround(t * d.x)), a.y + int(std::lround(t * d.y)), a.z + int(std::lround(t * d.z))};
    if (out.empty() || out.back() != v) out.push_back(v);
  }
  return out;
}

}  // namespace hieroglyph
