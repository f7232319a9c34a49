#include "hieroglyph/phantom.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <random>

namespace hieroglyph {
namespace {

constexpr int kTreeAttempts = 500;
constexpr int kMotionAttempts = 200;

using Vec3 = std::array<double, 3>;

Vec3 operator*(double s, const Vec3& v) { return {s * v[0], s * v[1], s * v[2]}; }
Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 normalized(const Vec3& v) { return (1.0 / std::sqrt(dot(v, v))) * v; }
Voxel round_voxel(const Vec3& p) { return {int(std::lround(p[0])), int(std::lround(p[1])), int(std::lround(p[2]))}; }
Vec3 to_vec(Voxel v) { return {double(v.x), double(v.y), double(v.z)}; }

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  Vec3 direction() {
    for (;;) {
      const Vec3 v{normal(), normal(), normal()};
      if (dot(v, v) > 1e-12) return normalized(v);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Node-level description: segment i runs from node start[i] to node i + 1; node 0 is the root.
struct Tree {
  std::vector<Voxel> nodes;
  std::vector<int> parent;  // parent segment, -1 on the root
};

std::vector<Voxel> tube_offsets(double r) {
  std::vector<Voxel> out;
  const int k = int(std::floor(r));
  for (int dz = -k; dz <= k; ++dz)
    for (int dy = -k; dy <= k; ++dy)
      for (int dx = -k; dx <= k; ++dx)
        if (dx * dx + dy * dy + dz * dz <= r * r) out.push_back({dx, dy, dz});
  return out;
}

SkeletonGraph build_truth(const PhantomSpec& spec, const Tree& t) {
  SkeletonGraph s;
  s.dims = spec.dims;
  s.spacing = spec.spacing;
  s.root = t.nodes[0];
  for (std::size_t i = 0; i < t.parent.size(); ++i) {
    const int p = t.parent[i];
    const Voxel from = p < 0 ? t.nodes[0] : t.nodes[std::size_t(p) + 1];
    Segment seg;
    seg.path = line_voxels(from, t.nodes[i + 1]);
    seg.parent = p;
    s.segments.push_back(std::move(seg));
  }
  return decompose_hierarchy(std::move(s));
}

double min_distance(const std::vector<Voxel>& a, const std::vector<Voxel>& b, Voxel shared, double skip) {
  double best = std::numeric_limits<double>::infinity();
  for (const Voxel u : a) {
    if (voxel_distance(u, shared) < skip) continue;
    for (const Voxel v : b) {
      if (voxel_distance(v, shared) < skip) continue;
      best = std::min(best, voxel_distance(u, v));
    }
  }
  return best;
}

bool admissible(const PhantomSpec& spec, const SkeletonGraph& s) {
  try {
    s.validate();
  } catch (const StructureError&) {
    return false;
  }
  const int margin = int(std::ceil(spec.tube_radius)) + 1;
  const double r = spec.tube_radius;
  for (const auto& seg : s.segments)
    for (const Voxel v : seg.path) {
      if (v.x < margin || v.y < margin || v.z < margin || v.x >= spec.dims.nx - margin ||
          v.y >= spec.dims.ny - margin || v.z >= spec.dims.nz - margin)
        return false;
      if (seg.parent >= 0 && voxel_distance(v, s.root) < spec.soma_radius + r + 2.0) return false;
    }

  const double clearance = 2.0 * r + 3.0;
  const double near_node = 4.0 * r + 4.0;
  const double near_root = std::max(near_node, spec.soma_radius + 2.0 * r + 2.0);
  const int n = int(s.segments.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const auto& a = s.segments[std::size_t(i)];
      const auto& b = s.segments[std::size_t(j)];
      Voxel shared{-1, -1, -1};
      double skip = 0.0;
      if (a.parent == b.parent) {
        shared = a.proximal();
        skip = a.parent < 0 ? near_root : near_node;
      } else if (b.parent == i) {
        shared = a.distal();
        skip = near_node;
      }
      if (min_distance(a.path, b.path, shared, skip) < clearance) return false;
    }
  return true;
}

Tree random_tree(const PhantomSpec& spec, Rng& rng) {
  Tree t;
  const Voxel centre{spec.dims.nx / 2, spec.dims.ny / 2, spec.dims.nz / 2};
  t.nodes.push_back(centre);
  const auto [lmin, lmax] = spec.branch_length_range;

  std::vector<Vec3> primary;
  while (int(primary.size()) < spec.n_primary) {
    const Vec3 d = rng.direction();
    bool ok = true;
    for (const Vec3& q : primary) ok = ok && dot(d, q) < 0.5;
    if (ok || primary.size() >= 8) primary.push_back(d);
  }

  struct Pending {
    int segment;
    Vec3 dir;
    int depth;
  };
  std::vector<Pending> stack;
  for (int i = spec.n_primary - 1; i >= 0; --i) stack.push_back({-1, primary[std::size_t(i)], 1});
  while (!stack.empty()) {
    const Pending p = stack.back();
    stack.pop_back();
    const Voxel from = p.segment < 0 ? centre : t.nodes[std::size_t(p.segment) + 1];
    const double len = rng.uniform(lmin, lmax) + (p.segment < 0 ? spec.soma_radius : 0.0);
    const int id = int(t.parent.size());
    t.parent.push_back(p.segment);
    t.nodes.push_back(round_voxel(to_vec(from) + len * p.dir));
    if (p.depth >= spec.max_depth) continue;

    // Two children splayed symmetrically about the parent direction in a random plane.
    Vec3 q = rng.direction();
    q = normalized(q - dot(q, p.dir) * p.dir);
    const double deg = std::numbers::pi / 180.0;
    const double a1 = rng.uniform(35.0, 60.0) * deg, a2 = rng.uniform(35.0, 60.0) * deg;
    stack.push_back({id, normalized(std::cos(a2) * p.dir - std::sin(a2) * q), p.depth + 1});
    stack.push_back({id, normalized(std::cos(a1) * p.dir + std::sin(a1) * q), p.depth + 1});
  }
  return t;
}

Voxel ball_offset(Rng& rng, double amp) {
  for (;;) {
    const Vec3 v{rng.uniform(-amp, amp), rng.uniform(-amp, amp), rng.uniform(-amp, amp)};
    const Voxel o = round_voxel(v);
    if (dot(v, v) <= amp * amp && voxel_distance(o, {}) <= amp) return o;
  }
}

}  // namespace

void PhantomSpec::validate() const {
  if (n_primary < 1 || max_depth < 1) throw InvalidArgument("phantom needs n_primary >= 1 and max_depth >= 1");
  if (!(branch_length_range.first > 0) || !(branch_length_range.second >= branch_length_range.first))
    throw InvalidArgument("phantom branch_length_range must satisfy 0 < min <= max");
  if (!(tube_radius > 0) || !(soma_radius > 0)) throw InvalidArgument("phantom radii must be positive");
  if (!dims.valid()) throw InvalidArgument("phantom dims must be positive");
  if (!spacing.valid()) throw InvalidArgument("phantom spacing must be finite and > 0");
  if (!(noise_sigma >= 0) || !(motion_amplitude >= 0))
    throw InvalidArgument("phantom noise_sigma and motion_amplitude must be >= 0");
}

Phantom render(const PhantomSpec& spec, const SkeletonGraph& truth, std::uint64_t noise_seed) {
  Phantom out;
  out.truth = truth;
  out.mask = SegMask(spec.dims, spec.spacing);
  const Dims& d = spec.dims;

  const double rs = spec.soma_radius;
  for (const Voxel o : tube_offsets(rs)) {
    const Voxel v = truth.root + o;
    if (d.contains(v)) out.mask.set_soma(v);
  }
  if (d.contains(truth.root)) out.mask.set_soma(truth.root);
  const auto tube = tube_offsets(spec.tube_radius);
  for (const auto& seg : truth.segments)
    for (const Voxel c : seg.path)
      for (const Voxel o : tube) {
        const Voxel v = c + o;
        if (d.contains(v)) out.mask.set_foreground(v);
      }

  out.image = Volume3(d, spec.spacing, 0.0);
  Rng rng(noise_seed);
  for (std::size_t i = 0; i < out.image.size(); ++i) {
    double x = out.mask.foreground[i] ? 1.0 : 0.0;
    if (spec.noise_sigma > 0) x = std::clamp(x + spec.noise_sigma * rng.normal(), 0.0, 1.0);
    out.image.data[i] = x;
  }
  return out;
}

Phantom generate(const PhantomSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  for (int attempt = 0; attempt < kTreeAttempts; ++attempt) {
    const Tree t = random_tree(spec, rng);
    SkeletonGraph truth = build_truth(spec, t);
    if (admissible(spec, truth)) return render(spec, canonicalize(truth), spec.seed ^ 0x9E3779B97F4A7C15ull);
  }
  throw InvalidArgument("phantom tree does not fit in dims after " + std::to_string(kTreeAttempts) + " attempts");
}

std::vector<Phantom> generate_series(const PhantomSpec& spec, int n_frames) {
  if (n_frames < 1) throw InvalidArgument("n_frames must be >= 1");
  std::vector<Phantom> out;
  out.push_back(generate(spec));
  const SkeletonGraph base = out.front().truth;
  const auto kids = base.children();
  Rng rng(spec.seed * 0xD1B54A32D192ED03ull + 1);

  // Node positions of the previous frame; node i + 1 is the distal end of segment i.
  Tree prev;
  prev.nodes.push_back(base.root);
  for (const auto& seg : base.segments) {
    prev.nodes.push_back(seg.distal());
    prev.parent.push_back(seg.parent);
  }
  const double jitter = std::min(1.0, spec.motion_amplitude);
  for (int f = 1; f < n_frames; ++f) {
    if (spec.motion_amplitude == 0) {
      out.push_back(Phantom(out.front()));
      continue;
    }
    bool placed = false;
    for (int attempt = 0; attempt < kMotionAttempts && !placed; ++attempt) {
      Tree next = prev;
      for (std::size_t i = 0; i < base.segments.size(); ++i) {
        if (kids[i].empty())
          next.nodes[i + 1] = prev.nodes[i + 1] + ball_offset(rng, spec.motion_amplitude);
        else
          next.nodes[i + 1] = base.segments[i].distal() + ball_offset(rng, jitter);
      }
      SkeletonGraph truth = build_truth(spec, next);
      if (!admissible(spec, truth)) continue;
      out.push_back(render(spec, truth, spec.seed ^ (0x9E3779B97F4A7C15ull * std::uint64_t(f + 1))));
      prev = std::move(next);
      placed = true;
    }
    if (!placed)
      throw InvalidArgument("phantom frame " + std::to_string(f + 1) + " does not fit in dims after " +
                            std::to_string(kMotionAttempts) + " attempts");
  }
  return out;
}

}  // namespace hieroglyph
