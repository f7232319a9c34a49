// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "hieroglyph/metrics.hpp"
#include "hieroglyph/phantom.hpp"
#include "hieroglyph/temporal.hpp"
#include "hieroglyph/tracer.hpp"
#include "hieroglyph/vesselness.hpp"
#include "hieroglyph/volume_io.hpp"
#include "hieroglyph/voxel_graph.hpp"
#include "oracles.hpp"

using namespace hieroglyph;

namespace {

// Pinned tolerances.
constexpr double kSsspTimeS = 5.0;
constexpr double kTraceDistVoxels = 1.0;
constexpr double kTraceTimeS = 60.0;
constexpr double kEigenTol = 1e-9;
constexpr double kMorphLandmarkVoxels = 1.5;
constexpr int kMorphImprovedMin = 19;
constexpr double kMorphAmplitude = 3.0;
constexpr int kSeriesFrames = 13;
constexpr int kFixedPointFrames = 5;

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Matched to the 1.5-voxel phantom tube radius.
TimeSeriesOptions tube_options() {
  TimeSeriesOptions o;
  o.scales = {1.0};
  return o;
}

Outcome sssp_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1);
  int mismatches = 0;
  for (int t = 0; t < 100; ++t) {
    const SegMask m = oracle::random_mask(rng, {6, 6, 6}, 0.6);
    Voxel src{-1, -1, -1};
    for (int i = 0; i < 216 && src.x < 0; ++i)
      if (m.foreground[std::size_t(i)]) src = m.dims.voxel(i);
    if (src.x < 0) continue;
    const PathResult d = dijkstra(m, src);
    if (d.dist != oracle::bellman_ford(m, src)) ++mismatches;
  }
  const double s = seconds_since(t0);
  std::ostringstream os;
  os << "100 masks, " << mismatches << " mismatches, " << s << " s";
  return {mismatches == 0 && s < kSsspTimeS, os.str()};
}

Outcome trace_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  int bad = 0;
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    PhantomSpec spec;
    spec.seed = seed;
    const Phantom p = generate(spec);
    const SkeletonGraph s = trace_initial_skeleton(p.mask);
    const auto a = skeleton_voxels(s), b = skeleton_voxels(p.truth);
    const double d = std::max(mean_nearest_distance(a, b, {}), mean_nearest_distance(b, a, {}));
    worst = std::max(worst, d);
    const auto cs = count_structures(s), cg = count_structures(p.truth);
    if (d > kTraceDistVoxels || !oracle::skeleton_is_tree(s) || cs.bifurcations != cg.bifurcations ||
        cs.terminals != cg.terminals)
      ++bad;
  }
  const double s = seconds_since(t0);
  std::ostringstream os;
  os << "20 phantoms, " << bad << " failing, worst mean distance " << worst << " voxels, " << s << " s";
  return {bad == 0 && s < kTraceTimeS, os.str()};
}

Outcome eigen_oracle() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  double worst_root = 0, worst_rec = 0;
  for (int t = 0; t < 1000; ++t) {
    std::array<std::array<double, 3>, 3> a{};
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) a[i][j] = a[j][i] = u(rng);
    const HessianEigen e = eigen_sym3(a);
    auto roots = oracle::charpoly_roots(a);
    auto got = e.values;
    std::sort(roots.begin(), roots.end());
    std::sort(got.begin(), got.end());
    for (int i = 0; i < 3; ++i) worst_root = std::max(worst_root, std::abs(got[i] - roots[i]));
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double rec = 0;
        for (int k = 0; k < 3; ++k) rec += e.values[k] * e.vectors[k][i] * e.vectors[k][j];
        worst_rec = std::max(worst_rec, std::abs(rec - a[i][j]));
      }
  }
  std::ostringstream os;
  os << "max root error " << worst_root << ", max residual " << worst_rec;
  return {worst_root <= kEigenTol && worst_rec <= kEigenTol, os.str()};
}

Outcome cylinder_response() {
  const Dims d{32, 32, 24};
  Volume3 v(d, {}, 0.0);
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) v.at(x, y, z) = (x - 15) * (x - 15) + (y - 15) * (y - 15) <= 9 ? 1.0 : 0.0;
  const std::vector<double> scales{2.0, 3.0, 4.0};
  const Volume3 r = vesselness_response(v, scales);
  int bad = 0, slices = 0;
  for (int z = 4; z < d.nz - 4; ++z, ++slices)
    if (!(r.at(15, 15, z) > r.at(18, 15, z) && r.at(15, 15, z) > r.at(15, 12, z))) ++bad;
  std::ostringstream os;
  os << slices << " interior slices, " << bad << " failing";
  return {bad == 0, os.str()};
}

Outcome iv_exact() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  long bad = 0;
  for (int t = 0; t < 20; ++t) {
    Volume3 r({9, 8, 7}, {}, 0.0);
    double sum = 0;
    long n = 0;
    for (double& x : r.data) {
      x = u(rng);
      if (t % 2 == 0 && x < 0.2 && x > -0.2) x = 0.0;
      if (x > 0) sum += x, ++n;
    }
    const VesselMap m = iv_transform(r);
    if (m.x_avg != sum / n) ++bad;
    for (std::size_t i = 0; i < r.data.size(); ++i)
      if (m.volume.data[i] != (r.data[i] > 0 ? r.data[i] : -m.x_avg)) ++bad;
  }
  return {bad == 0, std::to_string(bad) + " mismatching voxels"};
}

Outcome morph_pairs() {
  int improved = 0, counts_kept = 0, within = 0;
  double sum_after = 0;
  std::ostringstream per;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    PhantomSpec spec;
    spec.seed = seed;
    spec.motion_amplitude = kMorphAmplitude;
    const auto series = generate_series(spec, 2);
    const std::vector<Volume3> frames{series[0].image, series[1].image};
    const auto res = run_time_series(frames, series[0].mask, tube_options());
    const double before = mean_landmark_distance_voxels(res[0].skeleton, series[1].truth).value_or(1e300);
    const double after = mean_landmark_distance_voxels(res[1].skeleton, series[1].truth).value_or(1e300);
    const auto c0 = count_structures(res[0].skeleton), c1 = count_structures(res[1].skeleton);
    const auto cg = count_structures(series[1].truth);
    if (after < before) ++improved;
    if (after <= kMorphLandmarkVoxels) ++within;
    if (c1.bifurcations == c0.bifurcations && c1.terminals == c0.terminals && c1.bifurcations == cg.bifurcations &&
        c1.terminals == cg.terminals)
      ++counts_kept;
    sum_after += after;
    per << " " << seed << ":" << before << "->" << after;
  }
  const double mean_after = sum_after / 20.0;
  std::ostringstream os;
  os << "mean " << mean_after << " voxels, improved " << improved << "/20, within " << within << "/20, counts kept "
     << counts_kept << "/20;" << per.str();
  return {mean_after <= kMorphLandmarkVoxels && improved >= kMorphImprovedMin && counts_kept == 20, os.str()};
}

Outcome series_bifurcations() {
  PhantomSpec spec;
  spec.seed = 1;
  spec.motion_amplitude = 2.0;
  const auto series = generate_series(spec, kSeriesFrames);
  std::vector<Volume3> frames;
  for (const auto& f : series) frames.push_back(f.image);
  const auto res = run_time_series(frames, series[0].mask, tube_options());
  double mean = 0;
  for (const auto& r : res) mean += count_structures(r.skeleton).bifurcations;
  mean /= double(res.size());
  double var = 0;
  for (const auto& r : res) var += std::pow(count_structures(r.skeleton).bifurcations - mean, 2);
  var /= double(res.size());
  std::ostringstream os;
  os << res.size() << " frames, mean " << mean << " bifurcations, variance " << var;
  return {res.size() == std::size_t(kSeriesFrames) && var == 0.0, os.str()};
}

Outcome metrics_self() {
  int bad = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    PhantomSpec spec;
    spec.seed = seed;
    spec.max_depth = 1 + int(seed % 3);
    const Phantom p = generate(spec);
    for (const SkeletonGraph* s : {&p.truth}) {
      const SkeletonGraph traced = trace_initial_skeleton(p.mask);
      for (const SkeletonGraph* t : {s, &traced}) {
        const EvalReport r = evaluate(*t, *t);
        bool ok = r.weighted_normalized == 1.0;
        for (const auto& h : r.per_hierarchy) ok = ok && h.accuracy == 1.0 && h.fp == 0 && h.fn == 0;
        ok = ok && r.mean_bif_dist_um.value_or(0.0) == 0.0 && r.mean_term_dist_um.value_or(0.0) == 0.0;
        if (!ok) ++bad;
      }
    }
  }
  return {bad == 0, "40 skeletons, " + std::to_string(bad) + " imperfect self-reports"};
}

Outcome fixed_point() {
  PhantomSpec spec;
  spec.seed = 2;
  const Phantom p = generate(spec);
  const std::vector<Volume3> one{p.image};
  const std::string s1 = to_swc(run_time_series(one, p.mask, tube_options())[0].skeleton);
  const std::vector<Volume3> same(kFixedPointFrames, p.image);
  const auto res = run_time_series(same, p.mask, tube_options());
  int differing = 0;
  for (const auto& r : res)
    if (to_swc(r.skeleton) != s1) ++differing;
  return {differing == 0, std::to_string(kFixedPointFrames) + " frames, " + std::to_string(differing) + " differ from S_1"};
}

std::string pipeline_bytes() {
  PhantomSpec spec;
  spec.seed = 9;
  spec.motion_amplitude = 2.0;
  const auto series = generate_series(spec, 3);
  std::vector<Volume3> frames;
  for (const auto& f : series) frames.push_back(f.image);
  std::string out;
  const auto res = run_time_series(frames, series[0].mask, tube_options());
  for (std::size_t i = 0; i < res.size(); ++i)
    out += to_swc(res[i].skeleton) + report_to_json(evaluate(res[i].skeleton, series[i].truth));
  return out;
}

Outcome determinism() {
  const std::string a = pipeline_bytes();
  const std::string b = pipeline_bytes();
  setenv("HIEROGLYPH_THREADS", "1", 1);
  const std::string c = pipeline_bytes();
  unsetenv("HIEROGLYPH_THREADS");
  return {a == b && a == c, a == b && a == c ? "identical SWC and report bytes across reruns and thread counts"
                                             : "outputs differ between runs"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"shortest paths match Bellman-Ford on random 6^3 masks", sssp_oracle},
      {"trace fidelity on noise-free phantoms", trace_fidelity},
      {"eigen-decomposition matches characteristic polynomial", eigen_oracle},
      {"radius-3 cylinder axis beats 3-voxel offset", cylinder_response},
      {"objective transform is exact", iv_exact},
      {"morphing moves landmarks toward the next frame", morph_pairs},
      {"13-frame series keeps the bifurcation count", series_bifurcations},
      {"metrics self-consistency", metrics_self},
      {"identical frames reproduce the first skeleton", fixed_point},
      {"byte-identical outputs on rerun", determinism},
  };
  int failed = 0, k = 0;
  for (const auto& [name, check] : criteria) {
    ++k;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", k, name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", k - failed, k);
  return failed == 0 ? 0 : 1;
}
