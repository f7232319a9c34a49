#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hieroglyph/metrics.hpp"
#include "hieroglyph/phantom.hpp"

using namespace hieroglyph;

TEST_CASE("same spec gives the same phantom") {
  PhantomSpec spec;
  spec.seed = 42;
  spec.noise_sigma = 0.1;
  const Phantom a = generate(spec), b = generate(spec);
  CHECK(a.image == b.image);
  CHECK(a.mask == b.mask);
  CHECK(a.truth == b.truth);
  spec.seed = 43;
  CHECK_FALSE(generate(spec).truth == a.truth);
}

TEST_CASE("two primaries without branching") {
  PhantomSpec spec;
  spec.n_primary = 2;
  spec.max_depth = 1;
  const Phantom p = generate(spec);
  CHECK(p.truth.segments.size() == 2);
  CHECK(count_structures(p.truth).bifurcations == 0);
  CHECK(count_structures(p.truth).terminals == 2);
}

TEST_CASE("mask is exactly the tubes around the truth plus the soma") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    PhantomSpec spec;
    spec.seed = seed;
    const Phantom p = generate(spec);
    CHECK_NOTHROW(p.truth.validate());
    CHECK_NOTHROW(p.mask.validate());
    const auto gt = skeleton_voxels(p.truth);
    for (const Voxel v : gt) CHECK(p.mask.is_foreground(v));
    for (std::size_t i = 0; i < p.mask.foreground.size(); ++i) {
      if (!p.mask.foreground[i]) continue;
      const Voxel v = p.mask.dims.voxel(i);
      bool near = voxel_distance(v, p.truth.root) <= spec.soma_radius;
      for (std::size_t k = 0; k < gt.size() && !near; ++k) near = voxel_distance(v, gt[k]) <= spec.tube_radius + 0.5;
      REQUIRE(near);
    }
    CHECK(p.mask.is_soma(p.truth.root));
    for (std::size_t i = 0; i < p.image.data.size(); ++i) CHECK(p.image.data[i] == double(p.mask.foreground[i]));
  }
}

TEST_CASE("noisy images stay in [0, 1]") {
  PhantomSpec spec;
  spec.noise_sigma = 0.3;
  const Phantom p = generate(spec);
  for (double x : p.image.data) {
    CHECK(x >= 0.0);
    CHECK(x <= 1.0);
  }
}

TEST_CASE("motionless series repeats the first frame") {
  PhantomSpec spec;
  spec.seed = 5;
  const auto s = generate_series(spec, 4);
  REQUIRE(s.size() == 4);
  for (const auto& f : s) {
    CHECK(f.image == s[0].image);
    CHECK(f.truth == s[0].truth);
  }
}

TEST_CASE("moving series keeps topology, bounds and motion limits") {
  PhantomSpec spec;
  spec.seed = 9;
  spec.motion_amplitude = 2.0;
  const auto s = generate_series(spec, 13);
  REQUIRE(s.size() == 13);
  const auto b0 = bifurcation_points(s[0].truth);
  for (std::size_t f = 0; f < s.size(); ++f) {
    const auto& t = s[f].truth;
    CHECK(count_structures(t).bifurcations == count_structures(s[0].truth).bifurcations);
    CHECK(count_structures(t).terminals == count_structures(s[0].truth).terminals);
    REQUIRE(t.segments.size() == s[0].truth.segments.size());
    for (const Voxel v : skeleton_voxels(t)) CHECK(spec.dims.contains(v));
    const auto b = bifurcation_points(t);
    for (std::size_t k = 0; k < b.size(); ++k) CHECK(voxel_distance(b[k], b0[k]) <= 1.0);
    if (f > 0) {
      const auto tp = terminal_points(s[f - 1].truth), tc = terminal_points(t);
      for (std::size_t k = 0; k < tc.size(); ++k) CHECK(voxel_distance(tp[k], tc[k]) <= spec.motion_amplitude);
    }
  }
}

TEST_CASE("invalid specs are rejected") {
  PhantomSpec spec;
  spec.dims = {0, 10, 10};
  CHECK_THROWS_AS(generate(spec), InvalidArgument);
  spec = {};
  spec.branch_length_range = {5, 2};
  CHECK_THROWS_AS(generate(spec), InvalidArgument);
  spec = {};
  spec.tube_radius = -1;
  CHECK_THROWS_AS(generate(spec), InvalidArgument);
  spec = {};
  spec.dims = {12, 12, 12};
  CHECK_THROWS_AS(generate(spec), InvalidArgument);
  CHECK_THROWS_AS(generate_series(PhantomSpec{}, 0), InvalidArgument);
}
