#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <vector>

#include "hieroglyph/simd.hpp"
#include "hieroglyph/vesselness.hpp"

using namespace hieroglyph;
using simd::Isa;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

Volume3 random_volume(std::mt19937_64& rng, Dims d) {
  Volume3 v(d, {1.0, 0.9, 1.3});
  v.data = random_vec(rng, d.count());
  return v;
}

bool same(const std::vector<SymMat3>& a, const std::vector<SymMat3>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].xx != b[i].xx || a[i].yy != b[i].yy || a[i].zz != b[i].zz || a[i].xy != b[i].xy || a[i].xz != b[i].xz ||
        a[i].yz != b[i].yz)
      return false;
  return true;
}

}  // namespace

TEST_CASE("dispatch names and scalar fallback") {
  CHECK(simd::isa_name(Isa::Scalar) == "scalar");
  CHECK(simd::isa_name(Isa::Avx2) == "avx2");
  CHECK(simd::isa_available(Isa::Scalar));
  CHECK(simd::kernels(Isa::Scalar).isa == Isa::Scalar);
  if (!simd::isa_available(Isa::Avx2)) CHECK(simd::kernels(Isa::Avx2).isa == Isa::Scalar);
  MESSAGE("active ISA: " << simd::isa_name(simd::active_isa()));
}

TEST_CASE("row kernels are bit-identical across ISAs") {
  if (!simd::isa_available(Isa::Avx2)) {
    MESSAGE("AVX2 unavailable; nothing to compare");
    return;
  }
  const auto& s = simd::kernels(Isa::Scalar);
  const auto& v = simd::kernels(Isa::Avx2);
  std::mt19937_64 rng(77);
  for (std::size_t n : {1u, 3u, 4u, 5u, 7u, 8u, 13u, 64u, 101u}) {
    for (std::size_t nt : {1u, 3u, 9u, 17u}) {
      const auto in = random_vec(rng, n + nt - 1);
      const auto taps = random_vec(rng, nt);
      std::vector<double> a(n), b(n);
      s.convolve_row(in.data(), n, taps.data(), nt, a.data());
      v.convolve_row(in.data(), n, taps.data(), nt, b.data());
      REQUIRE(a == b);
    }
    auto acc_a = random_vec(rng, n);
    auto acc_b = acc_a;
    const auto src = random_vec(rng, n);
    s.axpy(acc_a.data(), src.data(), 0.37, n);
    v.axpy(acc_b.data(), src.data(), 0.37, n);
    REQUIRE(acc_a == acc_b);

    std::vector<std::vector<double>> rows(9);
    for (auto& r : rows) r = random_vec(rng, n + 2);
    const simd::HessianRows hr{rows[0].data(), rows[1].data(), rows[2].data(), rows[3].data(), rows[4].data(),
                               rows[5].data(), rows[6].data(), rows[7].data(), rows[8].data()};
    const simd::HessianScale k{1.5, 0.7, 2.25, 0.125, 0.3, 0.9};
    std::vector<std::vector<double>> oa(6, std::vector<double>(n)), ob(6, std::vector<double>(n));
    s.hessian_row(hr, n, k, {oa[0].data(), oa[1].data(), oa[2].data(), oa[3].data(), oa[4].data(), oa[5].data()});
    v.hessian_row(hr, n, k, {ob[0].data(), ob[1].data(), ob[2].data(), ob[3].data(), ob[4].data(), ob[5].data()});
    REQUIRE(oa == ob);
  }
}

TEST_CASE("smoothing, hessian and tubularity agree bit for bit across ISAs") {
  if (!simd::isa_available(Isa::Avx2)) {
    MESSAGE("AVX2 unavailable; nothing to compare");
    return;
  }
  std::mt19937_64 rng(5);
  for (const Dims d : {Dims{7, 5, 4}, Dims{17, 9, 11}, Dims{3, 3, 3}}) {
    const Volume3 v = random_volume(rng, d);
    for (double sigma : {0.0, 0.8, 2.0}) {
      CHECK(gaussian_smooth(v, sigma, Isa::Scalar) == gaussian_smooth(v, sigma, Isa::Avx2));
      CHECK(same(hessian_field(v, sigma, Isa::Scalar), hessian_field(v, sigma, Isa::Avx2)));
    }
    const std::vector<double> scales{1.0, 1.5};
    CHECK(vesselness_response(v, scales, {}, Isa::Scalar) == vesselness_response(v, scales, {}, Isa::Avx2));
  }
}
