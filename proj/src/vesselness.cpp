#include "hieroglyph/vesselness.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include "hieroglyph/parallel.hpp"

namespace hieroglyph {
namespace {

// Half-sample symmetric reflection: ... 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
inline int reflect(int i, int n) {
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

simd::HessianScale hessian_scale(const Spacing& s, double sigma) {
  const double s2 = sigma > 0 ? sigma * sigma : 1.0;
  return {s2 / (s.x * s.x), s2 / (s.y * s.y), s2 / (s.z * s.z),
          s2 / (4.0 * s.x * s.y), s2 / (4.0 * s.x * s.z), s2 / (4.0 * s.y * s.z)};
}

// Volume padded by one reflected voxel on each side of x, so x-row stencils
// never branch. Row (y, z) starts at index (y + ny * z) * (nx + 2).
std::vector<double> pad_x(const Volume3& v) {
  const Dims& d = v.dims;
  const std::size_t w = std::size_t(d.nx) + 2;
  std::vector<double> out(w * std::size_t(d.ny) * std::size_t(d.nz));
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y) {
      double* row = out.data() + (std::size_t(y) + std::size_t(d.ny) * z) * w;
      const double* src = &v.data[d.index({0, y, z})];
      row[0] = src[reflect(-1, d.nx)];
      std::copy(src, src + d.nx, row + 1);
      row[w - 1] = src[reflect(d.nx, d.nx)];
    }
  return out;
}

// Calls fn(y, z, row_outputs) for every row of the Hessian of `smoothed`.
template <class Fn>
void for_each_hessian_row(const Volume3& smoothed, double sigma, simd::Isa isa, Fn&& fn) {
  const Dims& d = smoothed.dims;
  const auto padded = pad_x(smoothed);
  const std::size_t w = std::size_t(d.nx) + 2;
  const simd::HessianScale k = hessian_scale(smoothed.spacing, sigma);
  const auto& kern = simd::kernels(isa);
  auto row = [&](int y, int z) {
    return padded.data() + (std::size_t(reflect(y, d.ny)) + std::size_t(d.ny) * reflect(z, d.nz)) * w;
  };
  parallel_for(std::size_t(d.nz), [&](std::size_t zb, std::size_t ze) {
    std::vector<double> buf(6 * std::size_t(d.nx));
    const std::size_t nx = std::size_t(d.nx);
    simd::HessianOut out{buf.data(), buf.data() + nx, buf.data() + 2 * nx,
                         buf.data() + 3 * nx, buf.data() + 4 * nx, buf.data() + 5 * nx};
    for (int z = int(zb); z < int(ze); ++z)
      for (int y = 0; y < d.ny; ++y) {
        const simd::HessianRows rows{row(y, z),         row(y - 1, z),     row(y + 1, z),
                                    row(y, z - 1),     row(y, z + 1),     row(y - 1, z - 1),
                                    row(y - 1, z + 1), row(y + 1, z - 1), row(y + 1, z + 1)};
        kern.hessian_row(rows, nx, k, out);
        fn(y, z, out);
      }
  });
}

}  // namespace

double SymMat3::operator()(int r, int c) const {
  if (r > c) std::swap(r, c);
  if (r == c) return r == 0 ? xx : (r == 1 ? yy : zz);
  if (r == 0) return c == 1 ? xy : xz;
  return yz;
}

std::array<std::array<double, 3>, 3> SymMat3::full() const {
  return {{{xx, xy, xz}, {xy, yy, yz}, {xz, yz, zz}}};
}

double SymMat3::frobenius() const {
  return std::sqrt(xx * xx + yy * yy + zz * zz + 2.0 * (xy * xy + xz * xz + yz * yz));
}

std::array<double, 3> order_by_magnitude(std::array<double, 3> v) {
  std::sort(v.begin(), v.end(), [](double a, double b) {
    const double fa = std::abs(a), fb = std::abs(b);
    return fa != fb ? fa < fb : a < b;
  });
  return v;
}

HessianEigen eigen_sym3(const SymMat3& h) { return eigen_sym3(h.full()); }

HessianEigen eigen_sym3(const std::array<std::array<double, 3>, 3>& h) {
  double scale = 1.0;
  for (const auto& r : h)
    for (double x : r) {
      if (!std::isfinite(x)) throw InvalidArgument("matrix has non-finite entries");
      scale = std::max(scale, std::abs(x));
    }
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      if (std::abs(h[i][j] - h[j][i]) > 1e-9 * scale) throw InvalidArgument("matrix is not symmetric");

  // Cyclic Jacobi on the symmetrised matrix.
  double a[3][3];
  double v[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a[i][j] = 0.5 * (h[i][j] + h[j][i]);

  for (int sweep = 0; sweep < 64; ++sweep) {
    const double off = std::abs(a[0][1]) + std::abs(a[0][2]) + std::abs(a[1][2]);
    if (off == 0.0) break;
    for (int p = 0; p < 2; ++p)
      for (int q = p + 1; q < 3; ++q) {
        const double apq = a[p][q];
        if (apq == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < 3; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < 3; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        a[p][q] = a[q][p] = 0.0;
        for (int k = 0; k < 3; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
  }

  std::array<int, 3> idx{0, 1, 2};
  std::sort(idx.begin(), idx.end(), [&](int i, int j) {
    const double fi = std::abs(a[i][i]), fj = std::abs(a[j][j]);
    return fi != fj ? fi < fj : a[i][i] < a[j][j];
  });
  HessianEigen out;
  for (int k = 0; k < 3; ++k) {
    out.values[k] = a[idx[k]][idx[k]];
    for (int r = 0; r < 3; ++r) out.vectors[k][r] = v[r][idx[k]];
  }
  return out;
}

std::array<double, 3> eigenvalues_sym3(const SymMat3& h) {
  const double p1 = h.xy * h.xy + h.xz * h.xz + h.yz * h.yz;
  if (p1 == 0.0) return order_by_magnitude({h.xx, h.yy, h.zz});
  const double q = (h.xx + h.yy + h.zz) / 3.0;
  const double dx = h.xx - q, dy = h.yy - q, dz = h.zz - q;
  const double p2 = dx * dx + dy * dy + dz * dz + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  // det((A - qI) / p) / 2
  const double det = dx * (dy * dz - h.yz * h.yz) - h.xy * (h.xy * dz - h.yz * h.xz) + h.xz * (h.xy * h.yz - dy * h.xz);
  const double r = std::clamp(det / (2.0 * p * p * p), -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double e1 = q + 2.0 * p * std::cos(phi);
  const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
  const double e2 = 3.0 * q - e1 - e3;
  return order_by_magnitude({e1, e2, e3});
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma >= 0) || !std::isfinite(sigma)) throw InvalidArgument("sigma must be finite and >= 0");
  if (sigma == 0) return {1.0};
  const int r = int(std::ceil(4.0 * sigma));
  std::vector<double> taps(2 * std::size_t(r) + 1);
  double sum = 0.0;
  for (int k = -r; k <= r; ++k) sum += taps[std::size_t(k + r)] = std::exp(-double(k) * k / (2.0 * sigma * sigma));
  for (double& t : taps) t /= sum;
  return taps;
}

Volume3 gaussian_smooth(const Volume3& v, double sigma, simd::Isa isa) {
  const auto taps = gaussian_kernel(sigma);
  if (sigma == 0) return v;
  const auto& kern = simd::kernels(isa);
  const Dims& d = v.dims;
  const int r = int(taps.size() / 2);
  const std::size_t nx = std::size_t(d.nx);

  // x pass through a reflected line buffer.
  Volume3 a(d, v.spacing);
  parallel_for(std::size_t(d.nz), [&](std::size_t zb, std::size_t ze) {
    std::vector<double> line(nx + 2 * std::size_t(r));
    for (int z = int(zb); z < int(ze); ++z)
      for (int y = 0; y < d.ny; ++y) {
        const double* src = &v.data[d.index({0, y, z})];
        for (int j = 0; j < int(line.size()); ++j) line[std::size_t(j)] = src[reflect(j - r, d.nx)];
        kern.convolve_row(line.data(), nx, taps.data(), taps.size(), &a.data[d.index({0, y, z})]);
      }
  });

  // y pass: whole rows accumulate.
  Volume3 b(d, v.spacing);
  parallel_for(std::size_t(d.nz), [&](std::size_t zb, std::size_t ze) {
    for (int z = int(zb); z < int(ze); ++z)
      for (int y = 0; y < d.ny; ++y) {
        double* dst = &b.data[d.index({0, y, z})];
        for (int k = -r; k <= r; ++k)
          kern.axpy(dst, &a.data[d.index({0, reflect(y + k, d.ny), z})], taps[std::size_t(k + r)], nx);
      }
  });

  // z pass.
  Volume3 c(d, v.spacing);
  parallel_for(std::size_t(d.nz), [&](std::size_t zb, std::size_t ze) {
    for (int z = int(zb); z < int(ze); ++z)
      for (int y = 0; y < d.ny; ++y) {
        double* dst = &c.data[d.index({0, y, z})];
        for (int k = -r; k <= r; ++k)
          kern.axpy(dst, &b.data[d.index({0, y, reflect(z + k, d.nz)})], taps[std::size_t(k + r)], nx);
      }
  });
  return c;
}

std::vector<SymMat3> hessian_field(const Volume3& v, double sigma, simd::Isa isa) {
  const Dims& d = v.dims;
  if (d.nx < 3 || d.ny < 3 || d.nz < 3) throw InvalidArgument("hessian needs at least 3 voxels per axis");
  const Volume3 s = gaussian_smooth(v, sigma, isa);
  std::vector<SymMat3> out(d.count());
  for_each_hessian_row(s, sigma, isa, [&](int y, int z, const simd::HessianOut& h) {
    SymMat3* dst = &out[d.index({0, y, z})];
    for (int x = 0; x < d.nx; ++x) dst[x] = {h.xx[x], h.yy[x], h.zz[x], h.xy[x], h.xz[x], h.yz[x]};
  });
  return out;
}

double vesselness_measure(const std::array<double, 3>& l, const VesselnessParams& p, double c) {
  const double l1 = l[0], l2 = l[1], l3 = l[2];
  if (p.polarity == Polarity::Bright ? (l2 > 0 || l3 > 0) : (l2 < 0 || l3 < 0)) return 0.0;
  if (l2 == 0.0 || l3 == 0.0 || c <= 0.0) return 0.0;
  const double ra = std::abs(l2) / std::abs(l3);
  const double rb = std::abs(l1) / std::sqrt(std::abs(l2 * l3));
  const double s2 = l1 * l1 + l2 * l2 + l3 * l3;
  return (1.0 - std::exp(-ra * ra / (2.0 * p.alpha * p.alpha))) * std::exp(-rb * rb / (2.0 * p.beta * p.beta)) *
         (1.0 - std::exp(-s2 / (2.0 * c * c)));
}

Volume3 vesselness_response(const Volume3& v, std::span<const double> sigmas, const VesselnessParams& p,
                            simd::Isa isa) {
  if (sigmas.empty()) throw InvalidArgument("vesselness needs at least one scale");
  for (double s : sigmas)
    if (!(s > 0) || !std::isfinite(s)) throw InvalidArgument("vesselness scales must be > 0");
  const Dims& d = v.dims;
  if (d.nx < 3 || d.ny < 3 || d.nz < 3) throw InvalidArgument("vesselness needs at least 3 voxels per axis");

  Volume3 best(d, v.spacing, 0.0);
  for (double sigma : sigmas) {
    const Volume3 smoothed = gaussian_smooth(v, sigma, isa);

    // The Hessian norm equals sqrt(sum lambda^2), so the adaptive c needs no eigenvalues.
    double c = 0.0;
    if (p.c) {
      c = *p.c;
    } else {
      std::mutex mu;
      double max_s = 0.0;
      for_each_hessian_row(smoothed, sigma, isa, [&](int, int, const simd::HessianOut& h) {
        double local = 0.0;
        for (int x = 0; x < d.nx; ++x)
          local = std::max(local, SymMat3{h.xx[x], h.yy[x], h.zz[x], h.xy[x], h.xz[x], h.yz[x]}.frobenius());
        std::lock_guard lock(mu);
        max_s = std::max(max_s, local);
      });
      c = 0.5 * max_s;
    }

    for_each_hessian_row(smoothed, sigma, isa, [&](int y, int z, const simd::HessianOut& h) {
      double* dst = &best.data[d.index({0, y, z})];
      for (int x = 0; x < d.nx; ++x) {
        const auto lambda = eigenvalues_sym3({h.xx[x], h.yy[x], h.zz[x], h.xy[x], h.xz[x], h.yz[x]});
        dst[x] = std::max(dst[x], vesselness_measure(lambda, p, c));
      }
    });
  }
  return best;
}

VesselMap iv_transform(const Volume3& response) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double x : response.data)
    if (x > 0) {
      sum += x;
      ++n;
    }
  if (n == 0) throw InvalidArgument("response has no positive values; penalty magnitude undefined");
  return iv_transform(response, sum / double(n));
}

VesselMap iv_transform(const Volume3& response, double x_avg) {
  if (!(x_avg > 0) || !std::isfinite(x_avg)) throw InvalidArgument("penalty magnitude must be > 0");
  VesselMap m{response, x_avg};
  for (double& x : m.volume.data)
    if (!(x > 0)) x = -x_avg;
  return m;
}

double mean_intensity(const Volume3& v) {
  if (v.data.empty()) throw InvalidArgument("empty volume");
  double sum = 0.0;
  for (double x : v.data) sum += x;
  return sum / double(v.data.size());
}

}  // namespace hieroglyph
