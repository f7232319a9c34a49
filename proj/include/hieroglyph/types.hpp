#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace hieroglyph {

// Error hierarchy. Every module throws one of these; the CLI maps them to exit 1.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : Error {
  using Error::Error;
};
struct FormatError : Error {
  using Error::Error;
};
struct StructureError : Error {
  using Error::Error;
};
struct InvalidArgument : Error {
  using Error::Error;
};

/// Integer voxel index. Ordered lexicographically by (x, y, z).
struct Voxel {
  int x = 0;
  int y = 0;
  int z = 0;

  friend constexpr auto operator<=>(const Voxel&, const Voxel&) = default;
  friend constexpr bool operator==(const Voxel&, const Voxel&) = default;
};

inline Voxel operator+(Voxel a, Voxel b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Voxel operator-(Voxel a, Voxel b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }

inline int chebyshev(Voxel a, Voxel b) {
  const Voxel d = a - b;
  return std::max({std::abs(d.x), std::abs(d.y), std::abs(d.z)});
}

/// Euclidean distance in voxel index units.
inline double voxel_distance(Voxel a, Voxel b) {
  const Voxel d = a - b;
  return std::sqrt(double(d.x) * d.x + double(d.y) * d.y + double(d.z) * d.z);
}

inline bool adjacent26(Voxel a, Voxel b) { return a != b && chebyshev(a, b) <= 1; }

struct Dims {
  int nx = 0;
  int ny = 0;
  int nz = 0;

  std::size_t count() const { return std::size_t(nx) * std::size_t(ny) * std::size_t(nz); }
  bool contains(Voxel v) const {
    return v.x >= 0 && v.y >= 0 && v.z >= 0 && v.x < nx && v.y < ny && v.z < nz;
  }
  // x fastest, then y, then z.
  std::size_t index(Voxel v) const {
    return std::size_t(v.x) + std::size_t(nx) * (std::size_t(v.y) + std::size_t(ny) * std::size_t(v.z));
  }
  Voxel voxel(std::size_t i) const {
    const int x = int(i % std::size_t(nx));
    i /= std::size_t(nx);
    const int y = int(i % std::size_t(ny));
    return {x, y, int(i / std::size_t(ny))};
  }
  bool valid() const { return nx > 0 && ny > 0 && nz > 0; }

  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Physical voxel size in micrometres.
struct Spacing {
  double x = 1.0;
  double y = 1.0;
  double z = 1.0;

  bool valid() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z) && x > 0 && y > 0 && z > 0;
  }
  double min() const { return std::min({x, y, z}); }
  std::array<double, 3> physical(Voxel v) const { return {v.x * x, v.y * y, v.z * z}; }

  friend bool operator==(const Spacing&, const Spacing&) = default;
};

/// Physical (spacing-scaled) Euclidean distance between two voxels.
inline double physical_distance(Voxel a, Voxel b, const Spacing& s) {
  const Voxel d = a - b;
  const double dx = d.x * s.x, dy = d.y * s.y, dz = d.z * s.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

/// Dense 3D grid with voxel spacing. Storage is x fastest.
template <class T>
struct Grid {
  Dims dims;
  Spacing spacing;
  std::vector<T> data;

  Grid() = default;
  Grid(Dims d, Spacing s, T fill = T{}) : dims(d), spacing(s), data(d.count(), fill) {
    if (!d.valid()) throw InvalidArgument("grid dims must be positive");
    if (!s.valid()) throw InvalidArgument("grid spacing must be finite and > 0");
  }

  T& operator[](Voxel v) { return data[dims.index(v)]; }
  const T& operator[](Voxel v) const { return data[dims.index(v)]; }
  T& at(int x, int y, int z) { return data[dims.index({x, y, z})]; }
  const T& at(int x, int y, int z) const { return data[dims.index({x, y, z})]; }

  bool empty() const { return data.empty(); }
  std::size_t size() const { return data.size(); }

  friend bool operator==(const Grid&, const Grid&) = default;
};

using Volume3 = Grid<double>;

/// Binary foreground with a soma sub-label. Soma voxels are always foreground.
struct SegMask {
  Dims dims;
  Spacing spacing;
  std::vector<std::uint8_t> foreground;
  std::vector<std::uint8_t> soma;

  SegMask() = default;
  SegMask(Dims d, Spacing s)
      : dims(d), spacing(s), foreground(d.count(), 0), soma(d.count(), 0) {
    if (!d.valid()) throw InvalidArgument("mask dims must be positive");
    if (!s.valid()) throw InvalidArgument("mask spacing must be finite and > 0");
  }

  bool is_foreground(Voxel v) const { return dims.contains(v) && foreground[dims.index(v)] != 0; }
  bool is_soma(Voxel v) const { return dims.contains(v) && soma[dims.index(v)] != 0; }
  void set_foreground(Voxel v, bool on = true) { foreground[dims.index(v)] = on ? 1 : 0; }
  void set_soma(Voxel v) {
    soma[dims.index(v)] = 1;
    foreground[dims.index(v)] = 1;
  }
  std::size_t foreground_count() const;
  std::size_t soma_count() const;
  /// Throws StructureError when soma is not a subset of foreground.
  void validate() const;

  friend bool operator==(const SegMask&, const SegMask&) = default;
};

/// Mask label encoding used on disk: 0 background, 1 process, 2 soma.
SegMask mask_from_labels(const Volume3& labels);
Volume3 labels_from_mask(const SegMask& m);

}  // namespace hieroglyph
