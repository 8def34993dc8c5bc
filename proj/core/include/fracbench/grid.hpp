#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace fracbench {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  constexpr double& operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }

  friend constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend constexpr Vec3 operator*(Vec3 a, double s) { return s * a; }
  friend constexpr bool operator==(Vec3, Vec3) = default;
};

constexpr double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(Vec3 a) { return (1.0 / norm(a)) * a; }

using Index3 = std::array<int, 3>;

// Regular axis-aligned grid. Cell (i, j, k) has its physical center at
// offset + (index + 0.5) * spacing on each axis, in millimetres.
struct Grid3 {
  Index3 dims{0, 0, 0};
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 offset{0.0, 0.0, 0.0};

  std::size_t size() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * static_cast<std::size_t>(dims[1]) +
            static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(dims[0]) +
           static_cast<std::size_t>(i);
  }
  Index3 coords(std::size_t idx) const {
    const auto nx = static_cast<std::size_t>(dims[0]);
    const auto ny = static_cast<std::size_t>(dims[1]);
    return {static_cast<int>(idx % nx), static_cast<int>((idx / nx) % ny),
            static_cast<int>(idx / (nx * ny))};
  }
  bool contains(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2];
  }
  Vec3 center(int i, int j, int k) const {
    return {offset.x + (i + 0.5) * spacing.x, offset.y + (j + 0.5) * spacing.y,
            offset.z + (k + 0.5) * spacing.z};
  }
  // Physical extent of the whole grid (outer faces of the boundary cells).
  Vec3 lower_corner() const { return offset; }
  Vec3 upper_corner() const {
    return {offset.x + dims[0] * spacing.x, offset.y + dims[1] * spacing.y,
            offset.z + dims[2] * spacing.z};
  }
  double min_spacing() const { return std::min({spacing.x, spacing.y, spacing.z}); }

  friend bool operator==(const Grid3&, const Grid3&) = default;
};

// Throws InvalidArgument unless dims are non-negative and spacing is positive.
void validate_grid(const Grid3& grid);

template <typename T>
struct Volume {
  Grid3 grid;
  std::vector<T> voxels;

  Volume() = default;
  Volume(Grid3 g, T fill) : grid(g), voxels(g.size(), fill) {}
  Volume(Grid3 g, std::vector<T> v) : grid(g), voxels(std::move(v)) {}

  T at(int i, int j, int k) const { return voxels[grid.index(i, j, k)]; }
  T& at(int i, int j, int k) { return voxels[grid.index(i, j, k)]; }
};

// Voxel values are encoded fragment ids (0 = background, 1..30 fragments).
using LabelVolume = Volume<std::uint8_t>;
// Voxel values are Hounsfield units.
using IntensityVolume = Volume<float>;

}  // namespace fracbench
