#include "fracbench/drr.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>

#include "fracbench/error.hpp"
#include "fracbench/parallel.hpp"
#include "fracbench/rng.hpp"

namespace fracbench {

const char* to_string(Material m) {
  switch (m) {
    case Material::Air: return "air";
    case Material::SoftTissue: return "soft_tissue";
    case Material::Bone: return "bone";
  }
  return "unknown";
}

MaterialVolume decompose_materials(const IntensityVolume& ct, const DecompositionThresholds& thresholds) {
  if (!(thresholds.air_hu < thresholds.bone_hu))
    throw Error(ErrorCode::InvalidArgument, "air threshold must lie below the bone threshold");
  MaterialVolume out;
  out.grid = ct.grid;
  out.material.resize(ct.voxels.size());
  out.density.resize(ct.voxels.size());
  for (std::size_t i = 0; i < ct.voxels.size(); ++i) {
    const double hu = ct.voxels[i];
    if (hu < thresholds.air_hu) {
      out.material[i] = Material::Air;
      out.density[i] = static_cast<float>(kAirDensity);
      continue;
    }
    out.material[i] = hu > thresholds.bone_hu ? Material::Bone : Material::SoftTissue;
    out.density[i] = static_cast<float>(std::max(0.0, 1.0 + hu / 1000.0));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spectrum and attenuation

Spectrum Spectrum::from_bins(std::vector<SpectrumBin> bins) {
  if (bins.empty()) throw Error(ErrorCode::InvalidArgument, "spectrum needs at least one bin");
  double total = 0.0;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    if (!(bins[i].energy_kev > 0.0)) throw Error(ErrorCode::InvalidArgument, "spectrum energies must be positive");
    if (i > 0 && !(bins[i].energy_kev > bins[i - 1].energy_kev))
      throw Error(ErrorCode::InvalidArgument, "spectrum energies must be strictly increasing");
    if (!(bins[i].weight >= 0.0)) throw Error(ErrorCode::InvalidArgument, "spectrum weights must be non-negative");
    total += bins[i].weight;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::InvalidArgument, "spectrum weights sum to zero");
  for (SpectrumBin& b : bins) b.weight /= total;
  Spectrum s;
  s.bins_ = std::move(bins);
  return s;
}

Spectrum Spectrum::monoenergetic(double energy_kev) { return from_bins({{energy_kev, 1.0}}); }

Spectrum Spectrum::default_tube() {
  return from_bins({{30, 0.04}, {40, 0.11}, {50, 0.15}, {60, 0.16}, {70, 0.15},
                    {80, 0.13}, {90, 0.11}, {100, 0.08}, {110, 0.05}, {120, 0.02}});
}

AttenuationTable AttenuationTable::standard() {
  // NIST XCOM total attenuation with coherent scattering, cm^2/g.
  return from_points({{
      // dry air
      {{10, 5.120}, {15, 1.614}, {20, 0.7779}, {30, 0.3538}, {40, 0.2485},
       {50, 0.2080}, {60, 0.1875}, {80, 0.1662}, {100, 0.1541}, {150, 0.1356}},
      // soft tissue (ICRU-44)
      {{10, 5.379}, {15, 1.691}, {20, 0.8205}, {30, 0.3783}, {40, 0.2690},
       {50, 0.2270}, {60, 0.2060}, {80, 0.1835}, {100, 0.1707}, {150, 0.1504}},
      // cortical bone (ICRU-44)
      {{10, 28.51}, {15, 9.032}, {20, 4.001}, {30, 1.331}, {40, 0.6655},
       {50, 0.4242}, {60, 0.3148}, {80, 0.2229}, {100, 0.1855}, {150, 0.1480}},
  }});
}

AttenuationTable AttenuationTable::from_points(std::array<std::vector<AttenuationPoint>, kMaterialCount> points) {
  for (const auto& table : points) {
    if (table.size() < 2) throw Error(ErrorCode::InvalidArgument, "attenuation table needs at least two points");
    for (std::size_t i = 0; i < table.size(); ++i) {
      if (!(table[i].energy_kev > 0.0) || !(table[i].mass_attenuation > 0.0))
        throw Error(ErrorCode::InvalidArgument, "attenuation entries must be positive");
      if (i > 0 && !(table[i].energy_kev > table[i - 1].energy_kev))
        throw Error(ErrorCode::InvalidArgument, "attenuation energies must be strictly increasing");
    }
  }
  AttenuationTable t;
  t.points_ = std::move(points);
  return t;
}

double AttenuationTable::mass_attenuation(Material m, double energy_kev) const {
  const auto& table = points_[static_cast<int>(m)];
  if (energy_kev < table.front().energy_kev || energy_kev > table.back().energy_kev)
    throw Error(ErrorCode::EnergyRangeError,
                std::string("energy outside attenuation table for ") + to_string(m));
  auto hi = std::lower_bound(table.begin(), table.end(), energy_kev,
                             [](const AttenuationPoint& p, double e) { return p.energy_kev < e; });
  if (hi->energy_kev == energy_kev) return hi->mass_attenuation;
  auto lo = hi - 1;
  const double f = std::log(energy_kev / lo->energy_kev) / std::log(hi->energy_kev / lo->energy_kev);
  return std::exp(std::log(lo->mass_attenuation) + f * std::log(hi->mass_attenuation / lo->mass_attenuation));
}

bool AttenuationTable::covers(double lo_kev, double hi_kev) const {
  for (const auto& table : points_) {
    if (lo_kev < table.front().energy_kev || hi_kev > table.back().energy_kev) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Geometry

Vec3 CameraGeometry::pixel_center(int col, int row) const {
  const double fu = ((col + 0.5) / cols - 0.5) * width_mm;
  const double fv = ((row + 0.5) / rows - 0.5) * height_mm;
  return detector_center + fu * u_axis + fv * v_axis;
}

Vec3 CameraGeometry::principal_direction() const { return normalized(detector_center - source); }

void validate_camera(const CameraGeometry& cam) {
  constexpr double tol = 1e-9;
  if (std::abs(norm(cam.u_axis) - 1.0) > tol || std::abs(norm(cam.v_axis) - 1.0) > tol ||
      std::abs(dot(cam.u_axis, cam.v_axis)) > tol)
    throw Error(ErrorCode::InvalidArgument, "detector axes must be orthonormal");
  if (cam.cols <= 0 || cam.rows <= 0 || !(cam.width_mm > 0.0) || !(cam.height_mm > 0.0))
    throw Error(ErrorCode::InvalidArgument, "detector size and resolution must be positive");
  const Vec3 normal = cross(cam.u_axis, cam.v_axis);
  if (std::abs(dot(cam.source - cam.detector_center, normal)) < tol)
    throw Error(ErrorCode::InvalidArgument, "source lies on the detector plane");
}

namespace {

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

CameraGeometry sample_camera_pose(std::mt19937_64& rng, const PoseOptions& options, const Vec3& target) {
  if (!(options.max_angle_deg >= 0.0 && options.max_angle_deg <= 90.0))
    throw Error(ErrorCode::InvalidArgument, "maximum pose angle must lie in [0, 90] degrees");
  if (!(options.source_to_target_mm > 0.0) || !(options.source_to_detector_mm > options.source_to_target_mm))
    throw Error(ErrorCode::InvalidArgument, "target must lie between source and detector");

  const double cos_max = std::cos(options.max_angle_deg * std::numbers::pi / 180.0);
  const double cos_theta = 1.0 - unit_uniform(rng) * (1.0 - cos_max);
  const double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
  const double phi = 2.0 * std::numbers::pi * unit_uniform(rng);
  const Vec3 dir{sin_theta * std::cos(phi), -cos_theta, sin_theta * std::sin(phi)};

  CameraGeometry cam;
  cam.source = target - options.source_to_target_mm * dir;
  cam.detector_center = cam.source + options.source_to_detector_mm * dir;
  Vec3 u = cross(Vec3{0.0, 0.0, 1.0}, dir);
  if (norm(u) < 1e-9) u = cross(Vec3{1.0, 0.0, 0.0}, dir);
  cam.u_axis = normalized(u);
  cam.v_axis = normalized(cross(dir, cam.u_axis));
  cam.width_mm = cam.height_mm = options.detector_size_mm;
  cam.cols = cam.rows = options.resolution;
  return cam;
}

double polar_angle(const CameraGeometry& cam) {
  return std::acos(std::clamp(dot(cam.principal_direction(), kVerticalRayDirection), -1.0, 1.0));
}

// ---------------------------------------------------------------------------
// Ray casting

namespace {

struct RaySegment {
  double t0 = 0.0;
  double t1 = 0.0;
};

// Clips the segment source + t * dir, t in [0, 1], against the grid box.
bool clip_to_grid(const Grid3& grid, const Vec3& origin, const Vec3& dir, RaySegment& seg) {
  const Vec3 lo = grid.lower_corner();
  const Vec3 hi = grid.upper_corner();
  double t0 = 0.0, t1 = 1.0;
  for (int a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) {
      if (origin[a] < lo[a] || origin[a] > hi[a]) return false;
      continue;
    }
    double ta = (lo[a] - origin[a]) / dir[a];
    double tb = (hi[a] - origin[a]) / dir[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  seg = {t0, t1};
  return t0 < t1;
}

int clamp_index(double v, int n) { return std::clamp(static_cast<int>(std::floor(v)), 0, n - 1); }

// Calls visit(voxel_index, length_mm) along the ray from origin to origin + dir.
template <typename Visit>
void trace_ray(const Grid3& grid, const Vec3& origin, const Vec3& dir, double step_mm, RayIntegrator integrator,
               Visit&& visit) {
  RaySegment seg;
  if (!clip_to_grid(grid, origin, dir, seg)) return;
  const double ray_len = norm(dir);

  if (integrator == RayIntegrator::FixedStep) {
    const double length = (seg.t1 - seg.t0) * ray_len;
    const auto n = static_cast<long>(std::max(1.0, std::ceil(length / step_mm)));
    const double h = length / static_cast<double>(n);
    const double dt = (seg.t1 - seg.t0) / static_cast<double>(n);
    // Continuous voxel coordinate of sample s on each axis is base + s * slope.
    double base[3];
    double slope[3];
    for (int a = 0; a < 3; ++a) {
      base[a] = (origin[a] + (seg.t0 + 0.5 * dt) * dir[a] - grid.offset[a]) / grid.spacing[a];
      slope[a] = dt * dir[a] / grid.spacing[a];
    }
    const std::size_t nx = static_cast<std::size_t>(grid.dims[0]);
    const std::size_t nxy = nx * static_cast<std::size_t>(grid.dims[1]);
    for (long s = 0; s < n; ++s) {
      const double fs = static_cast<double>(s);
      const int i = clamp_index(base[0] + fs * slope[0], grid.dims[0]);
      const int j = clamp_index(base[1] + fs * slope[1], grid.dims[1]);
      const int k = clamp_index(base[2] + fs * slope[2], grid.dims[2]);
      visit(static_cast<std::size_t>(k) * nxy + static_cast<std::size_t>(j) * nx + static_cast<std::size_t>(i), h);
    }
    return;
  }

  const Vec3 entry = origin + seg.t0 * dir;
  Index3 cell;
  Index3 step;
  double t_max[3];
  double t_delta[3];
  for (int a = 0; a < 3; ++a) {
    cell[a] = clamp_index((entry[a] - grid.offset[a]) / grid.spacing[a], grid.dims[a]);
    if (dir[a] > 0.0) {
      step[a] = 1;
      t_max[a] = (grid.offset[a] + (cell[a] + 1) * grid.spacing[a] - origin[a]) / dir[a];
      t_delta[a] = grid.spacing[a] / dir[a];
    } else if (dir[a] < 0.0) {
      step[a] = -1;
      t_max[a] = (grid.offset[a] + cell[a] * grid.spacing[a] - origin[a]) / dir[a];
      t_delta[a] = -grid.spacing[a] / dir[a];
    } else {
      step[a] = 0;
      t_max[a] = std::numeric_limits<double>::infinity();
      t_delta[a] = std::numeric_limits<double>::infinity();
    }
  }
  const std::size_t stride[3] = {1, static_cast<std::size_t>(grid.dims[0]),
                                 static_cast<std::size_t>(grid.dims[0]) * static_cast<std::size_t>(grid.dims[1])};
  std::size_t idx = grid.index(cell[0], cell[1], cell[2]);
  double t = seg.t0;
  while (t < seg.t1) {
    const int a = t_max[0] < t_max[1] ? (t_max[0] < t_max[2] ? 0 : 2) : (t_max[1] < t_max[2] ? 1 : 2);
    const double t_next = std::min(t_max[a], seg.t1);
    if (t_next > t) visit(idx, (t_next - t) * ray_len);
    t = t_next;
    cell[a] += step[a];
    if (cell[a] < 0 || cell[a] >= grid.dims[a]) break;
    idx = step[a] > 0 ? idx + stride[a] : idx - stride[a];
    t_max[a] += t_delta[a];
  }
}

double resolve_step(const Grid3& grid, const ProjectionOptions& options) {
  if (options.step_mm < 0.0) throw Error(ErrorCode::InvalidArgument, "ray step must be non-negative");
  return options.step_mm > 0.0 ? options.step_mm : 0.25 * grid.min_spacing();
}

// Runs per_pixel(col, row, pixel_center) over the detector, rows in parallel.
template <typename PerPixel>
void for_each_pixel(const CameraGeometry& cam, unsigned jobs, PerPixel&& per_pixel) {
  parallel_for(static_cast<std::size_t>(cam.rows), jobs, [&](std::size_t row) {
    for (int col = 0; col < cam.cols; ++col) per_pixel(col, static_cast<int>(row), cam.pixel_center(col, static_cast<int>(row)));
  });
}

}  // namespace

namespace {

struct AttenuationLookup {
  std::vector<SpectrumBin> bins;
  std::vector<std::array<double, kMaterialCount>> mu;  // per mm per g/cm^3

  double transmission(const std::array<double, kMaterialCount>& path) const {
    double p = 0.0;
    for (std::size_t e = 0; e < bins.size(); ++e) {
      double exponent = 0.0;
      for (int m = 0; m < kMaterialCount; ++m) exponent += mu[e][m] * path[m];
      p += bins[e].weight * std::exp(-exponent);
    }
    return p;
  }
};

AttenuationLookup make_lookup(const Spectrum& spectrum, const AttenuationTable& attenuation) {
  if (!attenuation.covers(spectrum.min_energy(), spectrum.max_energy()))
    throw Error(ErrorCode::EnergyRangeError, "attenuation table does not cover the source spectrum");
  AttenuationLookup lookup;
  lookup.bins.assign(spectrum.bins().begin(), spectrum.bins().end());
  lookup.mu.resize(lookup.bins.size());
  // Coefficients are in cm^2/g while path integrals are in g/cm^3 * mm.
  for (std::size_t e = 0; e < lookup.bins.size(); ++e) {
    for (int m = 0; m < kMaterialCount; ++m)
      lookup.mu[e][m] = 0.1 * attenuation.mass_attenuation(static_cast<Material>(m), lookup.bins[e].energy_kev);
  }
  return lookup;
}

std::uint32_t visible_labels(const std::array<double, kMaxLabelId + 1>& length, std::uint32_t touched,
                             double min_path_mm) {
  std::uint32_t word = 0;
  for (std::uint32_t b = touched; b != 0; b &= b - 1) {
    const int id = std::countr_zero(b) + 1;
    if (length[id] >= min_path_mm) word |= label_bit(id);
  }
  return word;
}

// One traversal per pixel feeding the image, the mask or both. Both outputs
// see exactly the samples the standalone projections would.
template <bool kImage, bool kMask>
void project(const Grid3& grid, const MaterialVolume* materials, const AttenuationLookup* lookup,
             const LabelVolume* labels, double min_path_mm, const CameraGeometry& cam, const ProjectionOptions& options,
             ProjectionImage* image, MultiLabelMask2D* mask) {
  const double step = resolve_step(grid, options);
  const Material* material = kImage ? materials->material.data() : nullptr;
  const float* density = kImage ? materials->density.data() : nullptr;
  const std::uint8_t* ids = kMask ? labels->voxels.data() : nullptr;
  for_each_pixel(cam, options.jobs, [&](int col, int row, const Vec3& pixel) {
    std::array<double, kMaterialCount> path{};
    std::array<double, kMaxLabelId + 1> length{};
    std::uint32_t touched = 0;
    trace_ray(grid, cam.source, pixel - cam.source, step, options.integrator, [&](std::size_t idx, double len) {
      if constexpr (kImage) path[static_cast<int>(material[idx])] += density[idx] * len;
      if constexpr (kMask) {
        const std::uint8_t id = ids[idx];
        if (id != 0) {
          length[id] += len;
          touched |= label_bit(id);
        }
      }
    });
    if constexpr (kImage) image->at(col, row) = lookup->transmission(path);
    if constexpr (kMask) mask->at(col, row) = visible_labels(length, touched, min_path_mm);
  });
}

}  // namespace

ProjectionImage forward_project(const MaterialVolume& materials, const Spectrum& spectrum,
                                const AttenuationTable& attenuation, const CameraGeometry& cam,
                                const ProjectionOptions& options) {
  validate_camera(cam);
  validate_grid(materials.grid);
  const AttenuationLookup lookup = make_lookup(spectrum, attenuation);
  ProjectionImage image(cam.cols, cam.rows);
  project<true, false>(materials.grid, &materials, &lookup, nullptr, 0.0, cam, options, &image, nullptr);
  return image;
}

MultiLabelMask2D project_labels(const LabelVolume& labels, const CameraGeometry& cam, double min_path_mm,
                                const ProjectionOptions& options) {
  validate_camera(cam);
  validate_grid(labels.grid);
  validate_labels(labels);
  MultiLabelMask2D mask(cam.cols, cam.rows);
  project<false, true>(labels.grid, nullptr, nullptr, &labels, min_path_mm, cam, options, nullptr, &mask);
  return mask;
}

// ---------------------------------------------------------------------------
// Scatter and noise

namespace {

int reflect(int i, int n) {
  const int period = 2 * n;
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

std::vector<double> gaussian_kernel(double sigma, bool unit_energy) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double norm_sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = w;
    norm_sum += unit_energy ? w * w : w;
  }
  const double scale = unit_energy ? 1.0 / std::sqrt(norm_sum) : 1.0 / norm_sum;
  for (double& w : k) w *= scale;
  return k;
}

}  // namespace

std::vector<double> gaussian_blur(std::span<const double> image, int width, int height, double sigma_px) {
  std::vector<double> out(image.begin(), image.end());
  if (!(sigma_px > 0.0) || width == 0 || height == 0) return out;
  const std::vector<double> kernel = gaussian_kernel(sigma_px, false);
  const int radius = static_cast<int>(kernel.size() / 2);
  std::vector<double> tmp(image.size());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int d = -radius; d <= radius; ++d)
        acc += kernel[static_cast<std::size_t>(d + radius)] * image[static_cast<std::size_t>(y) * width + reflect(x + d, width)];
      tmp[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int d = -radius; d <= radius; ++d)
        acc += kernel[static_cast<std::size_t>(d + radius)] * tmp[static_cast<std::size_t>(reflect(y + d, height)) * width + x];
      out[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }
  return out;
}

ProjectionImage estimate_scatter(const ProjectionImage& primary, double spr, double kernel_sigma_px) {
  if (!(spr >= 0.0)) throw Error(ErrorCode::InvalidArgument, "scatter-to-primary ratio must be non-negative");
  ProjectionImage out(primary.width, primary.height);
  if (spr == 0.0) return out;
  out.values = gaussian_blur(primary.values, primary.width, primary.height, kernel_sigma_px);
  for (double& v : out.values) v *= spr;
  return out;
}

std::vector<double> sample_photon_counts(const ProjectionImage& expected_fraction, double photon_fluence,
                                         std::uint64_t seed) {
  if (!(photon_fluence > 0.0)) throw Error(ErrorCode::InvalidArgument, "photon fluence must be positive");
  std::vector<double> counts(expected_fraction.values.size());
  for (int row = 0; row < expected_fraction.height; ++row) {
    std::mt19937_64 gen(stream_seed(seed, static_cast<std::uint64_t>(row)));
    std::normal_distribution<double> normal;
    for (int col = 0; col < expected_fraction.width; ++col) {
      const double mean = photon_fluence * std::max(0.0, expected_fraction.at(col, row));
      double count = 0.0;
      if (mean > kPoissonNormalThreshold) {
        count = std::max(0.0, std::round(mean + std::sqrt(mean) * normal(gen)));
      } else if (mean > 0.0) {
        count = static_cast<double>(std::poisson_distribution<long long>(mean)(gen));
      }
      counts[static_cast<std::size_t>(row) * expected_fraction.width + col] = count;
    }
  }
  return counts;
}

std::vector<double> electronic_noise_field(int width, int height, double sigma, double correlation_radius,
                                           std::uint64_t seed) {
  if (!(sigma >= 0.0) || !(correlation_radius >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "electronic noise parameters must be non-negative");
  std::vector<double> out(static_cast<std::size_t>(width) * height, 0.0);
  if (sigma == 0.0) return out;

  const std::vector<double> kernel =
      correlation_radius > 0.0 ? gaussian_kernel(correlation_radius, true) : std::vector<double>{1.0};
  const int pad = static_cast<int>(kernel.size() / 2);
  const int pw = width + 2 * pad, ph = height + 2 * pad;
  std::vector<double> white(static_cast<std::size_t>(pw) * ph);
  for (int row = 0; row < ph; ++row) {
    std::mt19937_64 gen(stream_seed(seed, static_cast<std::uint64_t>(row)));
    std::normal_distribution<double> normal;
    for (int col = 0; col < pw; ++col) white[static_cast<std::size_t>(row) * pw + col] = normal(gen);
  }
  std::vector<double> horizontal(static_cast<std::size_t>(width) * ph);
  for (int row = 0; row < ph; ++row) {
    for (int col = 0; col < width; ++col) {
      double acc = 0.0;
      for (std::size_t d = 0; d < kernel.size(); ++d) acc += kernel[d] * white[static_cast<std::size_t>(row) * pw + col + d];
      horizontal[static_cast<std::size_t>(row) * width + col] = acc;
    }
  }
  for (int row = 0; row < height; ++row) {
    for (int col = 0; col < width; ++col) {
      double acc = 0.0;
      for (std::size_t d = 0; d < kernel.size(); ++d)
        acc += kernel[d] * horizontal[(static_cast<std::size_t>(row) + d) * width + col];
      out[static_cast<std::size_t>(row) * width + col] = sigma * acc;
    }
  }
  return out;
}

ProjectionImage apply_noise(const ProjectionImage& image, const NoiseConfig& noise, std::uint64_t seed) {
  ProjectionImage out = image;
  if (noise.photon_noise) {
    const std::vector<double> counts = sample_photon_counts(image, noise.photon_fluence, stream_seed(seed, 0));
    for (std::size_t i = 0; i < counts.size(); ++i) out.values[i] = counts[i] / noise.photon_fluence;
  }
  if (noise.electronic_sigma > 0.0) {
    const std::vector<double> field = electronic_noise_field(image.width, image.height, noise.electronic_sigma,
                                                             noise.electronic_correlation_radius, stream_seed(seed, 1));
    for (std::size_t i = 0; i < field.size(); ++i) out.values[i] += field[i];
  }
  for (double& v : out.values) v = std::max(0.0, v);
  return out;
}

// ---------------------------------------------------------------------------

SimulationResult simulate_case(const MaterialVolume& materials, const LabelVolume& labels,
                               const SimulationConfig& config, std::uint64_t seed) {
  if (!(materials.grid == labels.grid)) throw Error(ErrorCode::GridMismatch, "CT and label volumes differ in grid");
  const Grid3& grid = materials.grid;
  const Vec3 target = 0.5 * (grid.lower_corner() + grid.upper_corner());

  SimulationResult out;
  std::mt19937_64 pose_rng(stream_seed(seed, 0));
  out.pose = sample_camera_pose(pose_rng, config.pose, target);
  validate_camera(out.pose);
  validate_grid(grid);
  validate_labels(labels);
  const AttenuationLookup lookup = make_lookup(config.spectrum, config.attenuation);
  out.primary = ProjectionImage(out.pose.cols, out.pose.rows);
  out.mask = MultiLabelMask2D(out.pose.cols, out.pose.rows);
  project<true, true>(grid, &materials, &lookup, &labels, config.min_path_mm, out.pose, config.projection, &out.primary,
                      &out.mask);

  ProjectionImage total = out.primary;
  if (config.scatter.spr > 0.0) {
    const ProjectionImage scatter = estimate_scatter(out.primary, config.scatter.spr, config.scatter.kernel_sigma_px);
    for (std::size_t i = 0; i < total.values.size(); ++i) total.values[i] += scatter.values[i];
  }
  out.xray = apply_noise(total, config.noise, stream_seed(seed, 1));
  return out;
}

SimulationResult simulate_case(const IntensityVolume& ct, const LabelVolume& labels, const SimulationConfig& config,
                               std::uint64_t seed) {
  if (!(ct.grid == labels.grid)) throw Error(ErrorCode::GridMismatch, "CT and label volumes differ in grid");
  return simulate_case(decompose_materials(ct, config.thresholds), labels, config, seed);
}

}  // namespace fracbench
