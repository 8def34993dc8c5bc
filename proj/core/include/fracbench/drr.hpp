#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "fracbench/grid.hpp"
#include "fracbench/labels.hpp"

namespace fracbench {

enum class Material : std::uint8_t { Air = 0, SoftTissue = 1, Bone = 2 };
inline constexpr int kMaterialCount = 3;
const char* to_string(Material m);

// Per-voxel material class and mass density (g/cm^3).
struct MaterialVolume {
  Grid3 grid;
  std::vector<Material> material;
  std::vector<float> density;
};

struct DecompositionThresholds {
  double air_hu = -400.0;
  double bone_hu = 250.0;
};

inline constexpr double kAirDensity = 0.0012;

// HU < air_hu -> air, HU > bone_hu -> bone, otherwise soft tissue. Density is
// water-scaled, max(0, 1 + HU/1000); air is fixed at 0.0012 g/cm^3.
MaterialVolume decompose_materials(const IntensityVolume& ct, const DecompositionThresholds& thresholds = {});

struct SpectrumBin {
  double energy_kev = 0.0;
  double weight = 0.0;
};

// Photon-number weighted source spectrum; weights are normalized to sum to 1.
class Spectrum {
 public:
  // Throws InvalidArgument unless energies are positive and strictly
  // increasing, weights non-negative with a positive sum.
  static Spectrum from_bins(std::vector<SpectrumBin> bins);
  static Spectrum monoenergetic(double energy_kev);
  // Coarse filtered 120 kVp tube spectrum in 10 keV bins (30-120 keV).
  static Spectrum default_tube();

  std::span<const SpectrumBin> bins() const { return bins_; }
  double min_energy() const { return bins_.front().energy_kev; }
  double max_energy() const { return bins_.back().energy_kev; }

 private:
  std::vector<SpectrumBin> bins_;
};

struct AttenuationPoint {
  double energy_kev = 0.0;
  double mass_attenuation = 0.0;  // cm^2/g
};

// Mass attenuation coefficients per material, log-log interpolated.
class AttenuationTable {
 public:
  // Air (dry), ICRU-44 soft tissue and ICRU-44 cortical bone at 10-150 keV.
  static AttenuationTable standard();
  // Throws InvalidArgument unless each table has >= 2 points with strictly
  // increasing energies and positive coefficients.
  static AttenuationTable from_points(std::array<std::vector<AttenuationPoint>, kMaterialCount> points);

  // Throws EnergyRangeError outside the tabulated range.
  double mass_attenuation(Material m, double energy_kev) const;
  bool covers(double lo_kev, double hi_kev) const;
  std::span<const AttenuationPoint> points(Material m) const { return points_[static_cast<int>(m)]; }

 private:
  std::array<std::vector<AttenuationPoint>, kMaterialCount> points_;
};

// Point source and flat detector. Pixel (col, row) has its centre at
// detector_center + ((col + 0.5) / cols - 0.5) * width * u_axis
//                 + ((row + 0.5) / rows - 0.5) * height * v_axis.
struct CameraGeometry {
  Vec3 source;
  Vec3 detector_center;
  Vec3 u_axis{1.0, 0.0, 0.0};
  Vec3 v_axis{0.0, 0.0, 1.0};
  double width_mm = 300.0;
  double height_mm = 300.0;
  int cols = kChallengeDetectorSize;
  int rows = kChallengeDetectorSize;

  Vec3 pixel_center(int col, int row) const;
  // Unit vector from the source towards the detector centre.
  Vec3 principal_direction() const;
};

// Throws InvalidArgument for non-orthonormal axes, a source on the detector
// plane or a non-positive detector size/resolution.
void validate_camera(const CameraGeometry& cam);

// Direction of the principal ray at zero tilt: the patient lies supine in the
// LPS frame, the source sits posterior and rays travel anteriorly (-y).
inline constexpr Vec3 kVerticalRayDirection{0.0, -1.0, 0.0};

struct PoseOptions {
  double max_angle_deg = 60.0;
  double source_to_detector_mm = 1000.0;
  double source_to_target_mm = 600.0;
  double detector_size_mm = 300.0;
  int resolution = kChallengeDetectorSize;
};

// Principal-ray direction uniform over the spherical cap of half-angle
// max_angle_deg around the vertical; the principal ray passes through target.
// Throws InvalidArgument unless 0 <= max_angle_deg <= 90.
CameraGeometry sample_camera_pose(std::mt19937_64& rng, const PoseOptions& options, const Vec3& target);

// Angle (radians) between the principal ray and the vertical.
double polar_angle(const CameraGeometry& cam);

enum class RayIntegrator {
  FixedStep,  // midpoint sampling with a fixed step and nearest-voxel lookup
  Exact,      // exact voxel traversal (incremental Siddon / Amanatides-Woo)
};

struct ProjectionOptions {
  double step_mm = 0.0;  // 0 -> 0.25 * minimum voxel spacing
  RayIntegrator integrator = RayIntegrator::FixedStep;
  unsigned jobs = 1;  // 0 = all cores
};

// Detector image, row-major, values normalized so an unattenuated pixel is 1.
struct ProjectionImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  ProjectionImage() = default;
  ProjectionImage(int w, int h, double fill = 0.0)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
};

// Per-pixel polyenergetic Beer-Lambert transmission through the material
// volume: p(u) = sum_E w(E) exp(-sum_m (mu/rho)_m(E) * int rho_m dl).
// Throws EnergyRangeError when the table does not cover the spectrum.
ProjectionImage forward_project(const MaterialVolume& materials, const Spectrum& spectrum,
                                const AttenuationTable& attenuation, const CameraGeometry& cam,
                                const ProjectionOptions& options = {});

// Bit of label id set at a pixel iff the ray's accumulated path through that
// fragment is at least min_path_mm. Same ray sampling as forward_project.
MultiLabelMask2D project_labels(const LabelVolume& labels, const CameraGeometry& cam, double min_path_mm = 1.0,
                                const ProjectionOptions& options = {});

// Analytic stand-in for learned scatter: spr * GaussianBlur(primary, sigma).
// Edges use symmetric reflection, so the blur preserves the image sum.
ProjectionImage estimate_scatter(const ProjectionImage& primary, double spr = 0.2, double kernel_sigma_px = 40.0);

// Separable Gaussian blur with unit-sum kernel truncated at 3 sigma and
// symmetric (half-sample) reflection at the borders.
std::vector<double> gaussian_blur(std::span<const double> image, int width, int height, double sigma_px);

struct NoiseConfig {
  double photon_fluence = 1.0e5;  // expected photons per unattenuated pixel (N0)
  double electronic_sigma = 0.0;  // read-out noise, normalized detector units
  double electronic_correlation_radius = 1.0;  // Gaussian kernel sigma, pixels
  bool photon_noise = true;
};

inline constexpr double kPoissonNormalThreshold = 1.0e6;

// Poisson photon counts with mean N0 * value per pixel. Above 1e6 expected
// photons the normal approximation is used. Row r draws from stream r of seed.
std::vector<double> sample_photon_counts(const ProjectionImage& expected_fraction, double photon_fluence,
                                         std::uint64_t seed);

// White Gaussian noise of standard deviation sigma convolved with a Gaussian
// kernel of the given radius normalized to unit energy (sum of squares 1), so
// each pixel keeps variance sigma^2. Computed on a padded field.
std::vector<double> electronic_noise_field(int width, int height, double sigma, double correlation_radius,
                                           std::uint64_t seed);

// counts / N0 + correlated electronic noise, clamped at zero.
ProjectionImage apply_noise(const ProjectionImage& image, const NoiseConfig& noise, std::uint64_t seed);

struct ScatterOptions {
  double spr = 0.2;
  double kernel_sigma_px = 40.0;
};

struct SimulationConfig {
  DecompositionThresholds thresholds;
  Spectrum spectrum = Spectrum::default_tube();
  AttenuationTable attenuation = AttenuationTable::standard();
  PoseOptions pose;
  ScatterOptions scatter;
  NoiseConfig noise;
  double min_path_mm = 1.0;
  // Exact traversal by default here: whole-case simulation at 256^3 and 448^2
  // is several times faster than fixed-step sampling.
  ProjectionOptions projection{0.0, RayIntegrator::Exact, 1};
};

struct SimulationResult {
  ProjectionImage xray;     // primary + scatter + noise
  ProjectionImage primary;  // noiseless, scatter-free transmission
  MultiLabelMask2D mask;
  CameraGeometry pose;
};

// decompose -> sample pose -> forward project -> + scatter -> noise -> label
// projection. Image and mask come from a single traversal per pixel and equal
// the separate forward_project / project_labels results. Pose uses stream 0 of seed, noise stream 1. Throws GridMismatch
// when ct and labels disagree in grid.
SimulationResult simulate_case(const IntensityVolume& ct, const LabelVolume& labels, const SimulationConfig& config,
                               std::uint64_t seed);
SimulationResult simulate_case(const MaterialVolume& materials, const LabelVolume& labels,
                               const SimulationConfig& config, std::uint64_t seed);

}  // namespace fracbench
