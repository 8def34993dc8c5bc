#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "expect_error.hpp"
#include "fracbench/drr.hpp"
#include "fracbench/rng.hpp"

using namespace fracbench;

namespace {

// Source above the origin looking straight down -y onto a small detector.
CameraGeometry vertical_camera(int n = 1, double size_mm = 1.0) {
  CameraGeometry cam;
  cam.source = {0.0, 500.0, 0.0};
  cam.detector_center = {0.0, -500.0, 0.0};
  cam.u_axis = {1.0, 0.0, 0.0};
  cam.v_axis = {0.0, 0.0, 1.0};
  cam.cols = cam.rows = n;
  cam.width_mm = cam.height_mm = size_mm;
  return cam;
}

// Uniform slab of `thickness` mm along y centred at the origin, wide in x/z.
MaterialVolume slab(double thickness, Material m, float rho, double spacing = 1.0) {
  const int ny = static_cast<int>(std::lround(thickness / spacing));
  Grid3 g{{41, ny, 41}, {spacing, spacing, spacing}, {-20.5 * spacing, -0.5 * ny * spacing, -20.5 * spacing}};
  return MaterialVolume{g, std::vector<Material>(g.size(), m), std::vector<float>(g.size(), rho)};
}

double mu_per_mm(Material m, double kev) { return 0.1 * AttenuationTable::standard().mass_attenuation(m, kev); }

Grid3 centred_grid(int n, double spacing) {
  return Grid3{{n, n, n}, {spacing, spacing, spacing}, {-0.5 * n * spacing, -0.5 * n * spacing, -0.5 * n * spacing}};
}

void fill_box(LabelVolume& v, Index3 lo, Index3 hi, std::uint8_t id) {
  for (int k = lo[2]; k <= hi[2]; ++k)
    for (int j = lo[1]; j <= hi[1]; ++j)
      for (int i = lo[0]; i <= hi[0]; ++i) v.at(i, j, k) = id;
}

ProjectionOptions fixed_step(double step = 0.0) { return {step, RayIntegrator::FixedStep, 1}; }
ProjectionOptions exact() { return {0.0, RayIntegrator::Exact, 1}; }

}  // namespace

TEST(Decompose, ThresholdsAndDensities) {
  const IntensityVolume ct(Grid3{{5, 1, 1}, {1, 1, 1}, {}}, std::vector<float>{-1000, 0, 1000, -400, 250});
  const MaterialVolume m = decompose_materials(ct);
  EXPECT_EQ(m.material[0], Material::Air);
  EXPECT_FLOAT_EQ(m.density[0], 0.0012f);
  EXPECT_EQ(m.material[1], Material::SoftTissue);
  EXPECT_FLOAT_EQ(m.density[1], 1.0f);
  EXPECT_EQ(m.material[2], Material::Bone);
  EXPECT_FLOAT_EQ(m.density[2], 2.0f);
  // Thresholds are strict: the boundary values stay soft tissue.
  EXPECT_EQ(m.material[3], Material::SoftTissue);
  EXPECT_EQ(m.material[4], Material::SoftTissue);
}

TEST(Spectrum, Validation) {
  EXPECT_FB_ERROR(Spectrum::from_bins({}), InvalidArgument);
  EXPECT_FB_ERROR(Spectrum::from_bins({{50, 1}, {40, 1}}), InvalidArgument);
  EXPECT_FB_ERROR(Spectrum::from_bins({{50, -1}, {60, 2}}), InvalidArgument);
  const Spectrum s = Spectrum::from_bins({{40, 1}, {60, 3}});
  EXPECT_DOUBLE_EQ(s.bins()[0].weight, 0.25);
  EXPECT_DOUBLE_EQ(s.bins()[1].weight, 0.75);
}

TEST(Attenuation, TableValuesAndInterpolation) {
  const AttenuationTable t = AttenuationTable::standard();
  EXPECT_EQ(t.mass_attenuation(Material::SoftTissue, 60.0), 0.2060);
  const double mid = t.mass_attenuation(Material::Bone, std::sqrt(50.0 * 60.0));
  EXPECT_NEAR(mid, std::sqrt(0.4242 * 0.3148), 1e-12);
  EXPECT_FB_ERROR(t.mass_attenuation(Material::Bone, 200.0), EnergyRangeError);
  EXPECT_FB_ERROR(forward_project(slab(10, Material::SoftTissue, 1.0f), Spectrum::monoenergetic(5.0), t,
                                  vertical_camera()),
                  EnergyRangeError);
  // Bone attenuates more than soft tissue, which attenuates more than air per gram.
  for (double e : {20.0, 40.0, 60.0, 100.0}) {
    EXPECT_GT(t.mass_attenuation(Material::Bone, e), t.mass_attenuation(Material::SoftTissue, e));
    EXPECT_GT(t.mass_attenuation(Material::SoftTissue, e), t.mass_attenuation(Material::Air, e));
  }
}

TEST(Pose, ZeroAngleIsVertical) {
  std::mt19937_64 rng(1);
  PoseOptions opt;
  opt.max_angle_deg = 0.0;
  const CameraGeometry cam = sample_camera_pose(rng, opt, {10, 20, 30});
  EXPECT_NEAR(polar_angle(cam), 0.0, 1e-12);
  EXPECT_NEAR(norm(cam.source - Vec3{10, 20, 30}), 600.0, 1e-9);
  EXPECT_NEAR(norm(cam.detector_center - cam.source), 1000.0, 1e-9);
  EXPECT_EQ(cam.cols, 448);
  validate_camera(cam);
}

TEST(Pose, UniformOnTheCap) {
  std::mt19937_64 rng(1);
  const PoseOptions opt;
  const double cos_max = std::cos(std::numbers::pi / 3.0);
  const int n = 100000;
  std::vector<double> u(n), phi(n);
  for (int i = 0; i < n; ++i) {
    const CameraGeometry cam = sample_camera_pose(rng, opt, {});
    const double theta = polar_angle(cam);
    ASSERT_LE(theta, std::numbers::pi / 3.0 + 1e-12);
    u[i] = (1.0 - std::cos(theta)) / (1.0 - cos_max);
    const Vec3 d = cam.principal_direction();
    phi[i] = (std::atan2(d.z, d.x) + std::numbers::pi) / (2.0 * std::numbers::pi);
    validate_camera(cam);
  }
  // Kolmogorov-Smirnov against U(0, 1) at the 1% level.
  for (auto* sample : {&u, &phi}) {
    std::sort(sample->begin(), sample->end());
    double d = 0.0;
    for (int i = 0; i < n; ++i)
      d = std::max({d, std::abs((i + 1.0) / n - (*sample)[i]), std::abs((*sample)[i] - double(i) / n)});
    EXPECT_LT(d, 1.63 / std::sqrt(double(n)));
  }
}

TEST(Pose, SameSeedSamePose) {
  std::mt19937_64 a(5), b(5);
  const CameraGeometry ca = sample_camera_pose(a, {}, {}), cb = sample_camera_pose(b, {}, {});
  EXPECT_EQ(ca.source, cb.source);
  EXPECT_EQ(ca.detector_center, cb.detector_center);
  std::mt19937_64 r(0);
  PoseOptions bad;
  bad.max_angle_deg = 91;
  EXPECT_FB_ERROR(sample_camera_pose(r, bad, {}), InvalidArgument);
}

TEST(Camera, Validation) {
  CameraGeometry cam = vertical_camera();
  cam.v_axis = {1, 0, 0};
  EXPECT_FB_ERROR(validate_camera(cam), InvalidArgument);
  cam = vertical_camera();
  cam.cols = 0;
  EXPECT_FB_ERROR(validate_camera(cam), InvalidArgument);
}

TEST(Projection, VacuumRayIsOne) {
  const MaterialVolume m = slab(10, Material::Bone, 2.0f);
  CameraGeometry cam = vertical_camera(4, 4.0);
  cam.source.x = cam.detector_center.x = 300.0;
  const ProjectionImage p = forward_project(m, Spectrum::default_tube(), AttenuationTable::standard(), cam);
  for (double v : p.values) EXPECT_EQ(v, 1.0);
}

TEST(Projection, BeerLambertSlabs) {
  const Spectrum mono = Spectrum::monoenergetic(60.0);
  const double mu = mu_per_mm(Material::SoftTissue, 60.0);
  for (double t : {5.0, 20.0, 50.0, 100.0, 200.0}) {
    const MaterialVolume m = slab(t, Material::SoftTissue, 1.0f);
    const double expected = std::exp(-mu * t);
    for (const ProjectionOptions& opt : {fixed_step(), exact()}) {
      const double p = forward_project(m, mono, AttenuationTable::standard(), vertical_camera(), opt).values[0];
      EXPECT_LT(std::abs(p / expected - 1.0), 0.005) << "t=" << t;
    }
  }
}

TEST(Projection, ThickerSlabsTransmitLess) {
  const Spectrum mono = Spectrum::monoenergetic(70.0);
  double previous = 1.0;
  for (double t = 2.0; t <= 64.0; t *= 2.0) {
    const double p = forward_project(slab(t, Material::Bone, 1.8f), mono, AttenuationTable::standard(),
                                     vertical_camera(), fixed_step())
                         .values[0];
    EXPECT_LT(p, previous);
    previous = p;
  }
}

TEST(Projection, StepHalvingConvergesOnSlabs) {
  const Spectrum mono = Spectrum::monoenergetic(60.0);
  for (double t : {7.0, 33.0, 120.0}) {
    const MaterialVolume m = slab(t, Material::SoftTissue, 1.0f, 0.8);
    const CameraGeometry cam = vertical_camera(8, 20.0);
    const ProjectionImage a = forward_project(m, mono, AttenuationTable::standard(), cam, fixed_step());
    const ProjectionImage b = forward_project(m, mono, AttenuationTable::standard(), cam, fixed_step(0.1));
    for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_LT(std::abs(b.values[i] / a.values[i] - 1.0), 1e-3);
  }
}

TEST(Projection, RotatedVolumeAndCameraGiveTheSameImage) {
  // 90 degree turn about z: (x, y, z) -> (-y, x, z), exact on a centred cubic grid.
  std::mt19937_64 rng(12);
  const int n = 20;
  const Grid3 g = centred_grid(n, 2.0);
  MaterialVolume m{g, std::vector<Material>(g.size()), std::vector<float>(g.size())};
  LabelVolume labels(g, 0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Index3 c = g.coords(i);
    const bool bone = c[0] > 4 && c[0] < 12 && c[1] > 6 && c[1] < 16 && c[2] > 3 && c[2] < 17;
    m.material[i] = bone ? Material::Bone : static_cast<Material>(rng() % 2);
    m.density[i] = m.material[i] == Material::Air ? kAirDensity : (bone ? 1.8f : 1.0f);
    labels.voxels[i] = bone ? 21 : 0;
  }
  MaterialVolume mr = m;
  LabelVolume lr = labels;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const std::size_t from = g.index(i, j, k), to = g.index(n - 1 - j, i, k);
        mr.material[to] = m.material[from];
        mr.density[to] = m.density[from];
        lr.voxels[to] = labels.voxels[from];
      }
  auto rot = [](Vec3 v) { return Vec3{-v.y, v.x, v.z}; };
  std::mt19937_64 pose_rng(6);
  const CameraGeometry cam = sample_camera_pose(pose_rng, PoseOptions{60, 1000, 600, 80, 40}, {});
  CameraGeometry cr = cam;
  cr.source = rot(cam.source);
  cr.detector_center = rot(cam.detector_center);
  cr.u_axis = rot(cam.u_axis);
  cr.v_axis = rot(cam.v_axis);
  for (const ProjectionOptions& opt : {fixed_step(), exact()}) {
    const auto spectrum = Spectrum::default_tube();
    const ProjectionImage a = forward_project(m, spectrum, AttenuationTable::standard(), cam, opt);
    const ProjectionImage b = forward_project(mr, spectrum, AttenuationTable::standard(), cr, opt);
    for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_NEAR(b.values[i], a.values[i], 0.01 * a.values[i]);
    const MultiLabelMask2D ma = project_labels(labels, cam, 1.0, opt), mb = project_labels(lr, cr, 1.0, opt);
    std::size_t differing = 0, set = 0;
    for (std::size_t i = 0; i < ma.pixels.size(); ++i) {
      differing += ma.pixels[i] != mb.pixels[i];
      set += ma.pixels[i] != 0;
    }
    EXPECT_GT(set, 0u);
    EXPECT_LE(differing, ma.pixels.size() / 100);
  }
}

TEST(Projection, ObliqueRaysSeeLongerPaths) {
  const Spectrum mono = Spectrum::monoenergetic(60.0);
  const double mu = mu_per_mm(Material::SoftTissue, 60.0);
  const double t = 20.0;
  const MaterialVolume m = slab(t, Material::SoftTissue, 1.0f);
  CameraGeometry cam = vertical_camera(5, 40.0);
  const ProjectionImage p = forward_project(m, mono, AttenuationTable::standard(), cam, exact());
  for (int row = 0; row < 5; ++row)
    for (int col = 0; col < 5; ++col) {
      const Vec3 d = normalized(cam.pixel_center(col, row) - cam.source);
      EXPECT_NEAR(p.at(col, row), std::exp(-mu * t / -d.y), 1e-9);
    }
}

TEST(Projection, StackedSlabsAddExponents) {
  const Spectrum mono = Spectrum::monoenergetic(60.0);
  MaterialVolume m = slab(40.0, Material::SoftTissue, 1.0f);
  // Upper half becomes bone at 1.5 g/cm^3.
  for (std::size_t idx = 0; idx < m.material.size(); ++idx)
    if (m.grid.coords(idx)[1] >= 20) {
      m.material[idx] = Material::Bone;
      m.density[idx] = 1.5f;
    }
  const double expected =
      std::exp(-mu_per_mm(Material::SoftTissue, 60.0) * 20.0 - 1.5 * mu_per_mm(Material::Bone, 60.0) * 20.0);
  const double p = forward_project(m, mono, AttenuationTable::standard(), vertical_camera(), fixed_step()).values[0];
  EXPECT_LT(std::abs(p / expected - 1.0), 0.005);
}

TEST(Projection, PolyenergeticIsWeightedSum) {
  const Spectrum two = Spectrum::from_bins({{40, 1}, {80, 1}});
  const MaterialVolume m = slab(30.0, Material::SoftTissue, 1.0f);
  const double expected =
      0.5 * std::exp(-mu_per_mm(Material::SoftTissue, 40.0) * 30) + 0.5 * std::exp(-mu_per_mm(Material::SoftTissue, 80.0) * 30);
  EXPECT_NEAR(forward_project(m, two, AttenuationTable::standard(), vertical_camera(), exact()).values[0], expected,
              1e-12);
}

TEST(Projection, StepHalvingAndIntegratorsAgree) {
  std::mt19937_64 rng(4);
  const Grid3 g = centred_grid(24, 1.5);
  MaterialVolume m{g, std::vector<Material>(g.size()), std::vector<float>(g.size())};
  for (std::size_t i = 0; i < g.size(); ++i) {
    m.material[i] = static_cast<Material>(rng() % 3);
    m.density[i] = m.material[i] == Material::Air ? kAirDensity : 1.0f + 0.5f * static_cast<float>(rng() % 2);
  }
  CameraGeometry cam;
  std::mt19937_64 pose_rng(9);
  cam = sample_camera_pose(pose_rng, PoseOptions{60, 1000, 600, 60, 24}, {});
  const auto spectrum = Spectrum::default_tube();
  const auto table = AttenuationTable::standard();
  const ProjectionImage e = forward_project(m, spectrum, table, cam, exact());
  // Nearest-voxel sampling misattributes up to half a step at every voxel
  // boundary, so the fixed-step result converges on the exact one as the step
  // shrinks.
  auto rms_error = [&](double step) {
    const ProjectionImage a = forward_project(m, spectrum, table, cam, fixed_step(step));
    double sq = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) sq += std::pow(a.values[i] / e.values[i] - 1.0, 2);
    return std::sqrt(sq / static_cast<double>(a.values.size()));
  };
  const double coarse = rms_error(0.375), fine = rms_error(0.375 / 8), finest = rms_error(0.375 / 64);
  EXPECT_LT(coarse, 0.03);
  EXPECT_LT(fine, coarse);
  EXPECT_LT(finest, fine);
  EXPECT_LT(finest, 0.002);
  ProjectionOptions parallel = exact();
  parallel.jobs = 3;
  EXPECT_EQ(forward_project(m, spectrum, table, cam, parallel).values, e.values);
}

TEST(LabelProjection, CubeOnThePrincipalRay) {
  LabelVolume v(centred_grid(40, 1.0), 0);
  fill_box(v, {15, 15, 15}, {24, 24, 24}, 11);
  CameraGeometry cam = vertical_camera(448, 300.0);
  for (const ProjectionOptions& opt : {fixed_step(), exact()}) {
    const MultiLabelMask2D mask = project_labels(v, cam, 1.0, opt);
    EXPECT_TRUE(mask.at(224, 224) & label_bit(11));
    EXPECT_TRUE(mask.at(223, 223) & label_bit(11));
    EXPECT_EQ(mask.at(0, 0), 0u);
  }
}

TEST(LabelProjection, OverlapAndFrustum) {
  LabelVolume v(centred_grid(40, 1.0), 0);
  fill_box(v, {17, 25, 17}, {22, 30, 22}, 1);   // above the origin
  fill_box(v, {17, 8, 17}, {22, 14, 22}, 21);   // below it, same ray
  fill_box(v, {36, 18, 18}, {39, 21, 21}, 12);  // off to the side
  const CameraGeometry cam = vertical_camera(9, 9.0);
  const MultiLabelMask2D mask = project_labels(v, cam, 1.0, exact());
  EXPECT_EQ(mask.at(4, 4), label_bit(1) | label_bit(21));
  for (std::uint32_t w : mask.pixels) EXPECT_EQ(w & label_bit(12), 0u);
}

TEST(LabelProjection, MinimumPathLength) {
  LabelVolume v(centred_grid(10, 1.0), 0);
  fill_box(v, {4, 5, 4}, {5, 5, 5}, 2);  // one voxel thick along the ray
  const CameraGeometry cam = vertical_camera(1, 0.5);
  EXPECT_EQ(project_labels(v, cam, 0.5, exact()).pixels[0], label_bit(2));
  EXPECT_EQ(project_labels(v, cam, 1.5, exact()).pixels[0], 0u);
}

TEST(Scatter, ZeroAndUniform) {
  ProjectionImage primary(30, 20, 0.7);
  for (double v : estimate_scatter(primary, 0.0).values) EXPECT_EQ(v, 0.0);
  for (double v : estimate_scatter(primary, 0.2, 5.0).values) EXPECT_NEAR(v, 0.14, 1e-12);
}

TEST(Scatter, BlurPreservesSum) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  ProjectionImage p(37, 23);
  for (double& v : p.values) v = u(rng);
  const double before = std::accumulate(p.values.begin(), p.values.end(), 0.0);
  const auto blurred = gaussian_blur(p.values, p.width, p.height, 4.0);
  EXPECT_NEAR(std::accumulate(blurred.begin(), blurred.end(), 0.0), before, 1e-9 * before);
}

TEST(Noise, PoissonStatistics) {
  const ProjectionImage flat(200, 200, 1.0);
  const double n0 = 1.0e4;
  const auto counts = sample_photon_counts(flat, n0, 17);
  const double n = static_cast<double>(counts.size());
  const double mean = std::accumulate(counts.begin(), counts.end(), 0.0) / n;
  double var = 0.0;
  for (double c : counts) var += (c - mean) * (c - mean);
  var /= n - 1;
  EXPECT_LT(std::abs(mean - n0), 3.0 * std::sqrt(n0 / n));
  EXPECT_LT(std::abs(var - n0), 3.0 * std::sqrt((n0 + 2.0 * n0 * n0) / n));
  EXPECT_EQ(counts, sample_photon_counts(flat, n0, 17));
}

TEST(Noise, ElectronicSigmaIsPreserved) {
  const double sigma = 0.05;
  for (double radius : {0.0, 1.0, 3.0}) {
    const auto field = electronic_noise_field(300, 300, sigma, radius, 8);
    double sq = 0.0;
    for (double v : field) sq += v * v;
    EXPECT_NEAR(std::sqrt(sq / field.size()), sigma, 0.03 * sigma) << radius;
  }
}

TEST(Noise, VanishesAtHighFluence) {
  ProjectionImage img(64, 64);
  for (std::size_t i = 0; i < img.values.size(); ++i) img.values[i] = 0.2 + 0.7 * (i % 64) / 63.0;
  NoiseConfig cfg;
  cfg.photon_fluence = 1.0e9;
  const ProjectionImage out = apply_noise(img, cfg, 3);
  for (std::size_t i = 0; i < img.values.size(); ++i) EXPECT_NEAR(out.values[i], img.values[i], 1e-3 * img.values[i]);
}

class SimulationTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const Grid3 g = centred_grid(48, 2.0);
    ct = IntensityVolume(g, 0.0f);
    labels = LabelVolume(g, 0);
    for (int k = 18; k < 30; ++k)
      for (int j = 18; j < 30; ++j)
        for (int i = 10; i < 22; ++i) {
          ct.at(i, j, k) = 1200.0f;
          labels.at(i, j, k) = 11;
        }
    config.pose.resolution = 96;
    config.noise.photon_noise = false;
  }
  IntensityVolume ct;
  LabelVolume labels;
  SimulationConfig config;
};

TEST_F(SimulationTest, FusedTraversalMatchesSeparateProjections) {
  const SimulationResult r = simulate_case(ct, labels, config, 21);
  const MaterialVolume m = decompose_materials(ct);
  EXPECT_EQ(r.primary.values, forward_project(m, config.spectrum, config.attenuation, r.pose, config.projection).values);
  EXPECT_EQ(r.mask, project_labels(labels, r.pose, config.min_path_mm, config.projection));
}

TEST_F(SimulationTest, BoneShadowAlignsWithMask) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const SimulationResult r = simulate_case(ct, labels, config, seed);
    double in = 0.0, out = 0.0;
    int n_in = 0, n_out = 0;
    for (std::size_t i = 0; i < r.primary.values.size(); ++i) {
      if (r.mask.pixels[i] & label_bit(11)) {
        in += r.primary.values[i];
        ++n_in;
      } else if (r.primary.values[i] < 1.0) {
        out += r.primary.values[i];
        ++n_out;
      }
    }
    for (std::size_t i = 0; i < r.primary.values.size(); ++i)
      if (r.mask.pixels[i] != 0) EXPECT_LT(r.primary.values[i], 1.0);
    ASSERT_GT(n_in, 0);
    ASSERT_GT(n_out, 0);
    EXPECT_LT(in / n_in, 0.8 * (out / n_out));
  }
}

TEST_F(SimulationTest, DeterministicPerSeed) {
  config.noise.photon_noise = true;
  config.noise.electronic_sigma = 0.01;
  const SimulationResult a = simulate_case(ct, labels, config, 77);
  const SimulationResult b = simulate_case(ct, labels, config, 77);
  EXPECT_EQ(a.xray.values, b.xray.values);
  EXPECT_EQ(a.mask, b.mask);
  EXPECT_NE(a.xray.values, simulate_case(ct, labels, config, 78).xray.values);
}

TEST_F(SimulationTest, GridMismatchRejected) {
  LabelVolume other(centred_grid(10, 2.0), 0);
  EXPECT_FB_ERROR(simulate_case(ct, other, config, 0), GridMismatch);
}

TEST_F(SimulationTest, AirOnlyVolumeIsNearlyUniform) {
  IntensityVolume air(ct.grid, -1000.0f);
  config.scatter.spr = 0.0;
  const SimulationResult r = simulate_case(air, LabelVolume(ct.grid, 0), config, 5);
  for (double v : r.xray.values) EXPECT_GT(v, 0.99);
}
