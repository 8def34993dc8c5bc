#include "fracbench/io/config.hpp"

#include <initializer_list>
#include <string>

#include "json.hpp"

#include "fracbench/error.hpp"
#include "fracbench/io/file.hpp"

namespace fracbench::io {

using nlohmann::json;

namespace {

[[noreturn]] void parse_fail(const std::string& what) { throw Error(ErrorCode::ParseError, "config: " + what); }

json parse_object(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    parse_fail(e.what());
  }
  if (!doc.is_object()) parse_fail("top level must be an object");
  return doc;
}

void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) parse_fail(std::string(where) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (std::string_view a : allowed) ok = ok || key == a;
    if (!ok) parse_fail("unknown key '" + key + "' in " + std::string(where));
  }
}

template <typename T>
void read_into(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    parse_fail(std::string("wrong type for '") + key + "'");
  }
}

void read_vec(const json& j, const char* key, Vec3& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() || !v[2].is_number())
    parse_fail(std::string("'") + key + "' must be an array of three numbers");
  out = {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

json vec_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

FragmentLabel read_label(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number_integer()) parse_fail(std::string("'") + key + "' must be a label id");
  return decode_label(j.at(key).get<int>());
}

const char* bone_key(Anatomy a) {
  switch (a) {
    case Anatomy::Sacrum: return "sacrum";
    case Anatomy::LeftHip: return "left_hip";
    case Anatomy::RightHip: return "right_hip";
  }
  return "?";
}

Plane read_plane(const json& j, std::string_view where) {
  check_keys(j, where, {"point", "normal"});
  Plane p;
  read_vec(j, "point", p.point);
  read_vec(j, "normal", p.normal);
  if (norm(p.normal) == 0.0) parse_fail(std::string(where) + ": plane normal must be non-zero");
  return p;
}

json plane_json(const Plane& p) { return {{"point", vec_json(p.point)}, {"normal", vec_json(p.normal)}}; }

}  // namespace

PhantomSpec parse_phantom_spec(std::string_view text) {
  const json doc = parse_object(text);
  check_keys(doc, "phantom spec",
             {"dims", "spacing", "seed", "layout", "body", "soft_tissue_hu", "background_hu", "min_fragment_mm3", "bones"});
  std::array<int, 3> dims{128, 128, 128};
  Vec3 spacing{2.0, 2.0, 2.0};
  read_into(doc, "dims", dims);
  read_vec(doc, "spacing", spacing);
  std::string layout = "standard";
  read_into(doc, "layout", layout);
  PhantomSpec spec;
  if (layout == "standard") {
    spec = PhantomSpec::standard(dims, spacing);
  } else if (layout == "empty") {
    spec.dims = dims;
    spec.spacing = spacing;
  } else {
    parse_fail("layout must be 'standard' or 'empty'");
  }
  read_into(doc, "seed", spec.seed);
  read_into(doc, "soft_tissue_hu", spec.soft_tissue_hu);
  read_into(doc, "background_hu", spec.background_hu);
  read_into(doc, "min_fragment_mm3", spec.min_fragment_mm3);
  if (doc.contains("body")) {
    check_keys(doc.at("body"), "body", {"center", "radii"});
    read_vec(doc.at("body"), "center", spec.body.center);
    read_vec(doc.at("body"), "radii", spec.body.radii);
  }
  if (doc.contains("bones")) {
    const json& bones = doc.at("bones");
    check_keys(bones, "bones", {"sacrum", "left_hip", "right_hip"});
    for (Anatomy a : kAnatomies) {
      if (!bones.contains(bone_key(a))) continue;
      const json& b = bones.at(bone_key(a));
      const std::string where = std::string("bones.") + bone_key(a);
      check_keys(b, where, {"center", "radii", "hu", "random_planes", "planes"});
      BoneSpec& bone = spec.bones[static_cast<std::size_t>(code(a))];
      read_vec(b, "center", bone.shape.center);
      read_vec(b, "radii", bone.shape.radii);
      read_into(b, "hu", bone.hu);
      read_into(b, "random_planes", bone.random_planes);
      if (b.contains("planes")) {
        if (!b.at("planes").is_array()) parse_fail(where + ".planes must be an array");
        bone.fracture_planes.clear();
        for (const json& p : b.at("planes")) bone.fracture_planes.push_back(read_plane(p, where + ".planes"));
      }
      if (bone.random_planes < 0 ||
          bone.fracture_planes.size() + static_cast<std::size_t>(bone.random_planes) > kMaxFracturePlanes)
        parse_fail(where + ": between 0 and 9 fracture planes allowed");
    }
  }
  for (int a = 0; a < 3; ++a) {
    if (spec.dims[a] <= 0 || !(spec.spacing[a] > 0.0)) parse_fail("dims and spacing must be positive");
  }
  return spec;
}

std::string phantom_spec_json(const PhantomSpec& spec) {
  json bones = json::object();
  for (Anatomy a : kAnatomies) {
    const BoneSpec& b = spec.bones[static_cast<std::size_t>(code(a))];
    json planes = json::array();
    for (const Plane& p : b.fracture_planes) planes.push_back(plane_json(p));
    bones[bone_key(a)] = {{"center", vec_json(b.shape.center)},
                          {"radii", vec_json(b.shape.radii)},
                          {"hu", b.hu},
                          {"random_planes", b.random_planes},
                          {"planes", std::move(planes)}};
  }
  json doc = {{"layout", "empty"},
              {"dims", spec.dims},
              {"spacing", vec_json(spec.spacing)},
              {"seed", spec.seed},
              {"body", {{"center", vec_json(spec.body.center)}, {"radii", vec_json(spec.body.radii)}}},
              {"soft_tissue_hu", spec.soft_tissue_hu},
              {"background_hu", spec.background_hu},
              {"min_fragment_mm3", spec.min_fragment_mm3},
              {"bones", std::move(bones)}};
  return doc.dump(2) + '\n';
}

PerturbationSpec parse_perturbation_spec(std::string_view text) {
  const json doc = parse_object(text);
  check_keys(doc, "perturbation spec", {"seed", "operations"});
  PerturbationSpec spec;
  read_into(doc, "seed", spec.seed);
  if (!doc.contains("operations")) return spec;
  if (!doc.at("operations").is_array()) parse_fail("operations must be an array");
  for (const json& o : doc.at("operations")) {
    if (!o.is_object() || !o.contains("op") || !o.at("op").is_string()) parse_fail("every operation needs an 'op'");
    const std::string op = o.at("op").get<std::string>();
    if (op == "dilate" || op == "erode") {
      check_keys(o, op, {"op", "iterations"});
      int k = 1;
      read_into(o, "iterations", k);
      if (k < 0) parse_fail(op + ": iterations must be non-negative");
      spec.operations.push_back(op == "dilate" ? PerturbOp{DilateOp{k}} : PerturbOp{ErodeOp{k}});
    } else if (op == "delete") {
      check_keys(o, op, {"op", "label"});
      spec.operations.push_back(DeleteFragmentOp{read_label(o, "label")});
    } else if (op == "merge") {
      check_keys(o, op, {"op", "keep", "absorb"});
      spec.operations.push_back(MergeOp{read_label(o, "keep"), read_label(o, "absorb")});
    } else if (op == "split") {
      check_keys(o, op, {"op", "label", "point", "normal"});
      json plane = {{"point", o.value("point", json::array({0, 0, 0}))}, {"normal", o.value("normal", json())}};
      spec.operations.push_back(SplitOp{read_label(o, "label"), read_plane(plane, "split")});
    } else if (op == "shift") {
      check_keys(o, op, {"op", "label", "offset_mm"});
      ShiftOp s{read_label(o, "label"), {}};
      read_vec(o, "offset_mm", s.offset_mm);
      spec.operations.push_back(s);
    } else {
      parse_fail("unknown operation '" + op + "'");
    }
  }
  return spec;
}

std::string perturbation_spec_json(const PerturbationSpec& spec) {
  json ops = json::array();
  for (const PerturbOp& op : spec.operations) {
    std::visit(
        [&](const auto& o) {
          using T = std::decay_t<decltype(o)>;
          if constexpr (std::is_same_v<T, DilateOp>) {
            ops.push_back({{"op", "dilate"}, {"iterations", o.iterations}});
          } else if constexpr (std::is_same_v<T, ErodeOp>) {
            ops.push_back({{"op", "erode"}, {"iterations", o.iterations}});
          } else if constexpr (std::is_same_v<T, DeleteFragmentOp>) {
            ops.push_back({{"op", "delete"}, {"label", encode_label(o.label)}});
          } else if constexpr (std::is_same_v<T, MergeOp>) {
            ops.push_back({{"op", "merge"}, {"keep", encode_label(o.keep)}, {"absorb", encode_label(o.absorb)}});
          } else if constexpr (std::is_same_v<T, SplitOp>) {
            ops.push_back({{"op", "split"},
                           {"label", encode_label(o.label)},
                           {"point", vec_json(o.plane.point)},
                           {"normal", vec_json(o.plane.normal)}});
          } else {
            ops.push_back({{"op", "shift"}, {"label", encode_label(o.label)}, {"offset_mm", vec_json(o.offset_mm)}});
          }
        },
        op);
  }
  return json({{"seed", spec.seed}, {"operations", std::move(ops)}}).dump(2) + '\n';
}

SimulationDocument parse_simulation_config(std::string_view text) {
  const json doc = parse_object(text);
  check_keys(doc, "simulation config",
             {"seed", "thresholds", "spectrum", "pose", "scatter", "noise", "min_path_mm", "projection"});
  SimulationDocument out;
  SimulationConfig& c = out.config;
  if (doc.contains("seed")) {
    std::uint64_t seed = 0;
    read_into(doc, "seed", seed);
    out.seed = seed;
  }
  if (doc.contains("thresholds")) {
    const json& t = doc.at("thresholds");
    check_keys(t, "thresholds", {"air_hu", "bone_hu"});
    read_into(t, "air_hu", c.thresholds.air_hu);
    read_into(t, "bone_hu", c.thresholds.bone_hu);
    if (!(c.thresholds.air_hu < c.thresholds.bone_hu)) parse_fail("air_hu must be below bone_hu");
  }
  if (doc.contains("spectrum")) {
    const json& s = doc.at("spectrum");
    check_keys(s, "spectrum", {"monoenergetic_kev", "bins"});
    if (s.contains("monoenergetic_kev") == s.contains("bins"))
      parse_fail("spectrum needs exactly one of monoenergetic_kev or bins");
    if (s.contains("monoenergetic_kev")) {
      double e = 0.0;
      read_into(s, "monoenergetic_kev", e);
      c.spectrum = Spectrum::monoenergetic(e);
    } else {
      std::vector<SpectrumBin> bins;
      if (!s.at("bins").is_array()) parse_fail("spectrum.bins must be an array");
      for (const json& b : s.at("bins")) {
        check_keys(b, "spectrum bin", {"energy_kev", "weight"});
        SpectrumBin bin;
        read_into(b, "energy_kev", bin.energy_kev);
        read_into(b, "weight", bin.weight);
        bins.push_back(bin);
      }
      c.spectrum = Spectrum::from_bins(std::move(bins));
    }
  }
  if (doc.contains("pose")) {
    const json& p = doc.at("pose");
    check_keys(p, "pose",
               {"max_angle_deg", "source_to_detector_mm", "source_to_target_mm", "detector_size_mm", "resolution"});
    read_into(p, "max_angle_deg", c.pose.max_angle_deg);
    read_into(p, "source_to_detector_mm", c.pose.source_to_detector_mm);
    read_into(p, "source_to_target_mm", c.pose.source_to_target_mm);
    read_into(p, "detector_size_mm", c.pose.detector_size_mm);
    read_into(p, "resolution", c.pose.resolution);
  }
  if (doc.contains("scatter")) {
    const json& s = doc.at("scatter");
    check_keys(s, "scatter", {"spr", "kernel_sigma_px"});
    read_into(s, "spr", c.scatter.spr);
    read_into(s, "kernel_sigma_px", c.scatter.kernel_sigma_px);
  }
  if (doc.contains("noise")) {
    const json& n = doc.at("noise");
    check_keys(n, "noise", {"photon_fluence", "electronic_sigma", "electronic_correlation_radius", "photon_noise"});
    read_into(n, "photon_fluence", c.noise.photon_fluence);
    read_into(n, "electronic_sigma", c.noise.electronic_sigma);
    read_into(n, "electronic_correlation_radius", c.noise.electronic_correlation_radius);
    read_into(n, "photon_noise", c.noise.photon_noise);
  }
  read_into(doc, "min_path_mm", c.min_path_mm);
  if (doc.contains("projection")) {
    const json& p = doc.at("projection");
    check_keys(p, "projection", {"step_mm", "integrator"});
    read_into(p, "step_mm", c.projection.step_mm);
    std::string integrator = c.projection.integrator == RayIntegrator::Exact ? "exact" : "fixed_step";
    read_into(p, "integrator", integrator);
    if (integrator == "exact") {
      c.projection.integrator = RayIntegrator::Exact;
    } else if (integrator == "fixed_step") {
      c.projection.integrator = RayIntegrator::FixedStep;
    } else {
      parse_fail("integrator must be 'exact' or 'fixed_step'");
    }
  }
  return out;
}

std::string simulation_config_json(const SimulationDocument& d) {
  const SimulationConfig& c = d.config;
  json bins = json::array();
  for (const SpectrumBin& b : c.spectrum.bins()) bins.push_back({{"energy_kev", b.energy_kev}, {"weight", b.weight}});
  json doc = {
      {"thresholds", {{"air_hu", c.thresholds.air_hu}, {"bone_hu", c.thresholds.bone_hu}}},
      {"spectrum", {{"bins", std::move(bins)}}},
      {"pose",
       {{"max_angle_deg", c.pose.max_angle_deg},
        {"source_to_detector_mm", c.pose.source_to_detector_mm},
        {"source_to_target_mm", c.pose.source_to_target_mm},
        {"detector_size_mm", c.pose.detector_size_mm},
        {"resolution", c.pose.resolution}}},
      {"scatter", {{"spr", c.scatter.spr}, {"kernel_sigma_px", c.scatter.kernel_sigma_px}}},
      {"noise",
       {{"photon_fluence", c.noise.photon_fluence},
        {"electronic_sigma", c.noise.electronic_sigma},
        {"electronic_correlation_radius", c.noise.electronic_correlation_radius},
        {"photon_noise", c.noise.photon_noise}}},
      {"min_path_mm", c.min_path_mm},
      {"projection",
       {{"step_mm", c.projection.step_mm},
        {"integrator", c.projection.integrator == RayIntegrator::Exact ? "exact" : "fixed_step"}}},
  };
  if (d.seed) doc["seed"] = *d.seed;
  return doc.dump(2) + '\n';
}

std::string camera_json(const CameraGeometry& cam) {
  const json doc = {{"source", vec_json(cam.source)},       {"detector_center", vec_json(cam.detector_center)},
                    {"u_axis", vec_json(cam.u_axis)},       {"v_axis", vec_json(cam.v_axis)},
                    {"width_mm", cam.width_mm},             {"height_mm", cam.height_mm},
                    {"cols", cam.cols},                     {"rows", cam.rows},
                    {"polar_angle_deg", polar_angle(cam) * 180.0 / 3.14159265358979323846}};
  return doc.dump(2) + '\n';
}

CameraGeometry parse_camera(std::string_view text) {
  const json doc = parse_object(text);
  check_keys(doc, "camera",
             {"source", "detector_center", "u_axis", "v_axis", "width_mm", "height_mm", "cols", "rows", "polar_angle_deg"});
  CameraGeometry cam;
  read_vec(doc, "source", cam.source);
  read_vec(doc, "detector_center", cam.detector_center);
  read_vec(doc, "u_axis", cam.u_axis);
  read_vec(doc, "v_axis", cam.v_axis);
  read_into(doc, "width_mm", cam.width_mm);
  read_into(doc, "height_mm", cam.height_mm);
  read_into(doc, "cols", cam.cols);
  read_into(doc, "rows", cam.rows);
  return cam;
}

}  // namespace fracbench::io
