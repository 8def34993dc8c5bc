#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "fracbench/drr.hpp"
#include "fracbench/phantom.hpp"

namespace fracbench::io {

// JSON documents for the generator, perturbation and simulation settings.
// Missing keys keep their defaults; unknown keys and wrong types throw
// ParseError so typos do not pass silently.

// {"dims": [x,y,z], "spacing": [..], "seed": n, "layout": "standard",
//  "body": {"center": [..], "radii": [..]}, "soft_tissue_hu", "background_hu",
//  "min_fragment_mm3",
//  "bones": {"sacrum"|"left_hip"|"right_hip": {"center", "radii", "hu",
//            "random_planes", "planes": [{"point": [..], "normal": [..]}]}}}
// With "layout": "standard" (the default) the geometry starts from
// PhantomSpec::standard(dims, spacing) and listed fields override it; with
// "empty" every shape starts at zero size.
PhantomSpec parse_phantom_spec(std::string_view json);
std::string phantom_spec_json(const PhantomSpec& spec);

// {"seed": n, "operations": [{"op": "dilate", "iterations": k}, {"op": "erode", ...},
//  {"op": "delete", "label": id}, {"op": "merge", "keep": id, "absorb": id},
//  {"op": "split", "label": id, "point": [..], "normal": [..]},
//  {"op": "shift", "label": id, "offset_mm": [..]}]}
PerturbationSpec parse_perturbation_spec(std::string_view json);
std::string perturbation_spec_json(const PerturbationSpec& spec);

struct SimulationDocument {
  SimulationConfig config;
  std::optional<std::uint64_t> seed;
};

// {"seed", "thresholds": {"air_hu", "bone_hu"},
//  "spectrum": {"monoenergetic_kev": e} | {"bins": [{"energy_kev", "weight"}]},
//  "pose": {"max_angle_deg", "source_to_detector_mm", "source_to_target_mm",
//           "detector_size_mm", "resolution"},
//  "scatter": {"spr", "kernel_sigma_px"},
//  "noise": {"photon_fluence", "electronic_sigma", "electronic_correlation_radius", "photon_noise"},
//  "min_path_mm", "projection": {"step_mm", "integrator": "fixed_step"|"exact"}}
SimulationDocument parse_simulation_config(std::string_view json);
std::string simulation_config_json(const SimulationDocument& doc);

// {"source", "detector_center", "u_axis", "v_axis", "width_mm", "height_mm",
//  "cols", "rows"} with full-precision numbers.
std::string camera_json(const CameraGeometry& cam);
CameraGeometry parse_camera(std::string_view json);

}  // namespace fracbench::io
