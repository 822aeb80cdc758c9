#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "handkin/array_bundle.hpp"
#include "handkin/hand_model.hpp"

namespace handkin {

// Model file: an ArrayBundle with attributes
//   kind=hand_model unit=mm name vertex_count joint_count articulated_count
//   shape_count face_count has_pose_basis
// and arrays
//   rest_vertices (V,3) f32, shape_basis (10,V,3) f32, pose_basis (135,V,3) f32
//   [optional], joint_regressor (21,V) f32, skinning_weights (V,16) f32,
//   parents (21) i32, faces (F,3) i32.
ArrayBundle model_to_bundle(const HandModel& model);
HandModel model_from_bundle(const ArrayBundle& bundle);

enum class ModelEncoding { binary, text };
void save_model(const HandModel& model, const std::filesystem::path& path,
                ModelEncoding encoding = ModelEncoding::binary);
HandModel load_model(const std::filesystem::path& path);

// Model named by the HANDKIN_MODEL environment variable, else the built-in desk hand.
HandModel default_model();
inline constexpr const char* kModelEnvVar = "HANDKIN_MODEL";

// MANO-layout arrays: v_template (V,3), shapedirs (V,3,10), posedirs (V,3,135)
// [optional], J_regressor (16,V), weights (V,16), f (F,3), all in the unit
// given by the bundle's "unit" attribute (m when absent). Joints are reordered
// into this library's layout and fingertip rows select the given vertices.
struct ManoConversion {
  // Thumb, index, middle, ring, little.
  std::array<int, kFingerCount> tip_vertices = {745, 317, 444, 556, 673};
};
HandModel model_from_mano_arrays(const ArrayBundle& mano, const ManoConversion& options = {});

// MANO articulation order (index, middle, little, ring, thumb) <-> this layout.
Articulation articulation_from_mano(const Articulation& mano);
Articulation articulation_to_mano(const Articulation& ours);

// Wavefront OBJ, millimeters, 1-based face indices, fixed 9-digit formatting.
std::string mesh_to_obj(const Mesh& mesh);
void save_obj(const Mesh& mesh, const std::filesystem::path& path);

}  // namespace handkin
