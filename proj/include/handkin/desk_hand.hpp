#pragma once

#include "handkin/hand_model.hpp"

namespace handkin {

// Procedural right hand used when no licensed model file is available.
//
// Fingers point along +Y, the thumb sits on -X, the palm lies in the XY plane
// and faces -Z. The mesh is a two-sheet palm, a ring of vertices around the
// wrist, and one tube per finger with a ring at each articulated joint; joint
// rows of the regressor average those rings, fingertip rows select the tube's
// cap vertex. With the default options the model has 778 vertices and the
// standard 21 joints.
struct DeskHandOptions {
  int ring_segments = 8;
  int palm_columns = 16;
  int palm_rows = 15;
  int wrist_segments = 13;
  // Adds a deterministic synthetic pose-corrective basis (amplitude in mm).
  bool with_pose_basis = false;
  double pose_basis_amplitude = 0.5;
};

HandModel make_desk_hand(const DeskHandOptions& options = {});

int desk_hand_vertex_count(const DeskHandOptions& options);

}  // namespace handkin
