#pragma once

#include <array>
#include <initializer_list>
#include <string>

#include "dmri/mesh.hpp"

namespace dmri {

enum class DeformKind { bend_twist, fanning, beading };

std::string to_string(DeformKind kind);
DeformKind deform_kind_from_string(const std::string& name);

// Parameters of one deformation. Only the fields of the active kind matter.
struct DeformSpec {
  DeformKind kind = DeformKind::bend_twist;
  double bend = 0.0;            // beta in [0, 1]
  double twist = 0.0;           // 1.0 = one full revolution over the height
  double fan_angle_deg = 0.0;   // [0, 90)
  int bead_count = 0;           // >= 0
  double bead_amplitude = 0.0;  // [0, 0.5]

  void validate() const;
};

// Tetrahedral cylinder aligned with +Z, base at z=0, axis through x=y=0.
// Vertex count lands within 10% of vertex_budget. Ring vertices are placed so
// the polygonal cross-section area equals pi*r^2 exactly, hence the mesh
// volume equals pi*r^2*h up to floating point.
TetMesh canonical_cylinder(double radius, double height, int vertex_budget);

// Vertex at normalized height hn = z/h is rotated about Z by twist*hn*2*pi
// and displaced in X by bend*hn^2*h. The base stays fixed.
TetMesh apply_bend_twist(const TetMesh& mesh, double bend, double twist);

// Height-progressive tilt of cross sections: the local axis direction
// deviates from Z by fan_angle_deg*hn, bending in the XZ plane with no twist.
// Implemented as the shear x += integral tan(theta(z)) dz, which preserves
// volume exactly.
TetMesh apply_fanning(const TetMesh& mesh, double fan_angle_deg);

// Radial coordinate scaled by 1 + amplitude*sin(pi*bead_count*hn)^2, giving
// exactly bead_count swellings along the height; bead_count=0 is identity.
TetMesh apply_beading(const TetMesh& mesh, int bead_count, double amplitude);

TetMesh apply_deform(const TetMesh& mesh, const DeformSpec& spec);

// Exact affine augmentations, applied about the bounding-box center.
struct AugmentOp {
  enum class Kind { scale, rotate90, rotate180 } kind = Kind::scale;
  int axis = 0;          // scale / rotate180
  double factor = 1.0;   // scale
  std::array<int, 3> axes{-1, -1, -1};  // rotate90: applied in order, -1 = unused

  static AugmentOp scale(int axis, double factor);
  static AugmentOp rotate90(std::initializer_list<int> axes);
  static AugmentOp rotate180(int axis);
};

TetMesh augment(const TetMesh& mesh, const AugmentOp& op);

}  // namespace dmri
