#pragma once

#include <cstdint>
#include <filesystem>

#include "dmri/types.hpp"

namespace dmri {

// Elements with smaller signed volume than this are considered degenerate.
inline constexpr double kVolumeEps = 1e-12;  // um^3

// Single-compartment tetrahedral finite-element mesh. Coordinates in um.
//
// Invariants established by make_tet_mesh / load_mesh:
//   - every tet index lies in [0, V), V >= 4
//   - all signed tet volumes are positive (canonical orientation)
//   - the vertex graph induced by tet edges is a single connected component
//   - boundary_faces is exactly the set of faces incident to one tet,
//     oriented outward
//
// Vertex-moving operations (deform, spectral decode) keep connectivity and
// may re-derive nothing; positivity of volumes after such maps is checked by
// their callers/tests, not re-enforced here.
struct TetMesh {
  MatX3 vertices;
  MatX4i tets;
  MatX3i boundary_faces;

  Eigen::Index num_vertices() const { return vertices.rows(); }
  Eigen::Index num_tets() const { return tets.rows(); }
};

double tet_signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

// Validates indices/degeneracy/connectivity, orients every tet positively and
// extracts boundary faces. Throws ValidationError on any violation.
TetMesh make_tet_mesh(MatX3 vertices, MatX4i tets);

// Replaces vertex positions, keeping connectivity and boundary faces.
// Does not re-validate volumes; see count_nonpositive_tets.
TetMesh with_vertices(const TetMesh& mesh, MatX3 vertices);

// TetGen-style text files. 1-based indices are accepted and normalized to
// 0-based. .node header "V 3 0 0", rows "idx x y z"; .ele header "T 4 0",
// rows "idx i j k l".
TetMesh load_mesh(const std::filesystem::path& node_path,
                  const std::filesystem::path& ele_path);
void save_mesh(const TetMesh& mesh, const std::filesystem::path& node_path,
               const std::filesystem::path& ele_path);

// Sum of tet volumes (um^3), strictly positive for a valid mesh.
double total_volume(const TetMesh& mesh);

// Midpoint of the axis-aligned bounding box.
Vec3 bounding_box_center(const TetMesh& mesh);

// Number of tets with signed volume <= eps. Nonzero flags an inverted or
// degenerate geometry (possible after spectral decode).
int count_nonpositive_tets(const TetMesh& mesh, double eps = kVolumeEps);

// Stable FNV-1a content hashes, used as cache keys across runs.
std::uint64_t content_hash(const TetMesh& mesh);
std::uint64_t connectivity_hash(const TetMesh& mesh);

}  // namespace dmri
