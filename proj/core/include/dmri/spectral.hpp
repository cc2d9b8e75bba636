#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "dmri/mesh.hpp"
#include "dmri/types.hpp"

namespace dmri {

// One optimizable latent entry: a (spectral mode, coordinate axis) pair.
struct LatentEntry {
  int mode;  // row of the coefficient matrix
  int axis;  // 0=x, 1=y, 2=z
};

// Graph-Laplacian spectral transform for a family of meshes sharing one
// connectivity: vertex positions P (V x 3) map to spectral coefficients
// C = Phi^T P, truncated to the leading n_coeff rows; decode is P = Phi C.
// The latent vector z is the subset of C entries listed in latent_modes.
// The eigenbasis Phi of L = D - A is computed once from a representative
// mesh and reused.
struct SpectralCodec {
  MatX4i ref_tets;
  MatX3i ref_boundary_faces;
  Eigen::Index num_vertices = 0;
  VecX graph_eigenvalues;  // ascending, first = 0
  MatX phi;                // V x V orthonormal
  int n_coeff = 300;
  std::vector<LatentEntry> latent_modes;

  int latent_dim() const { return static_cast<int>(latent_modes.size()); }
};

// Unweighted combinatorial graph Laplacian of an edge list.
MatX graph_laplacian(Eigen::Index num_vertices,
                     const std::vector<std::pair<int, int>>& edges);

// Dense symmetric eigendecomposition with ascending eigenvalues and the
// deterministic sign convention shared with the FEM eigensolver.
void laplacian_eigenbasis(const MatX& laplacian, VecX& eigenvalues, MatX& eigenvectors);

// Vertex adjacency edges induced by the tets (each tet contributes 6 edges).
std::vector<std::pair<int, int>> mesh_edges(const TetMesh& mesh);

// Round-robin default latent layout: modes 2, 3, ... across the x/y/z axes,
// skipping the constant mode so rigid translation is not optimized.
std::vector<LatentEntry> default_latent_modes(int latent_dim, int n_coeff);

SpectralCodec build_codec(const TetMesh& mesh, int n_coeff, int latent_dim);

// C = (Phi^T P) truncated to n_coeff rows. The mesh must share the codec's
// connectivity.
MatX3 encode(const SpectralCodec& codec, const TetMesh& mesh);

struct DecodeResult {
  TetMesh mesh;
  int inverted_tets = 0;  // tets with non-positive volume; 0 for a clean decode
};

// P = Phi(:, 1..n_coeff) C. Total: geometric validity is reported via
// inverted_tets, never enforced.
DecodeResult decode(const SpectralCodec& codec, const MatX3& coefficients);

VecX to_latent(const SpectralCodec& codec, const MatX3& coefficients);
MatX3 from_latent(const SpectralCodec& codec, const VecX& z, const MatX3& base_coefficients);

// Coefficient table (mode, cx, cy, cz) with 17 significant digits.
void write_coefficients_csv(const MatX3& coefficients, const std::filesystem::path& path);

// Binary codec cache keyed by connectivity hash.
std::uint64_t codec_cache_key(std::uint64_t connectivity_hash_value, int n_coeff, int latent_dim);
void save_codec(const SpectralCodec& codec, const std::filesystem::path& path);
SpectralCodec load_codec(const std::filesystem::path& path);

}  // namespace dmri
