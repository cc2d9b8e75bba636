#pragma once

#include <filesystem>
#include <limits>
#include <optional>

#include "dmri/mesh.hpp"
#include "dmri/types.hpp"

namespace dmri {

// Physical constants of the simulated compartment. Units: um, ms, mT.
struct PhysicsParams {
  double d0 = 2.0;  // intrinsic diffusivity, um^2/ms
  std::optional<Eigen::Matrix3d> diffusion_tensor;  // overrides d0*I when set
  double t2 = std::numeric_limits<double>::infinity();  // ms
  double kappa = 0.0;  // boundary permeability, um/ms; impermeable here
  double rho = 1.0;    // initial spin density
  double gamma = kGyromagneticRatio;  // rad ms^-1 mT^-1

  Eigen::Matrix3d diffusion() const {
    return diffusion_tensor ? *diffusion_tensor : Eigen::Matrix3d(d0 * Eigen::Matrix3d::Identity());
  }
  bool has_relaxation() const { return std::isfinite(t2); }
  void validate() const;
};

// Sparse P1 finite-element matrices of the Bloch-Torrey system
//   M dxi/dt = -(S + Q + R + i*gamma*J(g(t))) xi.
// All matrices are V x V. M is SPD; S is symmetric PSD with S*1 = 0;
// Q = 0 (kappa = 0) and R = M/T2 (zero when T2 is infinite);
// Jx/Jy/Jz are the coordinate-weighted mass matrices.
struct FemMatrices {
  SpMat M, S, Q, R, Jx, Jy, Jz;

  Eigen::Index size() const { return M.rows(); }
};

// Assembles all element integrals with exact P1 quadrature. Deterministic
// triplet order, so repeated runs produce bit-identical matrices.
FemMatrices assemble(const TetMesh& mesh, const PhysicsParams& params);

// w_k = integral of basis function phi_k over the mesh (= row sums of M);
// sum(w) equals the total volume.
VecX signal_weights(const TetMesh& mesh);

// Matrix Market coordinate text dump, for cross-checks with external tools.
void write_matrix_market(const SpMat& matrix, const std::filesystem::path& path);

}  // namespace dmri
