#pragma once

#include <cstdint>
#include <filesystem>

#include "dmri/fem.hpp"

namespace dmri {

// Truncated eigenbasis of the FEM Laplace operator, S v = lambda M v, with
// the Bloch-Torrey operators projected onto it:
//   P' M P = I,  P' S P = diag(lambda),  A* = P' J* P,  T = P' R P,
//   moments_n = integral of eigenfunction n over the mesh (= P' M 1).
struct LaplaceBasis {
  VecX eigenvalues;  // ms^-1, non-negative, ascending; first ~0 (constant mode)
  MatX eigvecs;      // V x N, M-orthonormal columns
  MatX Ax, Ay, Az;   // N x N, symmetric
  MatX T;            // N x N, zero when T2 infinite
  VecX moments;      // length N

  Eigen::Index size() const { return eigenvalues.size(); }
};

// Either a fixed eigenpair count or a length scale l (um): retain all modes
// with lambda <= d0*(pi/l)^2, capped at `cap`.
struct BasisTruncation {
  int n_eig = 0;             // > 0 selects fixed-count mode
  double length_scale = 0.0; // > 0 selects length-scale mode
  int cap = 200;

  static BasisTruncation count(int n) {
    BasisTruncation t;
    t.n_eig = n;
    return t;
  }
  static BasisTruncation length(double l, int cap = 200) {
    BasisTruncation t;
    t.length_scale = l;
    t.cap = cap;
    return t;
  }
};

enum class EigMethod {
  automatic,  // lanczos when few pairs are wanted or V is large, else dense
  dense,      // full generalized self-adjoint solve (oracle path, V <= ~600)
  lanczos,    // shift-invert Lanczos with full M-reorthogonalization
};

// Smallest eigenpairs of S v = lambda M v, ascending, M-orthonormal, with a
// deterministic sign convention (largest-magnitude entry positive). Residuals
// ||S v - lambda M v|| / ||v|| are driven below `residual_tol` or a
// NumericalError reports them.
LaplaceBasis solve_basis(const FemMatrices& fem, const PhysicsParams& params,
                         const BasisTruncation& truncation,
                         EigMethod method = EigMethod::automatic,
                         double residual_tol = 1e-8);

// Fills Ax/Ay/Az/T/moments by congruence with the sparse FEM matrices.
// Exposed separately so a basis from any source can be completed.
void project_operators(const FemMatrices& fem, const PhysicsParams& params, LaplaceBasis& basis);

// Worst residual ||S v - lambda M v|| / ||v|| over the basis.
double max_eig_residual(const FemMatrices& fem, const LaplaceBasis& basis);

// Binary basis cache, keyed by mesh content hash + physics + truncation.
std::uint64_t basis_cache_key(std::uint64_t mesh_hash, const PhysicsParams& params,
                              const BasisTruncation& truncation);
void save_basis(const LaplaceBasis& basis, const std::filesystem::path& path);
LaplaceBasis load_basis(const std::filesystem::path& path);

}  // namespace dmri
