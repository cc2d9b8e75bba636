#include "dmri/fem.hpp"

#include <cstdio>
#include <vector>

namespace dmri {

void PhysicsParams::validate() const {
  if (d0 <= 0.0) throw ValidationError("diffusivity d0 must be positive");
  if (diffusion_tensor) {
    const Eigen::Matrix3d& d = *diffusion_tensor;
    if ((d - d.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw ValidationError("diffusion tensor must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(d);
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw ValidationError("diffusion tensor must be positive definite");
  }
  if (!(t2 > 0.0)) throw ValidationError("T2 must be positive (or infinite)");
  if (kappa != 0.0) throw ValidationError("only impermeable boundaries (kappa = 0) are supported");
  if (rho <= 0.0) throw ValidationError("spin density rho must be positive");
  if (gamma <= 0.0) throw ValidationError("gamma must be positive");
}

FemMatrices assemble(const TetMesh& mesh, const PhysicsParams& params) {
  params.validate();
  const Eigen::Index V = mesh.num_vertices();
  const Eigen::Matrix3d diffusion = params.diffusion();

  std::vector<Triplet> tm, ts, tjx, tjy, tjz;
  const size_t nnz_guess = static_cast<size_t>(mesh.num_tets()) * 16;
  tm.reserve(nnz_guess);
  ts.reserve(nnz_guess);
  tjx.reserve(nnz_guess);
  tjy.reserve(nnz_guess);
  tjz.reserve(nnz_guess);

  for (Eigen::Index t = 0; t < mesh.num_tets(); ++t) {
    const int n[4] = {mesh.tets(t, 0), mesh.tets(t, 1), mesh.tets(t, 2), mesh.tets(t, 3)};
    const Vec3 p0 = mesh.vertices.row(n[0]);
    Eigen::Matrix3d jac;
    jac.col(0) = Vec3(mesh.vertices.row(n[1])) - p0;
    jac.col(1) = Vec3(mesh.vertices.row(n[2])) - p0;
    jac.col(2) = Vec3(mesh.vertices.row(n[3])) - p0;
    const double det = jac.determinant();
    const double vol = det / 6.0;
    if (vol <= kVolumeEps)
      throw ValidationError("degenerate element " + std::to_string(t) +
                            " during assembly (volume " + std::to_string(vol) + ")");

    // Constant P1 gradients: grad phi_i = J^-T * grad_ref phi_i.
    const Eigen::Matrix3d jinv_t = jac.inverse().transpose();
    Eigen::Matrix<double, 3, 4> grads;
    grads.col(0) = jinv_t * Vec3(-1, -1, -1);
    grads.col(1) = jinv_t.col(0);
    grads.col(2) = jinv_t.col(1);
    grads.col(3) = jinv_t.col(2);

    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        const double mass = (i == j ? 2.0 : 1.0) * vol / 20.0;
        const double stiff = vol * grads.col(i).dot(diffusion * grads.col(j));
        // integral x_c * phi_i * phi_j = sum_k coord_k * integral phi_i phi_j phi_k,
        // with the exact monomial weights V/20, V/60, V/120.
        double jc[3] = {0.0, 0.0, 0.0};
        for (int k = 0; k < 4; ++k) {
          double w;
          if (i == j && j == k) {
            w = vol / 20.0;
          } else if (i == j || j == k || i == k) {
            w = vol / 60.0;
          } else {
            w = vol / 120.0;
          }
          jc[0] += mesh.vertices(n[k], 0) * w;
          jc[1] += mesh.vertices(n[k], 1) * w;
          jc[2] += mesh.vertices(n[k], 2) * w;
        }
        tm.emplace_back(n[i], n[j], mass);
        ts.emplace_back(n[i], n[j], stiff);
        tjx.emplace_back(n[i], n[j], jc[0]);
        tjy.emplace_back(n[i], n[j], jc[1]);
        tjz.emplace_back(n[i], n[j], jc[2]);
      }
    }
  }

  FemMatrices fem;
  fem.M.resize(V, V);
  fem.S.resize(V, V);
  fem.Jx.resize(V, V);
  fem.Jy.resize(V, V);
  fem.Jz.resize(V, V);
  fem.M.setFromTriplets(tm.begin(), tm.end());
  fem.S.setFromTriplets(ts.begin(), ts.end());
  fem.Jx.setFromTriplets(tjx.begin(), tjx.end());
  fem.Jy.setFromTriplets(tjy.begin(), tjy.end());
  fem.Jz.setFromTriplets(tjz.begin(), tjz.end());
  fem.Q.resize(V, V);  // kappa = 0: no flux contribution
  if (params.has_relaxation()) {
    fem.R = fem.M * (1.0 / params.t2);
  } else {
    fem.R.resize(V, V);
  }
  return fem;
}

VecX signal_weights(const TetMesh& mesh) {
  VecX w = VecX::Zero(mesh.num_vertices());
  for (Eigen::Index t = 0; t < mesh.num_tets(); ++t) {
    const double vol =
        tet_signed_volume(mesh.vertices.row(mesh.tets(t, 0)), mesh.vertices.row(mesh.tets(t, 1)),
                          mesh.vertices.row(mesh.tets(t, 2)), mesh.vertices.row(mesh.tets(t, 3)));
    for (int i = 0; i < 4; ++i) w[mesh.tets(t, i)] += vol / 4.0;
  }
  return w;
}

void write_matrix_market(const SpMat& matrix, const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw ValidationError("cannot write file: " + path.string());
  std::fprintf(f, "%%%%MatrixMarket matrix coordinate real general\n");
  std::fprintf(f, "%lld %lld %lld\n", static_cast<long long>(matrix.rows()),
               static_cast<long long>(matrix.cols()), static_cast<long long>(matrix.nonZeros()));
  for (int k = 0; k < matrix.outerSize(); ++k) {
    for (SpMat::InnerIterator it(matrix, k); it; ++it) {
      std::fprintf(f, "%lld %lld %.17g\n", static_cast<long long>(it.row() + 1),
                   static_cast<long long>(it.col() + 1), it.value());
    }
  }
  std::fclose(f);
}

}  // namespace dmri
