#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dmri/laplace_eig.hpp"
#include "fixtures.hpp"

using namespace dmri;

namespace {

struct BasisFixture {
  FemMatrices fem;
  LaplaceBasis basis;
};

// 40-eigenpair basis on the small cylinder, shared across cases.
const BasisFixture& small_fixture() {
  static const BasisFixture fx = [] {
    BasisFixture out;
    out.fem = assemble(dmri::testing::cylinder_small(), PhysicsParams{});
    out.basis = solve_basis(out.fem, PhysicsParams{}, BasisTruncation::count(40));
    return out;
  }();
  return fx;
}

}  // namespace

TEST_SUITE("laplace_eig") {

TEST_CASE("constant mode: lambda_1 ~ 0 with eigenvector 1/sqrt(volume)") {
  const auto& [fem, basis] = small_fixture();
  REQUIRE(basis.size() == 40);
  CHECK(std::abs(basis.eigenvalues[0]) < 1e-8 * basis.eigenvalues[1]);
  const double expect = 1.0 / std::sqrt(total_volume(dmri::testing::cylinder_small()));
  for (Eigen::Index i = 0; i < basis.eigvecs.rows(); ++i)
    CHECK(basis.eigvecs(i, 0) == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("eigenvalues ascend and residuals meet the contract") {
  const auto& [fem, basis] = small_fixture();
  for (Eigen::Index i = 1; i < basis.size(); ++i)
    CHECK(basis.eigenvalues[i] >= basis.eigenvalues[i - 1]);
  CHECK(max_eig_residual(fem, basis) < 1e-8);
}

TEST_CASE("basis is M-orthonormal and diagonalizes S") {
  const auto& [fem, basis] = small_fixture();
  const MatX gram = basis.eigvecs.transpose() * (fem.M * basis.eigvecs);
  CHECK((gram - MatX::Identity(40, 40)).cwiseAbs().maxCoeff() < 1e-8);
  const MatX proj = basis.eigvecs.transpose() * (fem.S * basis.eigvecs);
  CHECK((proj - MatX(basis.eigenvalues.asDiagonal())).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("elongated box: lambda_2 matches the analytic interval mode") {
  // Neumann eigenvalue of a box, lowest mode along the long axis:
  // lambda = d0 * (pi/a)^2.
  const PhysicsParams params;
  const TetMesh box = dmri::testing::box_mesh(24, 2, 2, 10.0, 1.0, 1.0);
  const FemMatrices fem = assemble(box, params);
  const LaplaceBasis basis = solve_basis(fem, params, BasisTruncation::count(4));
  const double analytic = params.d0 * std::pow(std::numbers::pi / 10.0, 2);
  CHECK(basis.eigenvalues[1] == doctest::Approx(analytic).epsilon(0.05));
}

TEST_CASE("lanczos and dense paths agree") {
  const auto& [fem, basis] = small_fixture();
  const LaplaceBasis dense =
      solve_basis(fem, PhysicsParams{}, BasisTruncation::count(40), EigMethod::dense);
  const LaplaceBasis lanczos =
      solve_basis(fem, PhysicsParams{}, BasisTruncation::count(40), EigMethod::lanczos);
  CHECK((dense.eigenvalues - lanczos.eigenvalues).cwiseAbs().maxCoeff() <
        1e-8 * std::max(1.0, dense.eigenvalues.maxCoeff()));
}

TEST_CASE("doubling n_eig preserves the leading eigenvalues") {
  const auto& [fem, basis] = small_fixture();
  const LaplaceBasis more = solve_basis(fem, PhysicsParams{}, BasisTruncation::count(80));
  CHECK((more.eigenvalues.head(40) - basis.eigenvalues).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("requesting more eigenpairs than vertices fails") {
  const auto& [fem, basis] = small_fixture();
  CHECK_THROWS_AS(
      solve_basis(fem, PhysicsParams{}, BasisTruncation::count(static_cast<int>(fem.size()) + 1)),
      ValidationError);
}

TEST_CASE("length-scale truncation keeps modes below d0 (pi/l)^2") {
  const PhysicsParams params;
  const auto& [fem, basis40] = small_fixture();
  const double l = 0.8;
  const LaplaceBasis basis = solve_basis(fem, params, BasisTruncation::length(l));
  const double lambda_max = params.d0 * std::pow(std::numbers::pi / l, 2);
  CHECK(basis.eigenvalues[basis.size() - 1] <= lambda_max);
  // The next mode (from the larger fixed-count solve) exceeds the cutoff.
  if (basis.size() < 40) CHECK(basis40.eigenvalues[basis.size()] > lambda_max);
}

TEST_CASE("moments: sqrt(volume) in the constant mode, ~0 elsewhere") {
  const auto& [fem, basis] = small_fixture();
  const double vol = total_volume(dmri::testing::cylinder_small());
  CHECK(basis.moments[0] == doctest::Approx(std::sqrt(vol)).epsilon(1e-8));
  CHECK(basis.moments.tail(basis.size() - 1).cwiseAbs().maxCoeff() < 1e-8 * std::sqrt(vol));
}

TEST_CASE("projected gradient operators are symmetric and bounded by the extent") {
  const auto& [fem, basis] = small_fixture();
  CHECK((basis.Ax - basis.Ax.transpose()).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((basis.Ay - basis.Ay.transpose()).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((basis.Az - basis.Az.transpose()).cwiseAbs().maxCoeff() < 1e-10);
  const auto& mesh = dmri::testing::cylinder_small();
  const double max_x = mesh.vertices.col(0).cwiseAbs().maxCoeff();
  CHECK(basis.Ax.cwiseAbs().maxCoeff() <= max_x * (1.0 + 1e-10));
}

TEST_CASE("translating the mesh shifts Ax by exactly t_x I") {
  const PhysicsParams params;
  const auto& mesh = dmri::testing::cylinder_small();
  const double tx = 3.25;
  const TetMesh moved =
      with_vertices(mesh, MatX3(mesh.vertices.rowwise() + Vec3(tx, 0, 0).transpose()));
  const FemMatrices fem0 = assemble(mesh, params);
  const FemMatrices fem1 = assemble(moved, params);
  const LaplaceBasis b0 = solve_basis(fem0, params, BasisTruncation::count(12));
  const LaplaceBasis b1 = solve_basis(fem1, params, BasisTruncation::count(12));
  // Eigenvectors may differ by sign/degenerate mixing; compare through the
  // invariant combination P1' Jx1 P1 = P0' Jx0 P0 + tx I, transported by the
  // M-orthogonal alignment Q = P1' M P0.
  const MatX q = b1.eigvecs.transpose() * (fem1.M * b0.eigvecs);
  const MatX ax1_in_b0 = q.transpose() * b1.Ax * q;
  CHECK((ax1_in_b0 - b0.Ax - tx * MatX::Identity(12, 12)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("T is zero for infinite T2 and ~I/T2 otherwise") {
  const auto& [fem, basis] = small_fixture();
  CHECK(basis.T.cwiseAbs().maxCoeff() == 0.0);

  PhysicsParams relax;
  relax.t2 = 50.0;
  const FemMatrices fem_r = assemble(dmri::testing::cylinder_small(), relax);
  const LaplaceBasis basis_r = solve_basis(fem_r, relax, BasisTruncation::count(12));
  CHECK((basis_r.T - MatX::Identity(12, 12) / 50.0).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("solve is deterministic across repeated runs") {
  const auto& [fem, basis] = small_fixture();
  const LaplaceBasis again = solve_basis(fem, PhysicsParams{}, BasisTruncation::count(40));
  CHECK((again.eigenvalues - basis.eigenvalues).cwiseAbs().maxCoeff() == 0.0);
  CHECK((again.eigvecs - basis.eigvecs).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("basis cache round-trips bit-exactly") {
  dmri::testing::TempDir dir("basis");
  const auto& [fem, basis] = small_fixture();
  const auto path = dir.path() / "fixture.bas";
  save_basis(basis, path);
  const LaplaceBasis loaded = load_basis(path);
  CHECK((loaded.eigenvalues - basis.eigenvalues).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.eigvecs - basis.eigvecs).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.Ax - basis.Ax).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.moments - basis.moments).cwiseAbs().maxCoeff() == 0.0);

  const auto key_a = basis_cache_key(content_hash(dmri::testing::cylinder_small()),
                                     PhysicsParams{}, BasisTruncation::count(40));
  const auto key_b = basis_cache_key(content_hash(dmri::testing::cylinder_small()),
                                     PhysicsParams{}, BasisTruncation::count(41));
  CHECK(key_a != key_b);
}

}  // TEST_SUITE
