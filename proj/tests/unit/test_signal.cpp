#include <doctest.h>

#include <cmath>
#include <random>

#include "dmri/deform.hpp"
#include "dmri/signal.hpp"
#include "fixtures.hpp"

using namespace dmri;

namespace {

struct SimFixture {
  PhysicsParams params;
  FemMatrices fem;
  LaplaceBasis basis;
};

const SimFixture& small_sim() {
  static const SimFixture fx = [] {
    SimFixture out;
    out.fem = assemble(dmri::testing::cylinder_small(), out.params);
    out.basis = solve_basis(out.fem, out.params, BasisTruncation::count(40));
    return out;
  }();
  return fx;
}

CVecX random_complex_vector(Eigen::Index n, std::mt19937& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  CVecX v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = cdouble(gauss(rng), gauss(rng));
  return v;
}

}  // namespace

TEST_SUITE("signal") {

TEST_CASE("exp_propagate: zero operator is the identity") {
  std::mt19937 rng(3);
  const CVecX nu = random_complex_vector(6, rng);
  const CVecX out = exp_propagate(CMatX::Zero(6, 6), 2.5, nu);
  CHECK((out - nu).norm() < 1e-14 * nu.norm());
}

TEST_CASE("exp_propagate: real diagonal operator decays elementwise") {
  const int n = 5;
  VecX lambda(n);
  lambda << 0.0, 0.3, 1.1, 2.4, 7.0;
  CMatX k = CMatX::Zero(n, n);
  for (int i = 0; i < n; ++i) k(i, i) = lambda[i];
  std::mt19937 rng(4);
  const CVecX nu = random_complex_vector(n, rng);
  const CVecX out = exp_propagate(k, 0.7, nu);
  for (int i = 0; i < n; ++i)
    CHECK(std::abs(out[i] - std::exp(-lambda[i] * 0.7) * nu[i]) < 1e-13);
}

TEST_CASE("exp_propagate matches a 1000-step Euler oracle on a random 5x5") {
  std::mt19937 rng(12);
  std::normal_distribution<double> gauss(0.0, 1.0);
  CMatX k(5, 5);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) k(i, j) = cdouble(gauss(rng), gauss(rng)) * 0.12;
  }
  const CVecX nu = random_complex_vector(5, rng);
  const double dt = 1.0;

  CVecX euler = nu;
  const int steps = 1000;
  const CMatX step = CMatX::Identity(5, 5) - (dt / steps) * k;
  for (int s = 0; s < steps; ++s) euler = step * euler;

  const CVecX exact = exp_propagate(k, dt, nu);
  CHECK((exact - euler).norm() / exact.norm() < 1e-4);
}

TEST_CASE("exp_propagate passes the halved-step self-check") {
  std::mt19937 rng(21);
  std::normal_distribution<double> gauss(0.0, 1.0);
  CMatX k(8, 8);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) k(i, j) = cdouble(gauss(rng), gauss(rng));
  }
  const CVecX nu = random_complex_vector(8, rng);
  const CVecX whole = exp_propagate(k, 1.3, nu);
  const CVecX halved = exp_propagate(k, 0.65, exp_propagate(k, 0.65, nu));
  CHECK((whole - halved).norm() / whole.norm() < 1e-10);
}

TEST_CASE("exp_propagate reports overflow for extreme operators") {
  const CMatX k = CMatX::Identity(3, 3) * 1e25;
  const CVecX nu = CVecX::Ones(3);
  CHECK_THROWS_AS(exp_propagate(k, 1e5, nu), NumericalError);
}

TEST_CASE("g = 0 signal equals rho * volume") {
  const auto& fx = small_sim();
  const GradientScheme scheme = make_scheme(3, {5.0}, {1.0});
  const SignalSet signals = simulate(fx.basis, fx.params, scheme);
  const double vol = total_volume(dmri::testing::cylinder_small());
  CHECK(std::abs(signals.references[0] - cdouble(fx.params.rho * vol, 0.0)) <
        1e-8 * vol);
}

TEST_CASE("normalized magnitudes stay within [0, 1 + 1e-6]") {
  const auto& fx = small_sim();
  const GradientScheme scheme = make_scheme(6, {5.0, 20.0}, {1.0, 2.5});
  const SignalSet signals = simulate(fx.basis, fx.params, scheme);
  const VecX normalized = signals.normalized_all();
  CHECK(normalized.minCoeff() >= 0.0);
  CHECK(normalized.maxCoeff() <= 1.0 + 1e-6);
}

TEST_CASE("longer diffusion times attenuate the axial signal monotonically") {
  const auto& fx = [] {
    SimFixture out;
    out.fem = assemble(dmri::testing::bent_cylinder315(), out.params);
    out.basis = solve_basis(out.fem, out.params, BasisTruncation::count(60));
    return out;
  }();
  // One axis-parallel direction, the paper's four diffusion times.
  GradientScheme scheme;
  scheme.directions = MatX3(1, 3);
  scheme.directions << 0, 0, 1;
  scheme.sequences = {PgseSequence(1.0, 5.0), PgseSequence(1.0, 20.0), PgseSequence(1.0, 45.0),
                      PgseSequence(1.0, 95.0)};
  const double g = amplitude_for_b(scheme.sequences[0], 1.0);
  scheme.amplitudes = VecX::Zero(2);
  scheme.amplitudes[1] = g;
  const SignalSet signals = simulate(fx.basis, fx.params, scheme);
  for (int s = 1; s < 4; ++s)
    CHECK(signals.normalized(signals.index(s, 0, 0)) <
          signals.normalized(signals.index(s - 1, 0, 0)));
}

TEST_CASE("rotation equivariance: rotating mesh and direction together") {
  const PhysicsParams params;
  const TetMesh& mesh = dmri::testing::bent_cylinder315();
  const TetMesh rotated = augment(mesh, AugmentOp::rotate90({2}));

  const Vec3 dir = Vec3(1.0, 0.0, 0.0);
  const Eigen::Matrix3d rot = Eigen::AngleAxisd(std::numbers::pi / 2, Vec3::UnitZ()).matrix();
  const Vec3 dir_rotated = rot * dir;

  auto signal_for = [&](const TetMesh& m, const Vec3& d) {
    GradientScheme scheme;
    scheme.directions = MatX3(1, 3);
    scheme.directions.row(0) = d.transpose();
    scheme.sequences = {PgseSequence(1.0, 20.0)};
    scheme.amplitudes = VecX::Zero(2);
    scheme.amplitudes[1] = amplitude_for_b(scheme.sequences[0], 1.5);
    const FemMatrices fem = assemble(m, params);
    const LaplaceBasis basis = solve_basis(fem, params, BasisTruncation::count(50));
    const SignalSet s = simulate(basis, params, scheme);
    return s.values[0] / std::abs(s.references[0]);
  };

  const cdouble a = signal_for(mesh, dir);
  const cdouble b = signal_for(rotated, dir_rotated);
  CHECK(std::abs(a - b) < 1e-6 * std::abs(a));
}

TEST_CASE("signal is invariant to re-orthonormalization inside eigenspaces") {
  // A cube under the axis-permutation-symmetric Freudenthal split has exactly
  // degenerate eigenvalue triples; mixing such a pair by an orthogonal
  // rotation must leave the signal unchanged.
  const PhysicsParams params;
  const TetMesh cube = dmri::testing::box_mesh(4, 4, 4, 2.0, 2.0, 2.0);
  const FemMatrices fem = assemble(cube, params);
  const LaplaceBasis basis = solve_basis(fem, params, BasisTruncation::count(12));

  Eigen::Index pair = -1;
  for (Eigen::Index i = 1; i + 1 < basis.size(); ++i) {
    const double gap = basis.eigenvalues[i + 1] - basis.eigenvalues[i];
    if (gap < 1e-9 * std::max(1.0, basis.eigenvalues[i + 1])) {
      pair = i;
      break;
    }
  }
  REQUIRE(pair >= 0);

  LaplaceBasis mixed = basis;
  const double angle = 0.81;
  const VecX u = basis.eigvecs.col(pair), v = basis.eigvecs.col(pair + 1);
  mixed.eigvecs.col(pair) = std::cos(angle) * u + std::sin(angle) * v;
  mixed.eigvecs.col(pair + 1) = -std::sin(angle) * u + std::cos(angle) * v;
  project_operators(fem, params, mixed);

  const GradientScheme scheme = make_scheme(3, {20.0}, {1.5});
  const SignalSet a = simulate(basis, params, scheme);
  const SignalSet b = simulate(mixed, params, scheme);
  for (size_t i = 0; i < a.values.size(); ++i)
    CHECK(std::abs(a.values[i] - b.values[i]) < 1e-8 * std::abs(a.references[0]));
}

TEST_CASE("doubling the basis changes the signal by < 1%") {
  const auto& fx = small_sim();
  const LaplaceBasis doubled =
      solve_basis(fx.fem, fx.params, BasisTruncation::count(80));
  const GradientScheme scheme = make_scheme(3, {5.0, 20.0}, {1.0, 2.5});
  const SignalSet a = simulate(fx.basis, fx.params, scheme);
  const SignalSet b = simulate(doubled, fx.params, scheme);
  const VecX na = a.normalized_all(), nb = b.normalized_all();
  for (Eigen::Index i = 0; i < na.size(); ++i)
    CHECK(std::abs(na[i] - nb[i]) / std::max(1e-3, nb[i]) < 0.01);
}

TEST_CASE("signal CSV round-trips bit-exactly") {
  dmri::testing::TempDir dir("signal");
  const auto& fx = small_sim();
  const GradientScheme scheme = make_scheme(3, {5.0, 20.0}, {1.0});
  const SignalSet signals = simulate(fx.basis, fx.params, scheme);
  const auto path = dir.path() / "signal.csv";
  write_signal_csv(signals, path);
  const SignalSet loaded = read_signal_csv(path, scheme);
  CHECK(loaded.solver == "mf");
  REQUIRE(loaded.values.size() == signals.values.size());
  for (size_t i = 0; i < signals.values.size(); ++i)
    CHECK(loaded.values[i] == signals.values[i]);  // %.17g is lossless
  for (size_t s = 0; s < signals.references.size(); ++s)
    CHECK(loaded.references[s] == signals.references[s]);
}

}  // TEST_SUITE
