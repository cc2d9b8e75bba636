#include "dmri/btpde.hpp"

#include <Eigen/SparseLU>

#include <array>
#include <cmath>
#include <memory>

namespace dmri {

namespace {

using CSpMat = Eigen::SparseMatrix<cdouble>;
using CSparseLU = Eigen::SparseLU<CSpMat>;

long steps_in_interval(double duration, double dt) {
  const double n = duration / dt;
  const long rounded = std::lround(n);
  if (rounded < 1 || std::abs(rounded * dt - duration) > 1e-9 * std::max(duration, 1.0))
    throw ValidationError("dt must divide every sequence interval (interval " +
                          std::to_string(duration) + " ms, dt " + std::to_string(dt) + " ms)");
  return rounded;
}

}  // namespace

BtpdeSolution solve_btpde(const FemMatrices& fem, const PhysicsParams& params,
                          const PgseSequence& seq, const Vec3& direction, double g, double dt) {
  params.validate();
  seq.validate();
  if (!(dt > 0.0)) throw ValidationError("dt must be positive");
  if (dt > seq.delta / 10.0 + 1e-12)
    throw ValidationError("dt must satisfy dt <= delta/10 for pulse resolution");
  if (g > 0.0 && std::abs(direction.norm() - 1.0) > 1e-9)
    throw ValidationError("gradient direction must be a unit vector");

  const Eigen::Index V = fem.size();
  const SpMat base = fem.S + fem.Q + fem.R;
  SpMat j_dir(V, V);
  if (g > 0.0)
    j_dir = direction[0] * fem.Jx + direction[1] * fem.Jy + direction[2] * fem.Jz;
  const CSpMat mass = fem.M.cast<cdouble>();

  // One factorization per distinct f value (f = -1, 0, +1).
  std::array<std::unique_ptr<CSparseLU>, 3> lu;
  std::array<std::unique_ptr<CSpMat>, 3> stepper;  // M - dt/2 B per f
  auto prepare = [&](int f) {
    const int slot = f + 1;
    if (lu[slot]) return;
    CSpMat b = base.cast<cdouble>();
    if (f != 0 && g > 0.0) b += (cdouble(0.0, params.gamma * g * f) * j_dir.cast<cdouble>()).eval();
    const CSpMat a_plus = mass + (0.5 * dt) * b;
    stepper[slot] = std::make_unique<CSpMat>(mass - (0.5 * dt) * b);
    lu[slot] = std::make_unique<CSparseLU>();
    lu[slot]->compute(a_plus);
    if (lu[slot]->info() != Eigen::Success)
      throw NumericalError("sparse LU factorization failed in Crank-Nicolson step");
  };

  CVecX xi = CVecX::Constant(V, cdouble(params.rho, 0.0));
  for (const auto& iv : seq.intervals()) {
    const long n_steps = steps_in_interval(iv.duration, dt);
    const int f = (g > 0.0) ? iv.f : 0;
    prepare(f);
    const int slot = f + 1;
    for (long s = 0; s < n_steps; ++s) {
      xi = lu[slot]->solve((*stepper[slot]) * xi);
      if (lu[slot]->info() != Eigen::Success)
        throw NumericalError("sparse solve failed in Crank-Nicolson step");
    }
  }

  const VecX weights = fem.M * VecX::Ones(V);
  BtpdeSolution out;
  out.xi = xi;
  out.signal = 0.0;
  for (Eigen::Index i = 0; i < V; ++i) out.signal += xi[i] * weights[i];
  return out;
}

SignalSet btpde_signal_set(const FemMatrices& fem, const PhysicsParams& params,
                           const GradientScheme& scheme, double dt) {
  scheme.validate();
  SignalSet out;
  out.scheme = scheme;
  out.solver = "btpde";
  out.references.resize(scheme.sequences.size());
  out.values.resize(scheme.num_values());

  std::vector<double> pos_amps;
  for (Eigen::Index a = 0; a < scheme.amplitudes.size(); ++a) {
    if (scheme.amplitudes[a] > 0.0) pos_amps.push_back(scheme.amplitudes[a]);
  }

  for (size_t s = 0; s < scheme.sequences.size(); ++s) {
    const PgseSequence& seq = scheme.sequences[s];
    out.references[s] = solve_btpde(fem, params, seq, Vec3::UnitZ(), 0.0, dt).signal;
    for (Eigen::Index d = 0; d < scheme.directions.rows(); ++d) {
      for (size_t a = 0; a < pos_amps.size(); ++a) {
        out.values[out.index(s, d, a)] =
            solve_btpde(fem, params, seq, scheme.directions.row(d), pos_amps[a], dt).signal;
      }
    }
  }
  return out;
}

}  // namespace dmri
