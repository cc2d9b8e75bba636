#pragma once

#include "dmri/fem.hpp"
#include "dmri/sequence.hpp"
#include "dmri/signal.hpp"

namespace dmri {

struct BtpdeSolution {
  CVecX xi;        // nodal magnetization at t_echo
  cdouble signal;  // xi(t_echo) . signal_weights
};

// Direct Crank-Nicolson time stepping of the full FEM Bloch-Torrey system
//   M dxi/dt = -(S + Q + R + i gamma J(g(t))) xi,  xi(0) = rho * 1.
// One sparse complex LU factorization per constant-f interval. dt must divide
// every interval and satisfy dt <= delta/10. This path is the correctness
// oracle for the matrix-formalism engine, not a fast solver.
BtpdeSolution solve_btpde(const FemMatrices& fem, const PhysicsParams& params,
                          const PgseSequence& seq, const Vec3& direction, double g, double dt);

// Convenience wrapper producing the same SignalSet layout as simulate(),
// tagged solver="btpde".
SignalSet btpde_signal_set(const FemMatrices& fem, const PhysicsParams& params,
                           const GradientScheme& scheme, double dt);

}  // namespace dmri
