#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dmri/laplace_eig.hpp"
#include "dmri/sequence.hpp"

namespace dmri {

// Complex dMRI signals for every measurement of a scheme, plus the g = 0
// reference per sequence. Flat value order: sequence-major, then direction,
// then positive amplitude.
struct SignalSet {
  GradientScheme scheme;
  std::string solver = "mf";
  std::vector<cdouble> values;
  std::vector<cdouble> references;  // one per sequence

  Eigen::Index index(Eigen::Index seq, Eigen::Index dir, Eigen::Index pos_amp) const;
  double normalized(Eigen::Index flat) const;
  // |value| / |reference of its sequence| for every measurement, in flat order.
  VecX normalized_all() const;
};

// exp(-K dt) for a complex square matrix, by Pade-13 scaling and squaring.
CMatX expm_neg(const CMatX& K, double dt);

// exp(-K dt) * nu. Throws NumericalError when ||K dt|| is too extreme to scale.
CVecX exp_propagate(const CMatX& K, double dt, const CVecX& nu);

// Matrix-formalism forward map: per measurement, nu(0) = rho * moments is
// propagated through the constant-f intervals of the sequence with
// K = diag(lambda) + T + i gamma g f (d . A), and the signal is
// nu(t_echo) . moments. One dense exponential per measurement: the f = -1
// pulse reuses the conjugate of the f = +1 propagator and f = 0 intervals
// are diagonal when T2 is infinite.
SignalSet simulate(const LaplaceBasis& basis, const PhysicsParams& params,
                   const GradientScheme& scheme);

// CSV with one row per reference and measurement; 17 significant digits.
// Columns: solver,seq_id,delta,Delta,g,b,dir_x,dir_y,dir_z,re,im,magnitude,normalized
void write_signal_csv(const SignalSet& signals, const std::filesystem::path& path);

// Reads a CSV produced by write_signal_csv, validating row-by-row agreement
// with the given scheme (timings, directions, amplitudes).
SignalSet read_signal_csv(const std::filesystem::path& path, const GradientScheme& scheme);

}  // namespace dmri
