#pragma once

#include <filesystem>
#include <vector>

#include "dmri/types.hpp"

namespace dmri {

// Pulsed-gradient spin echo timing profile
//   f(t) = +1 on [0, delta), 0 on [delta, Delta), -1 on [Delta, Delta+delta),
//   0 on [Delta+delta, t_echo]
// so the refocusing condition integral f dt = 0 holds by construction.
struct PgseSequence {
  double delta = 1.0;   // pulse duration, ms
  double Delta = 20.0;  // diffusion time, ms
  double t_echo = 21.0; // echo time, ms (>= Delta + delta)

  PgseSequence() = default;
  PgseSequence(double delta_, double Delta_, double t_echo_ = 0.0);

  void validate() const;
  int profile(double t) const;  // f(t) in {-1, 0, +1}

  struct Interval {
    double duration;
    int f;
  };
  // The constant-f intervals in order; zero-length intervals are dropped.
  std::vector<Interval> intervals() const;

  bool operator==(const PgseSequence& other) const = default;
};

// b = gamma^2 g^2 delta^2 (Delta - delta/3), in ms/um^2.
double b_value(const PgseSequence& seq, double g, double gamma = kGyromagneticRatio);

// Gradient amplitude (mT/um) that produces the requested b-value.
double amplitude_for_b(const PgseSequence& seq, double b, double gamma = kGyromagneticRatio);

// n approximately uniform unit directions. n=3 returns the coordinate axes;
// other counts come from a deterministic antipodal electrostatic-repulsion
// descent, so repeated calls are bit-identical.
MatX3 direction_set(int n);

// Acquisition scheme: the cartesian product sequences x directions x positive
// amplitudes, plus one g=0 reference per sequence.
struct GradientScheme {
  MatX3 directions;        // unit rows
  VecX amplitudes;         // mT/um, >= 0; must contain a zero (reference)
  std::vector<PgseSequence> sequences;

  void validate() const;
  Eigen::Index num_nonzero_amplitudes() const;
  // Values per sequence (directions x positive amplitudes).
  Eigen::Index values_per_sequence() const;
  Eigen::Index num_values() const { return values_per_sequence() * sequences.size(); }

  bool approx_equal(const GradientScheme& other, double tol = 1e-12) const;
};

// Paper-style preset: ndir directions, one PGSE sequence per diffusion time
// (delta fixed, t_echo = Delta + delta), amplitudes from the b-value list.
GradientScheme make_scheme(int ndir, const std::vector<double>& diffusion_times,
                           const std::vector<double>& b_values, double delta = 1.0);

// Flattened per-measurement JSON: {direction, g, delta, Delta, t_echo}.
void save_scheme(const GradientScheme& scheme, const std::filesystem::path& path);
GradientScheme load_scheme(const std::filesystem::path& path);

}  // namespace dmri
