#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "dmri/signal.hpp"
#include "dmri/spectral.hpp"

namespace dmri {

enum class Optimizer { gradient_descent, adaptive_moment };
enum class GradientMethod { central_fd, forward_fd };

struct ReconConfig {
  double eta = 1e-2;             // learning rate
  double loss_multiplier = 1e3;  // k in L = k * ||S_hat - S_ref||^2
  int max_iters = 750;
  Optimizer optimizer = Optimizer::adaptive_moment;
  GradientMethod gradient_method = GradientMethod::central_fd;
  double fd_step = 1e-3;
  double conv_tol = 1e-7;  // relative loss change below this counts as stalled
  int patience = 30;       // consecutive stalled iterations before stopping
  int log_every = 25;      // checkpoint cadence (when checkpoint_dir is set)
  int jobs = 0;            // parallel FD probes; 0 = hardware concurrency
  unsigned seed = 0;       // seeds the initial-latent jitter; 0 keeps z exact
  double init_jitter = 0.0;  // stddev of the seeded jitter (latent units)
  std::optional<std::filesystem::path> checkpoint_dir;

  void validate() const;
};

struct ReconRecord {
  int iter;
  double loss;
  double volume;
  double chamfer;  // NaN when no reference mesh is tracked
  VecX z;
};

struct ReconTrace {
  std::vector<ReconRecord> records;
};

// CSV columns: iter,loss,volume,chamfer,z_1..z_n.
void write_trace_csv(const ReconTrace& trace, const std::filesystem::path& path);

// L = k * sum_i (|S_hat_i|/|S_hat_ref| - |S_i|/|S_ref|)^2 over the shared
// measurement ordering. Throws ValidationError on scheme mismatch.
double loss(const SignalSet& sim, const SignalSet& ref, double k);

using LossFn = std::function<double(const VecX&)>;

// Finite-difference gradient with parallel probes. Non-finite probe losses
// shrink the step for that coordinate (x0.5, up to 3 retries) before giving
// up with a NumericalError naming the coordinate. `f_at_z` is only used by
// the forward difference.
VecX fd_gradient(const LossFn& f, const VecX& z, double f_at_z, GradientMethod method,
                 double fd_step, int jobs);

// Fixed context of one reconstruction run. The truncation is resolved to a
// fixed eigenpair count on the initial mesh so every probe sees the same
// basis dimension.
struct ReconProblem {
  PhysicsParams physics;
  BasisTruncation truncation = BasisTruncation::length(0.5);
  GradientScheme scheme;
  int n_coeff = 300;
  int latent_dim = 16;
  std::optional<TetMesh> reference_mesh;  // Chamfer tracking only
};

struct ReconResult {
  TetMesh best_mesh;
  double best_loss = 0.0;
  int best_iter = -1;
  int resolved_n_eig = 0;
  ReconTrace trace;
};

// Latent-space gradient descent against a reference signal: encode the
// initial mesh, then iterate decode -> simulate -> loss -> FD gradient ->
// optimizer step, returning the best-loss iterate. Deterministic given
// identical inputs and config.
ReconResult reconstruct(const ReconProblem& problem, const TetMesh& init_mesh,
                        const SignalSet& reference, const ReconConfig& cfg);

}  // namespace dmri
