#include "dmri/inverse.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <random>
#include <thread>

#include "dmri/metrics.hpp"

namespace dmri {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int resolve_jobs(int jobs) {
  if (jobs > 0) return jobs;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs f over [0, n) on `jobs` threads; results land at their own index, so
// the outcome does not depend on scheduling.
void parallel_for(int n, int jobs, const std::function<void(int)>& f) {
  if (n <= 0) return;
  jobs = std::min(jobs, n);
  if (jobs <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  std::exception_ptr error;
  std::mutex error_mutex;
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

void ReconConfig::validate() const {
  if (!(eta > 0.0)) throw ValidationError("learning rate eta must be positive");
  if (!(loss_multiplier > 0.0)) throw ValidationError("loss multiplier must be positive");
  if (max_iters < 1) throw ValidationError("max_iters must be >= 1");
  if (!(fd_step > 0.0)) throw ValidationError("fd_step must be positive");
  if (patience < 1) throw ValidationError("patience must be >= 1");
  if (log_every < 1) throw ValidationError("log_every must be >= 1");
  if (init_jitter < 0.0) throw ValidationError("init_jitter must be >= 0");
}

double loss(const SignalSet& sim, const SignalSet& ref, double k) {
  if (!(k > 0.0)) throw ValidationError("loss multiplier must be positive");
  if (sim.values.size() != ref.values.size() || !sim.scheme.approx_equal(ref.scheme))
    throw ValidationError("signal sets use different schemes; cannot compare");
  const VecX a = sim.normalized_all();
  const VecX b = ref.normalized_all();
  return k * (a - b).squaredNorm();
}

VecX fd_gradient(const LossFn& f, const VecX& z, double f_at_z, GradientMethod method,
                 double fd_step, int jobs) {
  const int dim = static_cast<int>(z.size());
  if (dim == 0) throw ValidationError("empty latent vector");
  const int probes_per_coord = (method == GradientMethod::central_fd) ? 2 : 1;
  const int n_probes = probes_per_coord * dim;

  std::vector<double> losses(n_probes, 0.0);
  auto probe_point = [&](int p) {
    VecX zp = z;
    const int coord = p / probes_per_coord;
    const double sign = (method == GradientMethod::central_fd && (p % 2 == 1)) ? -1.0 : 1.0;
    zp[coord] += sign * fd_step;
    return zp;
  };
  parallel_for(n_probes, resolve_jobs(jobs), [&](int p) { losses[p] = f(probe_point(p)); });

  VecX grad(dim);
  for (int i = 0; i < dim; ++i) {
    double h = fd_step;
    double lp = losses[probes_per_coord * i];
    double lm = (method == GradientMethod::central_fd) ? losses[probes_per_coord * i + 1] : f_at_z;
    int retries = 0;
    while (!(std::isfinite(lp) && std::isfinite(lm)) && retries < 3) {
      h *= 0.5;
      ++retries;
      VecX zp = z;
      zp[i] += h;
      lp = f(zp);
      if (method == GradientMethod::central_fd) {
        zp[i] = z[i] - h;
        lm = f(zp);
      }
    }
    if (!(std::isfinite(lp) && std::isfinite(lm)))
      throw NumericalError("non-finite loss while probing latent coordinate " +
                           std::to_string(i) + " (degenerate decoded mesh)");
    grad[i] = (lp - lm) / ((method == GradientMethod::central_fd) ? 2.0 * h : h);
  }
  return grad;
}

void write_trace_csv(const ReconTrace& trace, const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw ValidationError("cannot write trace CSV: " + path.string());
  const int dim = trace.records.empty() ? 0 : static_cast<int>(trace.records.front().z.size());
  std::fprintf(f, "iter,loss,volume,chamfer");
  for (int i = 1; i <= dim; ++i) std::fprintf(f, ",z_%d", i);
  std::fprintf(f, "\n");
  for (const auto& rec : trace.records) {
    std::fprintf(f, "%d,%.17g,%.17g,%.17g", rec.iter, rec.loss, rec.volume, rec.chamfer);
    for (int i = 0; i < dim; ++i) std::fprintf(f, ",%.17g", rec.z[i]);
    std::fprintf(f, "\n");
  }
  std::fclose(f);
}

namespace {

struct ForwardEval {
  double loss_value = kInf;
  double volume = 0.0;
};

// Shared forward pipeline of one run: decode -> assemble -> eigenbasis ->
// matrix-formalism signal -> loss.
struct Pipeline {
  const ReconProblem& problem;
  const SpectralCodec& codec;
  const MatX3& base_coeffs;
  const SignalSet& reference;
  double k;
  BasisTruncation fixed_truncation;

  // Lenient evaluation: degenerate probes yield +inf instead of throwing
  // (the feasible-set boundary is part of normal FD probing).
  ForwardEval evaluate(const VecX& z, bool strict) const {
    ForwardEval out;
    DecodeResult dec = decode(codec, from_latent(codec, z, base_coeffs));
    if (dec.inverted_tets > 0) {
      if (strict)
        throw NumericalError("decoded mesh has " + std::to_string(dec.inverted_tets) +
                             " inverted tets at the current iterate");
      return out;
    }
    try {
      const FemMatrices fem = assemble(dec.mesh, problem.physics);
      const LaplaceBasis basis = solve_basis(fem, problem.physics, fixed_truncation);
      const SignalSet sim = simulate(basis, problem.physics, problem.scheme);
      out.loss_value = loss(sim, reference, k);
      out.volume = total_volume(dec.mesh);
    } catch (const std::exception&) {
      if (strict) throw;
      out.loss_value = kInf;
    }
    return out;
  }
};

}  // namespace

ReconResult reconstruct(const ReconProblem& problem, const TetMesh& init_mesh,
                        const SignalSet& reference, const ReconConfig& cfg) {
  cfg.validate();
  problem.physics.validate();
  problem.scheme.validate();
  if (!problem.scheme.approx_equal(reference.scheme))
    throw ValidationError("reference signal scheme does not match the reconstruction scheme");

  const int n_coeff = std::min<int>(problem.n_coeff, static_cast<int>(init_mesh.num_vertices()));
  const SpectralCodec codec = build_codec(init_mesh, n_coeff, problem.latent_dim);
  const MatX3 base_coeffs = encode(codec, init_mesh);
  VecX z = to_latent(codec, base_coeffs);

  if (cfg.seed != 0 && cfg.init_jitter > 0.0) {
    std::mt19937 rng(cfg.seed);
    std::normal_distribution<double> noise(0.0, cfg.init_jitter);
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] += noise(rng);
  }

  // Pin the basis dimension on the initial mesh so all probes and iterates
  // share one truncation (a per-mesh count would make the loss
  // discontinuous in z).
  const FemMatrices init_fem = assemble(init_mesh, problem.physics);
  const LaplaceBasis init_basis = solve_basis(init_fem, problem.physics, problem.truncation);
  const BasisTruncation fixed_trunc =
      BasisTruncation::count(static_cast<int>(init_basis.size()));

  Pipeline pipeline{problem, codec, base_coeffs, reference, cfg.loss_multiplier, fixed_trunc};
  const LossFn lenient = [&pipeline](const VecX& zq) {
    return pipeline.evaluate(zq, false).loss_value;
  };

  ReconResult result;
  result.resolved_n_eig = static_cast<int>(init_basis.size());
  double best_loss = kInf;
  VecX best_z = z;
  int best_iter = -1;

  // Adaptive-moment state.
  VecX m1 = VecX::Zero(z.size()), m2 = VecX::Zero(z.size());
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;

  double prev_loss = kInf;
  int stalled = 0;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    const ForwardEval center = pipeline.evaluate(z, true);
    if (!std::isfinite(center.loss_value))
      throw NumericalError("non-finite loss at iterate " + std::to_string(iter));

    ReconRecord rec;
    rec.iter = iter;
    rec.loss = center.loss_value;
    rec.volume = center.volume;
    rec.chamfer = std::numeric_limits<double>::quiet_NaN();
    if (problem.reference_mesh) {
      const DecodeResult dec = decode(codec, from_latent(codec, z, base_coeffs));
      rec.chamfer = modified_chamfer(dec.mesh, *problem.reference_mesh);
    }
    rec.z = z;
    result.trace.records.push_back(std::move(rec));

    if (center.loss_value < best_loss) {
      best_loss = center.loss_value;
      best_z = z;
      best_iter = iter;
    }

    if (cfg.checkpoint_dir && iter % cfg.log_every == 0) {
      const DecodeResult dec = decode(codec, from_latent(codec, z, base_coeffs));
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint_%06d", iter);
      save_mesh(dec.mesh, *cfg.checkpoint_dir / (std::string(name) + ".node"),
                *cfg.checkpoint_dir / (std::string(name) + ".ele"));
    }

    if (std::isfinite(prev_loss)) {
      const double rel_change =
          std::abs(prev_loss - center.loss_value) / std::max(prev_loss, 1e-300);
      stalled = (rel_change < cfg.conv_tol) ? stalled + 1 : 0;
      if (stalled >= cfg.patience) break;
    }
    prev_loss = center.loss_value;
    if (iter + 1 == cfg.max_iters) break;

    const VecX grad = fd_gradient(lenient, z, center.loss_value, cfg.gradient_method,
                                  cfg.fd_step, cfg.jobs);

    if (cfg.optimizer == Optimizer::gradient_descent) {
      z -= cfg.eta * grad;
    } else {
      m1 = kBeta1 * m1 + (1.0 - kBeta1) * grad;
      m2 = kBeta2 * m2 + (1.0 - kBeta2) * grad.cwiseProduct(grad);
      const double c1 = 1.0 - std::pow(kBeta1, iter + 1);
      const double c2 = 1.0 - std::pow(kBeta2, iter + 1);
      const VecX step = (m1 / c1).cwiseQuotient(((m2 / c2).cwiseSqrt().array() + kAdamEps).matrix());
      z -= cfg.eta * step;
    }
  }

  const DecodeResult best = decode(codec, from_latent(codec, best_z, base_coeffs));
  result.best_mesh = best.mesh;
  result.best_loss = best_loss;
  result.best_iter = best_iter;
  return result;
}

}  // namespace dmri
