#include "dmri/laplace_eig.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

namespace dmri {

namespace {

// Deterministic sign convention: the largest-magnitude entry of each column
// is made positive (smallest index wins ties), so bases are reproducible.
void apply_sign_convention(MatX& vecs) {
  for (Eigen::Index c = 0; c < vecs.cols(); ++c) {
    Eigen::Index imax = 0;
    double vmax = 0.0;
    for (Eigen::Index r = 0; r < vecs.rows(); ++r) {
      const double a = std::abs(vecs(r, c));
      if (a > vmax) {
        vmax = a;
        imax = r;
      }
    }
    if (vecs(imax, c) < 0.0) vecs.col(c) = -vecs.col(c);
  }
}

struct EigPairs {
  VecX values;
  MatX vectors;
};

EigPairs dense_smallest(const FemMatrices& fem, int n) {
  Eigen::GeneralizedSelfAdjointEigenSolver<MatX> es(MatX(fem.S), MatX(fem.M),
                                                    Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (es.info() != Eigen::Success)
    throw NumericalError("dense generalized eigensolver failed to converge");
  EigPairs out;
  out.values = es.eigenvalues().head(n);
  out.vectors = es.eigenvectors().leftCols(n);
  return out;
}

// Shift-invert Lanczos with full M-reorthogonalization on
// Op v = (S + sigma M)^-1 M v, whose largest Ritz values map to the smallest
// eigenvalues of the (S, M) pencil via lambda = 1/theta - sigma.
EigPairs lanczos_smallest(const FemMatrices& fem, int n, double residual_tol) {
  const Eigen::Index V = fem.size();
  const double sigma = std::max(1e-12, 1e-3 * fem.S.diagonal().sum() / fem.M.diagonal().sum());

  SpMat shifted = fem.S + sigma * fem.M;
  Eigen::SimplicialLDLT<SpMat> solver(shifted);
  if (solver.info() != Eigen::Success)
    throw NumericalError("factorization of shifted stiffness matrix failed");

  std::mt19937 rng(0x51ba5u);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);

  auto m_norm = [&](const VecX& v) { return std::sqrt(v.dot(fem.M * v)); };

  int m = static_cast<int>(std::min<long>(V, std::max(3L * n + 30L, 60L)));
  for (int attempt = 0; attempt < 4; ++attempt) {
    MatX Q(V, m);
    VecX alpha = VecX::Zero(m), beta = VecX::Zero(m);

    VecX q(V);
    for (Eigen::Index i = 0; i < V; ++i) q[i] = unif(rng);
    q /= m_norm(q);
    Q.col(0) = q;

    for (int j = 0; j < m; ++j) {
      VecX w = solver.solve(fem.M * Q.col(j));
      alpha[j] = w.dot(fem.M * Q.col(j));
      w -= alpha[j] * Q.col(j);
      if (j > 0) w -= beta[j - 1] * Q.col(j - 1);
      for (int pass = 0; pass < 2; ++pass) {
        const VecX coeffs = Q.leftCols(j + 1).transpose() * (fem.M * w);
        w -= Q.leftCols(j + 1) * coeffs;
      }
      if (j + 1 == m) break;
      double b = m_norm(w);
      if (!(b > 1e-10 * std::max(1.0, std::abs(alpha[j])))) {
        // Invariant subspace hit: restart with a fresh orthogonal direction.
        for (Eigen::Index i = 0; i < V; ++i) w[i] = unif(rng);
        for (int pass = 0; pass < 2; ++pass) {
          const VecX coeffs = Q.leftCols(j + 1).transpose() * (fem.M * w);
          w -= Q.leftCols(j + 1) * coeffs;
        }
        b = m_norm(w);
        if (!(b > 0.0)) throw NumericalError("Lanczos breakdown: no new direction found");
        beta[j] = 0.0;
        Q.col(j + 1) = w / b;
        continue;
      }
      beta[j] = b;
      Q.col(j + 1) = w / b;
    }

    MatX tri = MatX::Zero(m, m);
    for (int j = 0; j < m; ++j) {
      tri(j, j) = alpha[j];
      if (j + 1 < m) tri(j, j + 1) = tri(j + 1, j) = beta[j];
    }
    Eigen::SelfAdjointEigenSolver<MatX> tes(tri);
    if (tes.info() != Eigen::Success) throw NumericalError("tridiagonal eigensolve failed");

    // Largest theta first -> smallest lambda first.
    std::vector<int> order(m);
    for (int i = 0; i < m; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return tes.eigenvalues()[a] > tes.eigenvalues()[b]; });

    const int take = std::min<int>(n, m);
    MatX X(V, take);
    for (int i = 0; i < take; ++i) X.col(i) = Q * tes.eigenvectors().col(order[i]);

    // Re-orthonormalize in the M inner product and take Rayleigh quotients.
    for (int i = 0; i < take; ++i) {
      for (int k = 0; k < i; ++k) X.col(i) -= X.col(k).dot(fem.M * X.col(i)) * X.col(k);
      const double nrm = m_norm(X.col(i));
      if (!(nrm > 0.0)) throw NumericalError("Ritz vector collapsed during orthonormalization");
      X.col(i) /= nrm;
    }
    VecX lambda(take);
    for (int i = 0; i < take; ++i) lambda[i] = X.col(i).dot(fem.S * X.col(i));

    // Ascending by Rayleigh quotient (re-orthonormalization can reorder
    // near-degenerate pairs).
    std::vector<int> asc(take);
    for (int i = 0; i < take; ++i) asc[i] = i;
    std::sort(asc.begin(), asc.end(), [&](int a, int b) { return lambda[a] < lambda[b]; });
    EigPairs out;
    out.values.resize(take);
    out.vectors.resize(V, take);
    for (int i = 0; i < take; ++i) {
      out.values[i] = lambda[asc[i]];
      out.vectors.col(i) = X.col(asc[i]);
    }

    if (take == n) {
      double worst = 0.0;
      for (int i = 0; i < n; ++i) {
        const VecX r = fem.S * out.vectors.col(i) - out.values[i] * (fem.M * out.vectors.col(i));
        worst = std::max(worst, r.norm() / out.vectors.col(i).norm());
      }
      if (worst <= residual_tol) return out;
      if (m >= static_cast<int>(V)) {
        std::ostringstream msg;
        msg << "Lanczos did not reach residual tolerance " << residual_tol
            << " (worst residual " << worst << " with full-dimension Krylov space)";
        throw NumericalError(msg.str());
      }
    }
    m = static_cast<int>(std::min<long>(V, 2L * m));
  }
  throw NumericalError("Lanczos eigensolver failed to converge after expanding the Krylov space");
}

int resolve_count_dense(const VecX& all_values, double lambda_max, int cap, Eigen::Index V) {
  int count = 0;
  for (Eigen::Index i = 0; i < all_values.size(); ++i) {
    if (all_values[i] <= lambda_max) ++count;
  }
  return std::clamp(count, 1, static_cast<int>(std::min<long>(cap, V)));
}

}  // namespace

void project_operators(const FemMatrices& fem, const PhysicsParams& params, LaplaceBasis& basis) {
  const MatX& P = basis.eigvecs;
  auto congruence = [&](const SpMat& J) {
    MatX a = P.transpose() * (J * P);
    return MatX(0.5 * (a + a.transpose()));
  };
  basis.Ax = congruence(fem.Jx);
  basis.Ay = congruence(fem.Jy);
  basis.Az = congruence(fem.Jz);
  if (params.has_relaxation() && fem.R.nonZeros() > 0) {
    basis.T = congruence(fem.R);
  } else {
    basis.T = MatX::Zero(P.cols(), P.cols());
  }
  basis.moments = P.transpose() * (fem.M * VecX::Ones(fem.size()));
}

LaplaceBasis solve_basis(const FemMatrices& fem, const PhysicsParams& params,
                         const BasisTruncation& truncation, EigMethod method,
                         double residual_tol) {
  const Eigen::Index V = fem.size();
  if (truncation.n_eig <= 0 && truncation.length_scale <= 0.0)
    throw ValidationError("truncation must specify n_eig or length_scale");
  if (truncation.n_eig > V)
    throw ValidationError("requested " + std::to_string(truncation.n_eig) +
                          " eigenpairs but the mesh has only " + std::to_string(V) + " vertices");

  const double d0_mean = params.diffusion().trace() / 3.0;

  EigPairs pairs;
  int n = truncation.n_eig;
  if (n > 0) {
    EigMethod chosen = method;
    if (chosen == EigMethod::automatic)
      chosen = (V > 600 || n <= V / 4) ? EigMethod::lanczos : EigMethod::dense;
    pairs = (chosen == EigMethod::dense) ? dense_smallest(fem, n)
                                         : lanczos_smallest(fem, n, residual_tol);
  } else {
    const double lambda_max =
        d0_mean * std::pow(std::numbers::pi / truncation.length_scale, 2);
    const int cap = static_cast<int>(std::min<long>(truncation.cap, V));
    EigMethod chosen = method;
    if (chosen == EigMethod::automatic)
      chosen = (V > 400) ? EigMethod::lanczos : EigMethod::dense;
    if (chosen == EigMethod::dense) {
      EigPairs all = dense_smallest(fem, static_cast<int>(V));
      n = resolve_count_dense(all.values, lambda_max, cap, V);
      pairs.values = all.values.head(n);
      pairs.vectors = all.vectors.leftCols(n);
    } else {
      int guess = std::min(32, cap);
      for (;;) {
        pairs = lanczos_smallest(fem, guess, residual_tol);
        if (pairs.values[guess - 1] > lambda_max || guess >= cap) break;
        guess = std::min(2 * guess, cap);
      }
      n = resolve_count_dense(pairs.values, lambda_max, cap, V);
      pairs.values.conservativeResize(n);
      pairs.vectors.conservativeResize(Eigen::NoChange, n);
    }
  }

  LaplaceBasis basis;
  basis.eigenvalues = pairs.values;
  basis.eigvecs = pairs.vectors;
  apply_sign_convention(basis.eigvecs);

  const double worst = max_eig_residual(fem, basis);
  if (worst > residual_tol) {
    std::ostringstream msg;
    msg << "eigensolver residual " << worst << " exceeds tolerance " << residual_tol;
    throw NumericalError(msg.str());
  }

  project_operators(fem, params, basis);
  return basis;
}

double max_eig_residual(const FemMatrices& fem, const LaplaceBasis& basis) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < basis.size(); ++i) {
    const VecX r =
        fem.S * basis.eigvecs.col(i) - basis.eigenvalues[i] * (fem.M * basis.eigvecs.col(i));
    worst = std::max(worst, r.norm() / basis.eigvecs.col(i).norm());
  }
  return worst;
}

std::uint64_t basis_cache_key(std::uint64_t mesh_hash, const PhysicsParams& params,
                              const BasisTruncation& truncation) {
  auto mix = [](std::uint64_t h, const void* data, size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
    return h;
  };
  std::uint64_t h = 14695981039346656037ULL;
  h = mix(h, &mesh_hash, sizeof(mesh_hash));
  const Eigen::Matrix3d d = params.diffusion();
  h = mix(h, d.data(), sizeof(double) * 9);
  const double fields[3] = {params.t2, params.rho, params.gamma};
  h = mix(h, fields, sizeof(fields));
  h = mix(h, &truncation.n_eig, sizeof(truncation.n_eig));
  h = mix(h, &truncation.length_scale, sizeof(truncation.length_scale));
  h = mix(h, &truncation.cap, sizeof(truncation.cap));
  return h;
}

namespace {

constexpr std::uint64_t kBasisMagic = 0x44524d4942415331ULL;  // "DRMIBAS1"

void write_block(std::FILE* f, const void* data, size_t bytes) {
  if (std::fwrite(data, 1, bytes, f) != bytes) throw ValidationError("short write to basis cache");
}

void read_block(std::FILE* f, void* data, size_t bytes) {
  if (std::fread(data, 1, bytes, f) != bytes) throw ValidationError("short read from basis cache");
}

void write_mat(std::FILE* f, const MatX& m) {
  const std::int64_t r = m.rows(), c = m.cols();
  write_block(f, &r, sizeof(r));
  write_block(f, &c, sizeof(c));
  write_block(f, m.data(), sizeof(double) * m.size());
}

MatX read_mat(std::FILE* f) {
  std::int64_t r = 0, c = 0;
  read_block(f, &r, sizeof(r));
  read_block(f, &c, sizeof(c));
  if (r < 0 || c < 0 || r * c > (1LL << 32)) throw ValidationError("corrupt basis cache header");
  MatX m(r, c);
  read_block(f, m.data(), sizeof(double) * m.size());
  return m;
}

}  // namespace

void save_basis(const LaplaceBasis& basis, const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw ValidationError("cannot write basis cache: " + path.string());
  write_block(f, &kBasisMagic, sizeof(kBasisMagic));
  write_mat(f, basis.eigenvalues);
  write_mat(f, basis.eigvecs);
  write_mat(f, basis.Ax);
  write_mat(f, basis.Ay);
  write_mat(f, basis.Az);
  write_mat(f, basis.T);
  write_mat(f, basis.moments);
  std::fclose(f);
}

LaplaceBasis load_basis(const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.string().c_str(), "rb");
  if (!f) throw ValidationError("cannot read basis cache: " + path.string());
  std::uint64_t magic = 0;
  LaplaceBasis basis;
  try {
    read_block(f, &magic, sizeof(magic));
    if (magic != kBasisMagic) throw ValidationError("not a basis cache file: " + path.string());
    basis.eigenvalues = read_mat(f);
    basis.eigvecs = read_mat(f);
    basis.Ax = read_mat(f);
    basis.Ay = read_mat(f);
    basis.Az = read_mat(f);
    basis.T = read_mat(f);
    basis.moments = read_mat(f);
  } catch (...) {
    std::fclose(f);
    throw;
  }
  std::fclose(f);
  return basis;
}

}  // namespace dmri
