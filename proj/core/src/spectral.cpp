#include "dmri/spectral.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <vector>

namespace dmri {

namespace {

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

void check_same_connectivity(const SpectralCodec& codec, const TetMesh& mesh) {
  if (mesh.num_vertices() != codec.num_vertices || mesh.tets.rows() != codec.ref_tets.rows() ||
      (mesh.tets - codec.ref_tets).cwiseAbs().maxCoeff() != 0)
    throw ValidationError("mesh connectivity does not match the codec's reference connectivity");
}

}  // namespace

MatX graph_laplacian(Eigen::Index num_vertices,
                     const std::vector<std::pair<int, int>>& edges) {
  MatX lap = MatX::Zero(num_vertices, num_vertices);
  for (const auto& [a, b] : edges) {
    if (a < 0 || b < 0 || a >= num_vertices || b >= num_vertices)
      throw ValidationError("edge index out of range");
    if (a == b) continue;
    if (lap(a, b) == 0.0) {  // unweighted: count each undirected edge once
      lap(a, b) = lap(b, a) = -1.0;
      lap(a, a) += 1.0;
      lap(b, b) += 1.0;
    }
  }
  return lap;
}

void laplacian_eigenbasis(const MatX& laplacian, VecX& eigenvalues, MatX& eigenvectors) {
  Eigen::SelfAdjointEigenSolver<MatX> es(laplacian);
  if (es.info() != Eigen::Success)
    throw NumericalError("graph Laplacian eigendecomposition failed");
  eigenvalues = es.eigenvalues();
  eigenvectors = es.eigenvectors();
  apply_sign_convention(eigenvectors);
}

std::vector<std::pair<int, int>> mesh_edges(const TetMesh& mesh) {
  std::set<std::pair<int, int>> edges;
  for (Eigen::Index t = 0; t < mesh.num_tets(); ++t) {
    for (int i = 0; i < 4; ++i) {
      for (int j = i + 1; j < 4; ++j) {
        int a = mesh.tets(t, i), b = mesh.tets(t, j);
        if (a > b) std::swap(a, b);
        edges.emplace(a, b);
      }
    }
  }
  return {edges.begin(), edges.end()};
}

std::vector<LatentEntry> default_latent_modes(int latent_dim, int n_coeff) {
  if (latent_dim <= 0) throw ValidationError("latent dimension must be positive");
  if (latent_dim > 3 * (n_coeff - 1))
    throw ValidationError("latent dimension exceeds available non-constant coefficients");
  std::vector<LatentEntry> modes;
  modes.reserve(latent_dim);
  for (int mode = 1; static_cast<int>(modes.size()) < latent_dim; ++mode) {
    for (int axis = 0; axis < 3 && static_cast<int>(modes.size()) < latent_dim; ++axis)
      modes.push_back({mode, axis});
  }
  return modes;
}

SpectralCodec build_codec(const TetMesh& mesh, int n_coeff, int latent_dim) {
  const Eigen::Index V = mesh.num_vertices();
  if (n_coeff < 1 || n_coeff > V)
    throw ValidationError("n_coeff must lie in [1, V]");

  // Reject disconnected graphs up front; the zero eigenvalue would otherwise
  // be degenerate and the constant mode ill-defined.
  {
    std::vector<std::vector<int>> adj(V);
    for (const auto& [a, b] : mesh_edges(mesh)) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    std::vector<char> seen(V, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int w : adj[v]) {
        if (!seen[w]) {
          seen[w] = 1;
          stack.push_back(w);
        }
      }
    }
    for (Eigen::Index v = 0; v < V; ++v) {
      if (!seen[v])
        throw ValidationError(
            "vertex graph is disconnected: zero Laplacian eigenvalue has multiplicity > 1");
    }
  }

  SpectralCodec codec;
  codec.ref_tets = mesh.tets;
  codec.ref_boundary_faces = mesh.boundary_faces;
  codec.num_vertices = V;
  codec.n_coeff = n_coeff;
  codec.latent_modes = default_latent_modes(latent_dim, n_coeff);

  const MatX lap = graph_laplacian(V, mesh_edges(mesh));
  laplacian_eigenbasis(lap, codec.graph_eigenvalues, codec.phi);
  return codec;
}

MatX3 encode(const SpectralCodec& codec, const TetMesh& mesh) {
  check_same_connectivity(codec, mesh);
  return codec.phi.leftCols(codec.n_coeff).transpose() * mesh.vertices;
}

DecodeResult decode(const SpectralCodec& codec, const MatX3& coefficients) {
  if (coefficients.rows() != codec.n_coeff)
    throw ValidationError("coefficient matrix must have n_coeff rows");
  DecodeResult out;
  out.mesh.vertices = codec.phi.leftCols(codec.n_coeff) * coefficients;
  out.mesh.tets = codec.ref_tets;
  out.mesh.boundary_faces = codec.ref_boundary_faces;
  out.inverted_tets = count_nonpositive_tets(out.mesh);
  return out;
}

VecX to_latent(const SpectralCodec& codec, const MatX3& coefficients) {
  if (coefficients.rows() != codec.n_coeff)
    throw ValidationError("coefficient matrix must have n_coeff rows");
  VecX z(codec.latent_dim());
  for (int i = 0; i < codec.latent_dim(); ++i) {
    const auto& entry = codec.latent_modes[i];
    if (entry.mode < 0 || entry.mode >= codec.n_coeff || entry.axis < 0 || entry.axis > 2)
      throw ValidationError("latent entry out of range");
    z[i] = coefficients(entry.mode, entry.axis);
  }
  return z;
}

MatX3 from_latent(const SpectralCodec& codec, const VecX& z, const MatX3& base_coefficients) {
  if (z.size() != codec.latent_dim())
    throw ValidationError("latent vector dimension does not match the codec");
  if (base_coefficients.rows() != codec.n_coeff)
    throw ValidationError("base coefficient matrix must have n_coeff rows");
  MatX3 c = base_coefficients;
  for (int i = 0; i < codec.latent_dim(); ++i) {
    const auto& entry = codec.latent_modes[i];
    c(entry.mode, entry.axis) = z[i];
  }
  return c;
}

void write_coefficients_csv(const MatX3& coefficients, const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw ValidationError("cannot write coefficients CSV: " + path.string());
  std::fprintf(f, "mode,cx,cy,cz\n");
  for (Eigen::Index m = 0; m < coefficients.rows(); ++m) {
    std::fprintf(f, "%lld,%.17g,%.17g,%.17g\n", static_cast<long long>(m), coefficients(m, 0),
                 coefficients(m, 1), coefficients(m, 2));
  }
  std::fclose(f);
}

std::uint64_t codec_cache_key(std::uint64_t connectivity_hash_value, int n_coeff, int latent_dim) {
  std::uint64_t h = 14695981039346656037ULL;
  auto mix = [&h](const void* data, size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  mix(&connectivity_hash_value, sizeof(connectivity_hash_value));
  mix(&n_coeff, sizeof(n_coeff));
  mix(&latent_dim, sizeof(latent_dim));
  return h;
}

namespace {

constexpr std::uint64_t kCodecMagic = 0x44524d49434f4431ULL;  // "DRMICOD1"

void write_block(std::FILE* f, const void* data, size_t bytes) {
  if (std::fwrite(data, 1, bytes, f) != bytes) throw ValidationError("short write to codec cache");
}

void read_block(std::FILE* f, void* data, size_t bytes) {
  if (std::fread(data, 1, bytes, f) != bytes) throw ValidationError("short read from codec cache");
}

}  // namespace

void save_codec(const SpectralCodec& codec, const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw ValidationError("cannot write codec cache: " + path.string());
  write_block(f, &kCodecMagic, sizeof(kCodecMagic));
  const std::int64_t V = codec.num_vertices, T = codec.ref_tets.rows(),
                     B = codec.ref_boundary_faces.rows();
  const std::int64_t n_coeff = codec.n_coeff, n_latent = codec.latent_dim();
  write_block(f, &V, sizeof(V));
  write_block(f, &T, sizeof(T));
  write_block(f, &B, sizeof(B));
  write_block(f, &n_coeff, sizeof(n_coeff));
  write_block(f, &n_latent, sizeof(n_latent));
  write_block(f, codec.ref_tets.data(), sizeof(int) * codec.ref_tets.size());
  write_block(f, codec.ref_boundary_faces.data(), sizeof(int) * codec.ref_boundary_faces.size());
  write_block(f, codec.graph_eigenvalues.data(), sizeof(double) * V);
  write_block(f, codec.phi.data(), sizeof(double) * V * V);
  for (const auto& e : codec.latent_modes) {
    write_block(f, &e.mode, sizeof(e.mode));
    write_block(f, &e.axis, sizeof(e.axis));
  }
  std::fclose(f);
}

SpectralCodec load_codec(const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.string().c_str(), "rb");
  if (!f) throw ValidationError("cannot read codec cache: " + path.string());
  SpectralCodec codec;
  try {
    std::uint64_t magic = 0;
    read_block(f, &magic, sizeof(magic));
    if (magic != kCodecMagic) throw ValidationError("not a codec cache file: " + path.string());
    std::int64_t V = 0, T = 0, B = 0, n_coeff = 0, n_latent = 0;
    read_block(f, &V, sizeof(V));
    read_block(f, &T, sizeof(T));
    read_block(f, &B, sizeof(B));
    read_block(f, &n_coeff, sizeof(n_coeff));
    read_block(f, &n_latent, sizeof(n_latent));
    if (V <= 0 || T <= 0 || B < 0 || n_coeff <= 0 || n_latent < 0)
      throw ValidationError("corrupt codec cache header");
    codec.num_vertices = V;
    codec.n_coeff = static_cast<int>(n_coeff);
    codec.ref_tets.resize(T, 4);
    codec.ref_boundary_faces.resize(B, 3);
    read_block(f, codec.ref_tets.data(), sizeof(int) * codec.ref_tets.size());
    read_block(f, codec.ref_boundary_faces.data(), sizeof(int) * codec.ref_boundary_faces.size());
    codec.graph_eigenvalues.resize(V);
    codec.phi.resize(V, V);
    read_block(f, codec.graph_eigenvalues.data(), sizeof(double) * V);
    read_block(f, codec.phi.data(), sizeof(double) * V * V);
    codec.latent_modes.resize(n_latent);
    for (auto& e : codec.latent_modes) {
      read_block(f, &e.mode, sizeof(e.mode));
      read_block(f, &e.axis, sizeof(e.axis));
    }
  } catch (...) {
    std::fclose(f);
    throw;
  }
  std::fclose(f);
  return codec;
}

}  // namespace dmri
