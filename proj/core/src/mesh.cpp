#include "dmri/mesh.hpp"

#include <array>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace dmri {

namespace {

// Face slots of a positively oriented tet (a,b,c,d), outward-oriented.
constexpr int kFaceSlots[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};

std::array<int, 3> sorted_key(int i, int j, int k) {
  std::array<int, 3> key{i, j, k};
  if (key[0] > key[1]) std::swap(key[0], key[1]);
  if (key[1] > key[2]) std::swap(key[1], key[2]);
  if (key[0] > key[1]) std::swap(key[0], key[1]);
  return key;
}

// Reads whitespace-delimited numeric rows, skipping blank lines and
// '#' comments. Each returned row is one data line's tokens.
std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    std::istringstream ss(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (ss >> tok) tokens.push_back(tok);
    if (!tokens.empty()) rows.push_back(std::move(tokens));
  }
  return rows;
}

long parse_int(const std::string& tok, const std::string& context) {
  size_t used = 0;
  long value = 0;
  try {
    value = std::stol(tok, &used);
  } catch (const std::exception&) {
    throw ValidationError("expected integer in " + context + ", got '" + tok + "'");
  }
  if (used != tok.size())
    throw ValidationError("expected integer in " + context + ", got '" + tok + "'");
  return value;
}

double parse_double(const std::string& tok, const std::string& context) {
  size_t used = 0;
  double value = 0;
  try {
    value = std::stod(tok, &used);
  } catch (const std::exception&) {
    throw ValidationError("expected number in " + context + ", got '" + tok + "'");
  }
  if (used != tok.size())
    throw ValidationError("expected number in " + context + ", got '" + tok + "'");
  return value;
}

void check_connected(const TetMesh& mesh) {
  const auto V = mesh.num_vertices();
  std::vector<std::vector<int>> adj(V);
  for (Eigen::Index t = 0; t < mesh.num_tets(); ++t) {
    for (int i = 0; i < 4; ++i) {
      for (int j = i + 1; j < 4; ++j) {
        const int a = mesh.tets(t, i), b = mesh.tets(t, j);
        adj[a].push_back(b);
        adj[b].push_back(a);
      }
    }
  }
  std::vector<char> seen(V, 0);
  std::vector<int> stack{mesh.tets(0, 0)};
  seen[mesh.tets(0, 0)] = 1;
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
      throw ValidationError("mesh is not a single connected component (vertex " +
                            std::to_string(v) + " unreachable)");
  }
}

MatX3i extract_boundary_faces(const TetMesh& mesh) {
  // key -> (count, oriented face of first owner)
  std::map<std::array<int, 3>, std::pair<int, std::array<int, 3>>> faces;
  for (Eigen::Index t = 0; t < mesh.num_tets(); ++t) {
    for (const auto& slot : kFaceSlots) {
      std::array<int, 3> face{mesh.tets(t, slot[0]), mesh.tets(t, slot[1]),
                              mesh.tets(t, slot[2])};
      auto key = sorted_key(face[0], face[1], face[2]);
      auto [it, inserted] = faces.try_emplace(key, 0, face);
      it->second.first += 1;
      if (it->second.first > 2)
        throw ValidationError("non-manifold face shared by more than 2 tets");
    }
  }
  std::vector<std::array<int, 3>> boundary;
  for (const auto& [key, entry] : faces) {
    if (entry.first == 1) boundary.push_back(entry.second);
  }
  MatX3i out(boundary.size(), 3);
  for (size_t i = 0; i < boundary.size(); ++i)
    out.row(i) << boundary[i][0], boundary[i][1], boundary[i][2];
  return out;
}

std::uint64_t fnv1a(std::uint64_t h, const void* data, size_t n) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;

}  // namespace

double tet_signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).cross(c - a).dot(d - a) / 6.0;
}

TetMesh make_tet_mesh(MatX3 vertices, MatX4i tets) {
  const Eigen::Index V = vertices.rows();
  if (V < 4) throw ValidationError("mesh needs at least 4 vertices, got " + std::to_string(V));
  if (tets.rows() < 1) throw ValidationError("mesh has no tetrahedra");
  if (!vertices.allFinite()) throw ValidationError("non-finite vertex coordinate");

  for (Eigen::Index t = 0; t < tets.rows(); ++t) {
    for (int i = 0; i < 4; ++i) {
      const int idx = tets(t, i);
      if (idx < 0 || idx >= V)
        throw ValidationError("tet " + std::to_string(t) + " references vertex " +
                              std::to_string(idx) + " outside [0, " + std::to_string(V) + ")");
      for (int j = i + 1; j < 4; ++j) {
        if (tets(t, j) == idx)
          throw ValidationError("tet " + std::to_string(t) + " repeats vertex " +
                                std::to_string(idx));
      }
    }
    const double vol = tet_signed_volume(vertices.row(tets(t, 0)), vertices.row(tets(t, 1)),
                                         vertices.row(tets(t, 2)), vertices.row(tets(t, 3)));
    if (std::abs(vol) <= kVolumeEps)
      throw ValidationError("degenerate tet " + std::to_string(t) + " (|volume| = " +
                            std::to_string(std::abs(vol)) + " um^3)");
    if (vol < 0) std::swap(tets(t, 2), tets(t, 3));  // canonical positive orientation
  }

  TetMesh mesh;
  mesh.vertices = std::move(vertices);
  mesh.tets = std::move(tets);
  check_connected(mesh);
  mesh.boundary_faces = extract_boundary_faces(mesh);
  return mesh;
}

TetMesh with_vertices(const TetMesh& mesh, MatX3 vertices) {
  if (vertices.rows() != mesh.num_vertices())
    throw ValidationError("with_vertices: vertex count mismatch");
  TetMesh out;
  out.vertices = std::move(vertices);
  out.tets = mesh.tets;
  out.boundary_faces = mesh.boundary_faces;
  return out;
}

TetMesh load_mesh(const std::filesystem::path& node_path,
                  const std::filesystem::path& ele_path) {
  const auto node_rows = read_rows(node_path);
  if (node_rows.empty()) throw ValidationError("empty node file: " + node_path.string());
  if (node_rows[0].size() != 4)
    throw ValidationError("malformed node header (want 'V 3 0 0'): " + node_path.string());
  const long V = parse_int(node_rows[0][0], "node header");
  const long dim = parse_int(node_rows[0][1], "node header");
  if (dim != 3) throw ValidationError("node file must be 3-dimensional");
  if (static_cast<long>(node_rows.size()) - 1 != V)
    throw ValidationError("node file declares " + std::to_string(V) + " vertices but has " +
                          std::to_string(node_rows.size() - 1) + " rows");

  MatX3 vertices(V, 3);
  long index_base = -1;
  for (long i = 0; i < V; ++i) {
    const auto& row = node_rows[i + 1];
    if (row.size() != 4)
      throw ValidationError("malformed node row " + std::to_string(i + 1) + " (want 'idx x y z')");
    const long idx = parse_int(row[0], "node row");
    if (i == 0) {
      if (idx != 0 && idx != 1)
        throw ValidationError("node indices must start at 0 or 1, got " + std::to_string(idx));
      index_base = idx;
    }
    if (idx != i + index_base)
      throw ValidationError("non-consecutive node index " + std::to_string(idx));
    for (int k = 0; k < 3; ++k) vertices(i, k) = parse_double(row[k + 1], "node row");
  }

  const auto ele_rows = read_rows(ele_path);
  if (ele_rows.empty()) throw ValidationError("empty element file: " + ele_path.string());
  if (ele_rows[0].size() != 3)
    throw ValidationError("malformed element header (want 'T 4 0'): " + ele_path.string());
  const long T = parse_int(ele_rows[0][0], "element header");
  const long nodes_per_ele = parse_int(ele_rows[0][1], "element header");
  if (nodes_per_ele != 4)
    throw ValidationError("only 4-node tetrahedral elements are supported");
  if (static_cast<long>(ele_rows.size()) - 1 != T)
    throw ValidationError("element file declares " + std::to_string(T) + " elements but has " +
                          std::to_string(ele_rows.size() - 1) + " rows");

  MatX4i tets(T, 4);
  for (long t = 0; t < T; ++t) {
    const auto& row = ele_rows[t + 1];
    if (row.size() != 5)
      throw ValidationError("malformed element row " + std::to_string(t + 1) +
                            " (want 'idx i j k l', got " + std::to_string(row.size()) +
                            " fields)");
    parse_int(row[0], "element row");  // element id, ignored beyond syntax
    for (int k = 0; k < 4; ++k) {
      const long idx = parse_int(row[k + 1], "element row") - index_base;
      if (idx < 0 || idx >= V)
        throw ValidationError("element row " + std::to_string(t + 1) + " references node " +
                              row[k + 1] + " outside the node table");
      tets(t, k) = static_cast<int>(idx);
    }
  }
  return make_tet_mesh(std::move(vertices), std::move(tets));
}

void save_mesh(const TetMesh& mesh, const std::filesystem::path& node_path,
               const std::filesystem::path& ele_path) {
  // 1-based indices on disk, matching the TetGen convention.
  std::FILE* fn = std::fopen(node_path.string().c_str(), "w");
  if (!fn) throw ValidationError("cannot write file: " + node_path.string());
  std::fprintf(fn, "%lld 3 0 0\n", static_cast<long long>(mesh.num_vertices()));
  for (Eigen::Index v = 0; v < mesh.num_vertices(); ++v) {
    std::fprintf(fn, "%lld %.17g %.17g %.17g\n", static_cast<long long>(v + 1),
                 mesh.vertices(v, 0), mesh.vertices(v, 1), mesh.vertices(v, 2));
  }
  std::fclose(fn);

  std::FILE* fe = std::fopen(ele_path.string().c_str(), "w");
  if (!fe) throw ValidationError("cannot write file: " + ele_path.string());
  std::fprintf(fe, "%lld 4 0\n", static_cast<long long>(mesh.num_tets()));
  for (Eigen::Index t = 0; t < mesh.num_tets(); ++t) {
    std::fprintf(fe, "%lld %d %d %d %d\n", static_cast<long long>(t + 1), mesh.tets(t, 0) + 1,
                 mesh.tets(t, 1) + 1, mesh.tets(t, 2) + 1, mesh.tets(t, 3) + 1);
  }
  std::fclose(fe);
}

double total_volume(const TetMesh& mesh) {
  double vol = 0.0;
  for (Eigen::Index t = 0; t < mesh.num_tets(); ++t) {
    vol += tet_signed_volume(mesh.vertices.row(mesh.tets(t, 0)), mesh.vertices.row(mesh.tets(t, 1)),
                             mesh.vertices.row(mesh.tets(t, 2)), mesh.vertices.row(mesh.tets(t, 3)));
  }
  return vol;
}

Vec3 bounding_box_center(const TetMesh& mesh) {
  const Vec3 lo = mesh.vertices.colwise().minCoeff();
  const Vec3 hi = mesh.vertices.colwise().maxCoeff();
  return 0.5 * (lo + hi);
}

int count_nonpositive_tets(const TetMesh& mesh, double eps) {
  int count = 0;
  for (Eigen::Index t = 0; t < mesh.num_tets(); ++t) {
    const double vol =
        tet_signed_volume(mesh.vertices.row(mesh.tets(t, 0)), mesh.vertices.row(mesh.tets(t, 1)),
                          mesh.vertices.row(mesh.tets(t, 2)), mesh.vertices.row(mesh.tets(t, 3)));
    if (vol <= eps) ++count;
  }
  return count;
}

std::uint64_t content_hash(const TetMesh& mesh) {
  std::uint64_t h = kFnvOffset;
  const std::int64_t V = mesh.num_vertices(), T = mesh.num_tets();
  h = fnv1a(h, &V, sizeof(V));
  h = fnv1a(h, &T, sizeof(T));
  h = fnv1a(h, mesh.vertices.data(), sizeof(double) * mesh.vertices.size());
  h = fnv1a(h, mesh.tets.data(), sizeof(int) * mesh.tets.size());
  return h;
}

std::uint64_t connectivity_hash(const TetMesh& mesh) {
  std::uint64_t h = kFnvOffset;
  const std::int64_t V = mesh.num_vertices(), T = mesh.num_tets();
  h = fnv1a(h, &V, sizeof(V));
  h = fnv1a(h, &T, sizeof(T));
  h = fnv1a(h, mesh.tets.data(), sizeof(int) * mesh.tets.size());
  return h;
}

}  // namespace dmri
