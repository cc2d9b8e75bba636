#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "dmri/deform.hpp"
#include "dmri/mesh.hpp"

namespace dmri::testing {

// Reference tetrahedron (0,0,0),(1,0,0),(0,1,0),(0,0,1), volume 1/6.
inline TetMesh unit_tet() {
  MatX3 v(4, 3);
  v << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1;
  MatX4i t(1, 4);
  t << 0, 1, 2, 3;
  return make_tet_mesh(v, t);
}

// Structured box [0,lx]x[0,ly]x[0,lz] with nx*ny*nz cells, six tets per cell
// (uniform-diagonal Freudenthal split, conforming across cells).
inline TetMesh box_mesh(int nx, int ny, int nz, double lx, double ly, double lz) {
  const int vx = nx + 1, vy = ny + 1, vz = nz + 1;
  MatX3 vertices(static_cast<long>(vx) * vy * vz, 3);
  auto vid = [&](int i, int j, int k) { return (k * vy + j) * vx + i; };
  for (int k = 0; k < vz; ++k) {
    for (int j = 0; j < vy; ++j) {
      for (int i = 0; i < vx; ++i)
        vertices.row(vid(i, j, k)) << lx * i / nx, ly * j / ny, lz * k / nz;
    }
  }
  MatX4i tets(static_cast<long>(nx) * ny * nz * 6, 4);
  long t = 0;
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const int c000 = vid(i, j, k), c100 = vid(i + 1, j, k);
        const int c010 = vid(i, j + 1, k), c110 = vid(i + 1, j + 1, k);
        const int c001 = vid(i, j, k + 1), c101 = vid(i + 1, j, k + 1);
        const int c011 = vid(i, j + 1, k + 1), c111 = vid(i + 1, j + 1, k + 1);
        tets.row(t++) << c000, c100, c110, c111;
        tets.row(t++) << c000, c110, c010, c111;
        tets.row(t++) << c000, c010, c011, c111;
        tets.row(t++) << c000, c011, c001, c111;
        tets.row(t++) << c000, c001, c101, c111;
        tets.row(t++) << c000, c101, c100, c111;
      }
    }
  }
  return make_tet_mesh(vertices, tets);
}

// Shared cylinder fixtures (built once per process).
inline const TetMesh& cylinder315() {
  static const TetMesh mesh = canonical_cylinder(1.0, 5.0, 315);
  return mesh;
}

inline const TetMesh& bent_cylinder315() {
  static const TetMesh mesh = apply_bend_twist(cylinder315(), 0.3, 0.0);
  return mesh;
}

// Small cylinder for fast optimization tests.
inline const TetMesh& cylinder_small() {
  static const TetMesh mesh = canonical_cylinder(1.0, 5.0, 130);
  return mesh;
}

// Unique temporary directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace dmri::testing
