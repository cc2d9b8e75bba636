#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>

#include "dmri/mesh.hpp"
#include "fixtures.hpp"

using namespace dmri;
using dmri::testing::TempDir;

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_SUITE("mesh") {

TEST_CASE("single tetrahedron loads with 4 boundary faces") {
  TempDir dir("mesh");
  write_file(dir.path() / "a.node",
             "4 3 0 0\n1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n");
  write_file(dir.path() / "a.ele", "1 4 0\n1 1 2 3 4\n");
  const TetMesh mesh = load_mesh(dir.path() / "a.node", dir.path() / "a.ele");
  CHECK(mesh.num_vertices() == 4);
  CHECK(mesh.num_tets() == 1);
  CHECK(mesh.boundary_faces.rows() == 4);
  CHECK(total_volume(mesh) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
}

TEST_CASE("0-based node files are accepted") {
  TempDir dir("mesh");
  write_file(dir.path() / "a.node",
             "4 3 0 0\n0 0 0 0\n1 1 0 0\n2 0 1 0\n3 0 0 1\n");
  write_file(dir.path() / "a.ele", "1 4 0\n0 0 1 2 3\n");
  const TetMesh mesh = load_mesh(dir.path() / "a.node", dir.path() / "a.ele");
  CHECK(mesh.num_vertices() == 4);
}

TEST_CASE("element row with five node indices is rejected") {
  TempDir dir("mesh");
  write_file(dir.path() / "a.node",
             "5 3 0 0\n1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n5 1 1 1\n");
  write_file(dir.path() / "a.ele", "1 4 0\n1 1 2 3 4 5\n");
  CHECK_THROWS_AS(load_mesh(dir.path() / "a.node", dir.path() / "a.ele"), ValidationError);
}

TEST_CASE("out-of-range element index is rejected") {
  TempDir dir("mesh");
  write_file(dir.path() / "a.node",
             "4 3 0 0\n1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n");
  write_file(dir.path() / "a.ele", "1 4 0\n1 1 2 3 9\n");
  CHECK_THROWS_AS(load_mesh(dir.path() / "a.node", dir.path() / "a.ele"), ValidationError);
}

TEST_CASE("degenerate tet is rejected") {
  MatX3 v(4, 3);
  v << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0.5, 0.5, 0;  // coplanar
  MatX4i t(1, 4);
  t << 0, 1, 2, 3;
  CHECK_THROWS_AS(make_tet_mesh(v, t), ValidationError);
}

TEST_CASE("disconnected mesh is rejected") {
  MatX3 v(8, 3);
  v << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1,
      10, 10, 10, 11, 10, 10, 10, 11, 10, 10, 10, 11;
  MatX4i t(2, 4);
  t << 0, 1, 2, 3, 4, 5, 6, 7;
  CHECK_THROWS_AS(make_tet_mesh(v, t), ValidationError);
}

TEST_CASE("negative-orientation tets are canonicalized") {
  MatX3 v(4, 3);
  v << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1;
  MatX4i t(1, 4);
  t << 0, 1, 3, 2;  // inverted
  const TetMesh mesh = make_tet_mesh(v, t);
  CHECK(count_nonpositive_tets(mesh) == 0);
  CHECK(total_volume(mesh) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("volume scales cubically") {
  const TetMesh base = dmri::testing::unit_tet();
  const TetMesh scaled = with_vertices(base, MatX3(2.0 * base.vertices));
  CHECK(total_volume(scaled) == doctest::Approx(8.0 * total_volume(base)).epsilon(1e-13));
}

TEST_CASE("canonical cylinder volume within 2% of pi r^2 h") {
  // Fine mesh: generous budget.
  const TetMesh mesh = canonical_cylinder(1.0, 5.0, 2000);
  const double expect = std::numbers::pi * 1.0 * 1.0 * 5.0;
  CHECK(std::abs(total_volume(mesh) - expect) / expect < 0.02);
}

TEST_CASE("315-vertex cylinder loads back from disk identically") {
  TempDir dir("mesh");
  const TetMesh& mesh = dmri::testing::cylinder315();
  CHECK(std::abs(static_cast<double>(mesh.num_vertices()) - 315.0) <= 0.1 * 315.0);
  save_mesh(mesh, dir.path() / "c.node", dir.path() / "c.ele");
  const TetMesh again = load_mesh(dir.path() / "c.node", dir.path() / "c.ele");
  REQUIRE(again.num_vertices() == mesh.num_vertices());
  CHECK((again.vertices - mesh.vertices).cwiseAbs().maxCoeff() == 0.0);  // %.17g is lossless
  CHECK((again.tets - mesh.tets).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("bounding box center") {
  const TetMesh tet = dmri::testing::unit_tet();
  CHECK((bounding_box_center(tet) - Vec3(0.5, 0.5, 0.5)).norm() == doctest::Approx(0.0));

  const Vec3 shift(3.0, -2.0, 7.5);
  const TetMesh moved = with_vertices(tet, MatX3(tet.vertices.rowwise() + shift.transpose()));
  CHECK((bounding_box_center(moved) - (Vec3(0.5, 0.5, 0.5) + shift)).norm() < 1e-14);
}

TEST_CASE("symmetric cylinder about origin has center ~0") {
  const TetMesh& cyl = dmri::testing::cylinder315();
  const Vec3 shift(0.0, 0.0, -2.5);  // center the axis range [0, 5]
  const TetMesh centered = with_vertices(cyl, MatX3(cyl.vertices.rowwise() + shift.transpose()));
  CHECK(bounding_box_center(centered).norm() < 1e-12);
}

TEST_CASE("total volume is invariant under rigid rotation") {
  const TetMesh& mesh = dmri::testing::cylinder_small();
  const double angle = 0.7;
  Eigen::Matrix3d rot;
  rot = Eigen::AngleAxisd(angle, Vec3(1.0, 2.0, 0.5).normalized());
  const TetMesh rotated = with_vertices(mesh, MatX3(mesh.vertices * rot.transpose()));
  CHECK(total_volume(rotated) ==
        doctest::Approx(total_volume(mesh)).epsilon(1e-10));
}

TEST_CASE("every interior face is shared by exactly two tets") {
  const TetMesh& mesh = dmri::testing::cylinder315();
  std::map<std::array<int, 3>, int> counts;
  constexpr int slots[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};
  for (Eigen::Index t = 0; t < mesh.num_tets(); ++t) {
    for (const auto& slot : slots) {
      std::array<int, 3> key{mesh.tets(t, slot[0]), mesh.tets(t, slot[1]),
                             mesh.tets(t, slot[2])};
      std::sort(key.begin(), key.end());
      counts[key] += 1;
    }
  }
  size_t boundary = 0;
  for (const auto& [key, count] : counts) {
    REQUIRE(count <= 2);
    if (count == 1) ++boundary;
  }
  CHECK(boundary == static_cast<size_t>(mesh.boundary_faces.rows()));
}

TEST_CASE("content hash distinguishes geometry, connectivity hash does not") {
  const TetMesh& mesh = dmri::testing::cylinder_small();
  const TetMesh moved =
      with_vertices(mesh, MatX3(mesh.vertices.rowwise() + Vec3(1, 0, 0).transpose()));
  CHECK(content_hash(mesh) != content_hash(moved));
  CHECK(connectivity_hash(mesh) == connectivity_hash(moved));
}

}  // TEST_SUITE
