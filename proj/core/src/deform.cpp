#include "dmri/deform.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace dmri {

namespace {

constexpr double kPi = std::numbers::pi;

struct Disk {
  std::vector<double> x, y;             // polygon cross-section, area = pi*r^2
  std::vector<std::array<int, 3>> tris;  // CCW viewed from +Z
};

int ring_start(int ring) { return 1 + 3 * ring * (ring - 1); }

int disk_vertex_count(int rings) { return 1 + 3 * rings * (rings + 1); }

Disk triangulated_disk(double radius, int rings) {
  Disk disk;
  disk.x.push_back(0.0);
  disk.y.push_back(0.0);
  for (int i = 1; i <= rings; ++i) {
    const double ri = radius * i / rings;
    const int n = 6 * i;
    for (int j = 0; j < n; ++j) {
      const double a = 2.0 * kPi * j / n;
      disk.x.push_back(ri * std::cos(a));
      disk.y.push_back(ri * std::sin(a));
    }
  }
  // Inflate so the outer polygon area matches the circle exactly.
  const int k = 6 * rings;
  const double poly_area = 0.5 * k * radius * radius * std::sin(2.0 * kPi / k);
  const double alpha = std::sqrt(kPi * radius * radius / poly_area);
  for (size_t i = 0; i < disk.x.size(); ++i) {
    disk.x[i] *= alpha;
    disk.y[i] *= alpha;
  }

  for (int i = 1; i <= rings; ++i) {
    const int outer0 = ring_start(i), outer_n = 6 * i;
    const int inner0 = (i > 1) ? ring_start(i - 1) : 0;
    const int inner_n = (i > 1) ? 6 * (i - 1) : 1;
    for (int s = 0; s < 6; ++s) {
      auto outer = [&](int t) { return outer0 + (s * i + t) % outer_n; };
      auto inner = [&](int t) { return inner0 + (s * (i - 1) + t) % inner_n; };
      for (int t = 0; t < i; ++t)
        disk.tris.push_back({outer(t), outer(t + 1), inner(t)});
      for (int t = 0; t + 1 < i; ++t)
        disk.tris.push_back({inner(t), outer(t + 1), inner(t + 1)});
    }
  }
  return disk;
}

// Splits the prism with global vertex ids g (bottom 0,1,2 / top 3,4,5;
// vertical edges 0-3, 1-4, 2-5) into 3 tets. Quad diagonals pass through the
// smallest global index on each quad, so neighboring prisms agree on shared
// faces.
void split_prism(const std::array<int, 6>& g, std::vector<std::array<int, 4>>& tets) {
  static constexpr int kRelabel[6][6] = {
      {0, 1, 2, 3, 4, 5}, {1, 2, 0, 4, 5, 3}, {2, 0, 1, 5, 3, 4},
      {3, 4, 5, 0, 1, 2}, {4, 5, 3, 1, 2, 0}, {5, 3, 4, 2, 0, 1}};
  int min_pos = 0;
  for (int i = 1; i < 6; ++i) {
    if (g[i] < g[min_pos]) min_pos = i;
  }
  std::array<int, 6> v;
  for (int i = 0; i < 6; ++i) v[i] = g[kRelabel[min_pos][i]];

  if (std::min(v[1], v[5]) < std::min(v[2], v[4])) {
    tets.push_back({v[0], v[1], v[2], v[5]});
    tets.push_back({v[0], v[1], v[5], v[4]});
    tets.push_back({v[0], v[4], v[5], v[3]});
  } else {
    tets.push_back({v[0], v[1], v[2], v[4]});
    tets.push_back({v[0], v[4], v[2], v[5]});
    tets.push_back({v[0], v[4], v[5], v[3]});
  }
}

// Normalized heights hn in [0,1] from the mesh's own z-extent.
VecX normalized_heights(const TetMesh& mesh, double* range_out) {
  const double zmin = mesh.vertices.col(2).minCoeff();
  const double zmax = mesh.vertices.col(2).maxCoeff();
  const double range = zmax - zmin;
  if (range <= 0.0) throw ValidationError("mesh has no z-extent to deform along");
  if (range_out) *range_out = range;
  return (mesh.vertices.col(2).array() - zmin) / range;
}

Eigen::Matrix3d rotate90_matrix(int axis) {
  Eigen::Matrix3d r = Eigen::Matrix3d::Zero();
  switch (axis) {
    case 0: r << 1, 0, 0, 0, 0, -1, 0, 1, 0; break;
    case 1: r << 0, 0, 1, 0, 1, 0, -1, 0, 0; break;
    case 2: r << 0, -1, 0, 1, 0, 0, 0, 0, 1; break;
    default: throw ValidationError("axis must be 0, 1 or 2");
  }
  return r;
}

}  // namespace

std::string to_string(DeformKind kind) {
  switch (kind) {
    case DeformKind::bend_twist: return "bend_twist";
    case DeformKind::fanning: return "fanning";
    case DeformKind::beading: return "beading";
  }
  return "?";
}

DeformKind deform_kind_from_string(const std::string& name) {
  if (name == "bend_twist") return DeformKind::bend_twist;
  if (name == "fanning") return DeformKind::fanning;
  if (name == "beading") return DeformKind::beading;
  throw ValidationError("unknown deformation kind: " + name);
}

void DeformSpec::validate() const {
  if (bend < 0.0 || bend > 1.0) throw ValidationError("bend coefficient must lie in [0, 1]");
  if (fan_angle_deg < 0.0 || fan_angle_deg >= 90.0)
    throw ValidationError("fan angle must lie in [0, 90) degrees");
  if (bead_amplitude < 0.0 || bead_amplitude > 0.5)
    throw ValidationError("bead amplitude must lie in [0, 0.5]");
  if (bead_count < 0) throw ValidationError("bead count must be >= 0");
}

TetMesh canonical_cylinder(double radius, double height, int vertex_budget) {
  if (radius <= 0.0 || height <= 0.0)
    throw ValidationError("cylinder radius and height must be positive");
  if (vertex_budget < 20)
    throw ValidationError("vertex budget too small (need >= 20, got " +
                          std::to_string(vertex_budget) + ")");
  const double aspect = std::max(height / (2.0 * radius), 2.0 * radius / height);
  if (aspect > 1000.0)
    throw NumericalError("cylinder aspect ratio " + std::to_string(aspect) +
                         ":1 exceeds meshable range (1000:1)");

  // Pick (rings, layers) close to the budget, preferring near-isotropic
  // elements (layer thickness ~ radial spacing).
  int best_rings = 0, best_layers = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (int rings = 1; rings <= 12; ++rings) {
    const int vpl = disk_vertex_count(rings);
    const int layers = std::max(2L, std::lround(static_cast<double>(vertex_budget) / vpl));
    const long total = static_cast<long>(layers) * vpl;
    const double budget_err = std::abs(total - static_cast<double>(vertex_budget)) / vertex_budget;
    const double iso = std::abs(std::log((height / (layers - 1)) / (radius / rings)));
    const double score = budget_err + 0.5 * iso;
    if (score < best_score) {
      best_score = score;
      best_rings = rings;
      best_layers = layers;
    }
  }
  const int vpl = disk_vertex_count(best_rings);
  const long total = static_cast<long>(best_layers) * vpl;
  if (std::abs(total - static_cast<double>(vertex_budget)) > 0.1 * vertex_budget)
    throw ValidationError("cannot mesh cylinder within 10% of vertex budget " +
                          std::to_string(vertex_budget));

  const Disk disk = triangulated_disk(radius, best_rings);
  MatX3 vertices(total, 3);
  for (int layer = 0; layer < best_layers; ++layer) {
    const double z = height * layer / (best_layers - 1);
    for (int p = 0; p < vpl; ++p)
      vertices.row(static_cast<long>(layer) * vpl + p) << disk.x[p], disk.y[p], z;
  }

  std::vector<std::array<int, 4>> tets;
  tets.reserve(static_cast<size_t>(disk.tris.size()) * (best_layers - 1) * 3);
  for (int layer = 0; layer + 1 < best_layers; ++layer) {
    const int lo = layer * vpl, hi = (layer + 1) * vpl;
    for (const auto& tri : disk.tris) {
      split_prism({lo + tri[0], lo + tri[1], lo + tri[2], hi + tri[0], hi + tri[1], hi + tri[2]},
                  tets);
    }
  }
  MatX4i tet_mat(tets.size(), 4);
  for (size_t t = 0; t < tets.size(); ++t)
    tet_mat.row(t) << tets[t][0], tets[t][1], tets[t][2], tets[t][3];
  return make_tet_mesh(std::move(vertices), std::move(tet_mat));
}

TetMesh apply_bend_twist(const TetMesh& mesh, double bend, double twist) {
  double range = 0.0;
  const VecX hn = normalized_heights(mesh, &range);
  MatX3 v = mesh.vertices;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double angle = twist * hn[i] * 2.0 * kPi;
    const double c = std::cos(angle), s = std::sin(angle);
    const double x = v(i, 0), y = v(i, 1);
    v(i, 0) = c * x - s * y + bend * hn[i] * hn[i] * range;
    v(i, 1) = s * x + c * y;
  }
  return with_vertices(mesh, std::move(v));
}

TetMesh apply_fanning(const TetMesh& mesh, double fan_angle_deg) {
  if (fan_angle_deg < 0.0 || fan_angle_deg >= 90.0)
    throw ValidationError("fan angle must lie in [0, 90) degrees");
  if (fan_angle_deg == 0.0) return mesh;
  const double a = fan_angle_deg * kPi / 180.0;
  double range = 0.0;
  const VecX hn = normalized_heights(mesh, &range);
  MatX3 v = mesh.vertices;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    // x(z) follows the centroid curve with slope tan(a*hn):
    // integral_0^hn tan(a u) du * range = -(range/a) ln cos(a*hn)
    v(i, 0) += -(range / a) * std::log(std::cos(a * hn[i]));
  }
  return with_vertices(mesh, std::move(v));
}

TetMesh apply_beading(const TetMesh& mesh, int bead_count, double amplitude) {
  if (bead_count < 0) throw ValidationError("bead count must be >= 0");
  if (bead_count == 0) return mesh;
  const VecX hn = normalized_heights(mesh, nullptr);
  MatX3 v = mesh.vertices;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double s = std::sin(kPi * bead_count * hn[i]);
    const double scale = 1.0 + amplitude * s * s;
    v(i, 0) *= scale;
    v(i, 1) *= scale;
  }
  return with_vertices(mesh, std::move(v));
}

TetMesh apply_deform(const TetMesh& mesh, const DeformSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case DeformKind::bend_twist: return apply_bend_twist(mesh, spec.bend, spec.twist);
    case DeformKind::fanning: return apply_fanning(mesh, spec.fan_angle_deg);
    case DeformKind::beading: return apply_beading(mesh, spec.bead_count, spec.bead_amplitude);
  }
  throw ValidationError("unknown deformation kind");
}

AugmentOp AugmentOp::scale(int axis, double factor) {
  AugmentOp op;
  op.kind = Kind::scale;
  op.axis = axis;
  op.factor = factor;
  return op;
}

AugmentOp AugmentOp::rotate90(std::initializer_list<int> axes) {
  AugmentOp op;
  op.kind = Kind::rotate90;
  int i = 0;
  for (int a : axes) {
    if (i >= 3) throw ValidationError("rotate90 takes at most 3 axes");
    op.axes[i++] = a;
  }
  if (i == 0) throw ValidationError("rotate90 needs at least one axis");
  return op;
}

AugmentOp AugmentOp::rotate180(int axis) {
  AugmentOp op;
  op.kind = Kind::rotate180;
  op.axis = axis;
  return op;
}

TetMesh augment(const TetMesh& mesh, const AugmentOp& op) {
  const Vec3 center = bounding_box_center(mesh);
  MatX3 v = mesh.vertices;
  switch (op.kind) {
    case AugmentOp::Kind::scale: {
      if (op.factor <= 0.0) throw ValidationError("scale factor must be positive");
      if (op.axis < 0 || op.axis > 2) throw ValidationError("axis must be 0, 1 or 2");
      v.col(op.axis) = ((v.col(op.axis).array() - center[op.axis]) * op.factor + center[op.axis])
                           .matrix();
      break;
    }
    case AugmentOp::Kind::rotate90: {
      Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
      for (int a : op.axes) {
        if (a >= 0) r = rotate90_matrix(a) * r;
      }
      v = ((v.rowwise() - center.transpose()) * r.transpose()).rowwise() + center.transpose();
      break;
    }
    case AugmentOp::Kind::rotate180: {
      const Eigen::Matrix3d r90 = rotate90_matrix(op.axis);
      const Eigen::Matrix3d r = r90 * r90;
      v = ((v.rowwise() - center.transpose()) * r.transpose()).rowwise() + center.transpose();
      break;
    }
  }
  return with_vertices(mesh, std::move(v));
}

}  // namespace dmri
