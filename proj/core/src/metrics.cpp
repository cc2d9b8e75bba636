#include "dmri/metrics.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <numeric>

namespace dmri {

KdTree3::KdTree3(const MatX3& points) : points_(points) {
  if (points_.rows() == 0) throw ValidationError("point cloud is empty");
  order_.resize(points_.rows());
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * points_.rows() / 8 + 8);
  root_ = build(0, static_cast<int>(order_.size()));
}

int KdTree3::build(int begin, int end) {
  Node node;
  node.begin = begin;
  node.end = end;
  if (end - begin <= 8) {
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size()) - 1;
  }
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (int i = begin; i < end; ++i) {
    lo = lo.cwiseMin(Vec3(points_.row(order_[i]).transpose()));
    hi = hi.cwiseMax(Vec3(points_.row(order_[i]).transpose()));
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) { return points_(a, axis) < points_(b, axis); });
  node.axis = axis;
  node.split = points_(order_[mid], axis);
  const int self = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

void KdTree3::search(int node_idx, const Vec3& q, Eigen::Index& best, double& best_sq) const {
  const Node& node = nodes_[node_idx];
  if (node.axis < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      const double d = (Vec3(points_.row(order_[i]).transpose()) - q).squaredNorm();
      if (d < best_sq) {
        best_sq = d;
        best = order_[i];
      }
    }
    return;
  }
  const double delta = q[node.axis] - node.split;
  const int near = delta < 0.0 ? node.left : node.right;
  const int far = delta < 0.0 ? node.right : node.left;
  search(near, q, best, best_sq);
  if (delta * delta < best_sq) search(far, q, best, best_sq);
}

std::pair<Eigen::Index, double> KdTree3::nearest(const Vec3& query) const {
  Eigen::Index best = -1;
  double best_sq = std::numeric_limits<double>::infinity();
  search(root_, query, best, best_sq);
  return {best, std::sqrt(best_sq)};
}

namespace {

double brute_nearest(const MatX3& cloud, const Vec3& q) {
  double best_sq = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < cloud.rows(); ++i) {
    const double d = (Vec3(cloud.row(i).transpose()) - q).squaredNorm();
    if (d < best_sq) best_sq = d;
  }
  return std::sqrt(best_sq);
}

double one_sided_sum(const MatX3& from, const MatX3& to, NnMethod method) {
  double sum = 0.0;
  if (method == NnMethod::kdtree) {
    const KdTree3 tree(to);
    for (Eigen::Index i = 0; i < from.rows(); ++i)
      sum += tree.nearest(from.row(i).transpose()).second;
  } else {
    for (Eigen::Index i = 0; i < from.rows(); ++i)
      sum += brute_nearest(to, from.row(i).transpose());
  }
  return sum;
}

}  // namespace

double chamfer(const MatX3& cloud1, const MatX3& cloud2, NnMethod method) {
  if (cloud1.rows() == 0 || cloud2.rows() == 0)
    throw ValidationError("Chamfer distance needs two non-empty point clouds");
  const double d1 = one_sided_sum(cloud1, cloud2, method) / (2.0 * cloud1.rows());
  const double d2 = one_sided_sum(cloud2, cloud1, method) / (2.0 * cloud2.rows());
  return d1 + d2;
}

VecX nearest_distances(const MatX3& cloud, const MatX3& reference, NnMethod method) {
  if (cloud.rows() == 0 || reference.rows() == 0)
    throw ValidationError("nearest_distances needs two non-empty point clouds");
  VecX out(cloud.rows());
  if (method == NnMethod::kdtree) {
    const KdTree3 tree(reference);
    for (Eigen::Index i = 0; i < cloud.rows(); ++i)
      out[i] = tree.nearest(cloud.row(i).transpose()).second;
  } else {
    for (Eigen::Index i = 0; i < cloud.rows(); ++i)
      out[i] = brute_nearest(reference, cloud.row(i).transpose());
  }
  return out;
}

const std::vector<Eigen::Matrix3d>& symmetry_transforms() {
  static const std::vector<Eigen::Matrix3d> transforms = [] {
    std::vector<Eigen::Matrix3d> out;
    out.reserve(48);
    std::array<int, 3> perm{0, 1, 2};
    std::sort(perm.begin(), perm.end());
    do {
      for (int signs = 0; signs < 8; ++signs) {
        Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
        for (int r = 0; r < 3; ++r)
          m(r, perm[r]) = (signs >> r) & 1 ? -1.0 : 1.0;
        out.push_back(m);
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
  }();
  return transforms;
}

double modified_chamfer(const TetMesh& mesh, const TetMesh& reference, NnMethod method) {
  const Vec3 center = bounding_box_center(mesh);
  const MatX3 centered = mesh.vertices.rowwise() - center.transpose();
  double best = std::numeric_limits<double>::infinity();
  for (const auto& rot : symmetry_transforms()) {
    // The identity needs no anchor; skipping the re-centering keeps
    // modified_chamfer(M, M) exactly zero.
    const bool is_identity = (rot - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() == 0.0;
    const MatX3 transformed =
        is_identity ? mesh.vertices
                    : MatX3(((centered * rot.transpose()).rowwise() + center.transpose()));
    best = std::min(best, chamfer(transformed, reference.vertices, method));
  }
  return best;
}

}  // namespace dmri
