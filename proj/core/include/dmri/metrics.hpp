#pragma once

#include <vector>

#include "dmri/mesh.hpp"
#include "dmri/types.hpp"

namespace dmri {

// Exact nearest-neighbor search over a fixed 3D point cloud.
class KdTree3 {
 public:
  explicit KdTree3(const MatX3& points);

  // Index of and distance to the closest stored point.
  std::pair<Eigen::Index, double> nearest(const Vec3& query) const;

 private:
  struct Node {
    int left = -1, right = -1;
    int begin = 0, end = 0;  // leaf range into order_
    int axis = -1;
    double split = 0.0;
  };
  int build(int begin, int end);
  void search(int node, const Vec3& q, Eigen::Index& best, double& best_sq) const;

  MatX3 points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

enum class NnMethod { kdtree, brute_force };

// Symmetric Chamfer distance with absolute (not squared) Euclidean
// nearest-neighbor distances:
//   d = (1/2n) sum_i |x_i - NN(x_i, P2)| + (1/2m) sum_j |x_j - NN(x_j, P1)|.
double chamfer(const MatX3& cloud1, const MatX3& cloud2, NnMethod method = NnMethod::kdtree);

// Distance of each point of `cloud` to its nearest neighbor in `reference`
// (error heatmap data).
VecX nearest_distances(const MatX3& cloud, const MatX3& reference,
                       NnMethod method = NnMethod::kdtree);

// The 48 signed-permutation transforms: the 24 axis-aligned 90-degree
// rotations, each optionally composed with central inversion.
const std::vector<Eigen::Matrix3d>& symmetry_transforms();

// min over the transform group (applied to the first mesh about its
// bounding-box center) of the Chamfer distance between vertex clouds.
double modified_chamfer(const TetMesh& mesh, const TetMesh& reference,
                        NnMethod method = NnMethod::kdtree);

}  // namespace dmri
