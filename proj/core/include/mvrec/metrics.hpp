#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mvrec/geometry.hpp"

namespace mvrec {

// Exact nearest-neighbor index over a fixed point set. Distances are
// computed with the same expression a brute-force scan would use, so
// results match a linear scan bit-for-bit (ties may differ in index, never
// in distance).
class KdTree {
 public:
  explicit KdTree(std::vector<Vec3> points);

  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }

  // Index of a nearest point to q and the squared distance to it.
  std::pair<std::size_t, double> nearest(const Vec3& q) const;

 private:
  struct Node {
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::int32_t point = -1;
    std::int8_t axis = 0;
  };

  std::int32_t build(std::int32_t* idx, std::int32_t count, int depth);
  void search(std::int32_t node, const Vec3& q, std::size_t& best,
              double& best_d2) const;

  std::vector<Vec3> points_;
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
};

// Symmetric Chamfer distance: mean over A of the distance to the nearest
// point of B, plus the same with roles swapped. Linear (not squared)
// distances, in world units. Throws std::invalid_argument on an empty set.
double chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

// Binarizes both grids at `threshold` (strictly greater) and returns
// intersection over union; 1.0 when both are empty. Throws
// std::invalid_argument on res/extent/frame mismatch or a threshold
// outside (0, 1).
double iou3d(const VoxelGrid& a, const VoxelGrid& b, double threshold = 0.5);

// As iou3d, but restricted to the voxels where mask != 0. Mask length must
// equal the grid size. Both-empty under the mask yields 1.0.
double iou3d_masked(const VoxelGrid& a, const VoxelGrid& b,
                    const std::vector<std::uint8_t>& mask,
                    double threshold = 0.5);

// n points sampled uniformly by area from the mesh surface, deterministic
// in `seed`. Throws std::invalid_argument on an empty mesh or n < 1.
std::vector<Vec3> mesh_to_points(const TriangleMesh& mesh, int n,
                                 std::uint64_t seed);

// For each mesh vertex, the distance to the nearest reference point.
std::vector<double> per_vertex_chamfer(const TriangleMesh& mesh,
                                       const std::vector<Vec3>& ref);

struct MetricReport {
  double chamfer = 0.0;
  double iou = 0.0;
  std::vector<double> per_vertex_error;  // empty unless requested
};

}  // namespace mvrec
