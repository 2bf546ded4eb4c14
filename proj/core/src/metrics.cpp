#include "mvrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "mvrec/rng.hpp"

namespace mvrec {
namespace {

inline double dist2(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

inline double axis_coord(const Vec3& p, int axis) {
  return axis == 0 ? p.x : (axis == 1 ? p.y : p.z);
}

}  // namespace

KdTree::KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
  if (points_.empty()) {
    throw std::invalid_argument("KdTree: empty point set");
  }
  std::vector<std::int32_t> idx(points_.size());
  std::iota(idx.begin(), idx.end(), 0);
  nodes_.reserve(points_.size());
  root_ = build(idx.data(), std::int32_t(idx.size()), 0);
}

std::int32_t KdTree::build(std::int32_t* idx, std::int32_t count, int depth) {
  if (count <= 0) return -1;
  const int axis = depth % 3;
  const std::int32_t mid = count / 2;
  std::nth_element(idx, idx + mid, idx + count,
                   [&](std::int32_t a, std::int32_t b) {
                     return axis_coord(points_[a], axis) <
                            axis_coord(points_[b], axis);
                   });
  const std::int32_t node_id = std::int32_t(nodes_.size());
  nodes_.push_back({});
  nodes_[node_id].point = idx[mid];
  nodes_[node_id].axis = std::int8_t(axis);
  const std::int32_t left = build(idx, mid, depth + 1);
  const std::int32_t right = build(idx + mid + 1, count - mid - 1, depth + 1);
  nodes_[node_id].left = left;
  nodes_[node_id].right = right;
  return node_id;
}

void KdTree::search(std::int32_t node, const Vec3& q, std::size_t& best,
                    double& best_d2) const {
  if (node < 0) return;
  const Node& n = nodes_[node];
  const double d2 = dist2(q, points_[n.point]);
  if (d2 < best_d2) {
    best_d2 = d2;
    best = std::size_t(n.point);
  }
  const double delta =
      axis_coord(q, n.axis) - axis_coord(points_[n.point], n.axis);
  const std::int32_t near = delta < 0 ? n.left : n.right;
  const std::int32_t far = delta < 0 ? n.right : n.left;
  search(near, q, best, best_d2);
  if (delta * delta <= best_d2) search(far, q, best, best_d2);
}

std::pair<std::size_t, double> KdTree::nearest(const Vec3& q) const {
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  search(root_, q, best, best_d2);
  return {best, best_d2};
}

double chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  if (a.empty() || b.empty()) {
    throw std::invalid_argument("chamfer: empty point set");
  }
  const KdTree tree_a(a);
  const KdTree tree_b(b);
  double sum_ab = 0.0;
  for (const Vec3& p : a) sum_ab += std::sqrt(tree_b.nearest(p).second);
  double sum_ba = 0.0;
  for (const Vec3& p : b) sum_ba += std::sqrt(tree_a.nearest(p).second);
  return sum_ab / double(a.size()) + sum_ba / double(b.size());
}

namespace {

double iou_impl(const VoxelGrid& a, const VoxelGrid& b,
                const std::vector<std::uint8_t>* mask, double threshold) {
  if (a.res != b.res || a.values.size() != b.values.size()) {
    throw std::invalid_argument("iou3d: grid shapes differ");
  }
  if (a.extent != b.extent) {
    throw std::invalid_argument("iou3d: grid extents differ");
  }
  if (!a.frame.empty() && !b.frame.empty() && a.frame != b.frame) {
    throw std::invalid_argument("iou3d: grids labeled with different frames (" +
                                a.frame + " vs " + b.frame + ")");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("iou3d: threshold must lie in (0, 1)");
  }
  if (mask && mask->size() != a.values.size()) {
    throw std::invalid_argument("iou3d: mask size differs from grid size");
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t v = 0; v < a.values.size(); ++v) {
    if (mask && !(*mask)[v]) continue;
    const bool oa = a.values[v] > threshold;
    const bool ob = b.values[v] > threshold;
    inter += (oa && ob);
    uni += (oa || ob);
  }
  return uni == 0 ? 1.0 : double(inter) / double(uni);
}

}  // namespace

double iou3d(const VoxelGrid& a, const VoxelGrid& b, double threshold) {
  return iou_impl(a, b, nullptr, threshold);
}

double iou3d_masked(const VoxelGrid& a, const VoxelGrid& b,
                    const std::vector<std::uint8_t>& mask, double threshold) {
  return iou_impl(a, b, &mask, threshold);
}

std::vector<Vec3> mesh_to_points(const TriangleMesh& mesh, int n,
                                 std::uint64_t seed) {
  mesh.validate();
  if (mesh.empty()) {
    throw std::invalid_argument("mesh_to_points: empty mesh");
  }
  if (n < 1) throw std::invalid_argument("mesh_to_points: n must be >= 1");

  std::vector<double> cum(mesh.triangles.size());
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const Vec3& a = mesh.vertices[mesh.triangles[t][0]];
    const Vec3& b = mesh.vertices[mesh.triangles[t][1]];
    const Vec3& c = mesh.vertices[mesh.triangles[t][2]];
    total += 0.5 * (b - a).cross(c - a).norm();
    cum[t] = total;
  }
  if (!(total > 0.0)) {
    throw std::invalid_argument("mesh_to_points: zero surface area");
  }

  Rng rng(seed);
  std::vector<Vec3> out;
  out.reserve(std::size_t(n));
  for (int s = 0; s < n; ++s) {
    const double u = rng.uniform() * total;
    const std::size_t t =
        std::size_t(std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
    const std::size_t ti = std::min(t, cum.size() - 1);
    const Vec3& a = mesh.vertices[mesh.triangles[ti][0]];
    const Vec3& b = mesh.vertices[mesh.triangles[ti][1]];
    const Vec3& c = mesh.vertices[mesh.triangles[ti][2]];
    // Uniform barycentric sample via the sqrt trick.
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const double wa = 1.0 - r1;
    const double wb = r1 * (1.0 - r2);
    const double wc = r1 * r2;
    out.push_back(a * wa + b * wb + c * wc);
  }
  return out;
}

std::vector<double> per_vertex_chamfer(const TriangleMesh& mesh,
                                       const std::vector<Vec3>& ref) {
  mesh.validate();
  if (mesh.vertices.empty()) {
    throw std::invalid_argument("per_vertex_chamfer: mesh has no vertices");
  }
  if (ref.empty()) {
    throw std::invalid_argument("per_vertex_chamfer: empty reference set");
  }
  const KdTree tree(ref);
  std::vector<double> out(mesh.vertices.size());
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    out[v] = std::sqrt(tree.nearest(mesh.vertices[v]).second);
  }
  return out;
}

}  // namespace mvrec
