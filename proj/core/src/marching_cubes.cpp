#include "mvrec/marching_cubes.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace mvrec {
namespace {

// Cell corner c sits at the unit-cube offset (c&1, c>>1&1, c>>2&1).
// Edges are listed axis-major; `lo` is the endpoint with the smaller
// coordinate along `axis`, so lo is also the lattice origin of the edge.
struct CellEdge {
  int lo;
  int hi;
  int axis;
};

constexpr std::array<CellEdge, 12> kEdges = {{
    {0, 1, 0},
    {2, 3, 0},
    {4, 5, 0},
    {6, 7, 0},
    {0, 2, 1},
    {1, 3, 1},
    {4, 6, 1},
    {5, 7, 1},
    {0, 4, 2},
    {1, 5, 2},
    {2, 6, 2},
    {3, 7, 2},
}};

// Each face as its four corners in cyclic order.
constexpr std::array<std::array<int, 4>, 6> kFaces = {{
    {0, 2, 6, 4},
    {1, 3, 7, 5},
    {0, 1, 5, 4},
    {2, 3, 7, 6},
    {0, 1, 3, 2},
    {4, 5, 7, 6},
}};

int edge_between(int a, int b) {
  for (int e = 0; e < 12; ++e) {
    if ((kEdges[e].lo == a && kEdges[e].hi == b) ||
        (kEdges[e].lo == b && kEdges[e].hi == a)) {
      return e;
    }
  }
  return -1;
}

struct Vec3d {
  double x, y, z;
};

Vec3d corner_pos(int c) {
  return {double(c & 1), double((c >> 1) & 1), double((c >> 2) & 1)};
}

// Triangulations per case, as triples of vertex ids. Ids 0..11 name cell
// edges; id 12+k names the centroid of contour loop k. Built once by tracing
// the iso-contour loops over the cell faces, wound so normals point away
// from the above-iso region. Loops longer than a triangle are star-
// triangulated around their centroid rather than fanned from a boundary
// vertex: a fan chord between two crossing edges of a shared face would be
// emitted identically by both adjacent cells, stacking four triangles on one
// edge, while the centroid lies strictly inside a single cell.
struct CaseTable {
  std::array<std::vector<std::array<int, 3>>, 256> tris;
  std::array<std::vector<std::vector<int>>, 256> loops;
};

CaseTable build_case_table() {
  CaseTable table;
  for (int mask = 0; mask < 256; ++mask) {
    bool inside[8];
    for (int c = 0; c < 8; ++c) inside[c] = (mask >> c) & 1;

    bool crossing[12];
    for (int e = 0; e < 12; ++e) {
      crossing[e] = inside[kEdges[e].lo] != inside[kEdges[e].hi];
    }

    // Link each crossing edge to its contour neighbour within each face.
    std::array<std::array<int, 2>, 12> links;
    std::array<int, 12> n_links{};
    links.fill({-1, -1});
    auto link = [&](int a, int b) {
      links[a][n_links[a]++] = b;
      links[b][n_links[b]++] = a;
    };
    for (const auto& face : kFaces) {
      int face_edges[4];
      int n_cross = 0;
      for (int s = 0; s < 4; ++s) {
        const int e = edge_between(face[s], face[(s + 1) % 4]);
        if (crossing[e]) face_edges[n_cross++] = e;
      }
      if (n_cross == 2) {
        link(face_edges[0], face_edges[1]);
      } else if (n_cross == 4) {
        // Ambiguous face: pair the two edges that meet at each above-iso
        // corner, so the contour separates the above-iso diagonal.
        for (int s = 0; s < 4; ++s) {
          if (!inside[face[s]]) continue;
          const int prev = edge_between(face[(s + 3) % 4], face[s]);
          const int next = edge_between(face[s], face[(s + 1) % 4]);
          link(prev, next);
        }
      }
    }

    // Walk the links into closed loops.
    bool used[12] = {};
    for (int start = 0; start < 12; ++start) {
      if (!crossing[start] || used[start]) continue;
      std::vector<int> loop;
      int cur = start;
      int prev = -1;
      do {
        loop.push_back(cur);
        used[cur] = true;
        const int nxt = (links[cur][0] == prev) ? links[cur][1] : links[cur][0];
        prev = cur;
        cur = nxt;
      } while (cur != start);

      // Orient the loop so its normal points from above-iso to below-iso.
      Vec3d n = {0, 0, 0};
      std::vector<Vec3d> pts(loop.size());
      for (size_t i = 0; i < loop.size(); ++i) {
        const Vec3d a = corner_pos(kEdges[loop[i]].lo);
        const Vec3d b = corner_pos(kEdges[loop[i]].hi);
        pts[i] = {0.5 * (a.x + b.x), 0.5 * (a.y + b.y), 0.5 * (a.z + b.z)};
      }
      for (size_t i = 0; i < pts.size(); ++i) {
        const Vec3d& a = pts[i];
        const Vec3d& b = pts[(i + 1) % pts.size()];
        n.x += (a.y - b.y) * (a.z + b.z);
        n.y += (a.z - b.z) * (a.x + b.x);
        n.z += (a.x - b.x) * (a.y + b.y);
      }
      Vec3d d = {0, 0, 0};
      for (int e : loop) {
        const int in_c = inside[kEdges[e].lo] ? kEdges[e].lo : kEdges[e].hi;
        const int out_c = inside[kEdges[e].lo] ? kEdges[e].hi : kEdges[e].lo;
        const Vec3d pi = corner_pos(in_c);
        const Vec3d po = corner_pos(out_c);
        d.x += po.x - pi.x;
        d.y += po.y - pi.y;
        d.z += po.z - pi.z;
      }
      if (n.x * d.x + n.y * d.y + n.z * d.z < 0.0) {
        std::reverse(loop.begin() + 1, loop.end());
      }

      const int li = int(table.loops[mask].size());
      if (loop.size() == 3) {
        table.tris[mask].push_back({loop[0], loop[1], loop[2]});
      } else {
        for (size_t i = 0; i < loop.size(); ++i) {
          table.tris[mask].push_back(
              {12 + li, loop[i], loop[(i + 1) % loop.size()]});
        }
      }
      table.loops[mask].push_back(std::move(loop));
    }
  }
  return table;
}

const CaseTable& case_table() {
  static const CaseTable table = build_case_table();
  return table;
}

}  // namespace

TriangleMesh marching_cubes(const VoxelGrid& grid, double iso) {
  grid.validate();
  if (!(iso > 0.0 && iso < 1.0)) {
    throw std::invalid_argument("marching_cubes: iso must lie in (0, 1)");
  }

  const int res = grid.res;
  const int lat = res + 2;  // padded lattice points per axis
  const double h = grid.spacing();

  // Lattice point p maps to voxel p-1; the shell contributes zeros.
  const auto value_at = [&](int px, int py, int pz) -> double {
    if (px < 1 || px > res || py < 1 || py > res || pz < 1 || pz > res) {
      return 0.0;
    }
    return grid.values[grid.index(px - 1, py - 1, pz - 1)];
  };
  const auto point_at = [&](int px, int py, int pz) -> Vec3 {
    return {-grid.extent + (px - 0.5) * h, -grid.extent + (py - 0.5) * h,
            -grid.extent + (pz - 0.5) * h};
  };

  TriangleMesh mesh;
  std::unordered_map<std::uint64_t, std::int32_t> edge_vertex;

  // Welded vertex on the lattice edge starting at (px,py,pz) along axis.
  const auto vertex_on = [&](int px, int py, int pz, int axis) -> std::int32_t {
    const std::uint64_t key =
        ((std::uint64_t(axis) * lat + pz) * lat + py) * lat + px;
    const auto it = edge_vertex.find(key);
    if (it != edge_vertex.end()) return it->second;

    int qx = px + (axis == 0), qy = py + (axis == 1), qz = pz + (axis == 2);
    const double va = value_at(px, py, pz);
    const double vb = value_at(qx, qy, qz);
    const double t = (iso - va) / (vb - va);
    const Vec3 a = point_at(px, py, pz);
    const Vec3 b = point_at(qx, qy, qz);
    const std::int32_t id = std::int32_t(mesh.vertices.size());
    mesh.vertices.push_back(a + (b - a) * t);
    edge_vertex.emplace(key, id);
    return id;
  };

  const CaseTable& table = case_table();
  for (int cz = 0; cz <= res; ++cz) {
    for (int cy = 0; cy <= res; ++cy) {
      for (int cx = 0; cx <= res; ++cx) {
        int mask = 0;
        for (int c = 0; c < 8; ++c) {
          const double v =
              value_at(cx + (c & 1), cy + ((c >> 1) & 1), cz + ((c >> 2) & 1));
          if (v > iso) mask |= 1 << c;
        }
        if (mask == 0 || mask == 255) continue;

        // Loop centroids are fresh vertices, never welded: they are interior
        // to this cell's surface patch.
        std::array<std::int32_t, 4> centroid_ids;
        centroid_ids.fill(-1);
        const auto vertex_for = [&](int id) -> std::int32_t {
          if (id < 12) {
            const CellEdge& e = kEdges[id];
            return vertex_on(cx + (e.lo & 1), cy + ((e.lo >> 1) & 1),
                             cz + ((e.lo >> 2) & 1), e.axis);
          }
          const int li = id - 12;
          if (centroid_ids[li] < 0) {
            Vec3 c{};
            const std::vector<int>& loop = table.loops[mask][li];
            for (const int eid : loop) {
              const CellEdge& e = kEdges[eid];
              c = c + mesh.vertices[vertex_on(cx + (e.lo & 1),
                                              cy + ((e.lo >> 1) & 1),
                                              cz + ((e.lo >> 2) & 1), e.axis)];
            }
            centroid_ids[li] = std::int32_t(mesh.vertices.size());
            mesh.vertices.push_back(c * (1.0 / double(loop.size())));
          }
          return centroid_ids[li];
        };

        for (const auto& tri : table.tris[mask]) {
          std::array<std::int32_t, 3> ids;
          for (int k = 0; k < 3; ++k) ids[k] = vertex_for(tri[k]);
          mesh.triangles.push_back(ids);
        }
      }
    }
  }
  return mesh;
}

}  // namespace mvrec
