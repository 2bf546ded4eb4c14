#include "mvrec/voxelize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvrec {
namespace {

// Sign of the orientation of Q against directed edge P0->P1 in 2D, with an
// exact-zero result resolved as if Q were displaced by (eps, eps^2) for an
// infinitesimal eps > 0. The edge is evaluated in a canonical endpoint
// order so the two triangles sharing an edge compute bit-identical values;
// otherwise a query point near a shared edge could land in both or neither
// triangle and break ray parity.
int edge_sign(double u0, double v0, double u1, double v1, double qu,
              double qv) {
  const bool flip = (u1 < u0) || (u1 == u0 && v1 < v0);
  if (flip) {
    std::swap(u0, u1);
    std::swap(v0, v1);
  }
  int s = 0;
  const double o = (u1 - u0) * (qv - v0) - (v1 - v0) * (qu - u0);
  if (o != 0) {
    s = o > 0 ? 1 : -1;
  } else {
    const double c1 = -(v1 - v0);  // eps coefficient
    const double c2 = u1 - u0;     // eps^2 coefficient
    if (c1 != 0) {
      s = c1 > 0 ? 1 : -1;
    } else if (c2 != 0) {
      s = c2 > 0 ? 1 : -1;
    }
  }
  return flip ? -s : s;
}

struct P2 {
  double u, v;
};

// Crossing parameters along one axis: rows[row] lists the ray coordinates
// where the surface crosses the axis ray through that row of voxel centers.
std::vector<std::vector<double>> collect_crossings(
    const TriangleMesh& mesh, int res, double extent,
    int axis_ray, int axis_u, int axis_v) {
  const double h = 2.0 * extent / res;
  const auto center = [&](int idx) { return -extent + (idx + 0.5) * h; };
  const auto coord = [](const Vec3& p, int axis) {
    return axis == 0 ? p.x : (axis == 1 ? p.y : p.z);
  };

  std::vector<std::vector<double>> rows(std::size_t(res) * res);
  for (const auto& tri : mesh.triangles) {
    const Vec3& a3 = mesh.vertices[tri[0]];
    const Vec3& b3 = mesh.vertices[tri[1]];
    const Vec3& c3 = mesh.vertices[tri[2]];
    const P2 a{coord(a3, axis_u), coord(a3, axis_v)};
    const P2 b{coord(b3, axis_u), coord(b3, axis_v)};
    const P2 c{coord(c3, axis_u), coord(c3, axis_v)};

    const double area =
        (b.u - a.u) * (c.v - a.v) - (b.v - a.v) * (c.u - a.u);
    if (area == 0) continue;  // edge-on to the ray: no parity contribution
    const int st = area > 0 ? 1 : -1;

    const double min_u = std::min({a.u, b.u, c.u});
    const double max_u = std::max({a.u, b.u, c.u});
    const double min_v = std::min({a.v, b.v, c.v});
    const double max_v = std::max({a.v, b.v, c.v});
    const int iu0 = std::max(0, int(std::ceil((min_u + extent) / h - 0.5)));
    const int iu1 =
        std::min(res - 1, int(std::floor((max_u + extent) / h - 0.5)));
    const int iv0 = std::max(0, int(std::ceil((min_v + extent) / h - 0.5)));
    const int iv1 =
        std::min(res - 1, int(std::floor((max_v + extent) / h - 0.5)));

    const double ra = coord(a3, axis_ray);
    const double rb = coord(b3, axis_ray);
    const double rc = coord(c3, axis_ray);
    for (int iv = iv0; iv <= iv1; ++iv) {
      const double qv = center(iv);
      for (int iu = iu0; iu <= iu1; ++iu) {
        const double qu = center(iu);
        if (edge_sign(a.u, a.v, b.u, b.v, qu, qv) != st) continue;
        if (edge_sign(b.u, b.v, c.u, c.v, qu, qv) != st) continue;
        if (edge_sign(c.u, c.v, a.u, a.v, qu, qv) != st) continue;
        // Barycentric interpolation of the ray coordinate at the hit.
        const double wa =
            ((b.u - qu) * (c.v - qv) - (b.v - qv) * (c.u - qu)) / area;
        const double wb =
            ((c.u - qu) * (a.v - qv) - (c.v - qv) * (a.u - qu)) / area;
        const double wc = 1.0 - wa - wb;
        rows[std::size_t(iv) * res + iu].push_back(wa * ra + wb * rb + wc * rc);
      }
    }
  }
  for (auto& r : rows) std::sort(r.begin(), r.end());
  return rows;
}

// Parity of crossings strictly beyond each voxel center along the row.
void parity_fill(const std::vector<std::vector<double>>& rows, int res,
                 double extent, std::vector<std::uint8_t>& inside) {
  const double h = 2.0 * extent / res;
  inside.assign(rows.size() * res, 0);
  for (std::size_t row = 0; row < rows.size(); ++row) {
    const auto& xs = rows[row];
    std::size_t idx = 0;
    for (int i = 0; i < res; ++i) {
      const double xc = -extent + (i + 0.5) * h;
      while (idx < xs.size() && !(xs[idx] > xc)) ++idx;
      inside[row * res + i] = ((xs.size() - idx) & 1) ? 1 : 0;
    }
  }
}

}  // namespace

VoxelGrid voxelize(const TriangleMesh& mesh, int res, double extent) {
  mesh.validate();
  if (res < 2) throw std::invalid_argument("voxelize: res must be >= 2");
  if (!(extent > 0)) {
    throw std::invalid_argument("voxelize: extent must be positive");
  }

  // Rays along +x, rows indexed by (y,z); inside_x[(k*res+j)*res + i].
  const auto rows_x = collect_crossings(mesh, res, extent, 0, 1, 2);
  std::vector<std::uint8_t> inside_x;
  parity_fill(rows_x, res, extent, inside_x);

  // Rays along +y, rows indexed by (x,z); inside_y[(k*res+i)*res + j].
  const auto rows_y = collect_crossings(mesh, res, extent, 1, 0, 2);
  std::vector<std::uint8_t> inside_y;
  parity_fill(rows_y, res, extent, inside_y);

  VoxelGrid grid;
  grid.res = res;
  grid.extent = extent;
  grid.values.resize(std::size_t(res) * res * res);
  for (int k = 0; k < res; ++k) {
    for (int j = 0; j < res; ++j) {
      for (int i = 0; i < res; ++i) {
        const std::uint8_t vx = inside_x[(std::size_t(k) * res + j) * res + i];
        const std::uint8_t vy = inside_y[(std::size_t(k) * res + i) * res + j];
        if (vx != vy) {
          throw std::runtime_error(
              "voxelize: ray parity disagrees at voxel (" +
              std::to_string(i) + "," + std::to_string(j) + "," +
              std::to_string(k) + "); mesh is not watertight");
        }
        grid.values[grid.index(i, j, k)] = float(vx);
      }
    }
  }
  return grid;
}

}  // namespace mvrec
