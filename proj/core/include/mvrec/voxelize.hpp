#pragma once

#include "mvrec/geometry.hpp"

namespace mvrec {

// Rasterizes a closed triangle mesh into a binary occupancy grid: a voxel
// is 1 exactly when its center lies inside the mesh by ray parity.
//
// Each voxel center is tested by counting surface crossings along an axis
// ray. Crossings are accumulated per grid row in one pass over the
// triangles, so cost scales with the mesh's projected area rather than
// res³ × triangles. Ray/edge ties are broken deterministically by a
// symbolic perturbation of the ray origin, so vertices or edges crossing a
// ray never double-count. Parity is computed independently along +x and +y;
// any disagreement means the mesh is not watertight and raises
// std::runtime_error. An empty mesh yields an all-zero grid.
VoxelGrid voxelize(const TriangleMesh& mesh, int res, double extent = 1.0);

}  // namespace mvrec
