#pragma once

#include "mvrec/geometry.hpp"

namespace mvrec {

// Extracts the iso-surface of an occupancy grid as a triangle mesh.
//
// The grid is implicitly padded with a one-voxel shell of zeros so surfaces
// close at the cube boundary. A lattice point is inside the surface when its
// value is strictly greater than `iso`; cells are classified by the standard
// 256-case lookup (generated once from the cube topology), and vertices are
// placed by linear interpolation along crossing cell edges. Contour loops
// wider than a triangle are triangulated around one interior centroid vertex
// per loop, which keeps every non-boundary edge private to its cell and the
// mesh two-manifold on noisy grids. Ambiguous faces
// (two diagonal corners above iso) are resolved by a fixed rule: the contour
// always separates the above-iso corners. The rule depends only on the
// shared face, so adjacent cells always agree and meshes are closed even on
// noisy grids.
//
// Shared edge vertices are welded, so the result is indexed. A grid with all
// values on one side of iso yields an empty mesh.
//
// Throws std::invalid_argument unless 0 < iso < 1.
TriangleMesh marching_cubes(const VoxelGrid& grid, double iso = 0.5);

}  // namespace mvrec
