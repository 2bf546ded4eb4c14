#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mvrec/math.hpp"

namespace mvrec {

// Dense cubic occupancy grid. Values live at voxel centers
//   center(i) = -extent + (i + 0.5) * (2 * extent / res)
// per axis, and index (x,y,z) is stored at linear offset
//   x + res * (y + res * z).
// `frame` names the camera frame the grid lives in; an empty string means
// unlabeled and is compatible with any frame.
struct VoxelGrid {
    int res = 0;
    double extent = 1.0;
    std::string frame;
    std::vector<float> values;

    VoxelGrid() = default;
    VoxelGrid(int res_, double extent_ = 1.0, std::string frame_ = {});

    std::size_t size() const { return values.size(); }
    std::size_t index(int x, int y, int z) const {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(res) * (static_cast<std::size_t>(y) +
                                                static_cast<std::size_t>(res) *
                                                    static_cast<std::size_t>(z));
    }
    float at(int x, int y, int z) const { return values[index(x, y, z)]; }
    void set(int x, int y, int z, float v) { values[index(x, y, z)] = v; }

    double spacing() const { return 2.0 * extent / res; }
    // Center of voxel i along one axis.
    double center(int i) const { return -extent + (i + 0.5) * spacing(); }
    Vec3 center(int x, int y, int z) const { return {center(x), center(y), center(z)}; }

    VoxelGrid with_frame(std::string name) const;

    // Throws std::invalid_argument on res < 2, size mismatch, or a value
    // outside [0, 1].
    void validate() const;
};

// Rigid transform X_out = R * X_in + T between camera frames. Grids are
// subject-centered, so rig poses carry rotation only (T = 0) and the same
// type doubles as a frame-to-frame transform.
struct CameraPose {
    Mat3 rotation;
    Vec3 translation;

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
    CameraPose inverse() const {
        const Mat3 rt = rotation.transposed();
        return {rt, -(rt * translation)};
    }
    bool is_identity() const;

    // Throws std::invalid_argument unless R'R = I and det R = +1, both
    // within 1e-9.
    void validate() const;
};

// N cameras at strictly increasing azimuths in [0, 2pi) with equal gaps
// (the wraparound gap included, checked within 1e-9).
struct CameraRig {
    std::vector<CameraPose> poses;
    std::vector<double> azimuths;

    std::size_t size() const { return poses.size(); }
    void validate() const;
};

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::int32_t, 3>> triangles;

    bool empty() const { return triangles.empty(); }
    // Throws std::invalid_argument on an out-of-range or repeated index.
    void validate() const;
};

// Transform taking points expressed in src's frame to dst's frame:
// P = dst o src^-1.
CameraPose relative_transform(const CameraPose& src, const CameraPose& dst);

// Precomputed trilinear sampling structure for one (res, extent, transform)
// combination. Each output voxel records the lattice cell its inverse-mapped
// center falls into, the fractional position inside that cell, and whether
// the mapped point lies inside the source cube. Reusable across grids and
// shared by the resample forward pass and the loss gradient scatter.
class ResamplePlan {
public:
    ResamplePlan(int res, double extent, const CameraPose& xform);

    int res() const { return res_; }
    double extent() const { return extent_; }
    const std::vector<std::uint8_t>& in_bounds() const { return in_bounds_; }
    std::size_t in_bounds_count() const { return in_bounds_count_; }
    bool identity() const { return identity_; }

    // out[v] = trilinear sample of src at the mapped center of voxel v,
    // zero outside the source lattice.
    template <typename T>
    void gather(const T* src, T* out) const;

    // grad_src[i] += sum over output voxels v of weight(v, i) * grad_out[v];
    // the adjoint of gather.
    template <typename T>
    void scatter_add(const T* grad_out, T* grad_src) const;

private:
    struct Cell {
        std::int32_t base;  // index(i0, j0, k0); -1 when all 8 corners are off-lattice
        float tx, ty, tz;
        std::uint8_t corner_mask;  // bit c set when corner c is on the lattice
    };

    int res_;
    double extent_;
    bool identity_ = false;
    std::vector<Cell> cells_;
    std::vector<std::uint8_t> in_bounds_;
    std::size_t in_bounds_count_ = 0;
};

struct ResampleResult {
    VoxelGrid grid;
    std::vector<std::uint8_t> in_bounds;  // 1 where the mapped center was inside the source cube
};

// Resamples `grid` into the frame reached by `xform` (xform maps source
// coordinates to destination coordinates). Output voxel centers are mapped
// through the inverse transform and sampled trilinearly; samples outside the
// source cube read as zero. The output carries `dst_frame` (default
// unlabeled).
ResampleResult resample(const VoxelGrid& grid, const CameraPose& xform,
                        std::string dst_frame = {});

// World->camera rotation for a camera at `position` looking at the origin,
// with image up derived from +z (world up). Rows are right/up/forward.
Mat3 look_at_rotation(const Vec3& position);

}  // namespace mvrec
