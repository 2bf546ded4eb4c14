#include "mvrec/geometry.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace mvrec {

VoxelGrid::VoxelGrid(int res_, double extent_, std::string frame_)
    : res(res_), extent(extent_), frame(std::move(frame_)) {
    if (res < 2) throw std::invalid_argument("VoxelGrid: res must be >= 2");
    if (extent <= 0.0) throw std::invalid_argument("VoxelGrid: extent must be positive");
    values.assign(static_cast<std::size_t>(res) * res * res, 0.0f);
}

VoxelGrid VoxelGrid::with_frame(std::string name) const {
    VoxelGrid g = *this;
    g.frame = std::move(name);
    return g;
}

void VoxelGrid::validate() const {
    if (res < 2) throw std::invalid_argument("VoxelGrid: res must be >= 2");
    if (extent <= 0.0) throw std::invalid_argument("VoxelGrid: extent must be positive");
    if (values.size() != static_cast<std::size_t>(res) * res * res)
        throw std::invalid_argument("VoxelGrid: value count does not match res^3");
    for (const float v : values)
        if (!(v >= 0.0f && v <= 1.0f))
            throw std::invalid_argument("VoxelGrid: value outside [0, 1]");
}

bool CameraPose::is_identity() const {
    static const Mat3 eye = Mat3::identity();
    return std::memcmp(rotation.m.data(), eye.m.data(), sizeof(rotation.m)) == 0 &&
           translation.x == 0.0 && translation.y == 0.0 && translation.z == 0.0;
}

void CameraPose::validate() const {
    const Mat3 rtr = rotation.transposed() * rotation;
    const Mat3 eye = Mat3::identity();
    for (int i = 0; i < 9; ++i)
        if (std::abs(rtr.m[i] - eye.m[i]) > 1e-9)
            throw std::invalid_argument("CameraPose: rotation is not orthonormal");
    if (std::abs(rotation.det() - 1.0) > 1e-9)
        throw std::invalid_argument("CameraPose: rotation determinant is not +1");
}

void CameraRig::validate() const {
    if (poses.size() != azimuths.size())
        throw std::invalid_argument("CameraRig: poses/azimuths size mismatch");
    if (poses.empty()) throw std::invalid_argument("CameraRig: empty rig");
    for (const auto& p : poses) p.validate();
    const double two_pi = 6.283185307179586477;
    for (std::size_t i = 0; i < azimuths.size(); ++i) {
        if (azimuths[i] < 0.0 || azimuths[i] >= two_pi)
            throw std::invalid_argument("CameraRig: azimuth outside [0, 2pi)");
        if (i > 0 && azimuths[i] <= azimuths[i - 1])
            throw std::invalid_argument("CameraRig: azimuths not strictly increasing");
    }
    if (azimuths.size() > 1) {
        const double gap0 = azimuths[1] - azimuths[0];
        for (std::size_t i = 1; i + 1 < azimuths.size(); ++i)
            if (std::abs((azimuths[i + 1] - azimuths[i]) - gap0) > 1e-9)
                throw std::invalid_argument("CameraRig: azimuth gaps are not equal");
        const double wrap = two_pi - azimuths.back() + azimuths.front();
        if (std::abs(wrap - gap0) > 1e-9)
            throw std::invalid_argument("CameraRig: rig is not equidistant around the circle");
    }
}

void TriangleMesh::validate() const {
    const auto n = static_cast<std::int32_t>(vertices.size());
    for (const auto& t : triangles) {
        for (const auto i : t)
            if (i < 0 || i >= n)
                throw std::invalid_argument("TriangleMesh: triangle index out of range");
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
            throw std::invalid_argument("TriangleMesh: triangle repeats a vertex index");
    }
}

CameraPose relative_transform(const CameraPose& src, const CameraPose& dst) {
    const Mat3 r = dst.rotation * src.rotation.transposed();
    return {r, dst.translation - r * src.translation};
}

ResamplePlan::ResamplePlan(int res, double extent, const CameraPose& xform)
    : res_(res), extent_(extent) {
    const std::size_t n = static_cast<std::size_t>(res) * res * res;
    in_bounds_.assign(n, 0);
    if (xform.is_identity()) {
        identity_ = true;
        in_bounds_.assign(n, 1);
        in_bounds_count_ = n;
        return;
    }
    cells_.resize(n);
    const CameraPose inv = xform.inverse();
    const double h = 2.0 * extent / res;
    std::size_t v = 0;
    for (int z = 0; z < res; ++z) {
        const double cz = -extent + (z + 0.5) * h;
        for (int y = 0; y < res; ++y) {
            const double cy = -extent + (y + 0.5) * h;
            for (int x = 0; x < res; ++x, ++v) {
                const double cx = -extent + (x + 0.5) * h;
                const Vec3 p = inv.apply({cx, cy, cz});
                Cell& c = cells_[v];
                const bool inside = std::abs(p.x) <= extent && std::abs(p.y) <= extent &&
                                    std::abs(p.z) <= extent;
                in_bounds_[v] = inside ? 1 : 0;
                if (inside) ++in_bounds_count_;
                const double fx = (p.x + extent) / h - 0.5;
                const double fy = (p.y + extent) / h - 0.5;
                const double fz = (p.z + extent) / h - 0.5;
                const double i0d = std::floor(fx), j0d = std::floor(fy), k0d = std::floor(fz);
                const int i0 = static_cast<int>(i0d), j0 = static_cast<int>(j0d),
                          k0 = static_cast<int>(k0d);
                c.tx = static_cast<float>(fx - i0d);
                c.ty = static_cast<float>(fy - j0d);
                c.tz = static_cast<float>(fz - k0d);
                std::uint8_t mask = 0;
                for (int corner = 0; corner < 8; ++corner) {
                    const int ii = i0 + (corner & 1);
                    const int jj = j0 + ((corner >> 1) & 1);
                    const int kk = k0 + ((corner >> 2) & 1);
                    if (ii >= 0 && ii < res && jj >= 0 && jj < res && kk >= 0 && kk < res)
                        mask |= static_cast<std::uint8_t>(1u << corner);
                }
                c.corner_mask = mask;
                c.base = mask ? static_cast<std::int32_t>(
                                    i0 + res * (j0 + static_cast<std::int64_t>(res) * k0))
                              : -1;
            }
        }
    }
}

namespace {

// Corner offsets relative to base for a grid with the documented layout.
inline std::array<std::int64_t, 8> corner_offsets(int res) {
    const std::int64_t r = res, rr = static_cast<std::int64_t>(res) * res;
    return {0, 1, r, r + 1, rr, rr + 1, rr + r, rr + r + 1};
}

}  // namespace

template <typename T>
void ResamplePlan::gather(const T* src, T* out) const {
    const std::size_t n = static_cast<std::size_t>(res_) * res_ * res_;
    if (identity_) {
        for (std::size_t v = 0; v < n; ++v) out[v] = src[v];
        return;
    }
    const auto off = corner_offsets(res_);
    for (std::size_t v = 0; v < n; ++v) {
        const Cell& c = cells_[v];
        if (!c.corner_mask) {
            out[v] = T(0);
            continue;
        }
        const T tx = static_cast<T>(c.tx), ty = static_cast<T>(c.ty), tz = static_cast<T>(c.tz);
        const T wx[2] = {T(1) - tx, tx};
        const T wy[2] = {T(1) - ty, ty};
        const T wz[2] = {T(1) - tz, tz};
        T acc = T(0);
        for (int corner = 0; corner < 8; ++corner) {
            if (!(c.corner_mask & (1u << corner))) continue;
            const T w = wx[corner & 1] * wy[(corner >> 1) & 1] * wz[(corner >> 2) & 1];
            acc += w * src[c.base + off[corner]];
        }
        out[v] = acc;
    }
}

template <typename T>
void ResamplePlan::scatter_add(const T* grad_out, T* grad_src) const {
    const std::size_t n = static_cast<std::size_t>(res_) * res_ * res_;
    if (identity_) {
        for (std::size_t v = 0; v < n; ++v) grad_src[v] += grad_out[v];
        return;
    }
    const auto off = corner_offsets(res_);
    for (std::size_t v = 0; v < n; ++v) {
        const Cell& c = cells_[v];
        const T g = grad_out[v];
        if (!c.corner_mask || g == T(0)) continue;
        const T tx = static_cast<T>(c.tx), ty = static_cast<T>(c.ty), tz = static_cast<T>(c.tz);
        const T wx[2] = {T(1) - tx, tx};
        const T wy[2] = {T(1) - ty, ty};
        const T wz[2] = {T(1) - tz, tz};
        for (int corner = 0; corner < 8; ++corner) {
            if (!(c.corner_mask & (1u << corner))) continue;
            const T w = wx[corner & 1] * wy[(corner >> 1) & 1] * wz[(corner >> 2) & 1];
            grad_src[c.base + off[corner]] += w * g;
        }
    }
}

template void ResamplePlan::gather<float>(const float*, float*) const;
template void ResamplePlan::gather<double>(const double*, double*) const;
template void ResamplePlan::scatter_add<float>(const float*, float*) const;
template void ResamplePlan::scatter_add<double>(const double*, double*) const;

ResampleResult resample(const VoxelGrid& grid, const CameraPose& xform, std::string dst_frame) {
    grid.validate();
    xform.validate();
    const ResamplePlan plan(grid.res, grid.extent, xform);
    ResampleResult out;
    out.grid = VoxelGrid(grid.res, grid.extent, std::move(dst_frame));
    plan.gather(grid.values.data(), out.grid.values.data());
    out.in_bounds = plan.in_bounds();
    return out;
}

Mat3 look_at_rotation(const Vec3& position) {
    const Vec3 forward = (-position).normalized();
    Vec3 up{0.0, 0.0, 1.0};
    const double d = up.dot(forward);
    up = (up - forward * d).normalized();
    const Vec3 right = up.cross(forward);
    return Mat3::from_rows(right, up, forward);
}

}  // namespace mvrec
