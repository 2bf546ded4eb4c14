#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "mvrec/geometry.hpp"
#include "mvrec/io.hpp"

namespace mvrec {

// One primitive of an articulated body, in world coordinates. A capsule is
// the set of points within `r` of segment p0..p1; a spheroid is centered at
// p0 with radius `r` along unit axis p1 and radius `r2` across it.
struct Part {
  enum class Kind { capsule, spheroid };
  Kind kind = Kind::capsule;
  Vec3 p0;
  Vec3 p1;
  double r = 0.1;
  double r2 = 0.1;

  bool contains(const Vec3& p) const;
  // Nearest intersection parameter t >= 0 of the ray o + t*d (d unit
  // length), or nullopt if the ray misses.
  std::optional<double> ray_hit(const Vec3& o, const Vec3& d) const;
};

// A procedural scene: a connected union of parts plus the camera rig the
// views are rendered from. The union always fits inside the extent-1 cube
// with at least a 5% margin (|coord| <= 0.95).
struct SceneSpec {
  std::uint64_t seed = 0;
  std::vector<Part> parts;
  CameraRig rig;
};

// Rendered inputs and voxel ground truth for one scene, one entry per view.
// Depth values are stored pre-quantized (16-bit), so in-memory samples and
// samples re-read from disk are bit-identical.
struct SceneSample {
  SceneSpec spec;
  std::vector<ImageU8> silhouettes;  // 0 or 255
  std::vector<ImageU16> depths;      // 0 = background, near > far
  std::vector<VoxelGrid> gt;         // binary, frame "cam<k>"
};

// Equidistant circular rig: azimuths 2*pi*k/n, cameras at `radius` and
// elevation angle `elevation` (radians), all looking at the origin, poses
// subject-centered (translation zero).
CameraRig make_rig(int n_views, double radius = 2.5, double elevation = 0.0);

// Deterministic articulated body: a trunk capsule plus parts attached to
// random points of earlier parts. Throws std::invalid_argument on an
// invalid part range.
SceneSpec generate_scene(std::uint64_t seed,
                         std::pair<int, int> n_parts_range = {4, 8},
                         const CameraRig& rig = make_rig(6));

struct RenderedViews {
  std::vector<ImageU8> silhouettes;
  std::vector<ImageU16> depths;
};

// Orthographic silhouette + normalized depth per camera. Pixel (px, py)
// maps to camera-frame x = -1 + (px+0.5)*2/img, y likewise; depth is
// (1 - (z_cam+1)/2) quantized to 16 bits, 0 for background. The silhouette
// equals (depth > 0) exactly.
RenderedViews render_views(const SceneSpec& spec, int res_img);

// Binary occupancy of the part union sampled at voxel centers expressed in
// each camera's frame; grid k carries frame label "cam<k>".
std::vector<VoxelGrid> ground_truth_grids(const SceneSpec& spec, int res);

struct DatasetConfig {
  int scenes = 200;
  int views = 6;
  int res = 32;
  int res_img = 64;
  std::uint64_t seed = 1;
  std::pair<int, int> parts = {4, 8};
  double rig_radius = 2.5;
  // Default is raised: at elevation 0 a two-camera rig is antipodal, and
  // opposite orthographic views see mirror-image silhouettes, which makes
  // cross-view coupling degenerate. Any nonzero elevation breaks the tie.
  double rig_elevation = 0.35;
  int threads = 0;  // 0 = hardware default
};

// Fully deterministic in cfg (thread count included; per-scene work is
// independent and scene seeds are fixed up front).
std::vector<SceneSample> generate_dataset(const DatasetConfig& cfg);

// On-disk layout: `manifest.json` plus `scenes/<id>/view<k>.pgm` (8-bit
// silhouette), `scenes/<id>/depth<k>.pgm` (16-bit depth), and
// `scenes/<id>/gt<k>.vxg`. The manifest records the generator config, the
// rig, per-scene seeds and parts, and every file path. Returns total bytes
// written.
std::uint64_t write_dataset(const std::vector<SceneSample>& samples,
                            const DatasetConfig& cfg,
                            const std::filesystem::path& dir);

struct Dataset {
  DatasetConfig config;
  std::vector<SceneSample> samples;
};

// Rejects a manifest whose format/version is unknown; reports missing or
// corrupt files with their paths.
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace mvrec
