#include "mvrec/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "mvrec/parallel.hpp"
#include "mvrec/rng.hpp"

namespace mvrec {
namespace {

using nlohmann::json;

// Quadratic ax^2 + bx + c; smallest non-negative root, if any.
std::optional<double> min_nonneg_root(double a, double b, double c) {
  if (std::abs(a) < 1e-300) {
    if (b == 0) return std::nullopt;
    const double t = -c / b;
    if (t >= 0) return t;
    return std::nullopt;
  }
  const double disc = b * b - 4 * a * c;
  if (disc < 0) return std::nullopt;
  const double sq = std::sqrt(disc);
  // Stable pairing: compute the large-magnitude root first.
  const double q = -0.5 * (b + (b >= 0 ? sq : -sq));
  double t0 = q / a;
  double t1 = (q == 0) ? t0 : c / q;
  if (t0 > t1) std::swap(t0, t1);
  if (t0 >= 0) return t0;
  if (t1 >= 0) return t1;
  return std::nullopt;
}

void consider(std::optional<double>& best, std::optional<double> t) {
  if (t && (!best || *t < *best)) best = t;
}

}  // namespace

bool Part::contains(const Vec3& p) const {
  if (kind == Kind::capsule) {
    const Vec3 seg = p1 - p0;
    const double len2 = seg.dot(seg);
    double t = len2 > 0 ? (p - p0).dot(seg) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Vec3 closest = p0 + seg * t;
    const Vec3 d = p - closest;
    return d.dot(d) <= r * r;
  }
  const Vec3 u = p - p0;
  const double along = u.dot(p1);
  const double perp2 = u.dot(u) - along * along;
  return (along * along) / (r * r) + perp2 / (r2 * r2) <= 1.0;
}

std::optional<double> Part::ray_hit(const Vec3& o, const Vec3& d) const {
  std::optional<double> best;
  if (kind == Kind::capsule) {
    const Vec3 n = p1 - p0;
    const double len = n.norm();
    const Vec3 m = o - p0;
    if (len > 0) {
      const Vec3 nh = n * (1.0 / len);
      const Vec3 md = m - nh * m.dot(nh);
      const Vec3 dd = d - nh * d.dot(nh);
      const auto t = min_nonneg_root(dd.dot(dd), 2.0 * md.dot(dd),
                                     md.dot(md) - r * r);
      if (t) {
        const double s = (m + d * *t).dot(nh);
        if (s >= 0 && s <= len) consider(best, t);
      }
    }
    for (const Vec3& cap : {p0, p1}) {
      const Vec3 mc = o - cap;
      consider(best, min_nonneg_root(1.0, 2.0 * mc.dot(d),
                                     mc.dot(mc) - r * r));
    }
    return best;
  }
  const Vec3 u = o - p0;
  const double ma = u.dot(p1);
  const double da = d.dot(p1);
  const Vec3 mp = u - p1 * ma;
  const Vec3 dp = d - p1 * da;
  const double ira = 1.0 / (r * r);
  const double irt = 1.0 / (r2 * r2);
  return min_nonneg_root(da * da * ira + dp.dot(dp) * irt,
                         2.0 * (ma * da * ira + mp.dot(dp) * irt),
                         ma * ma * ira + mp.dot(mp) * irt - 1.0);
}

CameraRig make_rig(int n_views, double radius, double elevation) {
  if (n_views < 1) throw std::invalid_argument("make_rig: n_views must be >= 1");
  if (!(radius > 0)) throw std::invalid_argument("make_rig: radius must be > 0");
  CameraRig rig;
  rig.poses.reserve(n_views);
  rig.azimuths.reserve(n_views);
  for (int k = 0; k < n_views; ++k) {
    const double az = 2.0 * std::numbers::pi * k / n_views;
    const Vec3 pos{radius * std::cos(elevation) * std::cos(az),
                   radius * std::cos(elevation) * std::sin(az),
                   radius * std::sin(elevation)};
    rig.poses.push_back({look_at_rotation(pos), Vec3{0, 0, 0}});
    rig.azimuths.push_back(az);
  }
  rig.validate();
  return rig;
}

SceneSpec generate_scene(std::uint64_t seed, std::pair<int, int> n_parts_range,
                         const CameraRig& rig) {
  if (n_parts_range.first < 1 || n_parts_range.second < n_parts_range.first) {
    throw std::invalid_argument("generate_scene: invalid part count range");
  }
  // Skeleton points stay inside the 0.68 sphere and radii below 0.26, so
  // every surface point has norm <= 0.94 < 0.95. The bound is spherical, not
  // per-axis: the renderer's rays enter at camera-frame z = -1 and run to
  // z = +1, and a rotation maps spheres to spheres, so the margin holds for
  // every view direction (a box corner would not).
  constexpr double kSphere = 0.68;
  constexpr double kMaxR = 0.26;

  Rng rng(seed);
  SceneSpec spec;
  spec.seed = seed;
  spec.rig = rig;

  const int n_parts =
      n_parts_range.first +
      int(rng.below(std::uint64_t(n_parts_range.second - n_parts_range.first + 1)));

  const auto clamp_sphere = [&](Vec3 p) {
    const double n = p.norm();
    return n > kSphere ? p * (kSphere / n) : p;
  };
  const auto random_dir = [&]() {
    for (;;) {
      const Vec3 v{rng.normal(), rng.normal(), rng.normal()};
      const double n = v.norm();
      if (n > 1e-6) return v * (1.0 / n);
    }
  };
  const auto point_on = [&](const Part& parent) {
    if (parent.kind == Part::Kind::capsule) {
      return parent.p0 + (parent.p1 - parent.p0) * rng.uniform();
    }
    return parent.p0 + parent.p1 * (rng.uniform(-0.5, 0.5) * parent.r);
  };

  // Trunk: a roughly vertical capsule near the center.
  {
    Part trunk;
    trunk.kind = Part::Kind::capsule;
    const double jx = rng.uniform(-0.1, 0.1);
    const double jy = rng.uniform(-0.1, 0.1);
    trunk.p0 = {jx, jy, -rng.uniform(0.25, 0.55)};
    trunk.p1 = {jx, jy, rng.uniform(0.25, 0.55)};
    trunk.r = rng.uniform(0.18, kMaxR);
    trunk.r2 = trunk.r;
    spec.parts.push_back(trunk);
  }

  while (int(spec.parts.size()) < n_parts) {
    const Part& parent = spec.parts[rng.below(spec.parts.size())];
    const Vec3 attach = clamp_sphere(point_on(parent));
    Part part;
    if (rng.uniform() < 0.7) {
      part.kind = Part::Kind::capsule;
      part.p0 = attach;
      part.p1 = clamp_sphere(attach + random_dir() * rng.uniform(0.25, 0.55));
      part.r = rng.uniform(0.12, 0.22);
      part.r2 = part.r;
    } else {
      part.kind = Part::Kind::spheroid;
      part.p0 = attach;
      part.p1 = random_dir();
      part.r = rng.uniform(0.14, kMaxR);
      part.r2 = rng.uniform(0.12, 0.22);
    }
    spec.parts.push_back(part);
  }
  return spec;
}

RenderedViews render_views(const SceneSpec& spec, int res_img) {
  if (res_img < 16) {
    throw std::invalid_argument("render_views: res_img must be >= 16");
  }
  RenderedViews out;
  const int img = res_img;
  const double px_size = 2.0 / img;
  for (const CameraPose& pose : spec.rig.poses) {
    const Mat3 rt = pose.rotation.transposed();
    const Vec3 dir = rt * Vec3{0, 0, 1};
    ImageU8 sil{img, img, std::vector<std::uint8_t>(std::size_t(img) * img, 0)};
    ImageU16 depth{img, img,
                   std::vector<std::uint16_t>(std::size_t(img) * img, 0)};
    for (int py = 0; py < img; ++py) {
      const double v = -1.0 + (py + 0.5) * px_size;
      for (int px = 0; px < img; ++px) {
        const double u = -1.0 + (px + 0.5) * px_size;
        const Vec3 origin = rt * Vec3{u, v, -1.0};
        std::optional<double> t;
        for (const Part& part : spec.parts) {
          const auto ht = part.ray_hit(origin, dir);
          if (ht && *ht <= 2.0 && (!t || *ht < *t)) t = ht;
        }
        if (t) {
          const double d_norm = 1.0 - *t / 2.0;
          const auto q = std::uint16_t(std::lround(d_norm * 65535.0));
          depth.pixels[std::size_t(py) * img + px] = q;
          sil.pixels[std::size_t(py) * img + px] = q > 0 ? 255 : 0;
        }
      }
    }
    out.silhouettes.push_back(std::move(sil));
    out.depths.push_back(std::move(depth));
  }
  return out;
}

std::vector<VoxelGrid> ground_truth_grids(const SceneSpec& spec, int res) {
  if (res < 8) {
    throw std::invalid_argument("ground_truth_grids: res must be >= 8");
  }
  std::vector<VoxelGrid> grids;
  grids.reserve(spec.rig.size());

  // Per-part bounding spheres cut the inside tests to nearby voxels.
  std::vector<Vec3> bc(spec.parts.size());
  std::vector<double> br2(spec.parts.size());
  for (std::size_t p = 0; p < spec.parts.size(); ++p) {
    const Part& part = spec.parts[p];
    if (part.kind == Part::Kind::capsule) {
      bc[p] = (part.p0 + part.p1) * 0.5;
      const double rad = 0.5 * (part.p1 - part.p0).norm() + part.r;
      br2[p] = rad * rad;
    } else {
      bc[p] = part.p0;
      const double rad = std::max(part.r, part.r2);
      br2[p] = rad * rad;
    }
  }

  for (std::size_t k = 0; k < spec.rig.size(); ++k) {
    const Mat3 rt = spec.rig.poses[k].rotation.transposed();
    VoxelGrid grid(res, 1.0, "cam" + std::to_string(k));
    for (int z = 0; z < res; ++z) {
      for (int y = 0; y < res; ++y) {
        for (int x = 0; x < res; ++x) {
          const Vec3 p = rt * grid.center(x, y, z);
          bool inside = false;
          for (std::size_t i = 0; i < spec.parts.size() && !inside; ++i) {
            const Vec3 dv = p - bc[i];
            if (dv.dot(dv) > br2[i]) continue;
            inside = spec.parts[i].contains(p);
          }
          if (inside) grid.set(x, y, z, 1.0f);
        }
      }
    }
    grids.push_back(std::move(grid));
  }
  return grids;
}

std::vector<SceneSample> generate_dataset(const DatasetConfig& cfg) {
  if (cfg.scenes < 1) {
    throw std::invalid_argument("generate_dataset: scenes must be >= 1");
  }
  const CameraRig rig = make_rig(cfg.views, cfg.rig_radius, cfg.rig_elevation);

  Rng seeder(cfg.seed);
  std::vector<std::uint64_t> scene_seeds(cfg.scenes);
  for (auto& s : scene_seeds) s = seeder.next_u64();

  std::vector<SceneSample> samples(cfg.scenes);
  parallel_for(std::size_t(cfg.scenes), cfg.threads, [&](std::size_t i) {
    SceneSample& sample = samples[i];
    sample.spec = generate_scene(scene_seeds[i], cfg.parts, rig);
    RenderedViews views = render_views(sample.spec, cfg.res_img);
    sample.silhouettes = std::move(views.silhouettes);
    sample.depths = std::move(views.depths);
    sample.gt = ground_truth_grids(sample.spec, cfg.res);
  });
  return samples;
}

namespace {

std::string scene_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "scene%04zu", i);
  return buf;
}

json part_to_json(const Part& p) {
  return json{{"kind", p.kind == Part::Kind::capsule ? "capsule" : "spheroid"},
              {"p0", {p.p0.x, p.p0.y, p.p0.z}},
              {"p1", {p.p1.x, p.p1.y, p.p1.z}},
              {"r", p.r},
              {"r2", p.r2}};
}

Part part_from_json(const json& j) {
  Part p;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "capsule") {
    p.kind = Part::Kind::capsule;
  } else if (kind == "spheroid") {
    p.kind = Part::Kind::spheroid;
  } else {
    throw std::runtime_error("unknown part kind: " + kind);
  }
  const auto& p0 = j.at("p0");
  const auto& p1 = j.at("p1");
  p.p0 = {p0.at(0).get<double>(), p0.at(1).get<double>(), p0.at(2).get<double>()};
  p.p1 = {p1.at(0).get<double>(), p1.at(1).get<double>(), p1.at(2).get<double>()};
  p.r = j.at("r").get<double>();
  p.r2 = j.at("r2").get<double>();
  return p;
}

}  // namespace

std::uint64_t write_dataset(const std::vector<SceneSample>& samples,
                            const DatasetConfig& cfg,
                            const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "scenes");

  std::uint64_t bytes = 0;
  json scene_list = json::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const SceneSample& sample = samples[i];
    const std::string id = scene_id(i);
    fs::create_directories(dir / "scenes" / id);

    json views = json::array();
    for (std::size_t k = 0; k < sample.gt.size(); ++k) {
      const std::string rel = "scenes/" + id + "/";
      const std::string sil_path = rel + "view" + std::to_string(k) + ".pgm";
      const std::string depth_path = rel + "depth" + std::to_string(k) + ".pgm";
      const std::string gt_path = rel + "gt" + std::to_string(k) + ".vxg";
      write_pgm(dir / sil_path, sample.silhouettes[k]);
      write_pgm(dir / depth_path, sample.depths[k]);
      write_vxg(dir / gt_path, sample.gt[k]);
      bytes += fs::file_size(dir / sil_path) + fs::file_size(dir / depth_path) +
               fs::file_size(dir / gt_path);
      views.push_back(json{{"silhouette", sil_path},
                           {"depth", depth_path},
                           {"gt", gt_path}});
    }

    json parts = json::array();
    for (const Part& p : sample.spec.parts) parts.push_back(part_to_json(p));
    scene_list.push_back(json{{"id", id},
                              {"seed", sample.spec.seed},
                              {"parts", parts},
                              {"views", views}});
  }

  const json manifest{{"format", "mvrec-dataset"},
                      {"version", 1},
                      {"seed", cfg.seed},
                      {"scenes", samples.size()},
                      {"views", cfg.views},
                      {"res", cfg.res},
                      {"img", cfg.res_img},
                      {"extent", 1.0},
                      {"parts_min", cfg.parts.first},
                      {"parts_max", cfg.parts.second},
                      {"rig", json{{"radius", cfg.rig_radius},
                                   {"elevation", cfg.rig_elevation}}},
                      {"scene_list", scene_list}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  bytes += fs::file_size(dir / "manifest.json");
  return bytes;
}

Dataset read_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  json manifest;
  try {
    manifest = json::parse(read_text(manifest_path));
  } catch (const json::exception& e) {
    throw std::runtime_error(manifest_path.string() +
                             ": manifest parse error: " + e.what());
  }

  try {
    if (manifest.at("format").get<std::string>() != "mvrec-dataset" ||
        manifest.at("version").get<int>() != 1) {
      throw std::runtime_error(manifest_path.string() +
                               ": unsupported dataset format/version");
    }

    Dataset out;
    out.config.seed = manifest.at("seed").get<std::uint64_t>();
    out.config.scenes = manifest.at("scenes").get<int>();
    out.config.views = manifest.at("views").get<int>();
    out.config.res = manifest.at("res").get<int>();
    out.config.res_img = manifest.at("img").get<int>();
    out.config.parts = {manifest.at("parts_min").get<int>(),
                        manifest.at("parts_max").get<int>()};
    out.config.rig_radius = manifest.at("rig").at("radius").get<double>();
    out.config.rig_elevation = manifest.at("rig").at("elevation").get<double>();

    const CameraRig rig =
        make_rig(out.config.views, out.config.rig_radius, out.config.rig_elevation);

    for (const json& scene : manifest.at("scene_list")) {
      SceneSample sample;
      sample.spec.seed = scene.at("seed").get<std::uint64_t>();
      sample.spec.rig = rig;
      for (const json& pj : scene.at("parts")) {
        sample.spec.parts.push_back(part_from_json(pj));
      }
      std::size_t k = 0;
      for (const json& view : scene.at("views")) {
        sample.silhouettes.push_back(
            read_pgm8(dir / view.at("silhouette").get<std::string>()));
        sample.depths.push_back(
            read_pgm16(dir / view.at("depth").get<std::string>()));
        VoxelGrid grid = read_vxg(dir / view.at("gt").get<std::string>());
        grid.frame = "cam" + std::to_string(k);
        sample.gt.push_back(std::move(grid));
        ++k;
      }
      out.samples.push_back(std::move(sample));
    }
    return out;
  } catch (const json::exception& e) {
    throw std::runtime_error(manifest_path.string() +
                             ": malformed manifest: " + e.what());
  }
}

}  // namespace mvrec
