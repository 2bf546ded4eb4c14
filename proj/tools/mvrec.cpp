// Batch front-end: dataset generation, training, evaluation, the
// views x loss ablation matrix, and mesh export, as one binary with
// subcommands. Every command is deterministic given its flags and seed.
//
// Exit codes: 0 success, 2 usage (bad flags/values), 3 I/O failure,
// 4 numeric failure (training divergence).

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mvrec/dataset.hpp"
#include "mvrec/io.hpp"
#include "mvrec/losses.hpp"
#include "mvrec/marching_cubes.hpp"
#include "mvrec/metrics.hpp"
#include "mvrec/model.hpp"
#include "mvrec/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mvrec;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kIo = 3;
constexpr int kNumeric = 4;

// Config-file support: JSON object whose keys are long flag names (without
// the leading dashes). Explicit command-line flags win over file values.
class ConfigFile {
 public:
  ConfigFile(const CLI::App& cmd, const std::string& path) : cmd_(cmd) {
    if (path.empty()) return;
    data_ = json::parse(read_text(path));
    if (!data_.is_object()) {
      throw std::invalid_argument(path + ": config must be a JSON object");
    }
  }

  template <typename T>
  void get(const char* key, T& var) {
    known_.push_back(key);
    if (!data_.is_object() || !data_.contains(key)) return;
    if (cmd_.count(std::string("--") + key) > 0) return;  // flag overrides
    try {
      var = data_.at(key).get<T>();
    } catch (const json::exception&) {
      throw std::invalid_argument(std::string("config key '") + key +
                                  "': wrong value type");
    }
  }

  // Call after all get()s: typo'd keys are an error, not a silent no-op.
  void finish() const {
    if (!data_.is_object()) return;
    for (const auto& [key, value] : data_.items()) {
      if (std::find(known_.begin(), known_.end(), key) == known_.end()) {
        throw std::invalid_argument("config key '" + key +
                                    "' is not a flag of this command");
      }
    }
  }

 private:
  const CLI::App& cmd_;
  json data_;
  std::vector<std::string> known_;
};

struct GenArgs {
  std::string out, config;
  DatasetConfig cfg;
};

struct TrainArgs {
  std::string data, val, out, loss = "mvc", config;
  TrainConfig cfg;
  double lambda = -1.0;  // <0: keep the LossConfig default
};

struct EvalArgs {
  std::string data, ckpt, out, error_maps, config;
  bool self = false;
  double iso = 0.5;
  int cd_points = 10000;
  int threads = 0;
};

struct AblateArgs {
  std::string out, config;
  std::vector<int> views{2, 4, 6};
  int seeds = 3;
  int train_scenes = 200;
  int test_scenes = 40;
  std::uint64_t data_seed = 100;
  std::uint64_t test_seed = 900;
  TrainConfig cfg;
  double lambda = 0.2;
  double elevation = 0.35;
};

struct MeshArgs {
  std::string in, ckpt, sil, depth, out, config;
  double iso = 0.5;
};

void add_train_flags(CLI::App* cmd, TrainConfig& cfg) {
  cmd->add_option("--epochs", cfg.epochs, "Training epochs")
      ->capture_default_str();
  cmd->add_option("--lr", cfg.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--decay-every", cfg.lr_decay_every,
                  "Epochs between step decays")
      ->capture_default_str();
  cmd->add_option("--decay-factor", cfg.lr_decay_factor,
                  "Learning-rate decay factor")
      ->capture_default_str();
  cmd->add_option("--batch", cfg.batch_size, "Scenes per optimizer step")
      ->capture_default_str();
  cmd->add_option("--stacks", cfg.k_stacks, "Predictor stacks (K)")
      ->capture_default_str();
  cmd->add_option("--channels", cfg.in_channels,
                  "Input channels: 1 silhouette, 2 adds depth")
      ->capture_default_str();
  cmd->add_option("--c1", cfg.c1, "Encoder width 1")->capture_default_str();
  cmd->add_option("--c2", cfg.c2, "Encoder width 2")->capture_default_str();
  cmd->add_option("--c3", cfg.c3, "Encoder width 3")->capture_default_str();
  cmd->add_option("--seed", cfg.seed, "Training seed")->capture_default_str();
  cmd->add_option("--threads", cfg.threads, "Worker threads (0 = hardware)")
      ->capture_default_str();
  cmd->add_option("--val-cd-points", cfg.val_cd_points,
                  "Surface samples for validation CD")
      ->capture_default_str();
}

void get_train_config_keys(ConfigFile& file, TrainConfig& cfg) {
  file.get("epochs", cfg.epochs);
  file.get("lr", cfg.lr);
  file.get("decay-every", cfg.lr_decay_every);
  file.get("decay-factor", cfg.lr_decay_factor);
  file.get("batch", cfg.batch_size);
  file.get("stacks", cfg.k_stacks);
  file.get("channels", cfg.in_channels);
  file.get("c1", cfg.c1);
  file.get("c2", cfg.c2);
  file.get("c3", cfg.c3);
  file.get("seed", cfg.seed);
  file.get("threads", cfg.threads);
  file.get("val-cd-points", cfg.val_cd_points);
}

LossConfig make_loss(const std::string& loss, double lambda) {
  LossConfig lc;
  if (loss == "3d") {
    lc.lambda = 0.0;
  } else if (loss == "mvc") {
    if (lambda >= 0) lc.lambda = lambda;
  } else {
    throw std::invalid_argument("--loss must be '3d' or 'mvc'");
  }
  return lc;
}

int cmd_gen(const CLI::App& cmd, GenArgs& a) {
  ConfigFile file(cmd, a.config);
  file.get("scenes", a.cfg.scenes);
  file.get("views", a.cfg.views);
  file.get("res", a.cfg.res);
  file.get("img", a.cfg.res_img);
  file.get("seed", a.cfg.seed);
  file.get("radius", a.cfg.rig_radius);
  file.get("elevation", a.cfg.rig_elevation);
  file.get("threads", a.cfg.threads);
  file.finish();

  if (a.cfg.views < 1) {
    throw std::invalid_argument("gen: --views must be >= 1");
  }
  const std::vector<SceneSample> samples = generate_dataset(a.cfg);
  const std::uint64_t bytes = write_dataset(samples, a.cfg, a.out);
  std::printf("wrote %d scenes x %d views to %s: %d images, %d grids, %llu bytes\n",
              a.cfg.scenes, a.cfg.views, a.out.c_str(),
              2 * a.cfg.scenes * a.cfg.views, a.cfg.scenes * a.cfg.views,
              (unsigned long long)bytes);
  return kOk;
}

int cmd_train(const CLI::App& cmd, TrainArgs& a) {
  ConfigFile file(cmd, a.config);
  get_train_config_keys(file, a.cfg);
  file.get("loss", a.loss);
  file.get("lambda", a.lambda);
  file.get("views", a.cfg.n_views);
  file.finish();

  a.cfg.loss = make_loss(a.loss, a.lambda);
  a.cfg.validate();

  const Dataset data = read_dataset(a.data);
  std::optional<Dataset> val;
  if (!a.val.empty()) val = read_dataset(a.val);

  const TrainResult result = train(data, val ? &*val : nullptr, a.cfg);

  fs::create_directories(a.out);
  save_checkpoint(fs::path(a.out) / "checkpoint.prm", result.params);
  write_text(fs::path(a.out) / "history.csv", history_csv(result.history));
  if (!result.history.empty()) {
    const EpochStats& last = result.history.back();
    std::printf("trained %d epochs: total=%.6f l3d=%.6f lmvc=%.6f\n",
                a.cfg.epochs, last.total, last.l3d, last.lmvc);
  } else {
    std::printf("trained 0 epochs: initial parameters saved\n");
  }
  std::printf("checkpoint: %s\n", (fs::path(a.out) / "checkpoint.prm").c_str());
  return kOk;
}

std::string eval_csv(const EvalResult& ev) {
  std::string csv = "scene,view,iou,iou_occluded,cd\n";
  char buf[160];
  for (const ViewEval& row : ev.rows) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.6f,%.6f,%.6f\n", row.scene,
                  row.view, row.iou, row.iou_occluded, row.cd);
    csv += buf;
  }
  std::snprintf(buf, sizeof buf, "mean,,%.6f,%.6f,%.6f\n", ev.mean_iou,
                ev.mean_iou_occluded, ev.mean_cd);
  csv += buf;
  return csv;
}

int cmd_eval(const CLI::App& cmd, EvalArgs& a) {
  ConfigFile file(cmd, a.config);
  file.get("iso", a.iso);
  file.get("cd-points", a.cd_points);
  file.get("threads", a.threads);
  file.finish();

  if (a.self == !a.ckpt.empty()) {
    throw std::invalid_argument("eval: pass exactly one of --ckpt and --self");
  }

  const Dataset data = read_dataset(a.data);
  EvalResult ev;
  std::optional<PredictorParams> params;

  if (a.self) {
    // Wiring probe: score the ground truth against itself.
    const std::size_t n_views = data.samples.at(0).gt.size();
    for (std::size_t s = 0; s < data.samples.size(); ++s) {
      for (std::size_t v = 0; v < n_views; ++v) {
        const VoxelGrid& gt = data.samples[s].gt[v];
        ViewEval row;
        row.scene = s;
        row.view = v;
        row.iou = iou3d(gt, gt, 0.5);
        std::vector<std::uint8_t> mask(gt.values.size(), 0);
        const int res = gt.res;
        std::fill(mask.begin() + std::size_t(res / 2) * res * res, mask.end(),
                  std::uint8_t(1));
        row.iou_occluded = iou3d_masked(gt, gt, mask, 0.5);
        const TriangleMesh mesh = marching_cubes(gt, a.iso);
        row.cd = mesh.empty()
                     ? std::numeric_limits<double>::quiet_NaN()
                     : chamfer(mesh_to_points(mesh, a.cd_points, 11),
                               mesh_to_points(mesh, a.cd_points, 11));
        ev.rows.push_back(row);
      }
    }
    double si = 0, so = 0, sc = 0;
    std::size_t nc = 0;
    for (const ViewEval& r : ev.rows) {
      si += r.iou;
      so += r.iou_occluded;
      if (std::isfinite(r.cd)) sc += r.cd, ++nc;
    }
    ev.mean_iou = si / double(ev.rows.size());
    ev.mean_iou_occluded = so / double(ev.rows.size());
    ev.mean_cd = nc ? sc / double(nc) : std::numeric_limits<double>::quiet_NaN();
  } else {
    params = load_checkpoint(a.ckpt);
    ev = evaluate(*params, data, a.iso, true, a.cd_points, a.threads);
  }

  write_text(a.out, eval_csv(ev));
  std::printf("rows=%zu mean_iou=%.4f mean_iou_occluded=%.4f mean_cd=%.4f\n",
              ev.rows.size(), ev.mean_iou, ev.mean_iou_occluded, ev.mean_cd);

  if (!a.error_maps.empty()) {
    fs::create_directories(a.error_maps);
    const std::size_t n_views = data.samples.at(0).gt.size();
    for (std::size_t s = 0; s < data.samples.size(); ++s) {
      for (std::size_t v = 0; v < n_views; ++v) {
        const VoxelGrid& gt = data.samples[s].gt[v];
        TriangleMesh mesh;
        if (a.self) {
          mesh = marching_cubes(gt, a.iso);
        } else {
          const std::vector<double> planes = input_planes(
              params->arch, data.samples[s].silhouettes[v], data.samples[s].depths[v]);
          mesh = reconstruct(*params, planes, a.iso);
        }
        if (mesh.empty()) continue;
        const TriangleMesh gt_mesh = marching_cubes(gt, 0.5);
        std::vector<float> err(mesh.vertices.size(), 0.0f);
        if (!gt_mesh.empty()) {
          const std::vector<double> d = per_vertex_chamfer(
              mesh, mesh_to_points(gt_mesh, a.cd_points, 11));
          err.assign(d.begin(), d.end());
        }
        char name[64];
        std::snprintf(name, sizeof name, "scene%04zu-view%zu.ply", s, v);
        write_ply(fs::path(a.error_maps) / name, mesh, err);
      }
    }
    std::printf("error maps: %s\n", a.error_maps.c_str());
  }
  return kOk;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_ablate(const CLI::App& cmd, AblateArgs& a) {
  ConfigFile file(cmd, a.config);
  get_train_config_keys(file, a.cfg);
  file.get("views", a.views);
  file.get("seeds", a.seeds);
  file.get("train-scenes", a.train_scenes);
  file.get("test-scenes", a.test_scenes);
  file.get("data-seed", a.data_seed);
  file.get("test-seed", a.test_seed);
  file.get("lambda", a.lambda);
  file.get("elevation", a.elevation);
  file.finish();

  if (a.seeds < 1) throw std::invalid_argument("ablate: --seeds must be >= 1");
  if (a.views.empty()) {
    throw std::invalid_argument("ablate: --views must name at least one count");
  }

  fs::create_directories(a.out);

  DatasetConfig tc;
  tc.scenes = a.test_scenes;
  tc.views = 6;
  tc.seed = a.test_seed;
  tc.rig_elevation = a.elevation;
  tc.threads = a.cfg.threads;
  const Dataset test{tc, generate_dataset(tc)};

  std::string csv = "loss,views,seed,iou,iou_occluded,cd\n";
  char buf[160];

  for (const std::string& loss : {std::string("3d"), std::string("mvc")}) {
    for (const int n : a.views) {
      // One dataset per view count: the same scene seed gives the same
      // shapes, so conditions differ only in how many views they see.
      DatasetConfig dc = tc;
      dc.scenes = a.train_scenes;
      dc.views = n;
      dc.seed = a.data_seed;
      const Dataset train_data{dc, generate_dataset(dc)};

      std::vector<double> ious, occs, cds;
      for (int seed = 1; seed <= a.seeds; ++seed) {
        TrainConfig cfg = a.cfg;
        cfg.seed = std::uint64_t(seed);
        cfg.loss = make_loss(loss, a.lambda);
        const TrainResult r = train(train_data, nullptr, cfg);
        const EvalResult ev =
            evaluate(r.params, test, 0.5, true, 2000, cfg.threads);
        ious.push_back(ev.mean_iou);
        occs.push_back(ev.mean_iou_occluded);
        cds.push_back(ev.mean_cd);

        char name[96];
        std::snprintf(name, sizeof name, "history-%s-n%d-s%d.csv", loss.c_str(),
                      n, seed);
        write_text(fs::path(a.out) / name, history_csv(r.history));
        std::snprintf(buf, sizeof buf, "%s,%d,%d,%.6f,%.6f,%.6f\n", loss.c_str(),
                      n, seed, ev.mean_iou, ev.mean_iou_occluded, ev.mean_cd);
        csv += buf;
        std::printf("%s", buf);
        std::fflush(stdout);
      }
      std::snprintf(buf, sizeof buf, "%s,%d,median,%.6f,%.6f,%.6f\n",
                    loss.c_str(), n, median(ious), median(occs), median(cds));
      csv += buf;
      std::printf("%s", buf);
      std::fflush(stdout);
    }
  }

  write_text(fs::path(a.out) / "ablation.csv", csv);
  std::printf("report: %s\n", (fs::path(a.out) / "ablation.csv").c_str());
  return kOk;
}

int cmd_mesh(const CLI::App& cmd, MeshArgs& a) {
  ConfigFile file(cmd, a.config);
  file.get("iso", a.iso);
  file.finish();

  if (a.in.empty() == a.ckpt.empty()) {
    throw std::invalid_argument("mesh: pass exactly one of --in and --ckpt");
  }

  TriangleMesh mesh;
  if (!a.in.empty()) {
    mesh = marching_cubes(read_vxg(a.in), a.iso);
  } else {
    if (a.sil.empty()) {
      throw std::invalid_argument("mesh: --ckpt needs --sil (and --depth for "
                                  "two-channel checkpoints)");
    }
    const PredictorParams params = load_checkpoint(a.ckpt);
    const ImageU8 sil = read_pgm8(a.sil);
    ImageU16 depth{sil.width, sil.height,
                   std::vector<std::uint16_t>(sil.pixels.size(), 0)};
    if (!a.depth.empty()) depth = read_pgm16(a.depth);
    mesh = reconstruct(params, input_planes(params.arch, sil, depth), a.iso);
  }

  const std::string ext = fs::path(a.out).extension().string();
  if (ext == ".obj") {
    write_obj(a.out, mesh);
  } else if (ext == ".ply") {
    write_ply(a.out, mesh, {});
  } else {
    throw std::invalid_argument("mesh: --out must end in .obj or .ply");
  }
  std::printf("wrote %s: %zu vertices, %zu triangles\n", a.out.c_str(),
              mesh.vertices.size(), mesh.triangles.size());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-image volumetric reconstruction toolkit"};
  app.require_subcommand(1);

  GenArgs gen;
  CLI::App* cg = app.add_subcommand("gen", "Generate a synthetic dataset");
  cg->add_option("--out", gen.out, "Output directory")->required();
  cg->add_option("--scenes", gen.cfg.scenes, "Scene count")->capture_default_str();
  cg->add_option("--views", gen.cfg.views, "Cameras per scene")
      ->capture_default_str();
  cg->add_option("--res", gen.cfg.res, "Occupancy grid resolution")
      ->capture_default_str();
  cg->add_option("--img", gen.cfg.res_img, "Image resolution")
      ->capture_default_str();
  cg->add_option("--seed", gen.cfg.seed, "Dataset seed")->capture_default_str();
  cg->add_option("--radius", gen.cfg.rig_radius, "Rig radius")
      ->capture_default_str();
  cg->add_option("--elevation", gen.cfg.rig_elevation, "Rig elevation (rad)")
      ->capture_default_str();
  cg->add_option("--threads", gen.cfg.threads, "Worker threads (0 = hardware)")
      ->capture_default_str();
  cg->add_option("--config", gen.config, "JSON config file (flags override)");

  TrainArgs tr;
  CLI::App* ct = app.add_subcommand("train", "Train a predictor");
  ct->add_option("--data", tr.data, "Training dataset directory")->required();
  ct->add_option("--val", tr.val, "Validation dataset directory");
  ct->add_option("--out", tr.out, "Output directory")->required();
  ct->add_option("--loss", tr.loss, "Loss: '3d' or 'mvc'")->capture_default_str();
  ct->add_option("--lambda", tr.lambda, "Consistency weight (mvc loss)");
  ct->add_option("--views", tr.cfg.n_views,
                 "Views per scene (0 = all in the dataset)")
      ->capture_default_str();
  add_train_flags(ct, tr.cfg);
  ct->add_option("--config", tr.config, "JSON config file (flags override)");

  EvalArgs ev;
  CLI::App* ce = app.add_subcommand("eval", "Evaluate a checkpoint");
  ce->add_option("--data", ev.data, "Test dataset directory")->required();
  ce->add_option("--ckpt", ev.ckpt, "Checkpoint file");
  ce->add_flag("--self", ev.self, "Score the ground truth against itself");
  ce->add_option("--out", ev.out, "Metrics CSV path")->required();
  ce->add_option("--iso", ev.iso, "Mesh iso level")->capture_default_str();
  ce->add_option("--cd-points", ev.cd_points, "Surface samples for CD")
      ->capture_default_str();
  ce->add_option("--error-maps", ev.error_maps,
                 "Directory for per-vertex error PLYs");
  ce->add_option("--threads", ev.threads, "Worker threads (0 = hardware)")
      ->capture_default_str();
  ce->add_option("--config", ev.config, "JSON config file (flags override)");

  AblateArgs ab;
  // The ablation defaults to silhouette+depth input: the occluded-hemisphere
  // comparison needs the near/far information asymmetry that only the depth
  // channel provides. Plain `train` keeps the silhouette-only default.
  ab.cfg.in_channels = 2;
  CLI::App* ca = app.add_subcommand("ablate", "Run the views x loss matrix");
  ca->add_option("--out", ab.out, "Output directory")->required();
  ca->add_option("--views", ab.views, "View counts to train with")
      ->capture_default_str();
  ca->add_option("--seeds", ab.seeds, "Seeds per condition")
      ->capture_default_str();
  ca->add_option("--train-scenes", ab.train_scenes, "Training scenes")
      ->capture_default_str();
  ca->add_option("--test-scenes", ab.test_scenes, "Held-out scenes")
      ->capture_default_str();
  ca->add_option("--data-seed", ab.data_seed, "Training dataset seed")
      ->capture_default_str();
  ca->add_option("--test-seed", ab.test_seed, "Held-out dataset seed")
      ->capture_default_str();
  ca->add_option("--lambda", ab.lambda, "Consistency weight (mvc rows)")
      ->capture_default_str();
  ca->add_option("--elevation", ab.elevation, "Rig elevation (rad)")
      ->capture_default_str();
  add_train_flags(ca, ab.cfg);
  ca->add_option("--config", ab.config, "JSON config file (flags override)");

  MeshArgs me;
  CLI::App* cm = app.add_subcommand("mesh", "Export an iso-surface mesh");
  cm->add_option("--in", me.in, "Occupancy grid (.vxg)");
  cm->add_option("--ckpt", me.ckpt, "Checkpoint file (with --sil)");
  cm->add_option("--sil", me.sil, "Input silhouette (.pgm)");
  cm->add_option("--depth", me.depth, "Input depth (.pgm, 16-bit)");
  cm->add_option("--out", me.out, "Output mesh (.obj or .ply)")->required();
  cm->add_option("--iso", me.iso, "Iso level in (0, 1)")->capture_default_str();
  cm->add_option("--config", me.config, "JSON config file (flags override)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (cg->parsed()) return cmd_gen(*cg, gen);
    if (ct->parsed()) return cmd_train(*ct, tr);
    if (ce->parsed()) return cmd_eval(*ce, ev);
    if (ca->parsed()) return cmd_ablate(*ca, ab);
    if (cm->parsed()) return cmd_mesh(*cm, me);
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumeric;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIo;
  }
  return kOk;
}
