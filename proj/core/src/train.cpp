#include "mvrec/train.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <numeric>

#include "mvrec/marching_cubes.hpp"
#include "mvrec/metrics.hpp"
#include "mvrec/parallel.hpp"
#include "mvrec/rng.hpp"

namespace mvrec {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::size_t> view_subset(int dataset_views, int n_views) {
  if (n_views == 0) n_views = dataset_views;
  if (n_views < 1 || n_views > dataset_views || dataset_views % n_views != 0) {
    throw std::invalid_argument(
        "train: n_views must divide the dataset view count (" +
        std::to_string(dataset_views) + ")");
  }
  const std::size_t stride = std::size_t(dataset_views / n_views);
  std::vector<std::size_t> idx(n_views);
  for (int i = 0; i < n_views; ++i) idx[i] = i * stride;
  return idx;
}

CameraRig sub_rig(const CameraRig& rig, const std::vector<std::size_t>& views) {
  CameraRig out;
  for (std::size_t v : views) {
    out.poses.push_back(rig.poses[v]);
    out.azimuths.push_back(rig.azimuths[v]);
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0)) throw std::invalid_argument("TrainConfig: lr must be > 0");
  if (lr_decay_every < 1) {
    throw std::invalid_argument("TrainConfig: lr_decay_every must be >= 1");
  }
  if (!(lr_decay_factor > 0 && lr_decay_factor <= 1)) {
    throw std::invalid_argument("TrainConfig: lr_decay_factor must be in (0, 1]");
  }
  if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
  if (batch_size < 1) {
    throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  }
  if (n_views < 0) throw std::invalid_argument("TrainConfig: n_views must be >= 0");
  if (k_stacks < 1) throw std::invalid_argument("TrainConfig: k_stacks must be >= 1");
  if (in_channels != 1 && in_channels != 2) {
    throw std::invalid_argument("TrainConfig: in_channels must be 1 or 2");
  }
  if (c1 < 1 || c2 < 1 || c3 < 1) {
    throw std::invalid_argument("TrainConfig: channel widths must be >= 1");
  }
  if (val_cd_points < 1) {
    throw std::invalid_argument("TrainConfig: val_cd_points must be >= 1");
  }
  loss.validate();
}

std::string history_csv(const std::vector<EpochStats>& history) {
  std::string out = "epoch,lr,total,l3d,lmvc,val_iou,val_cd\n";
  char buf[256];
  for (const EpochStats& row : history) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                  row.epoch, row.lr, row.total, row.l3d, row.lmvc, row.val_iou,
                  row.val_cd);
    out += buf;
  }
  return out;
}

TrainResult train(const Dataset& train_data, const Dataset* val_data,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (train_data.samples.empty()) {
    throw std::invalid_argument("train: empty training set");
  }

  const std::vector<std::size_t> views =
      view_subset(train_data.config.views, cfg.n_views);
  const CameraRig rig = sub_rig(train_data.samples[0].spec.rig, views);
  const std::size_t n_views = views.size();

  ArchDescriptor arch;
  arch.img = train_data.config.res_img;
  arch.res = train_data.config.res;
  arch.in_channels = cfg.in_channels;
  arch.c1 = cfg.c1;
  arch.c2 = cfg.c2;
  arch.c3 = cfg.c3;
  arch.k_stacks = cfg.k_stacks;
  arch.validate();

  TrainResult result;
  result.params = init_params(arch, cfg.seed);

  const bool use_mvc = cfg.loss.lambda > 0 && n_views > 1;
  std::unique_ptr<MvcPlans> plans;
  if (use_mvc) plans = std::make_unique<MvcPlans>(rig, arch.res, 1.0);

  AdamState state;
  Rng order_rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);
  std::vector<std::size_t> order(train_data.samples.size());
  std::iota(order.begin(), order.end(), 0);

  const std::size_t n_scenes = order.size();
  std::vector<double> grad(result.params.values.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr =
        cfg.lr * std::pow(cfg.lr_decay_factor, epoch / cfg.lr_decay_every);
    order_rng.shuffle(order);

    double sum_total = 0, sum_l3d = 0, sum_lmvc = 0;
    for (std::size_t start = 0; start < n_scenes; start += cfg.batch_size) {
      const std::size_t b_count =
          std::min<std::size_t>(cfg.batch_size, n_scenes - start);

      std::vector<SceneGradient> scene_grads(b_count);
      parallel_for(b_count, cfg.threads, [&](std::size_t b) {
        const SceneSample& sample = train_data.samples[order[start + b]];
        std::vector<std::vector<double>> planes;
        std::vector<VoxelGrid> gts;
        planes.reserve(n_views);
        gts.reserve(n_views);
        for (std::size_t v : views) {
          planes.push_back(
              input_planes(arch, sample.silhouettes[v], sample.depths[v]));
          gts.push_back(sample.gt[v]);
        }
        scene_grads[b] = backward(result.params, planes, gts, rig, cfg.loss,
                                  plans.get());
      });

      // Ordered reduction keeps results independent of the thread count.
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t b = 0; b < b_count; ++b) {
        if (!std::isfinite(scene_grads[b].loss.total)) {
          throw DivergenceError(
              epoch, "training diverged at epoch " + std::to_string(epoch) +
                         ": non-finite loss");
        }
        sum_total += scene_grads[b].loss.total;
        sum_l3d += scene_grads[b].loss.l3d;
        sum_lmvc += scene_grads[b].loss.lmvc;
        const double inv_b = 1.0 / double(b_count);
        for (std::size_t i = 0; i < grad.size(); ++i) {
          grad[i] += inv_b * scene_grads[b].grad[i];
        }
      }
      try {
        adam_step(result.params.values, grad, state, lr);
      } catch (const std::runtime_error& e) {
        throw DivergenceError(epoch,
                              "training diverged at epoch " +
                                  std::to_string(epoch) + ": " + e.what());
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    stats.total = sum_total / double(n_scenes);
    stats.l3d = sum_l3d / double(n_scenes);
    stats.lmvc = sum_lmvc / double(n_scenes);
    stats.val_iou = kNaN;
    stats.val_cd = kNaN;
    if (val_data) {
      const EvalResult val = evaluate(result.params, *val_data, 0.5, true,
                                      cfg.val_cd_points, cfg.threads);
      stats.val_iou = val.mean_iou;
      stats.val_cd = val.mean_cd;
    }
    result.history.push_back(stats);
  }
  return result;
}

EvalResult evaluate(const PredictorParams& params, const Dataset& data,
                    double iso, bool with_cd, int cd_points, int threads) {
  const ArchDescriptor& arch = params.arch;
  arch.validate();
  if (data.config.res != arch.res || data.config.res_img != arch.img) {
    throw std::invalid_argument(
        "evaluate: dataset resolution does not match the predictor");
  }
  if (data.samples.empty()) {
    throw std::invalid_argument("evaluate: empty dataset");
  }

  const int res = arch.res;
  std::vector<std::uint8_t> far_mask(std::size_t(res) * res * res, 0);
  for (int z = res / 2; z < res; ++z) {
    std::fill(far_mask.begin() + std::size_t(z) * res * res,
              far_mask.begin() + std::size_t(z + 1) * res * res,
              std::uint8_t(1));
  }

  const std::size_t n_scenes = data.samples.size();
  const std::size_t n_views = data.samples[0].gt.size();
  EvalResult out;
  out.rows.resize(n_scenes * n_views);

  parallel_for(n_scenes, threads, [&](std::size_t s) {
    const SceneSample& sample = data.samples[s];
    for (std::size_t v = 0; v < n_views; ++v) {
      ViewEval row;
      row.scene = s;
      row.view = v;
      const std::vector<double> planes =
          input_planes(arch, sample.silhouettes[v], sample.depths[v]);
      const std::vector<VoxelGrid> grids = forward(params, planes);
      const VoxelGrid& pred = grids.back();
      const VoxelGrid& gt = sample.gt[v];
      row.iou = iou3d(pred, gt, 0.5);
      row.iou_occluded = iou3d_masked(pred, gt, far_mask, 0.5);
      row.cd = kNaN;
      if (with_cd) {
        const TriangleMesh mesh_pred = marching_cubes(pred, iso);
        const TriangleMesh mesh_gt = marching_cubes(gt, 0.5);
        if (!mesh_pred.empty() && !mesh_gt.empty()) {
          const std::uint64_t seed = (std::uint64_t(s) << 16) | v;
          row.cd = chamfer(mesh_to_points(mesh_pred, cd_points, seed),
                           mesh_to_points(mesh_gt, cd_points, seed ^ 0xABCDEF));
        }
      }
      out.rows[s * n_views + v] = row;
    }
  });

  double sum_iou = 0, sum_occ = 0, sum_cd = 0;
  std::size_t n_cd = 0;
  for (const ViewEval& row : out.rows) {
    sum_iou += row.iou;
    sum_occ += row.iou_occluded;
    if (std::isfinite(row.cd)) {
      sum_cd += row.cd;
      ++n_cd;
    }
  }
  out.mean_iou = sum_iou / double(out.rows.size());
  out.mean_iou_occluded = sum_occ / double(out.rows.size());
  out.mean_cd = n_cd ? sum_cd / double(n_cd) : kNaN;
  return out;
}

}  // namespace mvrec
