#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvrec/dataset.hpp"
#include "mvrec/model.hpp"

namespace mvrec {

struct TrainConfig {
  double lr = 2.5e-4;
  int lr_decay_every = 20;      // epochs between step decays
  double lr_decay_factor = 0.1;
  int epochs = 40;
  int batch_size = 4;           // scenes per optimizer step
  int n_views = 0;              // 0 = all dataset views; else a divisor of them
  int k_stacks = 1;
  int in_channels = 1;          // 1 = silhouette only, 2 = + depth
  int c1 = 8;
  int c2 = 16;
  int c3 = 16;
  LossConfig loss;
  std::uint64_t seed = 1;
  int threads = 0;
  int val_cd_points = 2000;     // surface samples for per-epoch validation CD

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double lr = 0;
  double total = 0;
  double l3d = 0;
  double lmvc = 0;
  double val_iou = 0;  // NaN when no validation split was given
  double val_cd = 0;   // NaN when undefined (no split, or only empty meshes)
};

struct TrainResult {
  PredictorParams params;
  std::vector<EpochStats> history;
};

// Raised when training hits a non-finite loss, gradient, or parameter.
struct DivergenceError : std::runtime_error {
  int epoch;
  DivergenceError(int epoch_, const std::string& msg)
      : std::runtime_error(msg), epoch(epoch_) {}
};

// Header "epoch,lr,total,l3d,lmvc,val_iou,val_cd", one row per epoch.
std::string history_csv(const std::vector<EpochStats>& history);

// Seeded end-to-end training: per-epoch shuffled scene batches, shared
// parameters across views, Adam with step decay. Identical (seed, config,
// data) give identical histories and parameters, independent of the thread
// count. Throws DivergenceError on non-finite numerics.
TrainResult train(const Dataset& train_data, const Dataset* val_data,
                  const TrainConfig& cfg);

// Per-view held-out evaluation of a trained predictor.
struct ViewEval {
  std::size_t scene = 0;
  std::size_t view = 0;
  double iou = 0;
  double iou_occluded = 0;  // far hemisphere only (voxels past the subject)
  double cd = 0;            // NaN when with_cd is off or a mesh was empty
};

struct EvalResult {
  std::vector<ViewEval> rows;
  double mean_iou = 0;
  double mean_iou_occluded = 0;
  double mean_cd = 0;  // over rows with a defined CD; NaN if none
};

// The occluded hemisphere is the half-grid with z >= res/2: grids live in
// the input camera's frame and the camera looks along +z, so those voxels
// lie behind the subject's mid-plane.
EvalResult evaluate(const PredictorParams& params, const Dataset& data,
                    double iso = 0.5, bool with_cd = true,
                    int cd_points = 10000, int threads = 0);

}  // namespace mvrec
