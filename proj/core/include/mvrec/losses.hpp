#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "mvrec/geometry.hpp"

namespace mvrec {

// Shared configuration for the two training losses and their combination.
struct LossConfig {
  // Occupied-class weight. Unset means per-call class balancing: gamma is
  // the unoccupied fraction of the ground-truth batch, clamped away from
  // {0, 1} only so an all-empty or all-full batch cannot zero out a class.
  std::optional<double> gamma;
  double lambda = 0.2;  // consistency-term weight
  double eps = 1e-7;    // probability clamp floor

  // Throws std::invalid_argument on gamma outside (0,1), lambda < 0, or
  // eps outside (0, 0.5).
  void validate() const;
};

// One loss term: scalar value plus d(value)/d(pred) arrays, one per
// predicted grid, index-aligned with the `pred` argument.
struct LossTerms {
  double value = 0.0;
  std::vector<std::vector<double>> grad;
};

// Combined loss, satisfying total = l3d + lambda * lmvc.
struct LossValue {
  double total = 0.0;
  double l3d = 0.0;
  double lmvc = 0.0;
  std::vector<std::vector<double>> grad;
};

// Cached trilinear resample plans for every ordered view pair of a rig, at
// one grid shape. Plans depend only on the rig, so training reuses one
// instance across all scenes and epochs.
class MvcPlans {
 public:
  MvcPlans(const CameraRig& rig, int res, double extent);

  std::size_t n_views() const { return n_; }
  int res() const { return res_; }
  // Plan mapping view `src` grids into view `dst`'s frame. dst != src.
  const ResamplePlan& plan(std::size_t dst, std::size_t src) const;

 private:
  std::size_t n_;
  int res_;
  std::vector<std::unique_ptr<ResamplePlan>> plans_;  // dst * n + src
};

// Predicted grids are passed as one flat list of K*N post-sigmoid grids,
// laid out stack-major: pred[j*N + i] is stack j's estimate for view i.

// Weighted binary cross entropy (occupied weight gamma), averaged per voxel
// within each grid and summed over the K*N grids. Ground truth must be
// binary. Throws std::invalid_argument on shape mismatch or non-binary gt.
LossTerms l3d(const std::vector<VoxelGrid>& pred,
              const std::vector<VoxelGrid>& gt, const LossConfig& cfg);

// Multi-view consistency: for every stack and every ordered view pair
// (i, l), the mean squared difference between view i's grid and view l's
// grid resampled into frame i, taken over in-bounds voxels and summed over
// pairs and stacks. Gradients flow into both operands (through the
// trilinear weights on the resampled side). `plans` may be null; passing a
// cached MvcPlans avoids rebuilding per call.
LossTerms lmvc(const std::vector<VoxelGrid>& pred, const CameraRig& rig,
               const LossConfig& cfg, const MvcPlans* plans = nullptr);

// total = l3d + lambda * lmvc with merged gradients.
LossValue combined(const std::vector<VoxelGrid>& pred,
                   const std::vector<VoxelGrid>& gt, const CameraRig& rig,
                   const LossConfig& cfg, const MvcPlans* plans = nullptr);

namespace detail {

// Class-balanced gamma for a ground-truth batch: unoccupied fraction,
// clamped away from {0, 1} for degenerate batches.
double balanced_gamma(const std::vector<VoxelGrid>& gt);

// Kernels shared by the VoxelGrid API above and the double-precision
// training path. Both accumulate `scale * gradient` into the grad buffers.

// Returns the per-voxel mean weighted BCE of one grid; adds the gradient
// w.r.t. pred into grad_pred (null to skip).
template <typename T>
double wbce_grid(const T* pred, const float* gt, std::size_t n, double gamma,
                 double eps, T* grad_pred, double scale);

// Returns mean in-bounds squared difference between `a` and `b` gathered
// through `plan`; adds gradients w.r.t. a and b (either may be null).
// `scratch` must have plan-res^3 capacity and is overwritten.
template <typename T>
double mvc_pair(const T* a, const T* b, const ResamplePlan& plan, T* scratch,
                T* grad_a, T* grad_b, double scale);

}  // namespace detail

}  // namespace mvrec
