#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mvrec/geometry.hpp"
#include "mvrec/io.hpp"
#include "mvrec/losses.hpp"

namespace mvrec {

// Fixed convolutional encoder/decoder that maps one orthographic view to a
// stack of res depth-slice maps (one output channel per z slice), with
// K >= 1 prediction stacks: stack 1 reads the decoder features, each later
// stack reads the previous stack's logits concatenated with those features,
// and every stack gets its own supervision. Hidden activations are tanh
// (smooth, so finite-difference gradient checks are meaningful); outputs
// are sigmoid probabilities.
struct ArchDescriptor {
  int img = 64;         // input side; must equal 2 * res and divide by 8
  int res = 32;         // output grid resolution
  int in_channels = 1;  // 1 = silhouette, 2 = silhouette + depth
  int c1 = 8;           // channel widths of the three encoder levels
  int c2 = 16;
  int c3 = 16;
  int k_stacks = 1;

  void validate() const;
  std::size_t param_count() const;
  std::string to_json() const;
  static ArchDescriptor from_json(const std::string& text);

  bool operator==(const ArchDescriptor&) const = default;
};

struct PredictorParams {
  ArchDescriptor arch;
  std::vector<double> values;  // flat, length arch.param_count()
};

// Seeded uniform fan-in initialization (biases zero).
PredictorParams init_params(const ArchDescriptor& arch, std::uint64_t seed);

// Image planes for the network input: channel 0 is the silhouette in
// {0, 1}, channel 1 (when in_channels == 2) the normalized depth. Layout
// [channel][row][col], row-major.
std::vector<double> input_planes(const ArchDescriptor& arch, const ImageU8& sil,
                                 const ImageU16& depth);

// K post-sigmoid occupancy grids in the input view's frame. Slice channel
// k becomes grid plane z = k; spatial position (row v, col u) becomes
// voxel (x = u, y = v).
std::vector<VoxelGrid> forward(const PredictorParams& params,
                               const std::vector<double>& planes);

// Shared-parameter multi-view step for one scene: runs forward once per
// view with the same parameters, evaluates the combined loss over all K*N
// grids, and backpropagates into one parameter gradient. loss.grad is left
// empty (the per-voxel gradients exist only as internal buffers).
struct SceneGradient {
  LossValue loss;
  std::vector<double> grad;
};
SceneGradient backward(const PredictorParams& params,
                       const std::vector<std::vector<double>>& view_planes,
                       const std::vector<VoxelGrid>& gts, const CameraRig& rig,
                       const LossConfig& cfg, const MvcPlans* plans = nullptr);

// Bias-corrected Adam. Throws std::runtime_error on a non-finite gradient
// entry and guarantees finite parameters afterwards.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};
void adam_step(std::vector<double>& params, const std::vector<double>& grad,
               AdamState& state, double lr);

// Final-stack prediction passed through marching cubes.
TriangleMesh reconstruct(const PredictorParams& params,
                         const std::vector<double>& planes, double iso = 0.5);

// PRM1 checkpoint: JSON architecture descriptor + f32 parameters.
void save_checkpoint(const std::filesystem::path& path,
                     const PredictorParams& params);
PredictorParams load_checkpoint(const std::filesystem::path& path);

}  // namespace mvrec
