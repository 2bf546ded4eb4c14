#include "mvrec/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mvrec {
namespace {

void check_pred_shapes(const std::vector<VoxelGrid>& pred) {
  if (pred.empty()) throw std::invalid_argument("loss: empty prediction list");
  for (const VoxelGrid& g : pred) {
    if (g.res != pred[0].res || g.values.size() != pred[0].values.size()) {
      throw std::invalid_argument("loss: prediction grids disagree in shape");
    }
  }
}

}  // namespace

void LossConfig::validate() const {
  if (gamma && !(*gamma > 0.0 && *gamma < 1.0)) {
    throw std::invalid_argument("LossConfig: gamma must lie in (0, 1)");
  }
  if (!(lambda >= 0.0)) {
    throw std::invalid_argument("LossConfig: lambda must be non-negative");
  }
  if (!(eps > 0.0 && eps < 0.5)) {
    throw std::invalid_argument("LossConfig: eps must lie in (0, 0.5)");
  }
}

MvcPlans::MvcPlans(const CameraRig& rig, int res, double extent)
    : n_(rig.size()), res_(res) {
  // Poses must be rigid rotations, but rig-level equidistance is the
  // dataset generator's contract, not a requirement for consistency plans
  // (permuted or hand-built rigs are legitimate here).
  for (const CameraPose& pose : rig.poses) pose.validate();
  plans_.resize(n_ * n_);
  for (std::size_t dst = 0; dst < n_; ++dst) {
    for (std::size_t src = 0; src < n_; ++src) {
      if (dst == src) continue;
      plans_[dst * n_ + src] = std::make_unique<ResamplePlan>(
          res, extent, relative_transform(rig.poses[src], rig.poses[dst]));
    }
  }
}

const ResamplePlan& MvcPlans::plan(std::size_t dst, std::size_t src) const {
  return *plans_[dst * n_ + src];
}

namespace detail {

double balanced_gamma(const std::vector<VoxelGrid>& gt) {
  std::size_t total = 0, unoccupied = 0;
  for (const VoxelGrid& g : gt) {
    total += g.values.size();
    for (float v : g.values) unoccupied += (v == 0.0f);
  }
  if (total == 0) return 0.5;
  // The clamp only rescues degenerate all-empty / all-full batches, where the
  // raw ratio would leave the required open interval (0, 1).
  return std::clamp(double(unoccupied) / double(total), 1e-6, 1.0 - 1e-6);
}

template <typename T>
double wbce_grid(const T* pred, const float* gt, std::size_t n, double gamma,
                 double eps, T* grad_pred, double scale) {
  const double inv_n = 1.0 / double(n);
  double loss = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    const double g = gt[v];
    if (g != 0.0 && g != 1.0) {
      throw std::invalid_argument("l3d: ground truth value not in {0, 1}");
    }
    const double p_raw = double(pred[v]);
    const double p = std::clamp(p_raw, eps, 1.0 - eps);
    loss -= gamma * g * std::log(p) + (1.0 - gamma) * (1.0 - g) * std::log1p(-p);
    if (grad_pred && p_raw == p) {  // zero gradient in the clamped region
      const double d = -(gamma * g / p - (1.0 - gamma) * (1.0 - g) / (1.0 - p));
      grad_pred[v] += T(scale * inv_n * d);
    }
  }
  return loss * inv_n;
}

template <typename T>
double mvc_pair(const T* a, const T* b, const ResamplePlan& plan, T* scratch,
                T* grad_a, T* grad_b, double scale) {
  const std::size_t n =
      std::size_t(plan.res()) * plan.res() * plan.res();
  const std::size_t m = plan.in_bounds_count();
  if (m == 0) return 0.0;

  plan.gather(b, scratch);
  const std::vector<std::uint8_t>& mask = plan.in_bounds();
  const double inv_m = 1.0 / double(m);

  double loss = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    if (!mask[v]) continue;
    const double d = double(a[v]) - double(scratch[v]);
    loss += d * d;
    if (grad_a) grad_a[v] += T(scale * inv_m * 2.0 * d);
  }
  if (grad_b) {
    // Reuse scratch for the masked upstream gradient, then push it through
    // the trilinear weights.
    for (std::size_t v = 0; v < n; ++v) {
      const double d = mask[v] ? double(a[v]) - double(scratch[v]) : 0.0;
      scratch[v] = T(-scale * inv_m * 2.0 * d);
    }
    plan.scatter_add(scratch, grad_b);
  }
  return loss * inv_m;
}

template double wbce_grid<float>(const float*, const float*, std::size_t,
                                 double, double, float*, double);
template double wbce_grid<double>(const double*, const float*, std::size_t,
                                  double, double, double*, double);
template double mvc_pair<float>(const float*, const float*,
                                const ResamplePlan&, float*, float*, float*,
                                double);
template double mvc_pair<double>(const double*, const double*,
                                 const ResamplePlan&, double*, double*,
                                 double*, double);

}  // namespace detail

LossTerms l3d(const std::vector<VoxelGrid>& pred,
              const std::vector<VoxelGrid>& gt, const LossConfig& cfg) {
  cfg.validate();
  check_pred_shapes(pred);
  if (gt.empty() || pred.size() % gt.size() != 0) {
    throw std::invalid_argument(
        "l3d: prediction count is not a multiple of the view count");
  }
  const std::size_t n_views = gt.size();
  for (const VoxelGrid& g : gt) {
    if (g.res != pred[0].res) {
      throw std::invalid_argument("l3d: gt shape differs from predictions");
    }
  }

  const double gamma = cfg.gamma ? *cfg.gamma : detail::balanced_gamma(gt);
  LossTerms out;
  out.grad.resize(pred.size());
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const std::size_t n = pred[k].values.size();
    out.grad[k].assign(n, 0.0);
    std::vector<double> p(pred[k].values.begin(), pred[k].values.end());
    out.value += detail::wbce_grid<double>(p.data(), gt[k % n_views].values.data(),
                                           n, gamma, cfg.eps,
                                           out.grad[k].data(), 1.0);
  }
  return out;
}

LossTerms lmvc(const std::vector<VoxelGrid>& pred, const CameraRig& rig,
               const LossConfig& cfg, const MvcPlans* plans) {
  cfg.validate();
  check_pred_shapes(pred);
  const std::size_t n_views = rig.size();
  if (n_views == 0 || pred.size() % n_views != 0) {
    throw std::invalid_argument("lmvc: rig size does not divide grid count");
  }
  const std::size_t k_stacks = pred.size() / n_views;
  const int res = pred[0].res;
  const double extent = pred[0].extent;

  std::unique_ptr<MvcPlans> local;
  if (!plans) {
    local = std::make_unique<MvcPlans>(rig, res, extent);
    plans = local.get();
  } else if (plans->n_views() != n_views || plans->res() != res) {
    throw std::invalid_argument("lmvc: cached plans do not match inputs");
  }

  LossTerms out;
  out.grad.resize(pred.size());
  for (auto& g : out.grad) g.assign(pred[0].values.size(), 0.0);

  std::vector<double> scratch(pred[0].values.size());
  std::vector<std::vector<double>> p(pred.size());
  for (std::size_t k = 0; k < pred.size(); ++k) {
    p[k].assign(pred[k].values.begin(), pred[k].values.end());
  }

  for (std::size_t j = 0; j < k_stacks; ++j) {
    for (std::size_t i = 0; i < n_views; ++i) {
      for (std::size_t l = 0; l < n_views; ++l) {
        if (l == i) continue;
        const std::size_t ki = j * n_views + i;
        const std::size_t kl = j * n_views + l;
        out.value += detail::mvc_pair<double>(
            p[ki].data(), p[kl].data(), plans->plan(i, l), scratch.data(),
            out.grad[ki].data(), out.grad[kl].data(), 1.0);
      }
    }
  }
  return out;
}

LossValue combined(const std::vector<VoxelGrid>& pred,
                   const std::vector<VoxelGrid>& gt, const CameraRig& rig,
                   const LossConfig& cfg, const MvcPlans* plans) {
  LossTerms t3d = l3d(pred, gt, cfg);
  LossTerms tmvc = lmvc(pred, rig, cfg, plans);

  LossValue out;
  out.l3d = t3d.value;
  out.lmvc = tmvc.value;
  out.total = t3d.value + cfg.lambda * tmvc.value;
  out.grad = std::move(t3d.grad);
  for (std::size_t k = 0; k < out.grad.size(); ++k) {
    for (std::size_t v = 0; v < out.grad[k].size(); ++v) {
      out.grad[k][v] += cfg.lambda * tmvc.grad[k][v];
    }
  }
  return out;
}

}  // namespace mvrec
