#include "mvrec/model.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "json.hpp"
#include "model_detail.hpp"
#include "mvrec/marching_cubes.hpp"
#include "mvrec/rng.hpp"

namespace mvrec {

using nlohmann::json;

void ArchDescriptor::validate() const {
  if (img < 16 || img % 8 != 0) {
    throw std::invalid_argument("ArchDescriptor: img must be >= 16 and divide by 8");
  }
  if (res * 2 != img) {
    throw std::invalid_argument("ArchDescriptor: res must equal img / 2");
  }
  if (in_channels != 1 && in_channels != 2) {
    throw std::invalid_argument("ArchDescriptor: in_channels must be 1 or 2");
  }
  if (c1 < 1 || c2 < 1 || c3 < 1) {
    throw std::invalid_argument("ArchDescriptor: channel widths must be >= 1");
  }
  if (k_stacks < 1) {
    throw std::invalid_argument("ArchDescriptor: k_stacks must be >= 1");
  }
}

std::string ArchDescriptor::to_json() const {
  const json j{{"format", "mvrec-predictor"}, {"version", 1},
               {"img", img},                 {"res", res},
               {"in_channels", in_channels}, {"c1", c1},
               {"c2", c2},                   {"c3", c3},
               {"k_stacks", k_stacks}};
  return j.dump();
}

ArchDescriptor ArchDescriptor::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("architecture descriptor parse error: ") +
                             e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "mvrec-predictor" ||
        j.at("version").get<int>() != 1) {
      throw std::runtime_error("unsupported checkpoint format/version");
    }
    ArchDescriptor a;
    a.img = j.at("img").get<int>();
    a.res = j.at("res").get<int>();
    a.in_channels = j.at("in_channels").get<int>();
    a.c1 = j.at("c1").get<int>();
    a.c2 = j.at("c2").get<int>();
    a.c3 = j.at("c3").get<int>();
    a.k_stacks = j.at("k_stacks").get<int>();
    a.validate();
    return a;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed architecture descriptor: ") +
                             e.what());
  }
}

namespace detail {

Layout make_layout(const ArchDescriptor& a) {
  a.validate();
  Layout l;
  std::size_t off = 0;
  const auto alloc = [&off](std::size_t n) {
    const std::size_t o = off;
    off += n;
    return o;
  };
  l.enc1_w = alloc(std::size_t(a.c1) * a.in_channels * 9);
  l.enc1_b = alloc(a.c1);
  l.enc2_w = alloc(std::size_t(a.c2) * a.c1 * 9);
  l.enc2_b = alloc(a.c2);
  l.enc3_w = alloc(std::size_t(a.c3) * a.c2 * 9);
  l.enc3_b = alloc(a.c3);
  l.dec1_w = alloc(std::size_t(a.c2) * a.c3 * 9);
  l.dec1_b = alloc(a.c2);
  l.dec2_w = alloc(std::size_t(a.c1) * a.c2 * 9);
  l.dec2_b = alloc(a.c1);
  for (int s = 1; s < a.k_stacks; ++s) {
    l.fuse_w.push_back(alloc(std::size_t(a.c1) * (a.res + a.c1) * 9));
    l.fuse_b.push_back(alloc(a.c1));
  }
  for (int s = 0; s < a.k_stacks; ++s) {
    l.head_w.push_back(alloc(std::size_t(a.res) * a.c1));
    l.head_b.push_back(alloc(a.res));
  }
  l.total = off;
  return l;
}

namespace {

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void conv3x3(const double* in, int ic, int ih, int iw, const double* w,
             const double* b, int oc, int stride, double* out) {
  const int oh = ih / stride;
  const int ow = iw / stride;
  for (int co = 0; co < oc; ++co) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = b[co];
        for (int ci = 0; ci < ic; ++ci) {
          const double* wp = w + (std::size_t(co) * ic + ci) * 9;
          const double* ip = in + std::size_t(ci) * ih * iw;
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = oy * stride + ky - 1;
            if (iy < 0 || iy >= ih) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = ox * stride + kx - 1;
              if (ix < 0 || ix >= iw) continue;
              acc += wp[ky * 3 + kx] * ip[std::size_t(iy) * iw + ix];
            }
          }
        }
        out[(std::size_t(co) * oh + oy) * ow + ox] = acc;
      }
    }
  }
}

// Adjoint of conv3x3: accumulates weight/bias gradients; accumulates input
// gradient when gin is non-null (gin must be pre-zeroed by the caller).
void conv3x3_back(const double* in, int ic, int ih, int iw, const double* w,
                  int oc, int stride, const double* gout, double* gw,
                  double* gb, double* gin) {
  const int oh = ih / stride;
  const int ow = iw / stride;
  for (int co = 0; co < oc; ++co) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const double g = gout[(std::size_t(co) * oh + oy) * ow + ox];
        gb[co] += g;
        for (int ci = 0; ci < ic; ++ci) {
          const double* wp = w + (std::size_t(co) * ic + ci) * 9;
          double* gwp = gw + (std::size_t(co) * ic + ci) * 9;
          const double* ip = in + std::size_t(ci) * ih * iw;
          double* gip = gin ? gin + std::size_t(ci) * ih * iw : nullptr;
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = oy * stride + ky - 1;
            if (iy < 0 || iy >= ih) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = ox * stride + kx - 1;
              if (ix < 0 || ix >= iw) continue;
              gwp[ky * 3 + kx] += g * ip[std::size_t(iy) * iw + ix];
              if (gip) gip[std::size_t(iy) * iw + ix] += g * wp[ky * 3 + kx];
            }
          }
        }
      }
    }
  }
}

void conv1x1(const double* in, int ic, int n, const double* w, const double* b,
             int oc, double* out) {
  for (int co = 0; co < oc; ++co) {
    for (int p = 0; p < n; ++p) out[std::size_t(co) * n + p] = b[co];
    for (int ci = 0; ci < ic; ++ci) {
      const double wv = w[std::size_t(co) * ic + ci];
      const double* ip = in + std::size_t(ci) * n;
      double* op = out + std::size_t(co) * n;
      for (int p = 0; p < n; ++p) op[p] += wv * ip[p];
    }
  }
}

void conv1x1_back(const double* in, int ic, int n, const double* w, int oc,
                  const double* gout, double* gw, double* gb, double* gin) {
  for (int co = 0; co < oc; ++co) {
    const double* gp = gout + std::size_t(co) * n;
    double acc_b = 0;
    for (int p = 0; p < n; ++p) acc_b += gp[p];
    gb[co] += acc_b;
    for (int ci = 0; ci < ic; ++ci) {
      const double* ip = in + std::size_t(ci) * n;
      double acc_w = 0;
      for (int p = 0; p < n; ++p) acc_w += gp[p] * ip[p];
      gw[std::size_t(co) * ic + ci] += acc_w;
      if (gin) {
        const double wv = w[std::size_t(co) * ic + ci];
        double* gip = gin + std::size_t(ci) * n;
        for (int p = 0; p < n; ++p) gip[p] += wv * gp[p];
      }
    }
  }
}

void upsample2(const double* in, int c, int ih, int iw, double* out) {
  const int oh = ih * 2, ow = iw * 2;
  for (int ci = 0; ci < c; ++ci) {
    const double* ip = in + std::size_t(ci) * ih * iw;
    double* op = out + std::size_t(ci) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        op[std::size_t(y) * ow + x] = ip[std::size_t(y / 2) * iw + x / 2];
      }
    }
  }
}

void upsample2_back(const double* gout, int c, int ih, int iw, double* gin) {
  const int oh = ih * 2, ow = iw * 2;
  for (int ci = 0; ci < c; ++ci) {
    const double* gp = gout + std::size_t(ci) * oh * ow;
    double* gip = gin + std::size_t(ci) * ih * iw;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        gip[std::size_t(y / 2) * iw + x / 2] += gp[std::size_t(y) * ow + x];
      }
    }
  }
}

void tanh_inplace(std::vector<double>& v) {
  for (double& x : v) x = std::tanh(x);
}

// g *= (1 - a^2), the tanh derivative expressed via the stored activation.
void tanh_back(const std::vector<double>& a, std::vector<double>& g) {
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - a[i] * a[i];
}

}  // namespace

Trace run_forward(const PredictorParams& params,
                  const std::vector<double>& planes) {
  const ArchDescriptor& a = params.arch;
  a.validate();
  const Layout l = make_layout(a);
  if (params.values.size() != l.total) {
    throw std::invalid_argument("forward: parameter vector size mismatch");
  }
  if (planes.size() != std::size_t(a.in_channels) * a.img * a.img) {
    throw std::invalid_argument("forward: input plane size mismatch");
  }
  const double* p = params.values.data();
  const int img = a.img;
  const int h2 = img / 2, h4 = img / 4, h8 = img / 8;
  const int res = a.res;
  const std::size_t n_vox = std::size_t(res) * res * res;

  Trace t;
  t.x = planes;
  t.a1.resize(std::size_t(a.c1) * h2 * h2);
  conv3x3(t.x.data(), a.in_channels, img, img, p + l.enc1_w, p + l.enc1_b,
          a.c1, 2, t.a1.data());
  tanh_inplace(t.a1);

  t.a2.resize(std::size_t(a.c2) * h4 * h4);
  conv3x3(t.a1.data(), a.c1, h2, h2, p + l.enc2_w, p + l.enc2_b, a.c2, 2,
          t.a2.data());
  tanh_inplace(t.a2);

  t.a3.resize(std::size_t(a.c3) * h8 * h8);
  conv3x3(t.a2.data(), a.c2, h4, h4, p + l.enc3_w, p + l.enc3_b, a.c3, 2,
          t.a3.data());
  tanh_inplace(t.a3);

  t.up3.resize(std::size_t(a.c3) * h4 * h4);
  upsample2(t.a3.data(), a.c3, h8, h8, t.up3.data());

  t.d1.resize(std::size_t(a.c2) * h4 * h4);
  conv3x3(t.up3.data(), a.c3, h4, h4, p + l.dec1_w, p + l.dec1_b, a.c2, 1,
          t.d1.data());
  for (std::size_t i = 0; i < t.d1.size(); ++i) t.d1[i] += t.a2[i];
  tanh_inplace(t.d1);

  t.up1.resize(std::size_t(a.c2) * h2 * h2);
  upsample2(t.d1.data(), a.c2, h4, h4, t.up1.data());

  t.d2.resize(std::size_t(a.c1) * h2 * h2);
  conv3x3(t.up1.data(), a.c2, h2, h2, p + l.dec2_w, p + l.dec2_b, a.c1, 1,
          t.d2.data());
  for (std::size_t i = 0; i < t.d2.size(); ++i) t.d2[i] += t.a1[i];
  tanh_inplace(t.d2);

  const int n_px = res * res;
  t.cat.resize(a.k_stacks - 1);
  t.fuse.resize(a.k_stacks - 1);
  t.logits.resize(a.k_stacks);
  t.probs.resize(a.k_stacks);
  for (int s = 0; s < a.k_stacks; ++s) {
    const double* head_in;
    if (s == 0) {
      head_in = t.d2.data();
    } else {
      auto& cat = t.cat[s - 1];
      cat.resize(std::size_t(res + a.c1) * n_px);
      std::copy(t.logits[s - 1].begin(), t.logits[s - 1].end(), cat.begin());
      std::copy(t.d2.begin(), t.d2.end(), cat.begin() + std::size_t(res) * n_px);
      auto& f = t.fuse[s - 1];
      f.resize(std::size_t(a.c1) * n_px);
      conv3x3(cat.data(), res + a.c1, res, res, p + l.fuse_w[s - 1],
              p + l.fuse_b[s - 1], a.c1, 1, f.data());
      tanh_inplace(f);
      head_in = f.data();
    }
    auto& logit = t.logits[s];
    logit.resize(n_vox);
    conv1x1(head_in, a.c1, n_px, p + l.head_w[s], p + l.head_b[s], res,
            logit.data());
    auto& prob = t.probs[s];
    prob.resize(n_vox);
    for (std::size_t i = 0; i < n_vox; ++i) prob[i] = sigmoid(logit[i]);
  }
  return t;
}

void run_backward(const PredictorParams& params, const Trace& t,
                  const std::vector<std::vector<double>>& gprob,
                  double* grad) {
  const ArchDescriptor& a = params.arch;
  const Layout l = make_layout(a);
  const double* p = params.values.data();
  const int img = a.img;
  const int h2 = img / 2, h4 = img / 4, h8 = img / 8;
  const int res = a.res;
  const int n_px = res * res;

  std::vector<double> g_d2(t.d2.size(), 0.0);
  std::vector<double> g_logit_extra;  // fuse-path gradient into stack s-1

  for (int s = a.k_stacks - 1; s >= 0; --s) {
    // d(loss)/d(logit) via the sigmoid derivative, plus any gradient fed
    // back from the next stack's concatenated input.
    std::vector<double> g_logit(t.logits[s].size());
    for (std::size_t i = 0; i < g_logit.size(); ++i) {
      const double pv = t.probs[s][i];
      g_logit[i] = gprob[s][i] * pv * (1.0 - pv);
    }
    if (!g_logit_extra.empty()) {
      for (std::size_t i = 0; i < g_logit.size(); ++i) {
        g_logit[i] += g_logit_extra[i];
      }
    }

    if (s == 0) {
      conv1x1_back(t.d2.data(), a.c1, n_px, p + l.head_w[s], res,
                   g_logit.data(), grad + l.head_w[s], grad + l.head_b[s],
                   g_d2.data());
      g_logit_extra.clear();
    } else {
      std::vector<double> g_f(t.fuse[s - 1].size(), 0.0);
      conv1x1_back(t.fuse[s - 1].data(), a.c1, n_px, p + l.head_w[s], res,
                   g_logit.data(), grad + l.head_w[s], grad + l.head_b[s],
                   g_f.data());
      tanh_back(t.fuse[s - 1], g_f);
      std::vector<double> g_cat(t.cat[s - 1].size(), 0.0);
      conv3x3_back(t.cat[s - 1].data(), res + a.c1, res, res,
                   p + l.fuse_w[s - 1], a.c1, 1, g_f.data(),
                   grad + l.fuse_w[s - 1], grad + l.fuse_b[s - 1],
                   g_cat.data());
      g_logit_extra.assign(g_cat.begin(), g_cat.begin() + std::size_t(res) * n_px);
      const double* g_feat = g_cat.data() + std::size_t(res) * n_px;
      for (std::size_t i = 0; i < g_d2.size(); ++i) g_d2[i] += g_feat[i];
    }
  }

  tanh_back(t.d2, g_d2);  // gradient at z2 + a1
  std::vector<double> g_up1(t.up1.size(), 0.0);
  conv3x3_back(t.up1.data(), a.c2, h2, h2, p + l.dec2_w, a.c1, 1, g_d2.data(),
               grad + l.dec2_w, grad + l.dec2_b, g_up1.data());
  std::vector<double> g_a1 = g_d2;  // skip-add branch

  std::vector<double> g_d1(t.d1.size(), 0.0);
  upsample2_back(g_up1.data(), a.c2, h4, h4, g_d1.data());
  tanh_back(t.d1, g_d1);  // gradient at z1 + a2
  std::vector<double> g_up3(t.up3.size(), 0.0);
  conv3x3_back(t.up3.data(), a.c3, h4, h4, p + l.dec1_w, a.c2, 1, g_d1.data(),
               grad + l.dec1_w, grad + l.dec1_b, g_up3.data());
  std::vector<double> g_a2 = g_d1;  // skip-add branch

  std::vector<double> g_a3(t.a3.size(), 0.0);
  upsample2_back(g_up3.data(), a.c3, h8, h8, g_a3.data());
  tanh_back(t.a3, g_a3);
  conv3x3_back(t.a2.data(), a.c2, h4, h4, p + l.enc3_w, a.c3, 2, g_a3.data(),
               grad + l.enc3_w, grad + l.enc3_b, g_a2.data());
  tanh_back(t.a2, g_a2);
  conv3x3_back(t.a1.data(), a.c1, h2, h2, p + l.enc2_w, a.c2, 2, g_a2.data(),
               grad + l.enc2_w, grad + l.enc2_b, g_a1.data());
  tanh_back(t.a1, g_a1);
  conv3x3_back(t.x.data(), a.in_channels, img, img, p + l.enc1_w, a.c1, 2,
               g_a1.data(), grad + l.enc1_w, grad + l.enc1_b, nullptr);
}

}  // namespace detail

std::size_t ArchDescriptor::param_count() const {
  return detail::make_layout(*this).total;
}

PredictorParams init_params(const ArchDescriptor& arch, std::uint64_t seed) {
  const detail::Layout l = detail::make_layout(arch);
  PredictorParams params;
  params.arch = arch;
  params.values.assign(l.total, 0.0);

  Rng rng(seed);
  const auto fill = [&](std::size_t w_off, std::size_t n, int fan_in) {
    const double bound = 1.0 / std::sqrt(double(fan_in));
    for (std::size_t i = 0; i < n; ++i) {
      params.values[w_off + i] = rng.uniform(-bound, bound);
    }
  };
  fill(l.enc1_w, std::size_t(arch.c1) * arch.in_channels * 9,
       arch.in_channels * 9);
  fill(l.enc2_w, std::size_t(arch.c2) * arch.c1 * 9, arch.c1 * 9);
  fill(l.enc3_w, std::size_t(arch.c3) * arch.c2 * 9, arch.c2 * 9);
  fill(l.dec1_w, std::size_t(arch.c2) * arch.c3 * 9, arch.c3 * 9);
  fill(l.dec2_w, std::size_t(arch.c1) * arch.c2 * 9, arch.c2 * 9);
  for (int s = 1; s < arch.k_stacks; ++s) {
    fill(l.fuse_w[s - 1], std::size_t(arch.c1) * (arch.res + arch.c1) * 9,
         (arch.res + arch.c1) * 9);
  }
  for (int s = 0; s < arch.k_stacks; ++s) {
    fill(l.head_w[s], std::size_t(arch.res) * arch.c1, arch.c1);
  }
  return params;
}

std::vector<double> input_planes(const ArchDescriptor& arch, const ImageU8& sil,
                                 const ImageU16& depth) {
  arch.validate();
  if (sil.width != arch.img || sil.height != arch.img) {
    throw std::invalid_argument("input_planes: silhouette size mismatch");
  }
  const std::size_t n = std::size_t(arch.img) * arch.img;
  std::vector<double> planes(std::size_t(arch.in_channels) * n);
  for (std::size_t i = 0; i < n; ++i) {
    planes[i] = sil.pixels[i] > 0 ? 1.0 : 0.0;
  }
  if (arch.in_channels == 2) {
    if (depth.width != arch.img || depth.height != arch.img) {
      throw std::invalid_argument("input_planes: depth size mismatch");
    }
    for (std::size_t i = 0; i < n; ++i) {
      planes[n + i] = depth.pixels[i] / 65535.0;
    }
  }
  return planes;
}

std::vector<VoxelGrid> forward(const PredictorParams& params,
                               const std::vector<double>& planes) {
  const detail::Trace t = detail::run_forward(params, planes);
  std::vector<VoxelGrid> out;
  out.reserve(t.probs.size());
  for (const auto& prob : t.probs) {
    VoxelGrid g(params.arch.res, 1.0);
    for (std::size_t i = 0; i < prob.size(); ++i) g.values[i] = float(prob[i]);
    out.push_back(std::move(g));
  }
  return out;
}

SceneGradient backward(const PredictorParams& params,
                       const std::vector<std::vector<double>>& view_planes,
                       const std::vector<VoxelGrid>& gts, const CameraRig& rig,
                       const LossConfig& cfg, const MvcPlans* plans) {
  cfg.validate();
  const ArchDescriptor& a = params.arch;
  const std::size_t n_views = view_planes.size();
  if (n_views == 0 || gts.size() != n_views || rig.size() != n_views) {
    throw std::invalid_argument("backward: views, gts, and rig sizes differ");
  }
  for (const VoxelGrid& g : gts) {
    if (g.res != a.res) {
      throw std::invalid_argument("backward: gt resolution differs from arch");
    }
  }
  const std::size_t n_vox = std::size_t(a.res) * a.res * a.res;
  const int k = a.k_stacks;

  std::vector<detail::Trace> traces;
  traces.reserve(n_views);
  for (const auto& planes : view_planes) {
    traces.push_back(detail::run_forward(params, planes));
  }

  std::unique_ptr<MvcPlans> local_plans;
  if (cfg.lambda > 0 && !plans) {
    local_plans = std::make_unique<MvcPlans>(rig, a.res, 1.0);
    plans = local_plans.get();
  }

  const double gamma = cfg.gamma ? *cfg.gamma : detail::balanced_gamma(gts);

  // d(total)/d(prob) per (stack, view), with the lambda weighting folded in.
  std::vector<std::vector<std::vector<double>>> gprob(n_views);
  for (auto& per_view : gprob) {
    per_view.resize(k);
    for (auto& g : per_view) g.assign(n_vox, 0.0);
  }

  SceneGradient out;
  for (std::size_t i = 0; i < n_views; ++i) {
    for (int s = 0; s < k; ++s) {
      out.loss.l3d += detail::wbce_grid<double>(
          traces[i].probs[s].data(), gts[i].values.data(), n_vox, gamma,
          cfg.eps, gprob[i][s].data(), 1.0);
    }
  }
  if (cfg.lambda > 0 && n_views > 1) {
    std::vector<double> scratch(n_vox);
    for (int s = 0; s < k; ++s) {
      for (std::size_t i = 0; i < n_views; ++i) {
        for (std::size_t l = 0; l < n_views; ++l) {
          if (l == i) continue;
          out.loss.lmvc += detail::mvc_pair<double>(
              traces[i].probs[s].data(), traces[l].probs[s].data(),
              plans->plan(i, l), scratch.data(), gprob[i][s].data(),
              gprob[l][s].data(), cfg.lambda);
        }
      }
    }
  }
  out.loss.total = out.loss.l3d + cfg.lambda * out.loss.lmvc;

  out.grad.assign(params.values.size(), 0.0);
  for (std::size_t i = 0; i < n_views; ++i) {
    detail::run_backward(params, traces[i], gprob[i], out.grad.data());
  }
  return out;
}

void adam_step(std::vector<double>& params, const std::vector<double>& grad,
               AdamState& state, double lr) {
  if (grad.size() != params.size()) {
    throw std::invalid_argument("adam_step: gradient size mismatch");
  }
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) {
    throw std::invalid_argument("adam_step: state size mismatch");
  }
  for (double g : grad) {
    if (!std::isfinite(g)) {
      throw std::runtime_error("adam_step: non-finite gradient entry");
    }
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    if (!std::isfinite(params[i])) {
      throw std::runtime_error("adam_step: parameter became non-finite");
    }
  }
}

TriangleMesh reconstruct(const PredictorParams& params,
                         const std::vector<double>& planes, double iso) {
  const std::vector<VoxelGrid> grids = forward(params, planes);
  return marching_cubes(grids.back(), iso);
}

void save_checkpoint(const std::filesystem::path& path,
                     const PredictorParams& params) {
  std::vector<float> values(params.values.begin(), params.values.end());
  write_prm(path, params.arch.to_json(), values);
}

PredictorParams load_checkpoint(const std::filesystem::path& path) {
  const PrmData data = read_prm(path);
  PredictorParams params;
  try {
    params.arch = ArchDescriptor::from_json(data.descriptor);
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  if (data.params.size() != params.arch.param_count()) {
    throw std::runtime_error(path.string() +
                             ": parameter count does not match architecture");
  }
  params.values.assign(data.params.begin(), data.params.end());
  return params;
}

}  // namespace mvrec
