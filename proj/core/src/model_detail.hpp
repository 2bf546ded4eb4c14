#pragma once

// Private pieces of the predictor: the flat parameter layout and the
// forward trace/backward pass shared by model.cpp and train.cpp.

#include <vector>

#include "mvrec/model.hpp"

namespace mvrec::detail {

struct Layout {
  std::size_t enc1_w, enc1_b;
  std::size_t enc2_w, enc2_b;
  std::size_t enc3_w, enc3_b;
  std::size_t dec1_w, dec1_b;
  std::size_t dec2_w, dec2_b;
  std::vector<std::size_t> fuse_w, fuse_b;  // stacks 2..K
  std::vector<std::size_t> head_w, head_b;  // stacks 1..K
  std::size_t total = 0;
};

Layout make_layout(const ArchDescriptor& a);

// Post-activation buffers kept by the forward pass; everything the
// backward pass needs and nothing else.
struct Trace {
  std::vector<double> x;              // input planes
  std::vector<double> a1, a2, a3;     // encoder levels (post-tanh)
  std::vector<double> up3, d1;        // decoder level 1
  std::vector<double> up1, d2;        // decoder level 2 (== head features)
  std::vector<std::vector<double>> cat;     // per stack >= 2: concat input
  std::vector<std::vector<double>> fuse;    // per stack >= 2: fused features
  std::vector<std::vector<double>> logits;  // per stack
  std::vector<std::vector<double>> probs;   // per stack (sigmoid of logits)
};

Trace run_forward(const PredictorParams& params,
                  const std::vector<double>& planes);

// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(prob) per
// stack (gprob[s], res^3 each).
void run_backward(const PredictorParams& params, const Trace& t,
                  const std::vector<std::vector<double>>& gprob, double* grad);

}  // namespace mvrec::detail
