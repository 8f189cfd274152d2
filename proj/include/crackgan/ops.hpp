#pragma once

#include <vector>

#include "crackgan/autograd.hpp"

// Differentiable tensor operations on NCHW batches. Every op validates its
// input shapes and throws ShapeError with the offending dimensions.
namespace crackgan::ops {

// Stride-1 convolution with symmetric zero padding.
// x: B×Cin×H×W, weight: Cout×Cin×K×K, bias: Cout.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int padding);

struct BatchNormOptions {
  bool training = true;
  double momentum = 0.1;  // running = (1 - momentum) * running + momentum * batch
  double eps = 1e-5;
};

// Per-channel batch normalisation. In training mode the running statistics
// (plain value tensors, not differentiated) are updated in place.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean, Tensor& running_var,
               const BatchNormOptions& options);

Var relu(const Var& x);
Var leaky_relu(const Var& x, double slope);
Var sigmoid(const Var& x);

// 2×2 max pooling with stride 2; odd trailing rows/cols are dropped.
Var max_pool2(const Var& x);

// B×C×H×W -> B×C×1×1.
Var global_avg_pool(const Var& x);
Var global_max_pool(const Var& x);

// B×C×H×W -> B×1×H×W.
Var channel_mean(const Var& x);
Var channel_max(const Var& x);

Var concat_channels(const std::vector<Var>& parts);

// Elementwise product. `b` may match `a` or broadcast as B×C×1×1 or B×1×H×W.
Var mul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var one_minus(const Var& x);

Var upsample_nearest2(const Var& x);

// Bilinear resize with half-pixel centres (align_corners = false).
Var resize_bilinear(const Var& x, int out_h, int out_w);

// x: B×F, weight: O×F, bias: O -> B×O.
Var linear(const Var& x, const Var& weight, const Var& bias);

Var reshape(const Var& x, Shape shape);

Var pad2d(const Var& x, int top, int bottom, int left, int right);
Var crop2d(const Var& x, int top, int left, int height, int width);

struct AttentionWeights {
  Var wq, bq, wk, bk, wv, bv, wo, bo;  // projections C×C (input-major), biases C
};

// Windowed self-attention: the map is split into non-overlapping
// window×window blocks and each block attends over its own pixels:
//   out = softmax(Q Kᵀ / sqrt(C)) V Wo + bo,  Q = X Wq + bq, ...
// H and W must be multiples of `window`. When `attention_maps` is non-null it
// receives one T×T row-stochastic matrix per block (T = window²), ordered by
// batch, block row, block column.
Var window_attention(const Var& x, const AttentionWeights& weights, int window,
                     std::vector<Tensor>* attention_maps = nullptr);

}  // namespace crackgan::ops
