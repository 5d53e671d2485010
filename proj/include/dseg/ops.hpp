#pragma once

// Differentiable tensor ops. All ops accept meta inputs and return meta
// outputs with the correct shape (conv ops still report their MACs).

#include "dseg/autograd.hpp"

namespace dseg::ops {

/// Weight [cout, cin, k, k]; optional bias [1, cout, 1, 1]. Square kernels only.
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad);

/// Running statistics owned by a batch-norm layer.
template <class T>
struct BatchNormStats {
    Tensor<T> mean;
    Tensor<T> var;
};

/// Training mode normalizes with batch statistics and updates `stats`;
/// eval mode uses `stats`. `fuse_relu` applies max(0, .) to the output.
template <class T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                  BatchNormStats<T>& stats, bool training, T momentum, T eps, bool fuse_relu = false);

template <class T>
Var<T> relu(const Var<T>& x);
template <class T>
Var<T> sigmoid(const Var<T>& x);
template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b);
template <class T>
Var<T> scale(const Var<T>& x, T s);

/// Bilinear resampling, half-pixel centers (align_corners = false).
template <class T>
Var<T> resize_bilinear(const Var<T>& x, int out_h, int out_w);

/// 3x3 / stride 2 / pad 1 max pooling.
template <class T>
Var<T> max_pool3x3s2(const Var<T>& x);
/// 2x2 / stride 2 average pooling.
template <class T>
Var<T> avg_pool2x2(const Var<T>& x);

template <class T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b);

/// Mean over all elements of -[g log s(x) + (1-g) log(1-s(x))], computed on logits.
template <class T>
Var<T> bce_with_logits(const Var<T>& logits, const Tensor<T>& target);

/// Per-sample 1 - sum(f g) / sum(f + g - f g) with f = sigmoid(logits), averaged
/// over the batch. A sample whose union is zero contributes 0.
template <class T>
Var<T> iou_with_logits(const Var<T>& logits, const Tensor<T>& target);

/// Pure value helpers shared by the ops and the pipeline.
template <class T>
Tensor<T> resize_bilinear_value(const Tensor<T>& x, int out_h, int out_w);
template <class T>
T sigmoid_value(T x);

}  // namespace dseg::ops
