#pragma once

#include <span>
#include <vector>

#include "gir/tensor.hpp"

namespace gir {

enum class PaddingMode { Zero, Replicate };

// Elementwise. Shapes must match exactly; the scalar overloads are the only
// supported broadcast.
Tensor add(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, double s);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double s);

Tensor abs_val(const Tensor& a);  // subgradient 0 at 0
Tensor sigmoid(const Tensor& a);
Tensor gelu(const Tensor& a);  // exact erf form

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n]
Tensor transpose(const Tensor& a);                // 2-D

Tensor sum(const Tensor& a);   // -> [1]
Tensor mean(const Tensor& a);  // -> [1]

Tensor softmax(const Tensor& a, std::size_t axis);
// Normalizes every slice along `axis` to mean 0 / variance 1, then applies
// the affine pair gamma,beta (shape [dim(axis)]).
Tensor layer_norm(const Tensor& a, std::size_t axis, const Tensor& gamma,
                  const Tensor& beta);

Tensor reshape(const Tensor& a, Shape shape);  // same element count
Tensor concat(std::span<const Tensor> ts, std::size_t axis);
Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start,
             std::size_t len);

// Image ops on [C,H,W] tensors. Stride 1, odd kernel, size-preserving padding.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              PaddingMode padding = PaddingMode::Replicate);
Tensor avg_pool2(const Tensor& a);          // odd extents replicate-padded
Tensor nearest_upsample2(const Tensor& a);  // [C,H,W] -> [C,2H,2W]

Tensor chw_to_tokens(const Tensor& a);  // [C,H,W] -> [H*W,C]
Tensor tokens_to_chw(const Tensor& a, std::size_t h, std::size_t w);

Tensor global_avg_pool(const Tensor& a);  // [C,H,W] -> [C]
Tensor channel_mean(const Tensor& a);     // [C,H,W] -> [H,W]
Tensor channel_scale(const Tensor& a, const Tensor& s);  // per-channel gate
Tensor spatial_scale(const Tensor& a, const Tensor& m);  // per-pixel gate

/// Windowed scaled-dot-product attention over pixel tokens. x, y are [N,C]
/// with N = h*w in row-major pixel order; each query attends to the keys
/// inside the (window x window) neighborhood around its pixel, clamped at
/// image borders. A window covering the whole image is global attention.
/// Logits are Q K^T / sqrt(d) with d the q/k projection width.
Tensor neighborhood_attention(const Tensor& x, const Tensor& y,
                              const Tensor& wq, const Tensor& wk,
                              const Tensor& wv, std::size_t h, std::size_t w,
                              std::size_t window);

/// Dense row-stochastic attention matrix for the same computation; no grad
/// recording. Disallowed pairs hold exact zeros.
Tensor attention_matrix(const Tensor& x, const Tensor& y, const Tensor& wq,
                        const Tensor& wk, std::size_t h, std::size_t w,
                        std::size_t window);

// Internal plumbing for fused ops; records the backward closure only when a
// parent requires grad.
namespace detail {
Tensor make_op(Shape shape, std::vector<double> data,
               std::vector<Tensor> parents,
               std::function<void(Node&)> backward_fn);
}

}  // namespace gir
