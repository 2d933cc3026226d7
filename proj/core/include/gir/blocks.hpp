#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gir/ops.hpp"
#include "gir/tensor.hpp"

namespace gir {

// Weight init: uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
Tensor init_weight(Shape shape, std::size_t fan_in, Rng& rng);

struct Conv2dLayer {
  Tensor weight;  // [out,in,k,k]
  Tensor bias;    // [out]
  PaddingMode padding = PaddingMode::Replicate;

  Conv2dLayer() = default;
  Conv2dLayer(std::size_t in, std::size_t out, std::size_t k, Rng& rng);
  Tensor forward(const Tensor& x) const {
    return conv2d(x, weight, bias, padding);
  }
  void collect(const std::string& prefix, std::vector<Parameter>& out);
};

/// Query/key/value projections. wq,wk share output width; wv sets the
/// block's output width.
struct AttentionWeights {
  Tensor wq, wk, wv;

  AttentionWeights() = default;
  AttentionWeights(std::size_t in, std::size_t dk, std::size_t dv, Rng& rng);
  void collect(const std::string& prefix, std::vector<Parameter>& out);
};

/// Cross-attention over pixel tokens: CA(x, y) with queries from x.
Tensor cross_attention(const Tensor& x_chw, const Tensor& y_chw,
                       const AttentionWeights& w, std::size_t window);
/// Self-attention: CA(z, z).
Tensor self_attention(const Tensor& z_chw, const AttentionWeights& w,
                      std::size_t window);

/// Fusion block pairing cross-attention with a learned residual:
///   b = SA(LN(Cat[p, i])) + p
///   q = CA(p, i) + b
/// All attention is windowed over pixel neighborhoods; projections keep the
/// channel count so the residual additions need no extra maps.
struct GicaBlock {
  std::size_t channels = 0;
  std::size_t window = 7;
  AttentionWeights ca;       // C -> C
  AttentionWeights sa;       // 2C -> C
  Tensor ln_gamma, ln_beta;  // [2C]

  GicaBlock() = default;
  GicaBlock(std::size_t channels, std::size_t window, Rng& rng);
  // returns (q, b), both [C,H,W]
  std::pair<Tensor, Tensor> forward(const Tensor& p, const Tensor& i) const;
  void collect(const std::string& prefix, std::vector<Parameter>& out);
};

/// Shape-preserving residual block: LN -> 3x3 conv (C->2C) -> GELU ->
/// channel gate (multiply halves) -> 1x1 conv -> skip.
struct NafLikeBlock {
  std::size_t channels = 0;
  Tensor ln_gamma, ln_beta;  // [C]
  Conv2dLayer expand;        // C -> 2C, 3x3
  Conv2dLayer project;       // C -> C, 1x1

  NafLikeBlock() = default;
  NafLikeBlock(std::size_t channels, Rng& rng);
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<Parameter>& out);
};

/// Channel concat followed by learned sigmoid channel and spatial gates.
struct CpaConcat {
  std::size_t c1 = 0, c2 = 0;
  Tensor chan_w, chan_b;  // [Ctot,Ctot], [Ctot]
  Conv2dLayer spatial;    // 1 -> 1, 3x3

  CpaConcat() = default;
  CpaConcat(std::size_t c1, std::size_t c2, Rng& rng);
  Tensor forward(const Tensor& a, const Tensor& b) const;
  void collect(const std::string& prefix, std::vector<Parameter>& out);
};

/// Nearest x2 upsample then 3x3 conv halving channels, GELU.
struct UpsampleBlock {
  std::size_t channels = 0;  // input channels, must be even
  Conv2dLayer conv;          // C -> C/2, 3x3

  UpsampleBlock() = default;
  UpsampleBlock(std::size_t channels, Rng& rng);
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<Parameter>& out);
};

}  // namespace gir
