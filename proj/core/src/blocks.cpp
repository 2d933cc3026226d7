#include "gir/blocks.hpp"

#include <cmath>
#include <stdexcept>

namespace gir {

Tensor init_weight(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t(std::move(shape), 0.0, /*requires_grad=*/true);
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = rng.uniform(-bound, bound);
  return t;
}

Conv2dLayer::Conv2dLayer(std::size_t in, std::size_t out, std::size_t k,
                         Rng& rng) {
  weight = init_weight({out, in, k, k}, in * k * k, rng);
  bias = Tensor({out}, 0.0, /*requires_grad=*/true);
}

void Conv2dLayer::collect(const std::string& prefix,
                          std::vector<Parameter>& out) {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

AttentionWeights::AttentionWeights(std::size_t in, std::size_t dk,
                                   std::size_t dv, Rng& rng) {
  wq = init_weight({in, dk}, in, rng);
  wk = init_weight({in, dk}, in, rng);
  wv = init_weight({in, dv}, in, rng);
}

void AttentionWeights::collect(const std::string& prefix,
                               std::vector<Parameter>& out) {
  out.push_back({prefix + ".wq", wq});
  out.push_back({prefix + ".wk", wk});
  out.push_back({prefix + ".wv", wv});
}

Tensor cross_attention(const Tensor& x_chw, const Tensor& y_chw,
                       const AttentionWeights& w, std::size_t window) {
  if (x_chw.shape() != y_chw.shape())
    throw std::invalid_argument("cross_attention: shape mismatch " +
                                shape_str(x_chw.shape()) + " vs " +
                                shape_str(y_chw.shape()));
  const std::size_t h = x_chw.dim(1), wd = x_chw.dim(2);
  Tensor out = neighborhood_attention(chw_to_tokens(x_chw),
                                      chw_to_tokens(y_chw), w.wq, w.wk, w.wv,
                                      h, wd, window);
  return tokens_to_chw(out, h, wd);
}

Tensor self_attention(const Tensor& z_chw, const AttentionWeights& w,
                      std::size_t window) {
  return cross_attention(z_chw, z_chw, w, window);
}

GicaBlock::GicaBlock(std::size_t c, std::size_t win, Rng& rng)
    : channels(c), window(win) {
  ca = AttentionWeights(c, c, c, rng);
  sa = AttentionWeights(2 * c, c, c, rng);
  ln_gamma = Tensor({2 * c}, 1.0, /*requires_grad=*/true);
  ln_beta = Tensor({2 * c}, 0.0, /*requires_grad=*/true);
}

std::pair<Tensor, Tensor> GicaBlock::forward(const Tensor& p,
                                             const Tensor& i) const {
  if (p.shape() != i.shape())
    throw std::invalid_argument("gica: shape mismatch " +
                                shape_str(p.shape()) + " vs " +
                                shape_str(i.shape()));
  if (p.dim(0) != channels)
    throw std::invalid_argument("gica: expected " + std::to_string(channels) +
                                " channels, got " + std::to_string(p.dim(0)));
  const std::size_t h = p.dim(1), w = p.dim(2);
  Tensor tp = chw_to_tokens(p);
  Tensor ti = chw_to_tokens(i);
  Tensor cat = concat(tp, ti, 1);  // [N,2C]
  Tensor normed = layer_norm(cat, 1, ln_gamma, ln_beta);
  Tensor sa_out =
      neighborhood_attention(normed, normed, sa.wq, sa.wk, sa.wv, h, w, window);
  Tensor b_tok = add(sa_out, tp);
  Tensor ca_out =
      neighborhood_attention(tp, ti, ca.wq, ca.wk, ca.wv, h, w, window);
  Tensor q_tok = add(ca_out, b_tok);
  return {tokens_to_chw(q_tok, h, w), tokens_to_chw(b_tok, h, w)};
}

void GicaBlock::collect(const std::string& prefix,
                        std::vector<Parameter>& out) {
  ca.collect(prefix + ".ca", out);
  sa.collect(prefix + ".sa", out);
  out.push_back({prefix + ".ln.gamma", ln_gamma});
  out.push_back({prefix + ".ln.beta", ln_beta});
}

NafLikeBlock::NafLikeBlock(std::size_t c, Rng& rng) : channels(c) {
  ln_gamma = Tensor({c}, 1.0, /*requires_grad=*/true);
  ln_beta = Tensor({c}, 0.0, /*requires_grad=*/true);
  expand = Conv2dLayer(c, 2 * c, 3, rng);
  project = Conv2dLayer(c, c, 1, rng);
}

Tensor NafLikeBlock::forward(const Tensor& x) const {
  if (x.dim(0) != channels)
    throw std::invalid_argument("naf: expected " + std::to_string(channels) +
                                " channels, got " + std::to_string(x.dim(0)));
  Tensor z = layer_norm(x, 0, ln_gamma, ln_beta);
  z = gelu(expand.forward(z));  // [2C,H,W]
  Tensor lo = slice(z, 0, 0, channels);
  Tensor hi = slice(z, 0, channels, channels);
  Tensor gated = mul(lo, hi);
  return add(project.forward(gated), x);
}

void NafLikeBlock::collect(const std::string& prefix,
                           std::vector<Parameter>& out) {
  out.push_back({prefix + ".ln.gamma", ln_gamma});
  out.push_back({prefix + ".ln.beta", ln_beta});
  expand.collect(prefix + ".expand", out);
  project.collect(prefix + ".project", out);
}

CpaConcat::CpaConcat(std::size_t a, std::size_t b, Rng& rng) : c1(a), c2(b) {
  const std::size_t ct = a + b;
  chan_w = init_weight({ct, ct}, ct, rng);
  chan_b = Tensor({ct}, 0.0, /*requires_grad=*/true);
  spatial = Conv2dLayer(1, 1, 3, rng);
}

Tensor CpaConcat::forward(const Tensor& a, const Tensor& b) const {
  if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
    throw std::invalid_argument("cpa: spatial mismatch " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  const std::size_t ct = c1 + c2;
  const std::size_t h = a.dim(1), w = a.dim(2);
  Tensor z = concat(a, b, 0);  // [Ctot,H,W]
  Tensor cg = sigmoid(add(matmul(reshape(global_avg_pool(z), {1, ct}), chan_w),
                          reshape(chan_b, {1, ct})));
  z = channel_scale(z, reshape(cg, {ct}));
  Tensor sg = sigmoid(
      reshape(spatial.forward(reshape(channel_mean(z), {1, h, w})), {h, w}));
  return spatial_scale(z, sg);
}

void CpaConcat::collect(const std::string& prefix,
                        std::vector<Parameter>& out) {
  out.push_back({prefix + ".chan.weight", chan_w});
  out.push_back({prefix + ".chan.bias", chan_b});
  spatial.collect(prefix + ".spatial", out);
}

UpsampleBlock::UpsampleBlock(std::size_t c, Rng& rng) : channels(c) {
  if (c % 2 != 0)
    throw std::invalid_argument("upsample_block: channels must be even, got " +
                                std::to_string(c));
  conv = Conv2dLayer(c, c / 2, 3, rng);
}

Tensor UpsampleBlock::forward(const Tensor& x) const {
  if (x.dim(0) != channels)
    throw std::invalid_argument("upsample_block: expected " +
                                std::to_string(channels) + " channels, got " +
                                std::to_string(x.dim(0)));
  return gelu(conv.forward(nearest_upsample2(x)));
}

void UpsampleBlock::collect(const std::string& prefix,
                            std::vector<Parameter>& out) {
  conv.collect(prefix + ".conv", out);
}

}  // namespace gir
