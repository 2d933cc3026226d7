#include "gir/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "gir/data.hpp"
#include "gir/ops.hpp"

namespace gir {

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape())
    throw std::invalid_argument("l1_loss: shape mismatch " +
                                shape_str(pred.shape()) + " vs " +
                                shape_str(target.shape()));
  return mean(abs_val(sub(pred, target)));
}

Tensor high_frequency(const Tensor& img) {
  const bool chw = img.rank() == 3;
  if (!chw && img.rank() != 2)
    throw std::invalid_argument("high_frequency: expects [H,W] or [C,H,W]");
  Tensor in = img.detach();
  Tensor low = gaussian_blur(in, 1.0, 2);  // 5x5 kernel
  const std::size_t c = chw ? img.dim(0) : 1;
  const std::size_t h = chw ? img.dim(1) : img.dim(0);
  const std::size_t w = chw ? img.dim(2) : img.dim(1);
  Tensor out({h, w}, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t p = 0; p < h * w; ++p)
      out[p] += std::fabs(in[ch * h * w + p] - low[ch * h * w + p]);
  return out;
}

FocusMasks focus_masks(const Tensor& i1, const Tensor& i2) {
  if (i1.shape() != i2.shape())
    throw std::invalid_argument("focus_masks: shape mismatch " +
                                shape_str(i1.shape()) + " vs " +
                                shape_str(i2.shape()));
  Tensor h1 = high_frequency(i1);
  Tensor h2 = high_frequency(i2);
  FocusMasks m;
  m.s1 = Tensor(h1.shape());
  m.s2 = Tensor(h1.shape());
  for (std::size_t p = 0; p < h1.size(); ++p) {
    // sign(HF1 - min(HF1, HF2)): 1 where HF1 > HF2, 0 at ties
    m.s1[p] = h1[p] > h2[p] ? 1.0 : 0.0;
    m.s2[p] = 1.0 - m.s1[p];
  }
  return m;
}

namespace {

// mask [H,W] replicated over C channels, as a plain constant tensor
Tensor broadcast_mask(const Tensor& mask, std::size_t c) {
  const std::size_t n = mask.size();
  Tensor out({c, mask.dim(0), mask.dim(1)});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t p = 0; p < n; ++p) out[ch * n + p] = mask[p];
  return out;
}

Tensor masked_sq(const Tensor& a, const Tensor& b, const Tensor& m) {
  Tensor d = sub(a, b);
  return mean(mul(mul(d, d), m));
}

Tensor fwd_diff(const Tensor& t, std::size_t axis) {
  const std::size_t len = t.dim(axis);
  return sub(slice(t, axis, 1, len - 1), slice(t, axis, 0, len - 1));
}

}  // namespace

Tensor mfif_loss(const Tensor& q_out, const Tensor& i1, const Tensor& i2) {
  if (q_out.shape() != i1.shape() || q_out.shape() != i2.shape())
    throw std::invalid_argument("mfif_loss: shape mismatch " +
                                shape_str(q_out.shape()) + " vs " +
                                shape_str(i1.shape()) + " / " +
                                shape_str(i2.shape()));
  const std::size_t c = q_out.dim(0);
  FocusMasks fm = focus_masks(i1, i2);
  Tensor m1 = broadcast_mask(fm.s1, c);
  Tensor m2 = broadcast_mask(fm.s2, c);
  Tensor s1 = i1.detach();
  Tensor s2 = i2.detach();

  Tensor l2 = add(masked_sq(q_out, s1, m1), masked_sq(q_out, s2, m2));

  Tensor lg({1}, 0.0);
  for (std::size_t axis = 1; axis <= 2; ++axis) {
    Tensor gq = fwd_diff(q_out, axis);
    Tensor g1 = fwd_diff(s1, axis);
    Tensor g2 = fwd_diff(s2, axis);
    // crop the masks to the gradient footprint
    Tensor m1c = slice(m1, axis, 0, m1.dim(axis) - 1).detach();
    Tensor m2c = slice(m2, axis, 0, m2.dim(axis) - 1).detach();
    lg = add(lg, add(masked_sq(gq, g1, m1c), masked_sq(gq, g2, m2c)));
  }
  return add(l2, lg);
}

}  // namespace gir
