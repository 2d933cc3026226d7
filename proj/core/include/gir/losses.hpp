#pragma once

#include "gir/tensor.hpp"

namespace gir {

/// Mean absolute error; differentiable with subgradient 0 at ties.
Tensor l1_loss(const Tensor& pred, const Tensor& target);

/// |img - G_sigma * img| summed over channels; 5x5 Gaussian, sigma 1.0,
/// replicate padding. Returns [H,W]; not recorded for gradients.
Tensor high_frequency(const Tensor& img);

/// Complementary binary focus masks: s1 = 1 where HF(I1) > HF(I2), else 0;
/// s2 = 1 - s1. Ties (including HF equality) select the second source.
struct FocusMasks {
  Tensor s1, s2;  // [H,W], values in {0,1}
};
FocusMasks focus_masks(const Tensor& i1, const Tensor& i2);

/// Unsupervised fusion loss: mask-selected squared error on values plus the
/// same on forward-difference spatial gradients. Masks are constants (no
/// gradient flows through the focus detection).
Tensor mfif_loss(const Tensor& q_out, const Tensor& i1, const Tensor& i2);

}  // namespace gir
