#pragma once

#include "gir/tensor.hpp"

namespace gir {

struct GuidedFilterConfig {
  int radius = 1;        // window is (2r+1) x (2r+1)
  double epsilon = 1e-4; // ridge regularizer on the slope
};

/// Per-pixel window-averaged linear coefficients. Reconstructing
/// A o I + B reproduces the filter output exactly.
struct GFCoefficients {
  Tensor A;  // [H,W]
  Tensor B;  // [H,W]
};

struct GuidedFilterResult {
  Tensor Q;  // [H,W]
  GFCoefficients coef;
};

/// Windowed mean with the shrinking-window boundary rule, O(1) per pixel via
/// an integral image.
Tensor box_stats(const Tensor& img, int radius);

/// Classical guided filter, integral-image fast path. Degenerate windows
/// (zero variance with epsilon 0) take the minimum-norm solution a=0,
/// b=mean(P).
GuidedFilterResult guided_filter(const Tensor& guide, const Tensor& input,
                                 const GuidedFilterConfig& cfg);

/// Direct per-window least-squares reference, O(H*W*r^2). Same boundary and
/// degeneracy rules as the fast path; used as its oracle.
GuidedFilterResult naive_guided_filter(const Tensor& guide, const Tensor& input,
                                       const GuidedFilterConfig& cfg);

/// RGB guidance: per-channel scalar filtering averaged over the 3 channels.
Tensor guided_filter_color(const Tensor& guide_rgb, const Tensor& input,
                           const GuidedFilterConfig& cfg);

}  // namespace gir
