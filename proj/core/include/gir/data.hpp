#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "gir/tensor.hpp"

namespace gir {

enum class Task { Gdsr, Mfif, Pansharpen, Lrie };

struct ImagePair {
  Tensor guide;   // [C_i,H,W]
  Tensor target;  // [C_p,H,W]
  std::optional<Tensor> ground_truth;
  Task task = Task::Gdsr;
};

struct SyntheticSceneSpec {
  std::size_t size = 64;
  std::size_t num_shapes = 6;
  std::size_t depth_levels = 4;
  double texture_amplitude = 0.08;
  double noise_sigma = 0.01;
  std::uint64_t seed = 0;
};

/// Separable Catmull-Rom resampling (cubic kernel, a = -0.5), replicate
/// boundary. Accepts [H,W] or [C,H,W]; scale is any positive factor.
Tensor bicubic_resize(const Tensor& img, double scale);

/// Gaussian blur with a normalized (2r+1)^2 kernel, replicate padding.
Tensor gaussian_blur(const Tensor& img, double sigma, int radius);

/// Piecewise-constant depth over random shapes plus an RGB guide sharing
/// the same edges; the target is the depth bicubic-degraded by sr_scale
/// and re-upsampled. Deterministic in the seed.
ImagePair make_gdsr_pair(const SyntheticSceneSpec& spec, std::size_t sr_scale);

/// Sharp textured scene split by a random depth mask; the far region is
/// blurred in the first view, the near region in the second. The returned
/// guide/target are the two views; ground_truth is the sharp scene.
ImagePair make_mfif_pair(const SyntheticSceneSpec& spec);

/// The binary focus mask used when generating the MFIF pair (1 = first
/// view in focus), for generation-vs-detection audits.
Tensor mfif_generating_mask(const SyntheticSceneSpec& spec);

}  // namespace gir
