#include "gir/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace gir {

namespace {

// Catmull-Rom cubic, a = -0.5.
double cubic_kernel(double x) {
  x = std::fabs(x);
  if (x <= 1.0) return (1.5 * x - 2.5) * x * x + 1.0;
  if (x < 2.0) return ((-0.5 * x + 2.5) * x - 4.0) * x + 2.0;
  return 0.0;
}

std::vector<double> resize_line(const std::vector<double>& src,
                                std::size_t dst_len, double scale) {
  const long n = static_cast<long>(src.size());
  std::vector<double> dst(dst_len);
  for (std::size_t d = 0; d < dst_len; ++d) {
    const double s = (static_cast<double>(d) + 0.5) / scale - 0.5;
    const long base = static_cast<long>(std::floor(s));
    const double frac = s - static_cast<double>(base);
    double acc = 0.0;
    for (long t = -1; t <= 2; ++t) {
      const double wgt = cubic_kernel(frac - static_cast<double>(t));
      const long idx = std::clamp(base + t, 0L, n - 1);
      acc += wgt * src[static_cast<std::size_t>(idx)];
    }
    dst[d] = acc;
  }
  return dst;
}

Tensor resize_plane(const Tensor& img, std::size_t c0, std::size_t h,
                    std::size_t w, std::size_t h2, std::size_t w2,
                    double scale) {
  // rows first, then columns
  std::vector<double> tmp(h * w2);
  std::vector<double> line(w);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) line[j] = img[c0 + i * w + j];
    auto out = resize_line(line, w2, scale);
    for (std::size_t j = 0; j < w2; ++j) tmp[i * w2 + j] = out[j];
  }
  Tensor res({h2, w2});
  std::vector<double> col(h);
  for (std::size_t j = 0; j < w2; ++j) {
    for (std::size_t i = 0; i < h; ++i) col[i] = tmp[i * w2 + j];
    auto out = resize_line(col, h2, scale);
    for (std::size_t i = 0; i < h2; ++i) res.at(i, j) = out[i];
  }
  return res;
}

}  // namespace

Tensor bicubic_resize(const Tensor& img, double scale) {
  if (!(scale > 0.0))
    throw std::invalid_argument("bicubic_resize: scale must be positive");
  const bool chw = img.rank() == 3;
  if (!chw && img.rank() != 2)
    throw std::invalid_argument("bicubic_resize: expects [H,W] or [C,H,W]");
  const std::size_t c = chw ? img.dim(0) : 1;
  const std::size_t h = chw ? img.dim(1) : img.dim(0);
  const std::size_t w = chw ? img.dim(2) : img.dim(1);
  const std::size_t h2 = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(h * scale)));
  const std::size_t w2 = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(w * scale)));

  if (!chw) return resize_plane(img, 0, h, w, h2, w2, scale);
  Tensor out({c, h2, w2});
  for (std::size_t ch = 0; ch < c; ++ch) {
    Tensor plane = resize_plane(img, ch * h * w, h, w, h2, w2, scale);
    for (std::size_t p = 0; p < h2 * w2; ++p) out[ch * h2 * w2 + p] = plane[p];
  }
  return out;
}

Tensor gaussian_blur(const Tensor& img, double sigma, int radius) {
  const bool chw = img.rank() == 3;
  const std::size_t c = chw ? img.dim(0) : 1;
  const std::size_t h = chw ? img.dim(1) : img.dim(0);
  const std::size_t w = chw ? img.dim(2) : img.dim(1);
  const int k = 2 * radius + 1;
  std::vector<double> kern(k);
  double z = 0.0;
  for (int i = 0; i < k; ++i) {
    const double x = static_cast<double>(i - radius);
    kern[i] = std::exp(-0.5 * x * x / (sigma * sigma));
    z += kern[i];
  }
  for (auto& v : kern) v /= z;

  Tensor out(img.shape());
  std::vector<double> tmp(h * w);
  const long lh = static_cast<long>(h), lw = static_cast<long>(w);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const std::size_t off = ch * h * w;
    for (long i = 0; i < lh; ++i)
      for (long j = 0; j < lw; ++j) {
        double acc = 0.0;
        for (int t = -radius; t <= radius; ++t)
          acc += kern[t + radius] *
                 img[off + i * lw + std::clamp(j + t, 0L, lw - 1)];
        tmp[i * lw + j] = acc;
      }
    for (long i = 0; i < lh; ++i)
      for (long j = 0; j < lw; ++j) {
        double acc = 0.0;
        for (int t = -radius; t <= radius; ++t)
          acc += kern[t + radius] * tmp[std::clamp(i + t, 0L, lh - 1) * lw + j];
        out[off + i * lw + j] = acc;
      }
  }
  return out;
}

namespace {

struct ShapeMask {
  // paints a random rectangle or ellipse into `level_map`
  static void paint(Tensor& level_map, Rng& rng, std::size_t level) {
    const std::size_t n = level_map.dim(0);
    const double cx = rng.uniform(0.1, 0.9) * n;
    const double cy = rng.uniform(0.1, 0.9) * n;
    const double rx = rng.uniform(0.08, 0.35) * n;
    const double ry = rng.uniform(0.08, 0.35) * n;
    const bool ellipse = rng.uniform() < 0.5;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double dy = (static_cast<double>(i) - cy) / ry;
        const double dx = (static_cast<double>(j) - cx) / rx;
        const bool inside =
            ellipse ? (dx * dx + dy * dy <= 1.0)
                    : (std::fabs(dx) <= 1.0 && std::fabs(dy) <= 1.0);
        if (inside) level_map.at(i, j) = static_cast<double>(level);
      }
  }
};

Tensor depth_level_map(const SyntheticSceneSpec& spec, Rng& rng) {
  Tensor levels({spec.size, spec.size}, 0.0);
  for (std::size_t s = 0; s < spec.num_shapes; ++s) {
    const std::size_t level = 1 + (rng.next_u64() % (spec.depth_levels - 1));
    ShapeMask::paint(levels, rng, level);
  }
  return levels;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

ImagePair make_gdsr_pair(const SyntheticSceneSpec& spec, std::size_t sr_scale) {
  if (spec.depth_levels < 2)
    throw std::invalid_argument("make_gdsr_pair: need >= 2 depth levels");
  if (sr_scale == 0 || spec.size % sr_scale != 0)
    throw std::invalid_argument("make_gdsr_pair: size " +
                                std::to_string(spec.size) +
                                " not divisible by scale " +
                                std::to_string(sr_scale));
  Rng rng(spec.seed);
  const std::size_t n = spec.size;
  Tensor levels = depth_level_map(spec, rng);

  Tensor depth({n, n});
  for (std::size_t p = 0; p < n * n; ++p)
    depth[p] = 0.1 + 0.8 * levels[p] / static_cast<double>(spec.depth_levels - 1);

  // one distinct color per depth level, so depth edges show up in the guide
  std::vector<std::array<double, 3>> colors(spec.depth_levels);
  for (auto& col : colors)
    for (auto& v : col) v = rng.uniform(0.1, 0.9);

  Tensor guide({3, n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const auto& col = colors[static_cast<std::size_t>(levels.at(i, j))];
      const double tex =
          spec.texture_amplitude *
          std::sin(0.9 * static_cast<double>(i)) *
          std::sin(0.7 * static_cast<double>(j));
      for (std::size_t c = 0; c < 3; ++c)
        guide.at(c, i, j) =
            clamp01(col[c] + tex + spec.noise_sigma * rng.normal());
    }

  const double inv = 1.0 / static_cast<double>(sr_scale);
  Tensor low = bicubic_resize(depth, inv);
  Tensor degraded = bicubic_resize(low, static_cast<double>(sr_scale));
  Tensor target({1, n, n});
  for (std::size_t p = 0; p < n * n; ++p) target[p] = clamp01(degraded[p]);
  Tensor gt({1, n, n});
  for (std::size_t p = 0; p < n * n; ++p) gt[p] = depth[p];

  ImagePair pair;
  pair.guide = guide;
  pair.target = target;
  pair.ground_truth = gt;
  pair.task = Task::Gdsr;
  return pair;
}

namespace {

struct MfifScene {
  Tensor sharp;  // [1,N,N]
  Tensor mask;   // [N,N], 1 = near (in focus in view 1)
};

MfifScene mfif_scene(const SyntheticSceneSpec& spec) {
  Rng rng(spec.seed);
  const std::size_t n = spec.size;
  Tensor levels = depth_level_map(spec, rng);

  Tensor sharp({1, n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double base =
          0.25 + 0.5 * levels.at(i, j) / static_cast<double>(spec.depth_levels);
      // fine texture everywhere so defocus is detectable from high frequencies
      const double tex =
          0.15 * std::sin(2.1 * static_cast<double>(i)) *
              std::cos(1.7 * static_cast<double>(j)) +
          0.05 * (((i + j) % 2 == 0) ? 1.0 : -1.0);
      sharp.at(0, i, j) = clamp01(base + tex + spec.noise_sigma * rng.normal());
    }

  const double cutoff = 0.5 * static_cast<double>(spec.depth_levels - 1);
  Tensor mask({n, n});
  for (std::size_t p = 0; p < n * n; ++p)
    mask[p] = levels[p] > cutoff ? 1.0 : 0.0;
  return {sharp, mask};
}

}  // namespace

ImagePair make_mfif_pair(const SyntheticSceneSpec& spec) {
  MfifScene scene = mfif_scene(spec);
  const std::size_t n = spec.size;
  Tensor blurred = gaussian_blur(scene.sharp, 2.0, 4);
  Tensor i1({1, n, n}), i2({1, n, n});
  for (std::size_t p = 0; p < n * n; ++p) {
    const double m = scene.mask[p];
    i1[p] = m * scene.sharp[p] + (1.0 - m) * blurred[p];
    i2[p] = (1.0 - m) * scene.sharp[p] + m * blurred[p];
  }
  ImagePair pair;
  pair.target = i1;
  pair.guide = i2;
  pair.ground_truth = scene.sharp;
  pair.task = Task::Mfif;
  return pair;
}

Tensor mfif_generating_mask(const SyntheticSceneSpec& spec) {
  return mfif_scene(spec).mask;
}

}  // namespace gir
