#include "gir/guided_filter.hpp"

#include <stdexcept>
#include <vector>

namespace gir {

namespace {

void check_image(const Tensor& t, const char* op) {
  if (t.rank() != 2 || t.dim(0) == 0 || t.dim(1) == 0)
    throw std::invalid_argument(std::string(op) + ": expects nonempty [H,W], got " +
                                shape_str(t.shape()));
}

// (H+1)x(W+1) summed-area table.
std::vector<double> integral(const Tensor& img) {
  const std::size_t h = img.dim(0), w = img.dim(1);
  std::vector<double> s((h + 1) * (w + 1), 0.0);
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      s[(i + 1) * (w + 1) + (j + 1)] = img.at(i, j) +
                                       s[i * (w + 1) + (j + 1)] +
                                       s[(i + 1) * (w + 1) + j] -
                                       s[i * (w + 1) + j];
  return s;
}

struct WindowSum {
  double sum;
  double count;
};

WindowSum window_sum(const std::vector<double>& s, std::size_t h, std::size_t w,
                     long i, long j, int r) {
  const long r0 = std::max(0L, i - r), r1 = std::min<long>(h - 1, i + r);
  const long c0 = std::max(0L, j - r), c1 = std::min<long>(w - 1, j + r);
  const std::size_t stride = w + 1;
  const double sum = s[(r1 + 1) * stride + (c1 + 1)] - s[r0 * stride + (c1 + 1)] -
                     s[(r1 + 1) * stride + c0] + s[r0 * stride + c0];
  return {sum, static_cast<double>((r1 - r0 + 1) * (c1 - c0 + 1))};
}

Tensor box_mean(const Tensor& img, int radius) {
  const std::size_t h = img.dim(0), w = img.dim(1);
  // radius 0 must be exact (not a summed-area-table difference) so that
  // single-pixel windows report a bitwise-zero variance
  if (radius == 0) return Tensor({h, w}, img.data());
  auto s = integral(img);
  Tensor out({h, w});
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) {
      const auto ws = window_sum(s, h, w, static_cast<long>(i),
                                 static_cast<long>(j), radius);
      out.at(i, j) = ws.sum / ws.count;
    }
  return out;
}

void check_cfg(const GuidedFilterConfig& cfg) {
  if (cfg.radius < 0)
    throw std::invalid_argument("guided_filter: radius must be >= 0");
  if (cfg.epsilon < 0.0)
    throw std::invalid_argument("guided_filter: epsilon must be >= 0");
}

}  // namespace

Tensor box_stats(const Tensor& img, int radius) {
  check_image(img, "box_stats");
  if (radius < 0) throw std::invalid_argument("box_stats: radius must be >= 0");
  return box_mean(img, radius);
}

GuidedFilterResult guided_filter(const Tensor& guide, const Tensor& input,
                                 const GuidedFilterConfig& cfg) {
  check_image(guide, "guided_filter");
  check_image(input, "guided_filter");
  if (guide.shape() != input.shape())
    throw std::invalid_argument("guided_filter: guide " +
                                shape_str(guide.shape()) + " vs input " +
                                shape_str(input.shape()));
  check_cfg(cfg);
  const std::size_t h = guide.dim(0), w = guide.dim(1);

  Tensor ip({h, w}), ii({h, w});
  for (std::size_t p = 0; p < h * w; ++p) {
    ip[p] = guide[p] * input[p];
    ii[p] = guide[p] * guide[p];
  }
  Tensor mean_i = box_mean(guide, cfg.radius);
  Tensor mean_p = box_mean(input, cfg.radius);
  Tensor mean_ip = box_mean(ip, cfg.radius);
  Tensor mean_ii = box_mean(ii, cfg.radius);

  Tensor a({h, w}), b({h, w});
  for (std::size_t p = 0; p < h * w; ++p) {
    const double var = mean_ii[p] - mean_i[p] * mean_i[p];
    const double cov = mean_ip[p] - mean_i[p] * mean_p[p];
    const double denom = var + cfg.epsilon;
    if (denom <= 0.0) {
      // zero-variance window with epsilon 0: minimum-norm solution
      a[p] = 0.0;
      b[p] = mean_p[p];
    } else {
      a[p] = cov / denom;
      b[p] = mean_p[p] - a[p] * mean_i[p];
    }
  }

  GuidedFilterResult res;
  res.coef.A = box_mean(a, cfg.radius);
  res.coef.B = box_mean(b, cfg.radius);
  res.Q = Tensor({h, w});
  for (std::size_t p = 0; p < h * w; ++p)
    res.Q[p] = res.coef.A[p] * guide[p] + res.coef.B[p];
  return res;
}

GuidedFilterResult naive_guided_filter(const Tensor& guide, const Tensor& input,
                                       const GuidedFilterConfig& cfg) {
  check_image(guide, "naive_guided_filter");
  check_image(input, "naive_guided_filter");
  if (guide.shape() != input.shape())
    throw std::invalid_argument("naive_guided_filter: guide " +
                                shape_str(guide.shape()) + " vs input " +
                                shape_str(input.shape()));
  check_cfg(cfg);
  const long h = static_cast<long>(guide.dim(0));
  const long w = static_cast<long>(guide.dim(1));
  const int r = cfg.radius;

  Tensor a({guide.dim(0), guide.dim(1)}), b({guide.dim(0), guide.dim(1)});
  for (long i = 0; i < h; ++i)
    for (long j = 0; j < w; ++j) {
      double si = 0.0, sp = 0.0, sii = 0.0, sip = 0.0;
      long m = 0;
      for (long u = std::max(0L, i - r); u <= std::min(h - 1, i + r); ++u)
        for (long v = std::max(0L, j - r); v <= std::min(w - 1, j + r); ++v) {
          const double gi = guide.at(u, v);
          const double pv = input.at(u, v);
          si += gi;
          sp += pv;
          sii += gi * gi;
          sip += gi * pv;
          ++m;
        }
      // Normal equations of the ridge-regularized window fit.
      const double dm = static_cast<double>(m);
      const double det = dm * (sii + cfg.epsilon * dm) - si * si;
      if (det <= 0.0) {
        a.at(i, j) = 0.0;
        b.at(i, j) = sp / dm;
      } else {
        a.at(i, j) = (dm * sip - si * sp) / det;
        b.at(i, j) = (sp - a.at(i, j) * si) / dm;
      }
    }

  GuidedFilterResult res;
  res.coef.A = Tensor({guide.dim(0), guide.dim(1)});
  res.coef.B = Tensor({guide.dim(0), guide.dim(1)});
  res.Q = Tensor({guide.dim(0), guide.dim(1)});
  for (long i = 0; i < h; ++i)
    for (long j = 0; j < w; ++j) {
      double sa = 0.0, sb = 0.0;
      long m = 0;
      for (long u = std::max(0L, i - r); u <= std::min(h - 1, i + r); ++u)
        for (long v = std::max(0L, j - r); v <= std::min(w - 1, j + r); ++v) {
          sa += a.at(u, v);
          sb += b.at(u, v);
          ++m;
        }
      res.coef.A.at(i, j) = sa / static_cast<double>(m);
      res.coef.B.at(i, j) = sb / static_cast<double>(m);
      res.Q.at(i, j) = res.coef.A.at(i, j) * guide.at(i, j) + res.coef.B.at(i, j);
    }
  return res;
}

Tensor guided_filter_color(const Tensor& guide_rgb, const Tensor& input,
                           const GuidedFilterConfig& cfg) {
  if (guide_rgb.rank() != 3 || guide_rgb.dim(0) != 3)
    throw std::invalid_argument("guided_filter_color: guide must be [3,H,W], got " +
                                shape_str(guide_rgb.shape()));
  const std::size_t h = guide_rgb.dim(1), w = guide_rgb.dim(2);
  Tensor q({h, w}, 0.0);
  for (std::size_t c = 0; c < 3; ++c) {
    Tensor chan({h, w});
    for (std::size_t p = 0; p < h * w; ++p) chan[p] = guide_rgb[c * h * w + p];
    auto res = guided_filter(chan, input, cfg);
    for (std::size_t p = 0; p < h * w; ++p) q[p] += res.Q[p];
  }
  for (std::size_t p = 0; p < h * w; ++p) q[p] /= 3.0;
  return q;
}

}  // namespace gir
