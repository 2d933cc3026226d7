#include "gir/metrics.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>
#include <vector>

namespace gir {

namespace {

void check_pair(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
}

struct Planes {
  std::size_t c, h, w;
};

Planes planes_of(const Tensor& t, const char* op) {
  if (t.rank() == 2) return {1, t.dim(0), t.dim(1)};
  if (t.rank() == 3) return {t.dim(0), t.dim(1), t.dim(2)};
  throw std::invalid_argument(std::string(op) + ": expects [H,W] or [C,H,W]");
}

}  // namespace

double rmse(const Tensor& a, const Tensor& b) {
  check_pair(a, b, "rmse");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(a.size()));
}

double psnr(const Tensor& a, const Tensor& b, double peak) {
  if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be > 0");
  const double r = rmse(a, b);
  if (r == 0.0) return 99.0;
  return 20.0 * std::log10(peak / r);
}

double ssim(const Tensor& a, const Tensor& b) {
  check_pair(a, b, "ssim");
  const auto pl = planes_of(a, "ssim");
  constexpr double peak = 1.0;
  constexpr double c1 = (0.01 * peak) * (0.01 * peak);
  constexpr double c2 = (0.03 * peak) * (0.03 * peak);
  constexpr int radius = 5;  // 11x11 window
  constexpr double sigma = 1.5;

  double kern[2 * radius + 1];
  double z = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kern[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    z += kern[i + radius];
  }
  for (auto& v : kern) v /= z;

  const long h = static_cast<long>(pl.h), w = static_cast<long>(pl.w);
  double total = 0.0;
  for (std::size_t ch = 0; ch < pl.c; ++ch) {
    const std::size_t off = ch * pl.h * pl.w;
    double plane_acc = 0.0;
    for (long i = 0; i < h; ++i)
      for (long j = 0; j < w; ++j) {
        double mx = 0.0, my = 0.0, mxx = 0.0, myy = 0.0, mxy = 0.0;
        for (int u = -radius; u <= radius; ++u)
          for (int v = -radius; v <= radius; ++v) {
            const double wt = kern[u + radius] * kern[v + radius];
            const long si = std::clamp(i + u, 0L, h - 1);
            const long sj = std::clamp(j + v, 0L, w - 1);
            const double xv = a[off + si * w + sj];
            const double yv = b[off + si * w + sj];
            mx += wt * xv;
            my += wt * yv;
            mxx += wt * xv * xv;
            myy += wt * yv * yv;
            mxy += wt * xv * yv;
          }
        const double vx = mxx - mx * mx;
        const double vy = myy - my * my;
        const double cxy = mxy - mx * my;
        plane_acc += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) /
                     ((mx * mx + my * my + c1) * (vx + vy + c2));
      }
    total += plane_acc / static_cast<double>(pl.h * pl.w);
  }
  return total / static_cast<double>(pl.c);
}

double sam(const Tensor& a, const Tensor& b) {
  check_pair(a, b, "sam");
  const auto pl = planes_of(a, "sam");
  const std::size_t n = pl.h * pl.w;
  double acc = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t c = 0; c < pl.c; ++c) {
      const double av = a[c * n + p];
      const double bv = b[c * n + p];
      dot += av * bv;
      na += av * av;
      nb += bv * bv;
    }
    if (na == 0.0 || nb == 0.0) continue;  // angle defined as 0
    const double cosang = std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
    acc += std::acos(cosang);
  }
  return acc / static_cast<double>(n);
}

double ergas(const Tensor& a, const Tensor& b, double ratio) {
  check_pair(a, b, "ergas");
  if (!(ratio > 0.0)) throw std::invalid_argument("ergas: ratio must be > 0");
  const auto pl = planes_of(a, "ergas");
  const std::size_t n = pl.h * pl.w;
  double acc = 0.0;
  std::size_t used = 0;
  for (std::size_t c = 0; c < pl.c; ++c) {
    double mu = 0.0, se = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      mu += b[c * n + p];
      const double d = a[c * n + p] - b[c * n + p];
      se += d * d;
    }
    mu /= static_cast<double>(n);
    if (mu == 0.0) {
      std::cerr << "ergas: skipping zero-mean band " << c << "\n";
      continue;
    }
    const double rb = std::sqrt(se / static_cast<double>(n));
    acc += (rb / mu) * (rb / mu);
    ++used;
  }
  if (used == 0) return 0.0;
  return 100.0 / ratio * std::sqrt(acc / static_cast<double>(used));
}

double scc(const Tensor& a, const Tensor& b) {
  check_pair(a, b, "scc");
  const auto pl = planes_of(a, "scc");
  const long h = static_cast<long>(pl.h), w = static_cast<long>(pl.w);
  auto laplacian = [&](const Tensor& t, std::size_t ch,
                       std::vector<double>& out) {
    const std::size_t off = ch * pl.h * pl.w;
    out.resize(pl.h * pl.w);
    for (long i = 0; i < h; ++i)
      for (long j = 0; j < w; ++j) {
        const auto v = [&](long y, long x) {
          return t[off + std::clamp(y, 0L, h - 1) * w + std::clamp(x, 0L, w - 1)];
        };
        out[i * w + j] = v(i - 1, j) + v(i + 1, j) + v(i, j - 1) +
                         v(i, j + 1) - 4.0 * v(i, j);
      }
  };

  std::vector<double> fa, fb;
  double total = 0.0;
  for (std::size_t c = 0; c < pl.c; ++c) {
    laplacian(a, c, fa);
    laplacian(b, c, fb);
    const double n = static_cast<double>(fa.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t p = 0; p < fa.size(); ++p) {
      ma += fa[p];
      mb += fb[p];
    }
    ma /= n;
    mb /= n;
    double va = 0.0, vb = 0.0, cov = 0.0;
    bool identical = true;
    for (std::size_t p = 0; p < fa.size(); ++p) {
      const double da = fa[p] - ma, db = fb[p] - mb;
      va += da * da;
      vb += db * db;
      cov += da * db;
      identical = identical && fa[p] == fb[p];
    }
    if (va == 0.0 || vb == 0.0)
      total += identical ? 1.0 : 0.0;
    else
      total += cov / std::sqrt(va * vb);
  }
  return total / static_cast<double>(pl.c);
}

MetricReport compute_metrics(const Tensor& pred, const Tensor& ref,
                             double peak, double ratio) {
  MetricReport r;
  r.rmse = rmse(pred, ref);
  r.psnr = psnr(pred, ref, peak);
  r.ssim = ssim(pred, ref);
  r.sam = sam(pred, ref);
  r.ergas = ergas(pred, ref, ratio);
  r.scc = scc(pred, ref);
  return r;
}

}  // namespace gir
