#pragma once

#include "gir/tensor.hpp"

namespace gir {

struct MetricReport {
  double rmse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  double sam = 0.0;
  double ergas = 0.0;
  double scc = 0.0;
};

double rmse(const Tensor& a, const Tensor& b);
/// 20*log10(peak/rmse); an exact match reports the 99.0 dB sentinel.
double psnr(const Tensor& a, const Tensor& b, double peak);
/// Mean local SSIM, 11x11 Gaussian window sigma 1.5, C1=(0.01*peak)^2,
/// C2=(0.03*peak)^2; peak fixed to 1 (data lives in [0,1]).
double ssim(const Tensor& a, const Tensor& b);
/// Mean per-pixel spectral angle in radians over the channel axis; 0 when
/// either spectrum is the zero vector.
double sam(const Tensor& a, const Tensor& b);
/// 100*(1/ratio)*sqrt(mean over bands of (rmse_b/mu_b)^2), mu from the
/// reference b; zero-mean bands are skipped with a warning.
double ergas(const Tensor& a, const Tensor& b, double ratio);
/// Pearson correlation of Laplacian-filtered bands, averaged; degenerate
/// (zero-variance) bands report 1 when identical, 0 otherwise.
double scc(const Tensor& a, const Tensor& b);

MetricReport compute_metrics(const Tensor& pred, const Tensor& ref,
                             double peak = 1.0, double ratio = 4.0);

}  // namespace gir
