#include <doctest.h>

#include <cmath>

#include "gir/data.hpp"
#include "gir/losses.hpp"
#include "gir/metrics.hpp"
#include "gir/ops.hpp"
#include "gir/tensor.hpp"
#include "test_util.hpp"

using namespace gir;
using testutil::gradcheck;
using testutil::random_tensor;

TEST_CASE("l1 loss value and subgradient") {
  Tensor pred({1, 2, 2}, {1.0, 2.0, 3.0, 4.0}, true);
  Tensor target({1, 2, 2}, {2.0, 2.0, 1.0, 6.0});
  Tensor l = l1_loss(pred, target);
  CHECK(l.item() == doctest::Approx((1.0 + 0.0 + 2.0 + 2.0) / 4.0));
  l.backward();
  CHECK(pred.grad()[0] == doctest::Approx(-0.25));
  CHECK(pred.grad()[1] == 0.0);  // tie: subgradient 0
  CHECK(pred.grad()[2] == doctest::Approx(0.25));
  CHECK_THROWS_AS(l1_loss(pred, Tensor({1, 2, 3}, 0.0)),
                  std::invalid_argument);
}

TEST_CASE("high frequency map: blur-invariant images score zero") {
  Tensor flat({1, 8, 8}, 0.4);
  Tensor hf = high_frequency(flat);
  CHECK(hf.shape() == Shape{8, 8});
  for (std::size_t i = 0; i < hf.size(); ++i) CHECK(hf[i] == 0.0);

  // a checkerboard has strictly positive high-frequency content inside
  Tensor check({1, 8, 8});
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j)
      check.at(0, i, j) = ((i + j) % 2 == 0) ? 1.0 : 0.0;
  Tensor hf2 = high_frequency(check);
  CHECK(hf2.at(4, 4) > 0.1);
}

TEST_CASE("focus masks are complementary, ties favor the second source") {
  Rng rng(50);
  Tensor a = random_tensor({1, 8, 8}, rng, 0.0, 1.0);
  FocusMasks m = focus_masks(a, a);  // identical: everything ties
  for (std::size_t i = 0; i < m.s1.size(); ++i) {
    CHECK(m.s1[i] == 0.0);
    CHECK(m.s2[i] == 1.0);
  }
  Tensor blurred = gaussian_blur(a, 2.0, 4);
  FocusMasks m2 = focus_masks(a, blurred);
  std::size_t sharp_wins = 0;
  for (std::size_t i = 0; i < m2.s1.size(); ++i) {
    CHECK(m2.s1[i] + m2.s2[i] == 1.0);
    CHECK(m2.s1[i] * m2.s2[i] == 0.0);
    if (m2.s1[i] == 1.0) ++sharp_wins;
  }
  CHECK(sharp_wins > m2.s1.size() / 2);  // the sharp view dominates
}

TEST_CASE("mfif loss prefers the all-in-focus composition") {
  SyntheticSceneSpec scene;
  scene.size = 32;
  scene.seed = 51;
  ImagePair pair = make_mfif_pair(scene);
  const Tensor& i1 = pair.target;
  const Tensor& i2 = pair.guide;
  // composing by the focus masks should beat either single view
  FocusMasks m = focus_masks(i1, i2);
  Tensor composed(i1.shape());
  for (std::size_t c = 0; c < i1.dim(0); ++c)
    for (std::size_t p = 0; p < 32 * 32; ++p)
      composed[c * 32 * 32 + p] =
          m.s1[p] * i1[c * 32 * 32 + p] + m.s2[p] * i2[c * 32 * 32 + p];
  const double good = mfif_loss(composed, i1, i2).item();
  const double bad1 = mfif_loss(i1.detach(), i1, i2).item();
  const double bad2 = mfif_loss(i2.detach(), i1, i2).item();
  CHECK(good < bad1);
  CHECK(good < bad2);
  CHECK(good >= 0.0);
}

TEST_CASE("mfif loss gradient wrt the fused image checks out") {
  Rng rng(52);
  Tensor q = random_tensor({1, 8, 8}, rng, 0.0, 1.0, true);
  Tensor i1 = random_tensor({1, 8, 8}, rng, 0.0, 1.0);
  Tensor i2 = random_tensor({1, 8, 8}, rng, 0.0, 1.0);
  auto loss = [&] { return mfif_loss(q, i1, i2).item(); };
  mfif_loss(q, i1, i2).backward();
  CHECK(gradcheck(q, loss) < 1e-6);
}

TEST_CASE("rmse and psnr analytic values") {
  Tensor a({2, 2}, {0.0, 0.0, 0.0, 0.0});
  Tensor b({2, 2}, {0.1, 0.1, 0.1, 0.1});
  CHECK(rmse(a, b) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(psnr(a, b, 1.0) == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(psnr(a, a, 1.0) == 99.0);  // exact match sentinel
  CHECK_THROWS_AS(psnr(a, b, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(rmse(a, Tensor({3}, 0.0)), std::invalid_argument);
}

TEST_CASE("ssim: identity is 1, degradation is less") {
  Rng rng(53);
  Tensor a = random_tensor({1, 16, 16}, rng, 0.0, 1.0);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  Tensor noisy(a.shape());
  Rng rng2(54);
  for (std::size_t i = 0; i < a.size(); ++i)
    noisy[i] = a[i] + 0.2 * rng2.uniform(-1.0, 1.0);
  CHECK(ssim(a, noisy) < 0.99);
  CHECK(ssim(a, noisy) > -1.0);
}

TEST_CASE("sam: orthogonal spectra give pi/2, parallel give 0") {
  Tensor u({2, 2, 2}), v({2, 2, 2});
  for (std::size_t p = 0; p < 4; ++p) {
    u[p] = 1.0;
    v[4 + p] = 1.0;
  }
  CHECK(sam(u, v) == doctest::Approx(std::acos(0.0)).epsilon(1e-12));
  Tensor w({2, 2, 2});
  for (std::size_t i = 0; i < 8; ++i) w[i] = 2.0 * u[i];
  CHECK(sam(u, w) == doctest::Approx(0.0).epsilon(1e-12));
  // zero spectra contribute an angle of zero
  Tensor z({2, 2, 2}, 0.0);
  CHECK(sam(u, z) == 0.0);
}

TEST_CASE("ergas scales with band-relative error") {
  Tensor ref({1, 2, 2}, 0.5);
  Tensor pred({1, 2, 2}, 0.6);
  // single band: 100/ratio * (rmse/mean) with rmse 0.1, mean 0.5
  CHECK(ergas(pred, ref, 4.0) == doctest::Approx(100.0 / 4.0 * 0.2).epsilon(1e-9));
  CHECK(ergas(pred, ref, 2.0) == doctest::Approx(100.0 / 2.0 * 0.2).epsilon(1e-9));
  // zero-mean reference bands are skipped
  Tensor zref({1, 2, 2}, 0.0);
  CHECK(ergas(pred, zref, 4.0) == 0.0);
}

TEST_CASE("scc: identical images 1, inverted structure -1") {
  Rng rng(55);
  Tensor a = random_tensor({1, 12, 12}, rng, 0.0, 1.0);
  CHECK(scc(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  Tensor inv(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) inv[i] = 1.0 - a[i];
  CHECK(scc(a, inv) == doctest::Approx(-1.0).epsilon(1e-12));
  Tensor flat(a.shape(), 0.3);
  CHECK(scc(flat, flat) == 1.0);  // degenerate but identical
  CHECK(scc(flat, a) == doctest::Approx(0.0));
}

TEST_CASE("compute_metrics assembles the full report") {
  Rng rng(56);
  Tensor a = random_tensor({3, 8, 8}, rng, 0.1, 0.9);
  MetricReport r = compute_metrics(a, a);
  CHECK(r.rmse == 0.0);
  CHECK(r.psnr == 99.0);
  CHECK(r.ssim == doctest::Approx(1.0));
  CHECK(r.sam == doctest::Approx(0.0));
  CHECK(r.ergas == doctest::Approx(0.0));
  CHECK(r.scc == doctest::Approx(1.0));
}
