#include <doctest.h>

#include <cmath>

#include "gir/guided_filter.hpp"
#include "gir/tensor.hpp"
#include "test_util.hpp"

using namespace gir;
using testutil::max_abs_diff;
using testutil::random_tensor;

TEST_CASE("box_stats equals a direct shrinking-window mean") {
  Rng rng(20);
  Tensor img = random_tensor({7, 9}, rng, 0.0, 1.0);
  for (int r : {0, 1, 3, 10}) {
    Tensor fast = box_stats(img, r);
    const long h = 7, w = 9;
    for (long i = 0; i < h; ++i)
      for (long j = 0; j < w; ++j) {
        double acc = 0.0;
        long m = 0;
        for (long u = std::max(0L, i - r); u <= std::min(h - 1, i + r); ++u)
          for (long v = std::max(0L, j - r); v <= std::min(w - 1, j + r); ++v) {
            acc += img.at(u, v);
            ++m;
          }
        CHECK(fast.at(i, j) ==
              doctest::Approx(acc / m).epsilon(1e-12));
      }
  }
}

TEST_CASE("fast path agrees with the per-window solver") {
  Rng rng(21);
  for (int rep = 0; rep < 5; ++rep) {
    Tensor I = random_tensor({12, 10}, rng, 0.0, 1.0);
    Tensor P = random_tensor({12, 10}, rng, 0.0, 1.0);
    for (int r : {0, 1, 3})
      for (double eps : {0.0, 1e-4, 1.0}) {
        GuidedFilterConfig cfg{r, eps};
        auto fast = guided_filter(I, P, cfg);
        auto ref = naive_guided_filter(I, P, cfg);
        CHECK(max_abs_diff(fast.Q, ref.Q) < 1e-9);
        CHECK(max_abs_diff(fast.coef.A, ref.coef.A) < 1e-9);
        CHECK(max_abs_diff(fast.coef.B, ref.coef.B) < 1e-9);
      }
  }
}

TEST_CASE("radius 0 with epsilon 0 is the bitwise identity") {
  Rng rng(22);
  Tensor I = random_tensor({8, 8}, rng, 0.0, 1.0);
  Tensor P = random_tensor({8, 8}, rng, 0.0, 1.0);
  auto res = guided_filter(I, P, {0, 0.0});
  for (std::size_t i = 0; i < P.size(); ++i) CHECK(res.Q[i] == P[i]);
}

TEST_CASE("self-guidance with epsilon 0 reproduces the input") {
  Rng rng(23);
  Tensor P = random_tensor({16, 16}, rng, 0.0, 1.0);
  Tensor I(P.shape(), P.data());
  for (int r : {1, 2, 4})
    CHECK(max_abs_diff(guided_filter(I, P, {r, 0.0}).Q, P) < 1e-12);
}

TEST_CASE("constant guide collapses to nested windowed means") {
  Rng rng(24);
  Tensor I({10, 10}, 0.3);
  Tensor P = random_tensor({10, 10}, rng, 0.0, 1.0);
  for (double eps : {0.0, 1e-2}) {
    auto res = guided_filter(I, P, {2, eps});
    // slope is identically 0, so Q is the window mean of the window mean
    Tensor want = box_stats(box_stats(P, 2), 2);
    CHECK(max_abs_diff(res.Q, want) < 1e-12);
  }
  // with a window covering the whole image this is the plain windowed mean
  auto global = guided_filter(I, P, {9, 1e-4});
  CHECK(max_abs_diff(global.Q, box_stats(P, 9)) < 1e-12);
}

TEST_CASE("output is linear in the filtering input for fixed guide") {
  Rng rng(25);
  Tensor I = random_tensor({9, 9}, rng, 0.0, 1.0);
  Tensor P1 = random_tensor({9, 9}, rng, 0.0, 1.0);
  Tensor P2 = random_tensor({9, 9}, rng, 0.0, 1.0);
  const double al = 0.7, be = -1.3;
  Tensor mix(P1.shape());
  for (std::size_t i = 0; i < mix.size(); ++i)
    mix[i] = al * P1[i] + be * P2[i];
  GuidedFilterConfig cfg{2, 1e-3};
  Tensor q1 = guided_filter(I, P1, cfg).Q;
  Tensor q2 = guided_filter(I, P2, cfg).Q;
  Tensor qm = guided_filter(I, mix, cfg).Q;
  for (std::size_t i = 0; i < qm.size(); ++i)
    CHECK(qm[i] == doctest::Approx(al * q1[i] + be * q2[i]).epsilon(1e-10));
}

TEST_CASE("interior output is shift invariant") {
  Rng rng(26);
  Tensor I = random_tensor({12, 12}, rng, 0.0, 1.0);
  Tensor P = random_tensor({12, 12}, rng, 0.0, 1.0);
  // shift both images down-right by one pixel
  Tensor I2({12, 12}), P2({12, 12});
  for (std::size_t i = 1; i < 12; ++i)
    for (std::size_t j = 1; j < 12; ++j) {
      I2.at(i, j) = I.at(i - 1, j - 1);
      P2.at(i, j) = P.at(i - 1, j - 1);
    }
  GuidedFilterConfig cfg{2, 1e-3};
  Tensor q = guided_filter(I, P, cfg).Q;
  Tensor q2 = guided_filter(I2, P2, cfg).Q;
  // compare deep interior pixels whose windows (radius 2, twice) stay inside
  for (std::size_t i = 5; i < 7; ++i)
    for (std::size_t j = 5; j < 7; ++j)
      CHECK(q2.at(i, j) == doctest::Approx(q.at(i - 1, j - 1)).epsilon(1e-12));
}

TEST_CASE("coefficient maps reconstruct the output exactly") {
  Rng rng(27);
  Tensor I = random_tensor({8, 8}, rng, 0.0, 1.0);
  Tensor P = random_tensor({8, 8}, rng, 0.0, 1.0);
  auto res = guided_filter(I, P, {3, 1e-4});
  for (std::size_t i = 0; i < P.size(); ++i)
    CHECK(res.Q[i] == res.coef.A[i] * I[i] + res.coef.B[i]);
}

TEST_CASE("color guidance averages the three scalar filterings") {
  Rng rng(28);
  Tensor rgb = random_tensor({3, 6, 6}, rng, 0.0, 1.0);
  Tensor P = random_tensor({6, 6}, rng, 0.0, 1.0);
  GuidedFilterConfig cfg{1, 1e-3};
  Tensor q = guided_filter_color(rgb, P, cfg);
  Tensor want({6, 6}, 0.0);
  for (std::size_t c = 0; c < 3; ++c) {
    Tensor chan({6, 6});
    for (std::size_t p = 0; p < 36; ++p) chan[p] = rgb[c * 36 + p];
    Tensor qc = guided_filter(chan, P, cfg).Q;
    for (std::size_t p = 0; p < 36; ++p) want[p] += qc[p] / 3.0;
  }
  CHECK(max_abs_diff(q, want) < 1e-12);
}

TEST_CASE("input validation") {
  Tensor a({4, 4}, 0.5);
  Tensor b({5, 4}, 0.5);
  CHECK_THROWS_AS(guided_filter(a, b, {1, 1e-4}), std::invalid_argument);
  CHECK_THROWS_AS(guided_filter(a, a, {-1, 1e-4}), std::invalid_argument);
  CHECK_THROWS_AS(guided_filter(a, a, {1, -1.0}), std::invalid_argument);
  Tensor c({2, 4, 4}, 0.5);
  CHECK_THROWS_AS(guided_filter_color(c, a, {1, 1e-4}), std::invalid_argument);
}
