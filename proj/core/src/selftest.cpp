#include "gir/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <vector>

#include "gir/blocks.hpp"
#include "gir/data.hpp"
#include "gir/guided_filter.hpp"
#include "gir/losses.hpp"
#include "gir/metrics.hpp"
#include "gir/network.hpp"
#include "gir/ops.hpp"
#include "gir/optim.hpp"

namespace gir::selftest {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Tensor random_tensor(Shape shape, Rng& rng, double lo = 0.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(),
                     a.size() * sizeof(double)) == 0;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << std::scientific << v;
  return os.str();
}

}  // namespace

CriterionResult check_gf_oracle() {
  CriterionResult r{1, "guided filter fast path matches per-window solver"};
  const auto t0 = Clock::now();
  const int radii[] = {0, 1, 2, 4};
  const double epsilons[] = {0.0, 1e-4, 1e-2, 1.0};
  Rng rng(0x6f1);
  double worst = 0.0;
  for (int pair = 0; pair < 100; ++pair) {
    Tensor I = random_tensor({16, 16}, rng);
    Tensor P = random_tensor({16, 16}, rng);
    for (int rad : radii)
      for (double eps : epsilons) {
        GuidedFilterConfig cfg{rad, eps};
        GuidedFilterResult fast = guided_filter(I, P, cfg);
        GuidedFilterResult naive = naive_guided_filter(I, P, cfg);
        worst = std::max(worst, max_abs_diff(fast.Q, naive.Q));
        worst = std::max(worst, max_abs_diff(fast.coef.A, naive.coef.A));
        worst = std::max(worst, max_abs_diff(fast.coef.B, naive.coef.B));
      }
  }
  const double dt = seconds_since(t0);
  r.passed = worst < 1e-9 && dt < 5.0;
  r.detail = "max |fast - naive| = " + fmt(worst) + " over 1600 runs, " +
             fmt(dt) + " s";
  return r;
}

CriterionResult check_gf_identities() {
  CriterionResult r{2, "guided filter analytic identities"};
  Rng rng(0x6f2);
  // (a) guiding an image by itself with no regularization reproduces it
  Tensor P = random_tensor({16, 16}, rng);
  Tensor I(P.shape(), P.data());
  double err_a = 0.0;
  for (int rad : {1, 2, 4}) {
    GuidedFilterConfig cfg{rad, 0.0};
    err_a = std::max(err_a, max_abs_diff(guided_filter(I, P, cfg).Q, P));
  }
  // (b) constant guide: slope collapses to zero, so the output is the
  // windowed mean of P. A radius covering the full image makes every
  // (shrinking) window the whole image, so the nesting of means is exact.
  Tensor C({16, 16}, 0.5);
  Tensor P2 = random_tensor({16, 16}, rng);
  double err_b = 0.0;
  for (double eps : {0.0, 1e-4, 1.0}) {
    GuidedFilterConfig cfg{15, eps};
    Tensor box = box_stats(P2, 15);
    err_b = std::max(err_b, max_abs_diff(guided_filter(C, P2, cfg).Q, box));
  }
  r.passed = err_a < 1e-12 && err_b < 1e-12;
  r.detail = "self-guide err = " + fmt(err_a) +
             ", constant-guide err = " + fmt(err_b);
  return r;
}

CriterionResult check_attention() {
  CriterionResult r{3, "attention row sums, single token, global window"};
  Rng rng(0x6f3);
  const std::size_t h = 5, w = 4, c = 3, dk = 4;
  Tensor x = random_tensor({h * w, c}, rng, -1.0, 1.0);
  Tensor y = random_tensor({h * w, c}, rng, -1.0, 1.0);
  Tensor wq = random_tensor({c, dk}, rng, -1.0, 1.0);
  Tensor wk = random_tensor({c, dk}, rng, -1.0, 1.0);
  Tensor wv = random_tensor({c, c}, rng, -1.0, 1.0);

  double row_err = 0.0;
  bool zeros_ok = true;
  for (std::size_t win : {std::size_t(3), std::size_t(7)}) {
    Tensor m = attention_matrix(x, y, wq, wk, h, w, win);
    const long half = static_cast<long>(win) / 2;
    for (std::size_t q = 0; q < h * w; ++q) {
      double s = 0.0;
      for (std::size_t k = 0; k < h * w; ++k) {
        s += m.at(q, k);
        const long di = static_cast<long>(q / w) - static_cast<long>(k / w);
        const long dj = static_cast<long>(q % w) - static_cast<long>(k % w);
        // outside the clamped neighborhood the weight must be an exact zero
        const long qi = static_cast<long>(q / w), qj = static_cast<long>(q % w);
        const long lo_i = std::clamp(qi - half, 0L, static_cast<long>(h) - 1);
        const long hi_i = std::clamp(qi + half, 0L, static_cast<long>(h) - 1);
        const long lo_j = std::clamp(qj - half, 0L, static_cast<long>(w) - 1);
        const long hi_j = std::clamp(qj + half, 0L, static_cast<long>(w) - 1);
        const long ki = qi - di, kj = qj - dj;
        const bool inside =
            ki >= lo_i && ki <= hi_i && kj >= lo_j && kj <= hi_j;
        if (!inside && m.at(q, k) != 0.0) zeros_ok = false;
      }
      row_err = std::max(row_err, std::fabs(s - 1.0));
    }
  }

  // single pixel: the only attention weight is exactly 1, so CA(y) = y Wv
  Tensor x1 = random_tensor({1, c}, rng, -1.0, 1.0);
  Tensor y1 = random_tensor({1, c}, rng, -1.0, 1.0);
  Tensor single = neighborhood_attention(x1, y1, wq, wk, wv, 1, 1, 3);
  const bool single_ok = bitwise_equal(single, matmul(y1, wv));

  // any window at least covering the image is global attention
  Tensor g1 = neighborhood_attention(x, y, wq, wk, wv, h, w, 9);
  Tensor g2 = neighborhood_attention(x, y, wq, wk, wv, h, w, 101);
  const bool global_ok = bitwise_equal(g1, g2);

  r.passed = row_err < 1e-12 && zeros_ok && single_ok && global_ok;
  r.detail = "max row-sum err = " + fmt(row_err) +
             (zeros_ok ? "" : ", nonzero outside window") +
             (single_ok ? "" : ", single-token mismatch") +
             (global_ok ? "" : ", window/global mismatch");
  return r;
}

namespace {

double net_loss(const SFIGFNet& net, const Tensor& I, const Tensor& P,
                const Tensor& R) {
  return sum(mul(net.forward(I, P).Q_Out, R)).item();
}

}  // namespace

CriterionResult check_gradients() {
  CriterionResult r{4, "finite-difference gradient audit"};
  const auto t0 = Clock::now();
  SFIGFConfig cfg;
  cfg.base_channels = 4;
  cfg.num_scales = 2;
  cfg.window = 7;
  cfg.in_channels_p = 1;
  cfg.in_channels_i = 3;
  cfg.out_channels = 1;
  cfg.seed = 7;
  SFIGFNet net(cfg);
  Rng rng(0x6f4);
  Tensor I = random_tensor({3, 16, 16}, rng);
  Tensor P = random_tensor({1, 16, 16}, rng);
  Tensor R = random_tensor({1, 16, 16}, rng, -1.0, 1.0);

  auto& params = net.parameters();
  zero_grads(params);
  sum(mul(net.forward(I, P).Q_Out, R)).backward();
  std::vector<std::vector<double>> analytic(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    analytic[i] = params[i].value.grad();

  // finite differences don't need the graph
  for (auto& p : params) p.value.set_requires_grad(false);

  const char* modules[] = {"cmfe", "fegf", "imgf", "output"};
  const double h = 1e-5;
  double worst = 0.0;
  std::string worst_at = "-";
  for (const char* mod : modules) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < params.size(); ++i)
      if (params[i].name.rfind(std::string(mod) + ".", 0) == 0)
        idx.push_back(i);
    for (int s = 0; s < 20; ++s) {
      const std::size_t pi = idx[rng.next_u64() % idx.size()];
      Tensor& v = params[pi].value;
      const std::size_t e = rng.next_u64() % v.size();
      const double orig = v[e];
      v[e] = orig + h;
      const double lp = net_loss(net, I, P, R);
      v[e] = orig - h;
      const double lm = net_loss(net, I, P, R);
      v[e] = orig;
      const double numeric = (lp - lm) / (2.0 * h);
      const double a = analytic[pi][e];
      const double rel = std::fabs(a - numeric) /
                         std::max({std::fabs(a), std::fabs(numeric), 1e-6});
      if (rel > worst) {
        worst = rel;
        worst_at = params[pi].name + "[" + std::to_string(e) + "]";
      }
    }
  }
  for (auto& p : params) p.value.set_requires_grad(true);

  const double dt = seconds_since(t0);
  r.passed = worst < 1e-4 && dt < 60.0;
  r.detail = "max rel err = " + fmt(worst) + " at " + worst_at + ", " +
             fmt(dt) + " s";
  return r;
}

namespace {

std::vector<double> overfit_trace(int steps) {
  SyntheticSceneSpec scene;
  scene.size = 32;
  scene.seed = 3;
  ImagePair pair = make_gdsr_pair(scene, 4);

  SFIGFConfig cfg;
  cfg.base_channels = 4;
  cfg.num_scales = 2;
  cfg.window = 7;
  cfg.in_channels_p = 1;
  cfg.in_channels_i = 3;
  cfg.out_channels = 1;
  cfg.seed = 5;
  SFIGFNet net(cfg);

  Adam opt(8e-3);
  std::vector<double> trace;
  for (int s = 0; s < steps; ++s) {
    zero_grads(net.parameters());
    Tensor loss = l1_loss(net.forward(pair.guide, pair.target).Q_Out,
                          *pair.ground_truth);
    trace.push_back(loss.item());
    loss.backward();
    opt.step(net.parameters());
  }
  return trace;
}

}  // namespace

CriterionResult check_overfit() {
  CriterionResult r{5, "single-pair overfit and deterministic repeat"};
  const auto t0 = Clock::now();
  const int steps = 300;
  std::vector<double> trace = overfit_trace(steps);
  std::vector<double> repeat = overfit_trace(steps);
  const bool same =
      std::memcmp(trace.data(), repeat.data(), steps * sizeof(double)) == 0;
  const double dt = seconds_since(t0);
  const double ratio = trace.back() / trace.front();
  r.passed = ratio < 0.1 && same && dt < 300.0;
  r.detail = "L1 " + fmt(trace.front()) + " -> " + fmt(trace.back()) +
             " (x" + fmt(ratio) + "), trace " +
             (same ? "identical" : "DIVERGED") + ", " + fmt(dt) + " s";
  return r;
}

CriterionResult check_mfif_masks() {
  CriterionResult r{6, "focus-mask invariants and agreement"};
  Rng rng(0x6f6);
  bool invariants = true;
  for (int i = 0; i < 50; ++i) {
    Tensor a = random_tensor({1, 16, 16}, rng);
    Tensor b = random_tensor({1, 16, 16}, rng);
    FocusMasks m = focus_masks(a, b);
    for (std::size_t p = 0; p < m.s1.size(); ++p) {
      if (m.s1[p] + m.s2[p] != 1.0) invariants = false;
      if (m.s1[p] * m.s2[p] != 0.0) invariants = false;
    }
  }

  double worst_agree = 1.0;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    SyntheticSceneSpec scene;
    scene.size = 64;
    scene.seed = seed;
    ImagePair pair = make_mfif_pair(scene);
    Tensor truth = mfif_generating_mask(scene);
    FocusMasks m = focus_masks(pair.target, pair.guide);

    const long n = static_cast<long>(scene.size);
    std::size_t hits = 0, total = 0;
    for (long i = 0; i < n; ++i)
      for (long j = 0; j < n; ++j) {
        // skip pixels within 3 px (Chebyshev) of a focus transition
        bool interior = true;
        const double v = truth.at(i, j);
        for (long di = -3; di <= 3 && interior; ++di)
          for (long dj = -3; dj <= 3; ++dj) {
            const long y = std::clamp(i + di, 0L, n - 1);
            const long x = std::clamp(j + dj, 0L, n - 1);
            if (truth.at(y, x) != v) {
              interior = false;
              break;
            }
          }
        if (!interior) continue;
        ++total;
        if (m.s1.at(i, j) == v) ++hits;
      }
    worst_agree = std::min(
        worst_agree, static_cast<double>(hits) / static_cast<double>(total));
  }

  r.passed = invariants && worst_agree >= 0.9;
  r.detail = std::string(invariants ? "s1+s2=1, s1*s2=0 on 50 pairs"
                                    : "invariant VIOLATED") +
             "; min agreement = " + fmt(worst_agree);
  return r;
}

CriterionResult check_metric_cases() {
  CriterionResult r{7, "metric analytic cases"};
  Rng rng(0x6f7);
  Tensor a = random_tensor({3, 8, 8}, rng);
  const double ssim_err = std::fabs(ssim(a, a) - 1.0);

  Tensor b = random_tensor({1, 16, 16}, rng, 0.0, 0.8);
  Tensor b_off(b.shape());
  for (std::size_t i = 0; i < b.size(); ++i) b_off[i] = b[i] + 0.1;
  const double psnr_err = std::fabs(psnr(b_off, b, 1.0) - 20.0);

  Tensor u({2, 4, 4}), v({2, 4, 4});
  for (std::size_t p = 0; p < 16; ++p) {
    u[p] = 1.0;       // channel 0
    v[16 + p] = 1.0;  // channel 1
  }
  const double sam_err = std::fabs(sam(u, v) - std::acos(0.0));

  r.passed = ssim_err < 1e-12 && psnr_err < 1e-9 && sam_err < 1e-12;
  r.detail = "ssim err " + fmt(ssim_err) + ", psnr err " + fmt(psnr_err) +
             ", sam err " + fmt(sam_err);
  return r;
}

namespace {

bool shape_is(const Tensor& t, Shape want) { return t.shape() == want; }

}  // namespace

CriterionResult check_channel_schedule() {
  CriterionResult r{8, "constructed parameter shapes match channel schedule"};
  bool ok = true;
  std::string bad;
  auto expect = [&](bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      bad = what;
    }
  };
  for (std::size_t n : {std::size_t(4), std::size_t(8), std::size_t(16)}) {
    SFIGFConfig cfg;
    cfg.base_channels = n;
    cfg.num_scales = 4;
    cfg.window = 3;
    cfg.in_channels_p = 1;  // equal to out_channels so the output rows read
    cfg.in_channels_i = 3;  // C_in + n -> C_in + n -> C_out literally
    cfg.out_channels = 1;
    SFIGFNet net(cfg);
    const std::size_t ci = cfg.in_channels_p;

    expect(shape_is(net.init_p_.weight, {n, ci, 3, 3}), "initial conv");
    for (std::size_t t = 0; t < 3; ++t) {
      const std::size_t c = n << t;
      const std::string at = " (n=" + std::to_string(n) +
                             ", block " + std::to_string(t + 1) + ")";
      // feature block t+1 keeps c channels
      expect(shape_is(net.steps_[t].i_naf.project.weight, {c, c, 1, 1}),
             "feature block i" + at);
      expect(shape_is(net.steps_[t].p_naf.project.weight, {c, c, 1, 1}),
             "feature block p" + at);
      // downsample t+1 doubles to 2c
      expect(shape_is(net.steps_[t].i_down.weight, {2 * c, c, 3, 3}),
             "downsample i" + at);
      expect(shape_is(net.steps_[t].p_down.weight, {2 * c, c, 3, 3}),
             "downsample p" + at);
    }
    // feature block 4 at the coarsest scale, 8n channels
    const std::size_t c_top = n << 3;
    expect(shape_is(net.top_i_naf_.project.weight, {c_top, c_top, 1, 1}),
           "feature block 4 (n=" + std::to_string(n) + ")");
    // upsample block t halves 2c_t back to c_t, t = 2..4
    for (std::size_t t = 1; t < 4; ++t) {
      const std::size_t c = n << t;
      expect(shape_is(net.levels_[t].up.conv.weight, {c, 2 * c, 3, 3}),
             "upsample block " + std::to_string(t + 1) +
                 " (n=" + std::to_string(n) + ")");
    }
    // output head: conv1 (C_in+n -> C_in+n), conv2 (C_in+n -> C_out)
    expect(shape_is(net.out_conv1_.weight, {ci + n, ci + n, 3, 3}),
           "output conv1 (n=" + std::to_string(n) + ")");
    expect(shape_is(net.out_conv2_.weight, {cfg.out_channels, ci + n, 3, 3}),
           "output conv2 (n=" + std::to_string(n) + ")");
  }
  r.passed = ok;
  r.detail = ok ? "all rows match for n in {4,8,16}" : "mismatch at " + bad;
  return r;
}

CriterionResult check_imgf_identity() {
  CriterionResult r{9, "image-level reconstruction identity"};
  SFIGFConfig cfg;
  cfg.base_channels = 4;
  cfg.num_scales = 2;
  cfg.window = 5;
  cfg.in_channels_p = 1;
  cfg.in_channels_i = 3;
  cfg.out_channels = 1;
  cfg.seed = 42;
  SFIGFNet net(cfg);
  Rng rng(0x6f9);
  Tensor I = random_tensor({3, 12, 12}, rng);
  Tensor P = random_tensor({1, 12, 12}, rng);
  FusionResult f = net.forward(I, P);
  bool exact = true;
  for (std::size_t i = 0; i < f.Q_Im.size() && exact; ++i)
    exact = f.Q_Im[i] == f.A_Im[i] * f.I_reduced[i] + f.B_Im[i];
  r.passed = exact;
  r.detail = exact ? "Q_Im == A o I + B bitwise" : "reconstruction differs";
  return r;
}

CriterionResult check_scope_statement() {
  CriterionResult r{10, "scope of verification"};
  r.passed = true;
  r.detail =
      "originally reported benchmark figures (e.g. RMSE 3.38 on 16x "
      "Middlebury, PSNR 37.30 on WorldView-III) need licensed datasets and "
      "multi-day training and are NOT verified here; criteria 1-9 are "
      "property-based substitutes";
  return r;
}

bool run_all(std::ostream& os) {
  CriterionResult (*checks[])() = {
      check_gf_oracle,    check_gf_identities,    check_attention,
      check_gradients,    check_overfit,          check_mfif_masks,
      check_metric_cases, check_channel_schedule, check_imgf_identity,
      check_scope_statement,
  };
  bool all = true;
  for (auto* check : checks) {
    CriterionResult r = check();
    os << "criterion " << std::setw(2) << r.id << " ["
       << (r.passed ? "pass" : "FAIL") << "] " << r.name << ": " << r.detail
       << "\n";
    os.flush();
    all = all && r.passed;
  }
  os << (all ? "selftest: all criteria passed" : "selftest: FAILURES above")
     << "\n";
  return all;
}

}  // namespace gir::selftest
