#include <CLI11.hpp>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "gir/data.hpp"
#include "gir/guided_filter.hpp"
#include "gir/image_io.hpp"
#include "gir/losses.hpp"
#include "gir/metrics.hpp"
#include "gir/network.hpp"
#include "gir/ops.hpp"
#include "gir/optim.hpp"
#include "gir/selftest.hpp"
#include "gir/tensor.hpp"

namespace fs = std::filesystem;
using namespace gir;

namespace {

// [1,H,W] -> [H,W]; other shapes pass through
Tensor squeeze_gray(const Tensor& t) {
  if (t.rank() == 3 && t.dim(0) == 1)
    return Tensor({t.dim(1), t.dim(2)}, t.data());
  return t;
}

Tensor as_chw1(const Tensor& t) {
  if (t.rank() == 2) return Tensor({1, t.dim(0), t.dim(1)}, t.data());
  return t;
}

struct GfOpts {
  std::string guide, input, out, dump_coef;
  int radius = 4;
  double eps = 1e-4;
  bool naive = false;
};

int cmd_gf(const GfOpts& o) {
  Tensor guide = read_image(o.guide);
  Tensor input = squeeze_gray(read_image(o.input));
  if (input.rank() != 2)
    throw std::runtime_error("gf: filtering input must be single-channel");
  GuidedFilterConfig cfg{o.radius, o.eps};

  if (guide.rank() == 3 && guide.dim(0) == 3) {
    if (!o.dump_coef.empty())
      throw std::runtime_error(
          "gf: --dump-coef needs a single-channel guide (the color path "
          "averages three scalar filterings)");
    write_image(guided_filter_color(guide, input, cfg), o.out);
    return 0;
  }
  Tensor g = squeeze_gray(guide);
  if (g.rank() != 2)
    throw std::runtime_error("gf: guide must have 1 or 3 channels");
  GuidedFilterResult res =
      o.naive ? naive_guided_filter(g, input, cfg) : guided_filter(g, input, cfg);
  write_image(res.Q, o.out);
  if (!o.dump_coef.empty()) {
    write_girt(res.coef.A, o.dump_coef + ".A.girt");
    write_girt(res.coef.B, o.dump_coef + ".B.girt");
  }
  return 0;
}

struct TrainOpts {
  std::string task = "gdsr";
  std::string config, data_dir;
  std::string out_ckpt = "checkpoint.girc";
  int steps = 300;
  double lr = 8e-3;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool synthetic = false;
  std::size_t size = 32;
  std::size_t sr_scale = 4;
  std::size_t count = 1;
  int log_interval = 10;
};

std::uint64_t effective_seed(std::uint64_t flag_seed) {
  if (const char* env = std::getenv("GIR_SEED")) return std::stoull(env);
  return flag_seed;
}

SFIGFConfig load_cfg(const std::string& path, const std::string& task) {
  if (!path.empty()) return read_config(path);
  SFIGFConfig cfg;
  if (task == "mfif") cfg.in_channels_i = 1;
  return cfg;
}

std::vector<ImagePair> load_pairs(const TrainOpts& o, std::uint64_t seed) {
  std::vector<ImagePair> pairs;
  if (o.synthetic) {
    for (std::size_t k = 0; k < o.count; ++k) {
      SyntheticSceneSpec scene;
      scene.size = o.size;
      scene.seed = seed + k;
      pairs.push_back(o.task == "mfif" ? make_mfif_pair(scene)
                                       : make_gdsr_pair(scene, o.sr_scale));
    }
    return pairs;
  }
  if (o.data_dir.empty())
    throw std::runtime_error("train: need --synthetic or --data-dir");
  const bool mfif = o.task == "mfif";
  for (std::size_t k = 0;; ++k) {
    const std::string stem = o.data_dir + "/" + std::to_string(k) + "_";
    const std::string a = stem + (mfif ? "i1" : "target") + ".girt";
    if (!fs::exists(a)) break;
    ImagePair p;
    p.task = mfif ? Task::Mfif : Task::Gdsr;
    p.target = read_girt(a);
    p.guide = read_girt(stem + (mfif ? "i2" : "guide") + ".girt");
    const std::string gt = stem + (mfif ? "sharp" : "gt") + ".girt";
    if (fs::exists(gt)) p.ground_truth = read_girt(gt);
    pairs.push_back(std::move(p));
  }
  if (pairs.empty())
    throw std::runtime_error("train: no pairs found in " + o.data_dir);
  return pairs;
}

int cmd_train(const TrainOpts& o) {
  const std::uint64_t seed = effective_seed(o.seed);
  SFIGFConfig cfg = load_cfg(o.config, o.task);
  if (o.seed_given || std::getenv("GIR_SEED")) cfg.seed = seed;
  std::vector<ImagePair> pairs = load_pairs(o, cfg.seed);

  std::optional<SFIGFNet> sfigf;
  std::optional<MfifNet> mfif;
  const bool is_mfif = o.task == "mfif";
  if (is_mfif)
    mfif.emplace(cfg);
  else
    sfigf.emplace(cfg);
  auto& params = is_mfif ? mfif->parameters() : sfigf->parameters();

  Adam opt(o.lr);
  double last_finite = 0.0;
  for (int s = 0; s < o.steps; ++s) {
    const ImagePair& p = pairs[static_cast<std::size_t>(s) % pairs.size()];
    zero_grads(params);
    Tensor loss;
    if (is_mfif) {
      auto [q, q1, q2] = mfif->forward(p.target, p.guide);
      loss = mfif_loss(q, p.target, p.guide);
    } else {
      if (!p.ground_truth)
        throw std::runtime_error("train: gdsr pair lacks ground truth");
      loss = l1_loss(sfigf->forward(p.guide, p.target).Q_Out, *p.ground_truth);
    }
    const double lv = loss.item();
    if (!std::isfinite(lv)) {
      std::cerr << "train: diverged at step " << s << "; last finite loss "
                << last_finite << "\n";
      return 1;
    }
    last_finite = lv;
    if (s % o.log_interval == 0 || s + 1 == o.steps)
      std::cout << "step " << s << " loss " << lv << "\n";
    loss.backward();
    opt.step(params);
  }
  save_checkpoint(params, o.out_ckpt);
  std::cout << "wrote " << o.out_ckpt << "\n";
  return 0;
}

struct InferOpts {
  std::string task = "gdsr";
  std::string config, ckpt, guide, input, out, out_qim, out_qfe;
};

int cmd_infer(const InferOpts& o) {
  SFIGFConfig cfg = load_cfg(o.config, o.task);
  Tensor guide = as_chw1(read_image(o.guide));
  Tensor input = as_chw1(read_image(o.input));
  if (o.task == "mfif") {
    MfifNet net(cfg);
    load_checkpoint(net.parameters(), o.ckpt);
    auto [q, q1, q2] = net.forward(input, guide);
    write_image(q, o.out);
    return 0;
  }
  SFIGFNet net(cfg);
  load_checkpoint(net.parameters(), o.ckpt);
  FusionResult r = net.forward(guide, input);
  write_image(r.Q_Out, o.out);
  if (!o.out_qim.empty()) write_girt(r.Q_Im, o.out_qim);
  if (!o.out_qfe.empty()) write_girt(r.q_Fe, o.out_qfe);
  return 0;
}

struct EvalOpts {
  std::vector<std::string> pred, ref;
  std::string out;
  double peak = 1.0, ratio = 4.0;
};

int cmd_eval(const EvalOpts& o) {
  if (o.pred.size() != o.ref.size() || o.pred.empty())
    throw std::runtime_error("eval: need matching --pred/--ref lists");
  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!o.out.empty()) {
    file.open(o.out);
    if (!file) throw std::runtime_error("eval: cannot write " + o.out);
    os = &file;
  }
  *os << "path,rmse,psnr,ssim,sam,ergas,scc\n";
  for (std::size_t i = 0; i < o.pred.size(); ++i) {
    Tensor p = read_image(o.pred[i]);
    Tensor r = read_image(o.ref[i]);
    MetricReport m = compute_metrics(p, r, o.peak, o.ratio);
    *os << o.pred[i] << "," << m.rmse << "," << m.psnr << "," << m.ssim << ","
        << m.sam << "," << m.ergas << "," << m.scc << "\n";
  }
  return 0;
}

int cmd_gradcheck() {
  selftest::CriterionResult r = selftest::check_gradients();
  std::cout << r.detail << "\n";
  return r.passed ? 0 : 1;
}

struct GenDataOpts {
  std::string task = "gdsr";
  std::string out_dir = "data";
  std::size_t count = 4;
  std::size_t size = 64;
  std::size_t sr_scale = 4;
  std::uint64_t seed = 0;
};

int cmd_gen_data(const GenDataOpts& o) {
  fs::create_directories(o.out_dir);
  const std::uint64_t seed = effective_seed(o.seed);
  for (std::size_t k = 0; k < o.count; ++k) {
    SyntheticSceneSpec scene;
    scene.size = o.size;
    scene.seed = seed + k;
    const std::string stem = o.out_dir + "/" + std::to_string(k) + "_";
    if (o.task == "mfif") {
      ImagePair p = make_mfif_pair(scene);
      write_girt(p.target, stem + "i1.girt");
      write_girt(p.guide, stem + "i2.girt");
      write_girt(*p.ground_truth, stem + "sharp.girt");
    } else {
      ImagePair p = make_gdsr_pair(scene, o.sr_scale);
      write_girt(p.guide, stem + "guide.girt");
      write_girt(p.target, stem + "target.girt");
      write_girt(*p.ground_truth, stem + "gt.girt");
    }
  }
  std::cout << "wrote " << o.count << " " << o.task << " pairs to " << o.out_dir
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"guided image restoration toolkit"};
  app.require_subcommand(1);

  GfOpts gf;
  auto* s_gf = app.add_subcommand("gf", "classical guided filtering");
  s_gf->add_option("--guide", gf.guide, "guidance image")->required();
  s_gf->add_option("--input", gf.input, "image to filter")->required();
  s_gf->add_option("--out", gf.out, "output path")->required();
  s_gf->add_option("--radius", gf.radius, "window radius");
  s_gf->add_option("--eps", gf.eps, "ridge regularizer");
  s_gf->add_flag("--naive", gf.naive, "use the per-window reference solver");
  s_gf->add_option("--dump-coef", gf.dump_coef,
                   "also write <prefix>.A.girt / <prefix>.B.girt");

  TrainOpts tr;
  auto* s_tr = app.add_subcommand("train", "fit a network");
  s_tr->add_option("--task", tr.task)->check(CLI::IsMember({"gdsr", "mfif"}));
  s_tr->add_option("--config", tr.config, "network config file");
  s_tr->add_option("--steps", tr.steps);
  s_tr->add_option("--lr", tr.lr);
  auto* seed_opt = s_tr->add_option("--seed", tr.seed);
  s_tr->add_option("--out-ckpt", tr.out_ckpt);
  s_tr->add_flag("--synthetic", tr.synthetic, "train on generated scenes");
  s_tr->add_option("--data-dir", tr.data_dir, "directory from gen-data");
  s_tr->add_option("--size", tr.size, "synthetic scene size");
  s_tr->add_option("--sr-scale", tr.sr_scale);
  s_tr->add_option("--count", tr.count, "number of synthetic pairs");
  s_tr->add_option("--log-interval", tr.log_interval);

  InferOpts inf;
  auto* s_inf = app.add_subcommand("infer", "run a trained network");
  s_inf->add_option("--task", inf.task)->check(CLI::IsMember({"gdsr", "mfif"}));
  s_inf->add_option("--config", inf.config);
  s_inf->add_option("--ckpt", inf.ckpt)->required();
  s_inf->add_option("--guide", inf.guide)->required();
  s_inf->add_option("--input", inf.input)->required();
  s_inf->add_option("--out", inf.out)->required();
  s_inf->add_option("--out-qim", inf.out_qim, "image-level fusion output");
  s_inf->add_option("--out-qfe", inf.out_qfe, "feature-level fusion output");

  EvalOpts ev;
  auto* s_ev = app.add_subcommand("eval", "metric CSV for prediction/reference pairs");
  s_ev->add_option("--pred", ev.pred)->required();
  s_ev->add_option("--ref", ev.ref)->required();
  s_ev->add_option("--out", ev.out, "CSV path (default stdout)");
  s_ev->add_option("--peak", ev.peak);
  s_ev->add_option("--ratio", ev.ratio);

  auto* s_gc = app.add_subcommand("gradcheck", "finite-difference gradient audit");

  GenDataOpts gd;
  auto* s_gd = app.add_subcommand("gen-data", "materialize synthetic datasets");
  s_gd->add_option("--task", gd.task)->check(CLI::IsMember({"gdsr", "mfif"}));
  s_gd->add_option("--out-dir", gd.out_dir);
  s_gd->add_option("--count", gd.count);
  s_gd->add_option("--size", gd.size);
  s_gd->add_option("--sr-scale", gd.sr_scale);
  s_gd->add_option("--seed", gd.seed);

  auto* s_st = app.add_subcommand("selftest", "run the acceptance checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  tr.seed_given = seed_opt->count() > 0;

  try {
    if (s_gf->parsed()) return cmd_gf(gf);
    if (s_tr->parsed()) return cmd_train(tr);
    if (s_inf->parsed()) return cmd_infer(inf);
    if (s_ev->parsed()) return cmd_eval(ev);
    if (s_gc->parsed()) return cmd_gradcheck();
    if (s_gd->parsed()) return cmd_gen_data(gd);
    if (s_st->parsed()) return selftest::run_all(std::cout) ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
