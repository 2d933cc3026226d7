// End-to-end tests that drive the installed `gir` binary through a shell.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#ifndef _WIN32
#include <unistd.h>
#endif
#include <fstream>
#include <sstream>
#include <string>

#include "gir/data.hpp"
#include "gir/image_io.hpp"
#include "gir/metrics.hpp"
#include "gir/network.hpp"
#include "gir/tensor.hpp"

namespace fs = std::filesystem;
using namespace gir;

namespace {

int run(const std::string& args, bool quiet = true) {
  std::string cmd = std::string(GIR_BIN) + " " + args;
  if (quiet) cmd += " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  if (status < 0) return -1;
#ifdef _WIN32
  return status;
#else
  return WEXITSTATUS(status);
#endif
}

// per-process scratch directory, wiped when the suite ends
struct Scratch {
  fs::path dir;
  Scratch() {
    dir = fs::temp_directory_path() /
          ("gir_cli_" + std::to_string(static_cast<unsigned>(::getpid())));
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator()(const char* name) const {
    return (dir / name).string();
  }
};

Scratch& scratch() {
  static Scratch s;
  return s;
}

void write_toy_config(const std::string& path) {
  std::ofstream out(path);
  out << "base_channels = 4\nnum_scales = 2\nwindow = 7\n"
      << "in_channels_p = 1\nin_channels_i = 3\nout_channels = 1\nseed = 3\n";
}

std::vector<unsigned char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double rmse_files(const std::string& a, const std::string& b) {
  return rmse(read_image(a), read_image(b));
}

}  // namespace

TEST_CASE("usage errors exit with 2, help with 0") {
  CHECK(run("") == 2);                         // a subcommand is required
  CHECK(run("frobnicate") == 2);               // unknown subcommand
  CHECK(run("gf --guide a.girt") == 2);        // missing required options
  CHECK(run("train --task juggling") == 2);    // invalid enum value
  CHECK(run("--help") == 0);
  CHECK(run("gf --help") == 0);
}

TEST_CASE("gf: self-guidance with eps 0 returns the input unchanged") {
  auto& s = scratch();
  Rng rng(70);
  Tensor img({16, 16});
  for (auto& v : img.data()) v = rng.uniform(0.0, 1.0);
  write_girt(img, s("in.girt"));

  REQUIRE(run("gf --guide " + s("in.girt") + " --input " + s("in.girt") +
              " --eps 0 --radius 3 --out " + s("id.girt")) == 0);
  Tensor out = read_girt(s("id.girt"));
  REQUIRE(out.shape() == img.shape());
  for (std::size_t i = 0; i < img.size(); ++i)
    CHECK(out[i] == doctest::Approx(img[i]).epsilon(1e-12));
}

TEST_CASE("gf: naive and fast paths agree, coefficients reconstruct Q") {
  auto& s = scratch();
  Rng rng(71);
  Tensor guide({12, 12}), input({12, 12});
  for (auto& v : guide.data()) v = rng.uniform(0.0, 1.0);
  for (auto& v : input.data()) v = rng.uniform(0.0, 1.0);
  write_girt(guide, s("g.girt"));
  write_girt(input, s("p.girt"));

  const std::string common = "gf --guide " + s("g.girt") + " --input " +
                             s("p.girt") + " --radius 2 --eps 1e-3 --out ";
  REQUIRE(run(common + s("fast.girt") + " --dump-coef " + s("c")) == 0);
  REQUIRE(run(common + s("slow.girt") + " --naive") == 0);
  Tensor qf = read_girt(s("fast.girt"));
  Tensor qs = read_girt(s("slow.girt"));
  Tensor A = read_girt(s("c") + ".A.girt");
  Tensor B = read_girt(s("c") + ".B.girt");
  for (std::size_t i = 0; i < qf.size(); ++i) {
    CHECK(qf[i] == doctest::Approx(qs[i]).epsilon(1e-9));
    CHECK(qf[i] == A[i] * guide[i] + B[i]);
  }
}

TEST_CASE("gf: color guide refuses coefficient dumps, missing files exit 2") {
  auto& s = scratch();
  Tensor rgb({3, 8, 8}, 0.5);
  Tensor p({8, 8}, 0.25);
  write_girt(rgb, s("rgb.girt"));
  write_girt(p, s("mono.girt"));
  REQUIRE(run("gf --guide " + s("rgb.girt") + " --input " + s("mono.girt") +
              " --out " + s("q.girt")) == 0);
  CHECK(run("gf --guide " + s("rgb.girt") + " --input " + s("mono.girt") +
            " --out " + s("q.girt") + " --dump-coef " + s("c2")) == 2);
  CHECK(run("gf --guide " + s("nope.girt") + " --input " + s("mono.girt") +
            " --out " + s("q.girt")) == 2);
}

TEST_CASE("train: zero steps writes a loadable checkpoint of the init") {
  auto& s = scratch();
  write_toy_config(s("toy.cfg"));
  REQUIRE(run("train --synthetic --steps 0 --size 32 --config " + s("toy.cfg") +
              " --out-ckpt " + s("init.girc")) == 0);
  SFIGFConfig cfg = read_config(s("toy.cfg"));
  SFIGFNet net(cfg);
  load_checkpoint(net.parameters(), s("init.girc"));  // throws on mismatch
  // the stored weights are exactly the seeded initialization
  SFIGFNet fresh(cfg);
  for (std::size_t i = 0; i < net.parameters().size(); ++i)
    for (std::size_t k = 0; k < net.parameters()[i].value.size(); ++k)
      CHECK(net.parameters()[i].value[k] == fresh.parameters()[i].value[k]);
}

TEST_CASE("GIR_SEED overrides --seed") {
  auto& s = scratch();
  write_toy_config(s("toy.cfg"));
  const std::string common = " --synthetic --steps 0 --size 32 --config " +
                             s("toy.cfg") + " --out-ckpt ";
  REQUIRE(run("train --seed 7" + common + s("a.girc")) == 0);
  REQUIRE(run("train --seed 3" + common + s("b.girc")) == 0);
  CHECK(slurp(s("a.girc")) != slurp(s("b.girc")));
  // env beats the flag: seed 3 on the command line, 7 in the environment
  const std::string env_cmd = "GIR_SEED=7 " + std::string(GIR_BIN) +
                              " train --seed 3" + common + s("c.girc") +
                              " >/dev/null 2>&1";
  REQUIRE(std::system(env_cmd.c_str()) == 0);
  CHECK(slurp(s("c.girc")) == slurp(s("a.girc")));
}

TEST_CASE("train then infer: a small net overfits one synthetic scene") {
  auto& s = scratch();
  write_toy_config(s("toy.cfg"));
  REQUIRE(run("train --task gdsr --synthetic --seed 3 --steps 300 --lr 8e-3"
              " --size 32 --sr-scale 4 --count 1 --config " +
              s("toy.cfg") + " --out-ckpt " + s("fit.girc")) == 0);
  // regenerate the identical training pair on disk
  REQUIRE(run("gen-data --task gdsr --seed 3 --count 1 --size 32 --sr-scale 4"
              " --out-dir " + s("data")) == 0);
  REQUIRE(run("infer --task gdsr --config " + s("toy.cfg") + " --ckpt " +
              s("fit.girc") + " --guide " + s("data") + "/0_guide.girt" +
              " --input " + s("data") + "/0_target.girt --out " +
              s("pred.girt") + " --out-qim " + s("qim.girt")) == 0);
  const double err = rmse_files(s("pred.girt"), s("data") + "/0_gt.girt");
  CHECK(err < 0.12);
  // the fused prediction should clearly beat the degraded input it started from
  const double base = rmse_files(s("data") + "/0_target.girt",
                                 s("data") + "/0_gt.girt");
  CHECK(err < 0.8 * base);
  CHECK(read_girt(s("qim.girt")).shape() == Shape{1, 32, 32});
}

TEST_CASE("gen-data feeds train --data-dir for both tasks") {
  auto& s = scratch();
  write_toy_config(s("toy.cfg"));
  REQUIRE(run("gen-data --task gdsr --count 2 --size 32 --out-dir " +
              s("gdsr_data")) == 0);
  CHECK(fs::exists(s("gdsr_data") + "/1_gt.girt"));
  REQUIRE(run("train --task gdsr --steps 2 --config " + s("toy.cfg") +
              " --data-dir " + s("gdsr_data") + " --out-ckpt " +
              s("d.girc")) == 0);
  CHECK(fs::exists(s("d.girc")));

  REQUIRE(run("gen-data --task mfif --count 1 --size 32 --out-dir " +
              s("mfif_data")) == 0);
  REQUIRE(run("train --task mfif --steps 2 --data-dir " + s("mfif_data") +
              " --out-ckpt " + s("m.girc")) == 0);
  REQUIRE(run("infer --task mfif --ckpt " + s("m.girc") + " --input " +
              s("mfif_data") + "/0_i1.girt --guide " + s("mfif_data") +
              "/0_i2.girt --out " + s("fused.girt")) == 0);
  CHECK(read_girt(s("fused.girt")).shape() == Shape{1, 32, 32});

  // an empty directory is a runtime error, not a crash
  fs::create_directories(s("empty"));
  CHECK(run("train --task gdsr --steps 1 --data-dir " + s("empty")) == 2);
}

TEST_CASE("eval: identical images give the identity metric row") {
  auto& s = scratch();
  Rng rng(72);
  Tensor img({1, 16, 16});
  for (auto& v : img.data()) v = rng.uniform(0.1, 0.9);
  write_girt(img, s("e.girt"));
  REQUIRE(run("eval --pred " + s("e.girt") + " --ref " + s("e.girt") +
              " --out " + s("m.csv")) == 0);

  std::ifstream csv(s("m.csv"));
  std::string header, row;
  REQUIRE(std::getline(csv, header));
  CHECK(header == "path,rmse,psnr,ssim,sam,ergas,scc");
  REQUIRE(std::getline(csv, row));
  std::stringstream ss(row);
  std::string cell;
  std::getline(ss, cell, ',');  // path
  CHECK(cell == s("e.girt"));
  std::getline(ss, cell, ',');
  CHECK(std::stod(cell) == 0.0);  // rmse
  std::getline(ss, cell, ',');
  CHECK(std::stod(cell) == 99.0);  // psnr sentinel
  std::getline(ss, cell, ',');
  CHECK(std::stod(cell) == doctest::Approx(1.0));  // ssim

  CHECK(run("eval --pred " + s("e.girt")) == 2);  // --ref is required
}

TEST_CASE("gradcheck subcommand exits cleanly") {
  CHECK(run("gradcheck") == 0);
}
