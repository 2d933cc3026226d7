#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <map>
#include <set>

#include "gir/network.hpp"
#include "gir/ops.hpp"
#include "gir/optim.hpp"
#include "gir/tensor.hpp"
#include "test_util.hpp"

using namespace gir;
using testutil::max_abs_diff;
using testutil::random_tensor;

namespace {

SFIGFConfig toy_cfg(std::uint64_t seed = 1) {
  SFIGFConfig cfg;
  cfg.base_channels = 4;
  cfg.num_scales = 2;
  cfg.window = 3;
  cfg.in_channels_p = 1;
  cfg.in_channels_i = 3;
  cfg.out_channels = 1;
  cfg.seed = seed;
  return cfg;
}

struct TempFile {
  std::string path;
  explicit TempFile(const char* name)
      : path((std::filesystem::temp_directory_path() / name).string()) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("config validation and file round trip") {
  SFIGFConfig cfg = toy_cfg();
  cfg.base_channels = 6;
  cfg.num_scales = 3;
  cfg.seed = 99;
  TempFile f("gir_cfg_test.cfg");
  write_config(cfg, f.path);
  SFIGFConfig back = read_config(f.path);
  CHECK(back.base_channels == 6);
  CHECK(back.num_scales == 3);
  CHECK(back.window == cfg.window);
  CHECK(back.seed == 99);

  SFIGFConfig bad = toy_cfg();
  bad.num_scales = 5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = toy_cfg();
  bad.window = 4;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = toy_cfg();
  bad.out_channels = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  // unknown keys are an error, not silently ignored
  {
    std::FILE* fp = std::fopen(f.path.c_str(), "w");
    std::fputs("base_channels = 4\nnobody_knows_me = 1\n", fp);
    std::fclose(fp);
  }
  CHECK_THROWS_AS(read_config(f.path), std::runtime_error);
}

TEST_CASE("parameter names are unique and all require gradients") {
  SFIGFNet net(toy_cfg());
  std::set<std::string> names;
  for (const auto& p : net.parameters()) {
    CHECK(names.insert(p.name).second);
    CHECK(p.value.requires_grad());
  }
  CHECK(names.size() > 30);
}

TEST_CASE("construction and forward are deterministic in the seed") {
  SFIGFNet a(toy_cfg(5)), b(toy_cfg(5)), c(toy_cfg(6));
  REQUIRE(a.parameters().size() == b.parameters().size());
  for (std::size_t i = 0; i < a.parameters().size(); ++i)
    CHECK(max_abs_diff(a.parameters()[i].value, b.parameters()[i].value) ==
          0.0);
  bool differs = false;
  for (std::size_t i = 0; i < a.parameters().size(); ++i)
    if (max_abs_diff(a.parameters()[i].value, c.parameters()[i].value) > 0.0)
      differs = true;
  CHECK(differs);

  Rng rng(40);
  Tensor I = random_tensor({3, 8, 8}, rng, 0.0, 1.0);
  Tensor P = random_tensor({1, 8, 8}, rng, 0.0, 1.0);
  CHECK(max_abs_diff(a.forward(I, P).Q_Out, b.forward(I, P).Q_Out) == 0.0);
}

TEST_CASE("pyramid shapes follow the channel-doubling schedule") {
  SFIGFConfig cfg = toy_cfg();
  cfg.num_scales = 3;
  SFIGFNet net(cfg);
  Rng rng(41);
  Tensor I = random_tensor({3, 12, 12}, rng, 0.0, 1.0);
  Tensor P = random_tensor({1, 12, 12}, rng, 0.0, 1.0);
  MultiScaleFeatures f = net.cmfe_forward(I, P);
  REQUIRE(f.i.size() == 3);
  CHECK(f.i[0].shape() == Shape{4, 12, 12});
  CHECK(f.i[1].shape() == Shape{8, 6, 6});
  CHECK(f.i[2].shape() == Shape{16, 3, 3});
  CHECK(f.p[2].shape() == Shape{16, 3, 3});
  CHECK(f.ip[2].shape() == Shape{16, 3, 3});

  FusionResult r = net.forward(I, P);
  CHECK(r.Q_Out.shape() == Shape{1, 12, 12});
  CHECK(r.Q_Im.shape() == Shape{1, 12, 12});
  CHECK(r.q_Fe.shape() == Shape{4, 12, 12});
  CHECK(r.A_Im.shape() == Shape{1, 12, 12});
}

TEST_CASE("single-scale network still assembles") {
  SFIGFConfig cfg = toy_cfg();
  cfg.num_scales = 1;
  SFIGFNet net(cfg);
  Rng rng(42);
  Tensor I = random_tensor({3, 6, 6}, rng, 0.0, 1.0);
  Tensor P = random_tensor({1, 6, 6}, rng, 0.0, 1.0);
  CHECK(net.forward(I, P).Q_Out.shape() == Shape{1, 6, 6});
}

TEST_CASE("input shape mismatches are rejected") {
  SFIGFNet net(toy_cfg());
  Rng rng(43);
  Tensor I = random_tensor({3, 8, 8}, rng);
  Tensor P = random_tensor({1, 8, 8}, rng);
  CHECK_THROWS_AS(net.forward(P, P), std::invalid_argument);
  CHECK_THROWS_AS(net.forward(I, random_tensor({1, 8, 9}, rng)),
                  std::invalid_argument);
}

TEST_CASE("checkpoint round trip is bitwise and validates strictly") {
  SFIGFNet net(toy_cfg(7));
  TempFile f("gir_ckpt_test.girc");
  save_checkpoint(net.parameters(), f.path);

  SFIGFNet other(toy_cfg(8));
  bool differed = false;
  for (std::size_t i = 0; i < net.parameters().size(); ++i)
    if (max_abs_diff(net.parameters()[i].value, other.parameters()[i].value) >
        0.0)
      differed = true;
  CHECK(differed);
  load_checkpoint(other.parameters(), f.path);
  for (std::size_t i = 0; i < net.parameters().size(); ++i)
    CHECK(max_abs_diff(net.parameters()[i].value, other.parameters()[i].value) ==
          0.0);

  SUBCASE("bad magic") {
    std::FILE* fp = std::fopen(f.path.c_str(), "wb");
    std::fputs("NOPE", fp);
    std::fclose(fp);
    CHECK_THROWS_AS(load_checkpoint(other.parameters(), f.path),
                    std::runtime_error);
  }
  SUBCASE("missing parameter") {
    std::vector<Parameter> fewer(net.parameters().begin(),
                                 net.parameters().end() - 1);
    save_checkpoint(fewer, f.path);
    CHECK_THROWS_WITH_AS(load_checkpoint(other.parameters(), f.path),
                         doctest::Contains("missing"), std::runtime_error);
  }
  SUBCASE("unused extra parameter") {
    auto extra = net.parameters();
    extra.push_back({"stowaway", Tensor({2}, 0.0)});
    save_checkpoint(extra, f.path);
    CHECK_THROWS_WITH_AS(load_checkpoint(other.parameters(), f.path),
                         doctest::Contains("stowaway"), std::runtime_error);
  }
  SUBCASE("shape mismatch names the parameter") {
    SFIGFConfig big = toy_cfg();
    big.base_channels = 8;
    SFIGFNet wrong(big);
    CHECK_THROWS_WITH_AS(load_checkpoint(wrong.parameters(), f.path),
                         doctest::Contains("shape mismatch"),
                         std::runtime_error);
  }
}

TEST_CASE("mfif wrapper is symmetric up to its parameter swap") {
  SFIGFConfig cfg = toy_cfg(9);
  cfg.in_channels_i = 1;  // both sources single channel
  MfifNet a(cfg);
  Rng rng(44);
  Tensor i1 = random_tensor({1, 8, 8}, rng, 0.0, 1.0);
  Tensor i2 = random_tensor({1, 8, 8}, rng, 0.0, 1.0);
  auto [q, q1, q2] = a.forward(i1, i2);

  // swap the two branch parameter sets and the fusion conv's channel blocks
  MfifNet b(cfg);
  std::map<std::string, Tensor> src;
  for (const auto& p : a.parameters()) src.emplace(p.name, p.value);
  for (auto& p : b.parameters()) {
    std::string from = p.name;
    if (from.rfind("net1.", 0) == 0)
      from = "net2." + from.substr(5);
    else if (from.rfind("net2.", 0) == 0)
      from = "net1." + from.substr(5);
    if (from.rfind("fusion", 0) == 0) continue;
    p.value.data() = src.at(from).data();
  }
  const auto& w = a.fusion_.weight;  // [C, 2C, 3, 3]
  const std::size_t co = w.dim(0), ci = w.dim(1), k = w.dim(2);
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t c = 0; c < ci; ++c)
      for (std::size_t u = 0; u < k * k; ++u)
        b.fusion_.weight[(o * ci + (c + ci / 2) % ci) * k * k + u] =
            w[(o * ci + c) * k * k + u];
  b.fusion_.bias.data() = a.fusion_.bias.data();

  auto [qs, qs1, qs2] = b.forward(i2, i1);
  CHECK(max_abs_diff(qs1, q2) == 0.0);  // branches swap exactly
  CHECK(max_abs_diff(qs2, q1) == 0.0);
  CHECK(max_abs_diff(qs, q) < 1e-12);  // fusion sums in a different order
}

TEST_CASE("mfif wrapper rejects mismatched source channels") {
  SFIGFConfig cfg = toy_cfg();
  CHECK_THROWS_AS(MfifNet{cfg}, std::invalid_argument);  // 1 vs 3 channels
}

TEST_CASE("optimizers update parameters and insist on gradients") {
  Tensor x({2}, {5.0, -3.0}, true);
  std::vector<Parameter> ps{{"x", x}};

  SUBCASE("sgd descends a quadratic") {
    for (int i = 0; i < 50; ++i) {
      zero_grads(ps);
      sum(mul(x, x)).backward();
      sgd_step(ps, 0.1);
    }
    CHECK(std::fabs(x[0]) < 1e-3);
    CHECK(std::fabs(x[1]) < 1e-3);
  }
  SUBCASE("adam descends a quadratic") {
    Adam opt(0.3);
    for (int i = 0; i < 200; ++i) {
      zero_grads(ps);
      sum(mul(x, x)).backward();
      opt.step(ps);
    }
    CHECK(std::fabs(x[0]) < 1e-2);
    CHECK(std::fabs(x[1]) < 1e-2);
  }
  SUBCASE("missing gradient is an error that names the parameter") {
    Tensor fresh({2}, 1.0, true);
    std::vector<Parameter> qs{{"lonely", fresh}};
    CHECK_THROWS_WITH_AS(sgd_step(qs, 0.1), doctest::Contains("lonely"),
                         std::runtime_error);
  }
}
