#include "gir/network.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "gir/image_io.hpp"

namespace gir {

void SFIGFConfig::validate() const {
  if (base_channels == 0)
    throw std::invalid_argument("config: base_channels must be positive");
  if (num_scales < 1 || num_scales > 4)
    throw std::invalid_argument("config: num_scales must be in [1,4], got " +
                                std::to_string(num_scales));
  if (window % 2 == 0 || window == 0)
    throw std::invalid_argument("config: window must be odd and positive");
  if (in_channels_p == 0 || in_channels_i == 0 || out_channels == 0)
    throw std::invalid_argument("config: channel counts must be positive");
}

SFIGFConfig read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  SFIGFConfig cfg;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) continue;
    try {
      if (key == "base_channels") cfg.base_channels = std::stoul(val);
      else if (key == "num_scales") cfg.num_scales = std::stoul(val);
      else if (key == "window") cfg.window = std::stoul(val);
      else if (key == "in_channels_p") cfg.in_channels_p = std::stoul(val);
      else if (key == "in_channels_i") cfg.in_channels_i = std::stoul(val);
      else if (key == "out_channels") cfg.out_channels = std::stoul(val);
      else if (key == "seed") cfg.seed = std::stoull(val);
      else throw std::runtime_error("config: unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw std::runtime_error("config: bad value for '" + key + "': " + val);
    }
  }
  cfg.validate();
  return cfg;
}

void write_config(const SFIGFConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  out << "base_channels = " << cfg.base_channels << "\n"
      << "num_scales = " << cfg.num_scales << "\n"
      << "window = " << cfg.window << "\n"
      << "in_channels_p = " << cfg.in_channels_p << "\n"
      << "in_channels_i = " << cfg.in_channels_i << "\n"
      << "out_channels = " << cfg.out_channels << "\n"
      << "seed = " << cfg.seed << "\n";
}

SFIGFNet::SFIGFNet(const SFIGFConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(cfg_.seed);
  const std::size_t n = cfg_.base_channels;
  const std::size_t S = cfg_.num_scales;

  init_i_ = Conv2dLayer(cfg_.in_channels_i, n, 3, rng);
  init_p_ = Conv2dLayer(cfg_.in_channels_p, n, 3, rng);
  init_ip_ = Conv2dLayer(cfg_.in_channels_i + cfg_.in_channels_p, n, 3, rng);

  for (std::size_t t = 0; t + 1 < S; ++t) {
    const std::size_t c = n << t;
    CmfeStep s;
    s.i_mix = Conv2dLayer(2 * c, c, 1, rng);
    s.i_naf = NafLikeBlock(c, rng);
    s.i_down = Conv2dLayer(c, 2 * c, 3, rng);
    s.p_mix = Conv2dLayer(2 * c, c, 1, rng);
    s.p_naf = NafLikeBlock(c, rng);
    s.p_down = Conv2dLayer(c, 2 * c, 3, rng);
    s.ip_conv = Conv2dLayer(2 * c, c, 3, rng);
    s.ip_down = Conv2dLayer(c, 2 * c, 3, rng);
    steps_.push_back(std::move(s));
  }
  {
    const std::size_t c = n << (S - 1);
    top_i_mix_ = Conv2dLayer(2 * c, c, 1, rng);
    top_i_naf_ = NafLikeBlock(c, rng);
    top_p_mix_ = Conv2dLayer(2 * c, c, 1, rng);
    top_p_naf_ = NafLikeBlock(c, rng);
  }

  for (std::size_t t = 0; t < S; ++t) {
    const std::size_t c = n << t;
    FegfLevel l;
    l.gica = GicaBlock(c, cfg_.window, rng);
    l.cpa = CpaConcat(c, c, rng);
    if (t >= 1) {
      l.up = UpsampleBlock(2 * c, rng);
      l.reduce = Conv2dLayer(c, c / 2, 1, rng);
    }
    levels_.push_back(std::move(l));
  }
  const std::size_t c_top = n << (S - 1);
  sup_proj_ = Conv2dLayer(2 * c_top, c_top, 1, rng);
  g1a_ = Conv2dLayer(2 * n, n, 3, rng);
  g1b_ = Conv2dLayer(n, n, 3, rng);

  fa1_ = Conv2dLayer(2 * n + cfg_.in_channels_i, n, 3, rng);
  fa2_ = Conv2dLayer(n, n, 3, rng);
  fa3_ = Conv2dLayer(n, cfg_.out_channels, 3, rng);
  fb1_ = Conv2dLayer(cfg_.out_channels + cfg_.in_channels_p + cfg_.in_channels_i,
                     n, 3, rng);
  fb2_ = Conv2dLayer(n, n, 3, rng);
  fb3_ = Conv2dLayer(n, cfg_.out_channels, 3, rng);
  needs_i_reduce_ = cfg_.in_channels_i != cfg_.out_channels;
  if (needs_i_reduce_)
    i_reduce_ = Conv2dLayer(cfg_.in_channels_i, cfg_.out_channels, 1, rng);

  out_cpa_ = CpaConcat(cfg_.out_channels, n, rng);
  out_conv1_ = Conv2dLayer(cfg_.out_channels + n, cfg_.out_channels + n, 3, rng);
  out_conv2_ = Conv2dLayer(cfg_.out_channels + n, cfg_.out_channels, 3, rng);

  init_i_.collect("cmfe.init_i", params_);
  init_p_.collect("cmfe.init_p", params_);
  init_ip_.collect("cmfe.init_ip", params_);
  for (std::size_t t = 0; t < steps_.size(); ++t) {
    const std::string pre = "cmfe.step" + std::to_string(t);
    steps_[t].i_mix.collect(pre + ".i.mix", params_);
    steps_[t].i_naf.collect(pre + ".i.naf", params_);
    steps_[t].i_down.collect(pre + ".i.down", params_);
    steps_[t].p_mix.collect(pre + ".p.mix", params_);
    steps_[t].p_naf.collect(pre + ".p.naf", params_);
    steps_[t].p_down.collect(pre + ".p.down", params_);
    steps_[t].ip_conv.collect(pre + ".ip.conv", params_);
    steps_[t].ip_down.collect(pre + ".ip.down", params_);
  }
  top_i_mix_.collect("cmfe.top.i.mix", params_);
  top_i_naf_.collect("cmfe.top.i.naf", params_);
  top_p_mix_.collect("cmfe.top.p.mix", params_);
  top_p_naf_.collect("cmfe.top.p.naf", params_);
  for (std::size_t t = 0; t < levels_.size(); ++t) {
    const std::string pre = "fegf.level" + std::to_string(t);
    levels_[t].gica.collect(pre + ".gica", params_);
    levels_[t].cpa.collect(pre + ".cpa", params_);
    if (t >= 1) {
      levels_[t].up.collect(pre + ".up", params_);
      levels_[t].reduce.collect(pre + ".reduce", params_);
    }
  }
  sup_proj_.collect("fegf.sup_proj", params_);
  g1a_.collect("fegf.g1a", params_);
  g1b_.collect("fegf.g1b", params_);
  fa1_.collect("imgf.fa1", params_);
  fa2_.collect("imgf.fa2", params_);
  fa3_.collect("imgf.fa3", params_);
  fb1_.collect("imgf.fb1", params_);
  fb2_.collect("imgf.fb2", params_);
  fb3_.collect("imgf.fb3", params_);
  if (needs_i_reduce_) i_reduce_.collect("imgf.i_reduce", params_);
  out_cpa_.collect("output.cpa", params_);
  out_conv1_.collect("output.conv1", params_);
  out_conv2_.collect("output.conv2", params_);
}

void SFIGFNet::check_inputs(const Tensor& I, const Tensor& P) const {
  if (I.rank() != 3 || P.rank() != 3)
    throw std::invalid_argument("sfigf: inputs must be [C,H,W]");
  if (I.dim(0) != cfg_.in_channels_i)
    throw std::invalid_argument("sfigf: guide has " + std::to_string(I.dim(0)) +
                                " channels, config expects " +
                                std::to_string(cfg_.in_channels_i));
  if (P.dim(0) != cfg_.in_channels_p)
    throw std::invalid_argument("sfigf: input has " + std::to_string(P.dim(0)) +
                                " channels, config expects " +
                                std::to_string(cfg_.in_channels_p));
  if (I.dim(1) != P.dim(1) || I.dim(2) != P.dim(2))
    throw std::invalid_argument("sfigf: spatial mismatch " +
                                shape_str(I.shape()) + " vs " +
                                shape_str(P.shape()));
}

MultiScaleFeatures SFIGFNet::cmfe_forward(const Tensor& I,
                                          const Tensor& P) const {
  check_inputs(I, P);
  MultiScaleFeatures f;
  f.i.push_back(gelu(init_i_.forward(I)));
  f.p.push_back(gelu(init_p_.forward(P)));
  f.ip.push_back(gelu(init_ip_.forward(concat(I, P, 0))));
  for (const auto& s : steps_) {
    const Tensor& it = f.i.back();
    const Tensor& pt = f.p.back();
    const Tensor& ipt = f.ip.back();
    Tensor i_next = add(s.i_naf.forward(s.i_mix.forward(concat(it, ipt, 0))), it);
    Tensor p_next = add(s.p_naf.forward(s.p_mix.forward(concat(pt, ipt, 0))), pt);
    Tensor ip_next = gelu(s.ip_conv.forward(concat(it, pt, 0)));
    f.i.push_back(avg_pool2(s.i_down.forward(i_next)));
    f.p.push_back(avg_pool2(s.p_down.forward(p_next)));
    f.ip.push_back(avg_pool2(s.ip_down.forward(ip_next)));
  }
  {
    const Tensor it = f.i.back();
    const Tensor pt = f.p.back();
    const Tensor& ipt = f.ip.back();
    f.i.back() = add(top_i_naf_.forward(top_i_mix_.forward(concat(it, ipt, 0))), it);
    f.p.back() = add(top_p_naf_.forward(top_p_mix_.forward(concat(pt, ipt, 0))), pt);
  }
  return f;
}

Tensor SFIGFNet::fegf_forward(const MultiScaleFeatures& f) const {
  const std::size_t S = cfg_.num_scales;
  if (f.i.size() != S || f.p.size() != S)
    throw std::invalid_argument("fegf: pyramid has " +
                                std::to_string(f.i.size()) +
                                " scales, config expects " + std::to_string(S));
  std::vector<Tensor> q(S);
  for (std::size_t t = 0; t < S; ++t)
    q[t] = levels_[t].gica.forward(f.p[t], f.i[t]).first;

  Tensor carry = sup_proj_.forward(concat(f.i[S - 1], f.p[S - 1], 0));
  for (std::size_t t = S; t-- > 1;) {
    Tensor x = levels_[t].cpa.forward(q[t], carry);
    carry = levels_[t].reduce.forward(levels_[t].up.forward(x));
  }
  Tensor x0 = levels_[0].cpa.forward(q[0], carry);
  return g1b_.forward(gelu(g1a_.forward(x0)));
}

std::tuple<Tensor, Tensor, Tensor, Tensor> SFIGFNet::imgf_forward(
    const Tensor& I, const Tensor& P, const MultiScaleFeatures& f) const {
  const Tensor in_a[] = {f.i[0], f.p[0], I};
  Tensor A = fa3_.forward(
      gelu(fa2_.forward(gelu(fa1_.forward(concat(std::span<const Tensor>(in_a, 3), 0))))));
  const Tensor in_b[] = {A, P, I};
  Tensor B = fb3_.forward(
      gelu(fb2_.forward(gelu(fb1_.forward(concat(std::span<const Tensor>(in_b, 3), 0))))));
  Tensor i_red = needs_i_reduce_ ? i_reduce_.forward(I) : I;
  Tensor Q_Im = add(mul(A, i_red), B);
  return {Q_Im, A, B, i_red};
}

FusionResult SFIGFNet::forward(const Tensor& I, const Tensor& P) const {
  FusionResult r;
  r.feats = cmfe_forward(I, P);
  r.q_Fe = fegf_forward(r.feats);
  std::tie(r.Q_Im, r.A_Im, r.B_Im, r.I_reduced) = imgf_forward(I, P, r.feats);
  Tensor z = out_cpa_.forward(r.Q_Im, r.q_Fe);
  r.Q_Out = out_conv2_.forward(gelu(out_conv1_.forward(z)));
  return r;
}

MfifNet::MfifNet(const SFIGFConfig& cfg) : net1_(cfg), net2_(cfg) {
  if (cfg.in_channels_p != cfg.in_channels_i)
    throw std::invalid_argument(
        "mfif: the two sources must share a channel count");
  Rng rng(cfg.seed + 0x9e3779b97f4a7c15ULL);
  fusion_ = Conv2dLayer(2 * cfg.out_channels, cfg.out_channels, 3, rng);
  for (const auto& p : net1_.parameters())
    params_.push_back({"net1." + p.name, p.value});
  for (const auto& p : net2_.parameters())
    params_.push_back({"net2." + p.name, p.value});
  fusion_.collect("fusion", params_);
}

std::tuple<Tensor, Tensor, Tensor> MfifNet::forward(const Tensor& I1,
                                                    const Tensor& I2) const {
  if (I1.shape() != I2.shape())
    throw std::invalid_argument("mfif: input shapes differ: " +
                                shape_str(I1.shape()) + " vs " +
                                shape_str(I2.shape()));
  Tensor q1 = net1_.forward(/*I=*/I2, /*P=*/I1).Q_Out;
  Tensor q2 = net2_.forward(/*I=*/I1, /*P=*/I2).Q_Out;
  Tensor q = fusion_.forward(concat(q1, q2, 0));
  return {q, q1, q2};
}

void save_checkpoint(const std::vector<Parameter>& params,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out.write("GIRC", 4);
  io::write_u32(out, 1);  // version
  io::write_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    io::write_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    io::girt_write(out, p.value);
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

void load_checkpoint(std::vector<Parameter>& params, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "GIRC")
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const std::uint32_t version = io::read_u32(in);
  if (version != 1)
    throw std::runtime_error("checkpoint: unsupported version " +
                             std::to_string(version));
  const std::uint32_t count = io::read_u32(in);
  std::map<std::string, Tensor> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = io::read_u32(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    entries.emplace(name, io::girt_read(in));
  }
  if (!in) throw std::runtime_error("checkpoint: truncated file " + path);

  for (auto& p : params) {
    auto it = entries.find(p.name);
    if (it == entries.end())
      throw std::runtime_error("checkpoint: missing parameter '" + p.name +
                               "'");
    if (it->second.shape() != p.value.shape())
      throw std::runtime_error("checkpoint: shape mismatch for '" + p.name +
                               "': file has " + shape_str(it->second.shape()) +
                               ", network expects " +
                               shape_str(p.value.shape()));
    p.value.data() = it->second.data();
    entries.erase(it);
  }
  if (!entries.empty())
    throw std::runtime_error("checkpoint: unused tensor '" +
                             entries.begin()->first + "' in " + path);
}

}  // namespace gir
