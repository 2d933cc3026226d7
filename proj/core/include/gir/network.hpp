#pragma once

#include <string>
#include <tuple>
#include <vector>

#include "gir/blocks.hpp"
#include "gir/tensor.hpp"

namespace gir {

struct SFIGFConfig {
  std::size_t base_channels = 8;  // n; scale t runs at n*2^t channels
  std::size_t num_scales = 2;     // 1..4
  std::size_t window = 7;         // attention neighborhood, odd
  std::size_t in_channels_p = 1;
  std::size_t in_channels_i = 3;
  std::size_t out_channels = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

SFIGFConfig read_config(const std::string& path);
void write_config(const SFIGFConfig& cfg, const std::string& path);

/// The {i_t, p_t, ip_t} pyramid. Scale t halves the spatial extent
/// (ceil division) and doubles the channel count.
struct MultiScaleFeatures {
  std::vector<Tensor> i, p, ip;
};

struct FusionResult {
  Tensor Q_Out;        // [C_out,H,W]
  Tensor Q_Im;         // [C_out,H,W]
  Tensor q_Fe;         // [n,H,W]
  Tensor A_Im, B_Im;   // [C_out,H,W]
  Tensor I_reduced;    // [C_out,H,W], the guide as seen by the image-level path
  MultiScaleFeatures feats;
};

/// One extraction step of the coupled pyramid: the two private streams mix
/// with the shared stream through a residual gated block, the shared stream
/// through a plain conv; all three then downsample with channel doubling.
struct CmfeStep {
  Conv2dLayer i_mix, p_mix;    // 2c -> c, 1x1
  NafLikeBlock i_naf, p_naf;   // c -> c
  Conv2dLayer i_down, p_down;  // c -> 2c, 3x3 (followed by avg pool)
  Conv2dLayer ip_conv;         // 2c -> c, 3x3
  Conv2dLayer ip_down;         // c -> 2c, 3x3
};

/// One descend level of the feature aggregation: gated concat of the fused
/// feature with the carried coarser feature, then upsample with channel
/// halving, then a 1x1 reduction so the carry matches the next finer scale.
struct FegfLevel {
  GicaBlock gica;
  CpaConcat cpa;        // [c, c] -> 2c
  UpsampleBlock up;     // 2c -> c (levels >= 1)
  Conv2dLayer reduce;   // c -> c/2, 1x1 (levels >= 1)
};

class SFIGFNet {
 public:
  explicit SFIGFNet(const SFIGFConfig& cfg);

  MultiScaleFeatures cmfe_forward(const Tensor& I, const Tensor& P) const;
  Tensor fegf_forward(const MultiScaleFeatures& feats) const;
  // returns (Q_Im, A_Im, B_Im, I_reduced)
  std::tuple<Tensor, Tensor, Tensor, Tensor> imgf_forward(
      const Tensor& I, const Tensor& P, const MultiScaleFeatures& feats) const;
  FusionResult forward(const Tensor& I, const Tensor& P) const;

  const SFIGFConfig& config() const { return cfg_; }
  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }

  // wiring, public for shape audits and tests
  SFIGFConfig cfg_;
  Conv2dLayer init_i_, init_p_, init_ip_;
  std::vector<CmfeStep> steps_;        // num_scales-1 entries
  Conv2dLayer top_i_mix_, top_p_mix_;  // coarsest-scale refinement, 2c -> c
  NafLikeBlock top_i_naf_, top_p_naf_;
  std::vector<FegfLevel> levels_;      // num_scales entries, level 0 finest
  Conv2dLayer sup_proj_;               // 2c_top -> c_top, 1x1
  Conv2dLayer g1a_, g1b_;              // 2n -> n -> n, 3x3
  Conv2dLayer fa1_, fa2_, fa3_;        // ImGF A path
  Conv2dLayer fb1_, fb2_, fb3_;        // ImGF B path
  Conv2dLayer i_reduce_;               // C_i -> C_out, 1x1 (when needed)
  bool needs_i_reduce_ = false;
  CpaConcat out_cpa_;
  Conv2dLayer out_conv1_, out_conv2_;

 private:
  std::vector<Parameter> params_;
  void check_inputs(const Tensor& I, const Tensor& P) const;
};

/// Dual-guidance wrapper: two independent SFIGF instances guide each other,
/// fused by a 3x3 conv on the concatenated outputs.
class MfifNet {
 public:
  explicit MfifNet(const SFIGFConfig& cfg);

  // returns (Q_out, Q_out1, Q_out2)
  std::tuple<Tensor, Tensor, Tensor> forward(const Tensor& I1,
                                             const Tensor& I2) const;

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }

  SFIGFNet net1_, net2_;
  Conv2dLayer fusion_;

 private:
  std::vector<Parameter> params_;
};

/// Checkpoint container: named GIRT tensors in one file. Round trips are
/// bitwise.
void save_checkpoint(const std::vector<Parameter>& params,
                     const std::string& path);
/// Loads into existing parameters; throws naming the first mismatched or
/// missing entry.
void load_checkpoint(std::vector<Parameter>& params, const std::string& path);

}  // namespace gir
