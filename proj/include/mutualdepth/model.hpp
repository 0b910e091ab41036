#pragma once

#include <cstdint>
#include <vector>

#include "mutualdepth/autograd.hpp"
#include "mutualdepth/core.hpp"
#include "mutualdepth/rng.hpp"

namespace md {

// Configuration of one depth + uncertainty branch.
struct BranchConfig {
  // Encoder stage output channels, shallowest to deepest. Five stride-2
  // stages, so the receptive field spans a 1/32-resolution bottleneck.
  std::vector<int64_t> widths{16, 32, 64, 128, 256};
  double depth_min = kDepthMin;
  double depth_max = kDepthMax;

  void validate() const;
};

// Multi-scale prediction of one branch. Index s holds the 1/2^s-resolution
// maps for s = 0..3; shapes are [ceil(H/2^s), ceil(W/2^s)] for a [3,H,W]
// input. depth is metric and bounded to [depth_min, depth_max]; log_sigma is
// the raw log-uncertainty head output (convert with sigma_from_log).
struct BranchOutput {
  std::vector<Var> depth;
  std::vector<Var> log_sigma;
};

// One shared encoder feeding two mirrored U-Net decoders: one for depth, one
// for log-uncertainty. The two branches of the framework are two instances of
// this class; they share no parameters or buffers.
class BranchNetwork {
 public:
  // Draws every weight from `rng` (Kaiming fan-in initialization, zero
  // biases), so a seeded Rng makes construction reproducible bit for bit.
  BranchNetwork(const BranchConfig& config, Rng& rng);

  // Runs the network on a [3,H,W] image in [0,1]. H and W must be divisible
  // by 32, or large enough (> 16) for reflection padding to reach the next
  // multiple of 32; padded borders are cropped off the outputs. Non-finite
  // inputs or outputs raise.
  BranchOutput forward(const Tensor& image) const;

  // Parameters in fixed construction order; optimizer state and checkpoints
  // index into this vector.
  const std::vector<Var>& parameters() const { return params_; }
  std::vector<Var>& parameters() { return params_; }
  int64_t parameter_count() const;

  const BranchConfig& config() const { return config_; }

 private:
  struct Conv {
    Var w;  // [K,C,3,3]
    Var b;  // [K]
    int stride = 1;
  };
  struct Decoder {
    std::vector<Conv> up0, up1;  // per stage, deepest first
    std::vector<Conv> head;      // per scale, full resolution first
  };

  Conv make_conv(int64_t in_ch, int64_t out_ch, int stride, Rng& rng);
  Decoder make_decoder(Rng& rng);
  Var apply(const Conv& conv, const Var& x) const;
  std::vector<Var> run_decoder(const Decoder& dec, const std::vector<Var>& enc,
                               int64_t h, int64_t w) const;

  BranchConfig config_;
  std::vector<int64_t> dec_widths_;
  std::vector<Conv> encoder_;  // 5 stride-2 stages
  Decoder depth_decoder_;
  Decoder sigma_decoder_;
  std::vector<Var> params_;
};

}  // namespace md
