#include "mutualdepth/model.hpp"

#include <cmath>
#include <string>

#include "mutualdepth/nn.hpp"

namespace md {

namespace {

constexpr int kStages = 5;
constexpr int kScales = 4;
constexpr int64_t kStrideProduct = 32;  // 2^kStages

int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

}  // namespace

void BranchConfig::validate() const {
  check(static_cast<int>(widths.size()) == kStages,
        "BranchConfig: expected " + std::to_string(kStages) + " encoder widths");
  for (int64_t w : widths) check(w >= 1, "BranchConfig: widths must be positive");
  check(depth_min > 0.0 && depth_max > depth_min,
        "BranchConfig: need 0 < depth_min < depth_max");
}

BranchNetwork::Conv BranchNetwork::make_conv(int64_t in_ch, int64_t out_ch,
                                             int stride, Rng& rng) {
  // Kaiming fan-in initialization for 3x3 kernels; biases start at zero so
  // the uncertainty heads begin near log sigma = 0 (sigma = 1).
  const double stddev = std::sqrt(2.0 / static_cast<double>(in_ch * 9));
  Tensor w({out_ch, in_ch, 3, 3});
  for (int64_t i = 0; i < w.numel(); ++i) w[i] = rng.normal(0.0, stddev);
  Conv conv;
  conv.w = Var::leaf(std::move(w), /*requires_grad=*/true);
  conv.b = Var::leaf(Tensor::zeros({out_ch}), /*requires_grad=*/true);
  conv.stride = stride;
  params_.push_back(conv.w);
  params_.push_back(conv.b);
  return conv;
}

Var BranchNetwork::apply(const Conv& conv, const Var& x) const {
  return conv2d(x, conv.w, conv.b, conv.stride);
}

BranchNetwork::Decoder BranchNetwork::make_decoder(Rng& rng) {
  const auto& enc = config_.widths;
  Decoder dec;
  // Stages run deepest (i = 4) to shallowest (i = 0). Stage i upsamples to
  // the resolution of encoder stage i-1 and concatenates that skip
  // connection; stage 0 reaches full resolution and has no skip.
  for (int i = kStages - 1; i >= 0; --i) {
    const int64_t in0 = (i == kStages - 1) ? enc[i] : dec_widths_[i + 1];
    dec.up0.push_back(make_conv(in0, dec_widths_[i], 1, rng));
    const int64_t skip = (i > 0) ? enc[i - 1] : 0;
    dec.up1.push_back(make_conv(dec_widths_[i] + skip, dec_widths_[i], 1, rng));
  }
  // One single-channel 3x3 head per output scale (1, 1/2, 1/4, 1/8).
  for (int s = 0; s < kScales; ++s)
    dec.head.push_back(make_conv(dec_widths_[s], 1, 1, rng));
  return dec;
}

BranchNetwork::BranchNetwork(const BranchConfig& config, Rng& rng)
    : config_(config) {
  config_.validate();
  const auto& enc = config_.widths;
  dec_widths_.resize(kStages);
  for (int i = 0; i < kStages; ++i)
    dec_widths_[i] = std::max<int64_t>(enc[i] / 2, 4);

  for (int i = 0; i < kStages; ++i)
    encoder_.push_back(make_conv(i == 0 ? 3 : enc[i - 1], enc[i], 2, rng));

  depth_decoder_ = make_decoder(rng);
  sigma_decoder_ = make_decoder(rng);
}

int64_t BranchNetwork::parameter_count() const {
  int64_t n = 0;
  for (const Var& p : params_) n += p.numel();
  return n;
}

std::vector<Var> BranchNetwork::run_decoder(const Decoder& dec,
                                            const std::vector<Var>& enc,
                                            int64_t h, int64_t w) const {
  std::vector<Var> heads(kScales);
  Var f = enc[kStages - 1];
  for (int i = kStages - 1; i >= 0; --i) {
    const int di = kStages - 1 - i;  // up0/up1 are stored deepest first
    f = elu(apply(dec.up0[di], f));
    f = upsample_nearest2(f);
    if (i > 0) f = concat_channels(f, enc[i - 1]);
    f = elu(apply(dec.up1[di], f));
    if (i < kScales) {
      Var raw = apply(dec.head[i], f);
      const int64_t sh = ceil_div(h, int64_t{1} << i);
      const int64_t sw = ceil_div(w, int64_t{1} << i);
      if (raw.shape()[1] != sh || raw.shape()[2] != sw)
        raw = crop(raw, 0, 0, sh, sw);
      heads[i] = reshape(raw, {sh, sw});
    }
  }
  return heads;
}

BranchOutput BranchNetwork::forward(const Tensor& image) const {
  check(image.rank() == 3 && image.dim(0) == 3,
        "BranchNetwork::forward: input must be [3,H,W]");
  check(image.all_finite(), "BranchNetwork::forward: input has non-finite values");
  const int64_t h = image.dim(1), w = image.dim(2);

  const int64_t ph = ceil_div(h, kStrideProduct) * kStrideProduct;
  const int64_t pw = ceil_div(w, kStrideProduct) * kStrideProduct;
  Var x = Var::constant(image);
  if (ph != h || pw != w) {
    check(ph - h < h && pw - w < w,
          "BranchNetwork::forward: image too small to pad to a multiple of " +
              std::to_string(kStrideProduct));
    x = pad_reflect(x, 0, static_cast<int>(pw - w), 0, static_cast<int>(ph - h));
  }

  std::vector<Var> enc;
  for (int i = 0; i < kStages; ++i) {
    x = elu(apply(encoder_[i], x));
    enc.push_back(x);
  }

  std::vector<Var> disp = run_decoder(depth_decoder_, enc, h, w);
  std::vector<Var> logs = run_decoder(sigma_decoder_, enc, h, w);

  BranchOutput out;
  out.depth.resize(kScales);
  out.log_sigma.resize(kScales);
  for (int s = 0; s < kScales; ++s) {
    out.depth[s] = disparity_to_depth(sigmoid(disp[s]), config_.depth_min,
                                      config_.depth_max);
    out.log_sigma[s] = logs[s];
    check(out.depth[s].value().all_finite() &&
              out.log_sigma[s].value().all_finite(),
          "BranchNetwork::forward: non-finite prediction at scale " +
              std::to_string(s));
  }
  return out;
}

}  // namespace md
