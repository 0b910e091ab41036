#include "mutualdepth/augment.hpp"

#include <algorithm>
#include <cmath>

namespace md {

namespace {

double luminance(double r, double g, double b) {
  return 0.299 * r + 0.587 * g + 0.114 * b;  // ITU-R BT.601
}

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

// Standard HSV conversions with h in [0,1) turns.
void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  v = mx;
  const double d = mx - mn;
  s = (mx > 0.0) ? d / mx : 0.0;
  if (d == 0.0) {
    h = 0.0;
  } else if (mx == r) {
    h = (g - b) / d / 6.0;
  } else if (mx == g) {
    h = ((b - r) / d + 2.0) / 6.0;
  } else {
    h = ((r - g) / d + 4.0) / 6.0;
  }
  if (h < 0.0) h += 1.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double hh = (h - std::floor(h)) * 6.0;
  const int i = static_cast<int>(hh) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (i) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

}  // namespace

JitterParams draw_jitter(Rng& rng) {
  JitterParams p;
  p.brightness = rng.uniform(0.8, 1.2);
  p.contrast = rng.uniform(0.8, 1.2);
  p.saturation = rng.uniform(0.8, 1.2);
  p.hue = rng.uniform(-0.1, 0.1);
  return p;
}

Tensor apply_jitter(const Tensor& image, const JitterParams& p) {
  check(image.rank() == 3 && image.dim(0) == 3,
        "apply_jitter: image must be [3,H,W]");
  if (p.is_identity()) return image;
  Tensor out = image;
  const int64_t n = image.dim(1) * image.dim(2);
  double* r = out.data();
  double* g = r + n;
  double* b = g + n;

  if (p.brightness != 1.0)
    for (int64_t i = 0; i < 3 * n; ++i) out[i] *= p.brightness;

  if (p.contrast != 1.0) {
    double mean_gray = 0.0;
    for (int64_t i = 0; i < n; ++i) mean_gray += luminance(r[i], g[i], b[i]);
    mean_gray /= static_cast<double>(n);
    for (int64_t i = 0; i < 3 * n; ++i)
      out[i] = p.contrast * out[i] + (1.0 - p.contrast) * mean_gray;
  }

  if (p.saturation != 1.0) {
    for (int64_t i = 0; i < n; ++i) {
      const double gray = luminance(r[i], g[i], b[i]);
      r[i] = p.saturation * r[i] + (1.0 - p.saturation) * gray;
      g[i] = p.saturation * g[i] + (1.0 - p.saturation) * gray;
      b[i] = p.saturation * b[i] + (1.0 - p.saturation) * gray;
    }
  }

  if (p.hue != 0.0) {
    for (int64_t i = 0; i < n; ++i) {
      double h, s, v;
      // Hue rotation is defined on [0,1] colors; clamp before converting.
      rgb_to_hsv(clamp01(r[i]), clamp01(g[i]), clamp01(b[i]), h, s, v);
      hsv_to_rgb(h + p.hue, s, v, r[i], g[i], b[i]);
    }
  }

  for (int64_t i = 0; i < 3 * n; ++i) out[i] = clamp01(out[i]);
  return out;
}

Tensor instance_background_noise(const Tensor& image,
                                 const Tensor& instance_mask,
                                 const JitterParams& jitter) {
  check(image.rank() == 3 && image.dim(0) == 3,
        "instance_background_noise: image must be [3,H,W]");
  check(instance_mask.rank() == 2 && instance_mask.dim(0) == image.dim(1) &&
            instance_mask.dim(1) == image.dim(2),
        "instance_background_noise: mask shape must match the image");
  Tensor out = apply_jitter(image, jitter);
  const int64_t n = image.dim(1) * image.dim(2);
  for (int64_t i = 0; i < n; ++i) {
    if (instance_mask[i] != 0.0)
      for (int64_t c = 0; c < 3; ++c) out[c * n + i] = image[c * n + i];
  }
  return out;
}

Tensor flip_horizontal(const Tensor& t) {
  check(t.rank() == 2 || t.rank() == 3, "flip_horizontal: rank must be 2 or 3");
  Tensor out(t.shape());
  const int64_t w = t.shape().back();
  const int64_t rows = t.numel() / w;
  for (int64_t rr = 0; rr < rows; ++rr)
    for (int64_t j = 0; j < w; ++j)
      out[rr * w + j] = t[rr * w + (w - 1 - j)];
  return out;
}

RigidPose flip_pose(const RigidPose& pose) {
  // S R S and S t with S = diag(-1,1,1): negate the first row and first
  // column of R (their intersection twice, i.e. not at all) and t.x.
  Mat3 r = pose.r;
  for (int k = 1; k < 3; ++k) {
    r(0, k) = -r(0, k);
    r(k, 0) = -r(k, 0);
  }
  return RigidPose(r, Vec3{-pose.t.x, pose.t.y, pose.t.z});
}

CameraModel flip_camera(const CameraModel& cam, int64_t width) {
  return CameraModel(cam.fx, cam.fy, static_cast<double>(width - 1) - cam.cx,
                     cam.cy);
}

FrameSample flip_sample(const FrameSample& s) {
  const int64_t w = s.target.width();
  std::vector<SourceView> sources;
  sources.reserve(s.sources.size());
  for (const SourceView& sv : s.sources)
    sources.push_back(SourceView{ImageTensor{flip_horizontal(sv.image.data)},
                                 flip_pose(sv.pose)});
  std::optional<DepthMap> dense;
  if (s.dense_gt) dense = DepthMap(flip_horizontal(s.dense_gt->data));
  FrameSample out{ImageTensor{flip_horizontal(s.target.data)},
                  std::move(sources),
                  flip_camera(s.camera, w),
                  SparseDepthTarget(flip_horizontal(s.sparse_gt.values),
                                    flip_horizontal(s.sparse_gt.valid)),
                  std::move(dense),
                  flip_horizontal(s.instance_mask)};
  return out;
}

namespace {

FrameSample jitter_view(const FrameSample& s, const JitterParams& p) {
  std::vector<SourceView> sources;
  sources.reserve(s.sources.size());
  for (const SourceView& sv : s.sources)
    sources.push_back(
        SourceView{ImageTensor{apply_jitter(sv.image.data, p)}, sv.pose});
  return FrameSample{ImageTensor{apply_jitter(s.target.data, p)},
                     std::move(sources),
                     s.camera,
                     s.sparse_gt,
                     s.dense_gt,
                     s.instance_mask};
}

}  // namespace

AugmentedPair augment_pair(const FrameSample& sample, uint64_t seed,
                           const AugmentOptions& options) {
  validate_frame(sample);
  Rng flip_rng(mix_seed(seed, 0));
  Rng rng_s(mix_seed(seed, 1));
  Rng rng_u(mix_seed(seed, 2));
  Rng rng_noise(mix_seed(seed, 3));

  const bool flipped = options.shared_flip && flip_rng.bernoulli(0.5);
  const FrameSample base = flipped ? flip_sample(sample) : sample;

  const JitterParams js =
      options.per_branch_jitter ? draw_jitter(rng_s) : JitterParams{};
  const JitterParams ju =
      options.per_branch_jitter ? draw_jitter(rng_u) : JitterParams{};

  AugmentedPair pair{jitter_view(base, js), jitter_view(base, ju), flipped};

  if (options.instance_noise) {
    const JitterParams jn = draw_jitter(rng_noise);
    pair.view_s.target = ImageTensor{instance_background_noise(
        pair.view_s.target.data, pair.view_s.instance_mask, jn)};
  }
  return pair;
}

}  // namespace md
