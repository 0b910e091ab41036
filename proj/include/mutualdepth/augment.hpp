#pragma once

#include <cstdint>

#include "mutualdepth/core.hpp"
#include "mutualdepth/rng.hpp"

namespace md {

// Photometric jitter parameters. brightness/contrast/saturation are
// multiplicative factors (1 = identity); hue is an additive shift of the HSV
// hue channel in turns (0 = identity). Stages whose parameter equals the
// identity are skipped exactly, so identity parameters reproduce the input
// bit for bit.
struct JitterParams {
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
  double hue = 0.0;

  bool is_identity() const {
    return brightness == 1.0 && contrast == 1.0 && saturation == 1.0 &&
           hue == 0.0;
  }
};

// Draws factors uniformly from [0.8, 1.2] and hue from [-0.1, 0.1]
// (Monodepth-style ranges).
JitterParams draw_jitter(Rng& rng);

// Applies brightness, contrast, saturation, then hue to a [3,H,W] image in
// [0,1]; the result is clamped back to [0,1].
Tensor apply_jitter(const Tensor& image, const JitterParams& p);

// Photometric jitter everywhere except object instances: pixels where
// instance_mask != 0 are bitwise-equal to the input.
Tensor instance_background_noise(const Tensor& image,
                                 const Tensor& instance_mask,
                                 const JitterParams& jitter);

// Mirrors the last (width) axis of a [H,W] or [C,H,W] grid.
Tensor flip_horizontal(const Tensor& t);

// Pose of the mirrored world: with S = diag(-1,1,1) in camera coordinates,
// R' = S R S and t' = S t. Valid whenever `pose` is.
RigidPose flip_pose(const RigidPose& pose);

// Principal point remap cx -> W-1-cx (pixel centers at integer coordinates).
CameraModel flip_camera(const CameraModel& cam, int64_t width);

// Horizontally mirrors every image, mask, and sparse/dense target of the
// sample and rewrites poses/intrinsics so the mirrored geometry is exact.
FrameSample flip_sample(const FrameSample& s);

struct AugmentOptions {
  bool shared_flip = true;        // horizontal flip, p=0.5, same for both views
  bool per_branch_jitter = true;  // independent photometric jitter per view
  bool instance_noise = true;     // instance-masked noise on the supervised view
};

struct AugmentedPair {
  FrameSample view_s;  // supervised-branch view
  FrameSample view_u;  // unsupervised-branch view
  bool flipped = false;
};

// One shared geometric draw (flip), then independent photometric draws per
// branch; the supervised view additionally receives instance-masked noise.
// Jitter within a view is shared by the target and all source images so the
// view stays photometrically self-consistent. Ground-truth depth targets and
// poses are never photometrically altered. Deterministic in `seed`.
AugmentedPair augment_pair(const FrameSample& sample, uint64_t seed,
                           const AugmentOptions& options = {});

}  // namespace md
