#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mutualdepth/core.hpp"

namespace md {

// Parameters of the procedural generator and of the LiDAR-style sparsifier.
struct SceneParams {
  int64_t height = 64;
  int64_t width = 96;
  int frames = 12;  // >= 3
  int boxes = 6;
  double focal_scale = 0.8;    // fx = fy = focal_scale * width
  double forward_step = 0.10;  // meters of forward motion per frame
  double lateral_amp = 0.25;   // meters of sideways sway
  double yaw_amp = 0.03;       // radians of yaw sway
  // Permits zero-baseline (static) camera paths. Off by default: a static
  // path carries no parallax and silently poisons photometric training, so
  // requesting one must be explicit.
  bool allow_static = false;

  int scanlines = 8;
  double dropout = 0.28;
  double horizon_frac = 0.55;  // scanlines live in rows >= horizon_frac * H

  void validate() const;
};

// One rendered sequence with everything the on-disk format stores.
struct Sequence {
  std::vector<ImageTensor> images;
  // Dense ground truth in camera-z meters, 0 = invalid pixel. Generated
  // sequences are valid everywhere; loaded external data may carry holes.
  std::vector<Tensor> depth;
  std::vector<Tensor> instance_labels;  // [H,W] integer ids, 0 = background
  std::vector<RigidPose> poses;         // camera-from-world per frame
  CameraModel camera;
};

// Renders a Lambertian room (textured walls, floor, ceiling) containing
// textured boxes — each box an object instance — seen from a camera on a
// smooth forward-plus-sway path. Deterministic in (seed, params): the same
// call produces bitwise-identical output. Colors depend only on the world
// point hit, so brightness constancy holds exactly between frames.
Sequence generate_sequence(uint64_t seed, const SceneParams& params);

// Keeps a set of evenly spaced scanlines below the horizon row and applies
// per-point Bernoulli dropout. Defaults on 192x640 land near 3% density.
SparseDepthTarget sparse_lidar_sample(const DepthMap& dense, int scanlines,
                                      double dropout, double horizon_frac,
                                      uint64_t seed);

// Marks target pixels whose true surface is hidden in the source view: the
// point's source-camera depth exceeds the source depth map's value at its
// projection by more than a relative tolerance. 1 = occluded. Pixels that
// leave the source frustum are 0 here (warp validity already excludes them).
// The mask is grown by `dilate` pixels (Chebyshev radius) before returning:
// the photometric error at a pixel depends on its 3x3 SSIM window, so a
// pixel bordering an occluded one still reads occluded content; radius 1
// matches the window and makes the mask cover everything occlusion taints.
Tensor occlusion_mask(const Tensor& target_depth, const Tensor& source_depth,
                      const RigidPose& source_from_target,
                      const CameraModel& cam, int dilate = 1);

// Converts a sequence into training samples: every interior frame becomes a
// FrameSample with its two temporal neighbors as sources (relative poses
// derived from the absolute ones) and a freshly sparsified LiDAR target.
// Frames whose depth has holes (0 pixels) get no dense_gt, and their sparse
// target skips the invalid pixels. Deterministic in `seed`.
std::vector<FrameSample> to_frame_samples(const Sequence& seq,
                                          const SceneParams& params,
                                          uint64_t seed);

// On-disk layout per sequence directory:
//   image/frame_%06d.png     8-bit RGB
//   depth/frame_%06d.png     16-bit gray, meters*256, 0 = invalid
//   instance/frame_%06d.png  8-bit labels, 0 = background
//   poses.txt                one 3x4 camera-from-world matrix per line
//   intrinsics.txt           "fx fy cx cy"
void save_sequence(const std::string& seq_dir, const Sequence& seq);
Sequence load_sequence(const std::string& seq_dir);

// A dataset root holds seq_0000, seq_0001, ... subdirectories.
void save_dataset(const std::string& root, const std::vector<Sequence>& seqs);

// Loads every seq_* directory under root (sorted by name) and assembles
// FrameSamples with to_frame_samples(seq_i, params, mix_seed(seed, i)).
// An empty or missing root is an error, never an empty result.
std::vector<FrameSample> load_dataset(const std::string& root,
                                      const SceneParams& params = {},
                                      uint64_t seed = 0);

}  // namespace md
