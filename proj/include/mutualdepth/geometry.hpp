#pragma once

#include "mutualdepth/core.hpp"

namespace md {
// Differentiable pinhole view synthesis: backproject a depth map, rigidly
// transform, project into the source view, and bilinearly sample it.

// depth [H,W] -> camera-frame points [3,H,W]:
// point(u,v) = depth(u,v) * ((u-cx)/fx, (v-cy)/fy, 1), u = column, v = row.
Var backproject(const Var& depth, const CameraModel& cam);

struct Projection {
  Var coords;   // [2,H,W]; channel 0 = u (column), channel 1 = v (row)
  Tensor mask;  // [H,W]; 1 where the transformed point is in front of the camera
};

// p' = R p + t, then (fx px'/pz' + cx, fy py'/pz' + cy). Points with
// pz' <= kZEps are masked: coords 0 and no gradient.
Projection project(const Var& points, const RigidPose& pose, const CameraModel& cam);

struct Sampled {
  Var image;        // [C,H,W]
  Tensor validity;  // [H,W]
};

// Bilinear interpolation of image at coords. Coordinates outside
// [0,W-1]x[0,H-1] give value 0 and validity 0. Coordinates within 1e-9 of a
// lattice point snap to it, so an identity warp reproduces the source exactly.
Sampled bilinear_sample(const Var& image, const Var& coords);

// Warps source J into the reference view using the reference depth.
// validity = front-of-camera AND in-bounds; invalid pixels are zeroed and
// contribute no gradient.
Sampled synthesize_view(const Tensor& source, const Var& depth, const RigidPose& pose,
                        const CameraModel& cam);

}  // namespace md
