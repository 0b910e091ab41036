#pragma once

#include "mutualdepth/autograd.hpp"

namespace md {

// Spatial graph ops. Feature maps are [C,H,W]; per-pixel grids are [H,W].
// Everything is single-image: batching happens by averaging per-sample losses.

// 3x3 convolution, zero padding 1, stride 1 or 2. w is [K,C,3,3], b is [K].
Var conv2d(const Var& x, const Var& w, const Var& b, int stride);

// Reflection padding (PyTorch convention: the edge sample is not repeated).
Var pad_reflect(const Var& x, int left, int right, int top, int bottom);

Var crop(const Var& x, int top, int left, int64_t h, int64_t w);

// Valid-mode 3x3 mean filter per channel: [C,H,W] -> [C,H-2,W-2].
Var box_mean3(const Var& x);

Var upsample_nearest2(const Var& x);

// Bilinear resize with half-pixel centers (align_corners = false).
Var resize_bilinear(const Var& x, int64_t out_h, int64_t out_w);

Var concat_channels(const Var& a, const Var& b);

// Forward differences along the last / second-to-last dimension.
// [.., H, W] -> [.., H, W-1] and [.., H-1, W].
Var diff_x(const Var& x);
Var diff_y(const Var& x);

}  // namespace md
