#pragma once

#include <vector>

#include "mutualdepth/core.hpp"
#include "mutualdepth/geometry.hpp"

namespace md {

// How per-pixel photometric errors from multiple source views are combined:
// the per-pixel minimum ignores pixels occluded in one view, the mean is the
// literal multi-view average.
enum class PhotometricReduce { kMean, kMin };

// Per-step scalars; the CSV log writes them in this order.
struct LossReport {
  double l_s = 0;       // sparse supervised L1
  double l_u = 0;       // photometric reprojection
  double l_smooth = 0;  // edge-aware smoothness
  double l_su = 0;      // supervised branch NLL (may be negative)
  double l_uu = 0;      // unsupervised branch NLL (may be negative)
  double l_sd = 0;      // distillation pulling the supervised branch
  double l_ud = 0;      // distillation pulling the unsupervised branch
  double total_s = 0;
  double total_u = 0;
  double baseline = 0;  // single-network combination of l_s, l_u, l_smooth
};

// Fills total_s, total_u, baseline from the part fields:
//   total_s  = l_su + lambda_s * l_sd
//   total_u  = l_uu + lambda_u * l_ud + lambda_smooth * l_smooth
//   baseline = l_s  + lambda_u * l_u  + lambda_smooth * l_smooth
void fill_totals(LossReport& r, const LossWeights& w);

// Per-pixel per-channel SSIM map [C,H,W]: 3x3 mean filter over reflection
// padding, C1 = 0.01^2, C2 = 0.03^2. Equal inputs give exactly 1.
Var ssim(const Var& a, const Var& b);

// alpha*(1-SSIM)/2 + (1-alpha)*|a-b|, channel-averaged -> [H,W].
Var photometric_error(const Var& img, const Var& warped, double alpha);

struct PhotoError {
  Var pe;            // [H,W]; zero wherever no source produced a valid warp
  Tensor valid;      // [H,W] 0/1
  int64_t n_valid = 0;
};

// Warps every source into the reference view with the given depth and
// reduces their photometric errors per pixel. Invalid warp pixels are filled
// with the target before SSIM so boundary windows stay clean, then excluded
// via the mask. With automask, pixels where the unwarped source already
// matches at least as well as the best warp (static scenes) are dropped.
PhotoError reprojection_error(const Tensor& target, const std::vector<SourceView>& sources,
                              const Var& depth, const CameraModel& cam, double alpha,
                              PhotometricReduce reduce, bool automask = false);

// Mean of pe over valid pixels. Zero valid pixels is a degenerate batch and
// throws.
Var unsupervised_photometric_loss(const PhotoError& pe);
Var unsupervised_photometric_loss(const Tensor& target, const std::vector<SourceView>& sources,
                                  const Var& depth, const CameraModel& cam, double alpha,
                                  PhotometricReduce reduce, bool automask = false);

// (1/N_D) * sum over labeled pixels of |depth - gt|. Throws when the sample
// carries no labels.
Var supervised_l1(const Var& depth, const SparseDepthTarget& gt);

// (1/(H*W)) * sum of |forward diff of d| * exp(-|channel-mean image diff|)
// along x and y. With normalized=true, d is inverse depth divided by its
// mean (stabilizes the scale); otherwise raw depth.
Var smoothness_loss(const Var& depth, const Tensor& image, bool normalized = true);

// Laplacian NLL over labeled pixels:
//   (1/N_D) * sum(|depth - gt| / sigma + mu_s * log sigma).
// With filtering enabled, unlabeled pixels contribute a pseudo-residual m:
//   + (1/N_unlabeled) * sum(m / sigma + mu_s * log sigma).
// sigma = exp(log_sigma) clamped to the core range.
Var supervised_uncertainty_loss(const Var& depth, const Var& log_sigma,
                                const SparseDepthTarget& gt, double mu_s, double m,
                                bool filtering_enabled);

// (1/N) * sum over valid pixels of (pe / sigma + mu_u * log sigma).
Var unsupervised_uncertainty_loss(const Var& pe, const Var& log_sigma, double mu_u,
                                  const Tensor& valid, int64_t n_valid);
// Convenience over a PhotoError (its own mask and count).
Var unsupervised_uncertainty_loss(const PhotoError& pe, const Var& log_sigma, double mu_u);

// sum(w * |student - teacher|) / sum(w). Teacher tensors are plain data
// (already detached); weights must be nonnegative. All-zero weights mean no
// confident teacher pixels: the term is 0.
Var weighted_distillation_loss(const Var& student_depth, const Tensor& teacher_depth,
                               const Tensor& weights);

// The uncertainty-weighted form: w = 1 / sigma_teacher.
Var mutual_distillation_loss(const Var& student_depth, const Tensor& teacher_depth,
                             const Tensor& teacher_log_sigma);

}  // namespace md
