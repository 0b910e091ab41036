#include "mutualdepth/losses.hpp"

#include <cmath>

#include "mutualdepth/nn.hpp"

namespace md {

void fill_totals(LossReport& r, const LossWeights& w) {
  r.total_s = r.l_su + w.lambda_s * r.l_sd;
  r.total_u = r.l_uu + w.lambda_u * r.l_ud + w.lambda_smooth * r.l_smooth;
  r.baseline = r.l_s + w.lambda_u * r.l_u + w.lambda_smooth * r.l_smooth;
}

Var ssim(const Var& a, const Var& b) {
  check(a.value().same_shape(b.value()), "ssim: shape mismatch");
  check(a.value().rank() == 3, "ssim: inputs must be [C,H,W]");
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;

  Var pa = pad_reflect(a, 1, 1, 1, 1);
  Var pb = pad_reflect(b, 1, 1, 1, 1);
  Var mu_a = box_mean3(pa);
  Var mu_b = box_mean3(pb);
  Var var_a = box_mean3(square(pa)) - square(mu_a);
  Var var_b = box_mean3(square(pb)) - square(mu_b);
  Var cov = box_mean3(pa * pb) - mu_a * mu_b;

  Var num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
  Var den = (square(mu_a) + square(mu_b) + c1) * (var_a + var_b + c2);
  return num / den;
}

Var photometric_error(const Var& img, const Var& warped, double alpha) {
  check(img.value().same_shape(warped.value()), "photometric_error: shape mismatch");
  check(alpha >= 0.0 && alpha <= 1.0, "photometric_error: alpha must lie in [0,1]");
  Var l1 = channel_mean(abs(img - warped));
  if (alpha == 0.0) return l1;
  Var dssim = channel_mean(1.0 - ssim(img, warped)) * 0.5;
  return alpha * dssim + (1.0 - alpha) * l1;
}

PhotoError reprojection_error(const Tensor& target, const std::vector<SourceView>& sources,
                              const Var& depth, const CameraModel& cam, double alpha,
                              PhotometricReduce reduce, bool automask) {
  check(!sources.empty(), "reprojection_error: needs at least one source");
  check(target.rank() == 3, "reprojection_error: target must be [C,H,W]");
  const int64_t c = target.dim(0), h = target.dim(1), w = target.dim(2);
  const Var target_v = Var::constant(target);

  constexpr double kFar = 1e9;  // sentinel so invalid pixels lose every min
  std::vector<Var> pes;
  std::vector<Tensor> valids;
  pes.reserve(sources.size());
  for (const auto& sv : sources) {
    Sampled warp = synthesize_view(sv.image.data, depth, sv.pose, cam);
    // fill invalid pixels with the target so SSIM windows near the validity
    // boundary see sane values; the pixels themselves are masked below
    Tensor fill({c, h, w});
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t i = 0; i < h * w; ++i)
        fill.data()[ch * h * w + i] =
            warp.validity[i] == 0.0 ? target[ch * h * w + i] : 0.0;
    Var filled = warp.image + Var::constant(fill);
    pes.push_back(photometric_error(target_v, filled, alpha));
    valids.push_back(std::move(warp.validity));
  }

  Tensor any_valid({h, w});
  Tensor count({h, w});
  for (int64_t i = 0; i < h * w; ++i) {
    for (const auto& v : valids) count[i] += v[i];
    any_valid[i] = count[i] > 0.0 ? 1.0 : 0.0;
  }

  if (automask) {
    // a pixel whose unwarped source already matches at least as well as the
    // best warp carries no parallax signal; drop it
    Tensor best_id = Tensor::full({h, w}, kFar);
    for (const auto& sv : sources) {
      Tensor pe_id =
          photometric_error(target_v, Var::constant(sv.image.data), alpha).value();
      for (int64_t i = 0; i < h * w; ++i) best_id[i] = std::min(best_id[i], pe_id[i]);
    }
    Tensor best_warp = Tensor::full({h, w}, kFar);
    for (size_t s = 0; s < pes.size(); ++s) {
      const Tensor& pv = pes[s].value();
      for (int64_t i = 0; i < h * w; ++i)
        if (valids[s][i] != 0.0) best_warp[i] = std::min(best_warp[i], pv[i]);
    }
    for (int64_t i = 0; i < h * w; ++i)
      if (any_valid[i] != 0.0 && best_id[i] < best_warp[i] + 1e-5) any_valid[i] = 0.0;
  }

  PhotoError out;
  if (reduce == PhotometricReduce::kMin) {
    Var acc;
    for (size_t s = 0; s < pes.size(); ++s) {
      Tensor far({h, w});
      for (int64_t i = 0; i < h * w; ++i)
        far[i] = valids[s][i] == 0.0 ? kFar : 0.0;
      Var masked = pes[s] * Var::constant(valids[s]) + Var::constant(far);
      acc = acc.defined() ? minimum(acc, masked) : masked;
    }
    out.pe = acc * Var::constant(any_valid);
  } else {
    Tensor inv_count({h, w});
    for (int64_t i = 0; i < h * w; ++i)
      inv_count[i] = count[i] > 0.0 && any_valid[i] != 0.0 ? 1.0 / count[i] : 0.0;
    Var num;
    for (size_t s = 0; s < pes.size(); ++s) {
      Var term = pes[s] * Var::constant(valids[s]);
      num = num.defined() ? num + term : term;
    }
    out.pe = num * Var::constant(inv_count);
  }

  out.n_valid = 0;
  for (int64_t i = 0; i < h * w; ++i) out.n_valid += any_valid[i] != 0.0;
  out.valid = std::move(any_valid);
  return out;
}

Var unsupervised_photometric_loss(const PhotoError& pe) {
  check(pe.n_valid > 0, "photometric loss: no valid warp pixels in batch");
  return sum(pe.pe) / static_cast<double>(pe.n_valid);
}

Var unsupervised_photometric_loss(const Tensor& target, const std::vector<SourceView>& sources,
                                  const Var& depth, const CameraModel& cam, double alpha,
                                  PhotometricReduce reduce, bool automask) {
  return unsupervised_photometric_loss(
      reprojection_error(target, sources, depth, cam, alpha, reduce, automask));
}

Var supervised_l1(const Var& depth, const SparseDepthTarget& gt) {
  check(depth.value().same_shape(gt.values), "supervised_l1: shape mismatch");
  const int64_t n = gt.valid_count();
  check(n >= 1, "supervised_l1: sample has no depth labels");
  Var diff = abs(depth - Var::constant(gt.values)) * Var::constant(gt.valid);
  return sum(diff) / static_cast<double>(n);
}

Var smoothness_loss(const Var& depth, const Tensor& image, bool normalized) {
  const Tensor& d = depth.value();
  check(d.rank() == 2, "smoothness_loss: depth must be [H,W]");
  check(image.rank() == 3 && image.dim(1) == d.dim(0) && image.dim(2) == d.dim(1),
        "smoothness_loss: image must be [C,H,W] matching depth");
  const int64_t c = image.dim(0), h = d.dim(0), w = d.dim(1);

  Var field = depth;
  if (normalized) {
    Var disp = 1.0 / depth;
    field = disp / (mean(disp) + 1e-7);
  }

  // edge weights from the image are plain data
  Tensor wx({h, w - 1});
  for (int64_t i = 0; i < h; ++i)
    for (int64_t j = 0; j + 1 < w; ++j) {
      double g = 0.0;
      for (int64_t ch = 0; ch < c; ++ch)
        g += std::abs(image.at(ch, i, j + 1) - image.at(ch, i, j));
      wx.at(i, j) = std::exp(-g / static_cast<double>(c));
    }
  Tensor wy({h - 1, w});
  for (int64_t i = 0; i + 1 < h; ++i)
    for (int64_t j = 0; j < w; ++j) {
      double g = 0.0;
      for (int64_t ch = 0; ch < c; ++ch)
        g += std::abs(image.at(ch, i + 1, j) - image.at(ch, i, j));
      wy.at(i, j) = std::exp(-g / static_cast<double>(c));
    }

  Var sx = sum(abs(diff_x(field)) * Var::constant(wx));
  Var sy = sum(abs(diff_y(field)) * Var::constant(wy));
  return (sx + sy) / static_cast<double>(h * w);
}

Var supervised_uncertainty_loss(const Var& depth, const Var& log_sigma,
                                const SparseDepthTarget& gt, double mu_s, double m,
                                bool filtering_enabled) {
  check(depth.value().same_shape(gt.values), "supervised NLL: depth shape mismatch");
  check(log_sigma.value().same_shape(gt.values), "supervised NLL: sigma shape mismatch");
  const int64_t n_labeled = gt.valid_count();
  check(n_labeled >= 1, "supervised NLL: sample has no depth labels");

  Var sigma = sigma_from_log(log_sigma);
  Var log_sig = log(sigma);
  Var labeled = (abs(depth - Var::constant(gt.values)) / sigma + mu_s * log_sig) *
                Var::constant(gt.valid);
  Var loss = sum(labeled) / static_cast<double>(n_labeled);

  const int64_t n_unlabeled = gt.values.numel() - n_labeled;
  if (filtering_enabled && n_unlabeled >= 1) {
    Tensor inv_valid(gt.valid.shape());
    for (int64_t i = 0; i < inv_valid.numel(); ++i) inv_valid[i] = 1.0 - gt.valid[i];
    Var unlabeled = (m / sigma + mu_s * log_sig) * Var::constant(inv_valid);
    loss = loss + sum(unlabeled) / static_cast<double>(n_unlabeled);
  }
  return loss;
}

Var unsupervised_uncertainty_loss(const Var& pe, const Var& log_sigma, double mu_u,
                                  const Tensor& valid, int64_t n_valid) {
  check(pe.value().same_shape(log_sigma.value()), "unsupervised NLL: shape mismatch");
  check(pe.value().same_shape(valid), "unsupervised NLL: mask shape mismatch");
  check(n_valid >= 1, "unsupervised NLL: no valid warp pixels");
  Var sigma = sigma_from_log(log_sigma);
  Var term = (pe / sigma + mu_u * log(sigma)) * Var::constant(valid);
  return sum(term) / static_cast<double>(n_valid);
}

Var unsupervised_uncertainty_loss(const PhotoError& pe, const Var& log_sigma, double mu_u) {
  return unsupervised_uncertainty_loss(pe.pe, log_sigma, mu_u, pe.valid, pe.n_valid);
}

Var weighted_distillation_loss(const Var& student_depth, const Tensor& teacher_depth,
                               const Tensor& weights) {
  check(student_depth.value().same_shape(teacher_depth),
        "distillation: depth shape mismatch");
  check(student_depth.value().same_shape(weights), "distillation: weight shape mismatch");
  double wsum = 0.0;
  for (int64_t i = 0; i < weights.numel(); ++i) {
    check(weights[i] >= 0.0, "distillation: weights must be nonnegative");
    wsum += weights[i];
  }
  if (wsum == 0.0) return Var::scalar(0.0);  // no confident teacher pixels
  Var r = abs(student_depth - Var::constant(teacher_depth));
  return sum(r * Var::constant(weights)) / wsum;
}

Var mutual_distillation_loss(const Var& student_depth, const Tensor& teacher_depth,
                             const Tensor& teacher_log_sigma) {
  Tensor sigma = sigma_from_log(teacher_log_sigma);
  Tensor w(sigma.shape());
  for (int64_t i = 0; i < w.numel(); ++i) w[i] = 1.0 / sigma[i];
  return weighted_distillation_loss(student_depth, teacher_depth, w);
}

}  // namespace md
