#pragma once

#include <string>
#include <vector>

#include "mutualdepth/core.hpp"
#include "mutualdepth/model.hpp"

namespace md {

// Standard depth metric suite computed over valid ground-truth pixels.
struct MetricRecord {
  double abs_rel = 0;   // mean |p - g| / g
  double sq_rel = 0;    // mean (p - g)^2 / g
  double rmse = 0;      // sqrt(mean (p - g)^2)
  double rmse_log = 0;  // sqrt(mean (ln p - ln g)^2)
  double a1 = 0;        // fraction with max(p/g, g/p) < 1.25
  double a2 = 0;        // ... < 1.25^2
  double a3 = 0;        // ... < 1.25^3
};

// Metrics over pixels where gt_valid != 0. Optional median scaling first
// (pred * median(gt)/median(pred), both medians over valid pixels), then the
// prediction is clamped to [clamp_min, clamp_max]. Ground truth is consumed
// as-is. Throws when no pixel is valid.
MetricRecord compute_metrics(const Tensor& pred, const Tensor& gt_values,
                             const Tensor& gt_valid, bool median_scale = false,
                             double clamp_min = kDepthMin,
                             double clamp_max = kDepthMax);
MetricRecord compute_metrics(const Tensor& pred, const SparseDepthTarget& gt,
                             bool median_scale = false,
                             double clamp_min = kDepthMin,
                             double clamp_max = kDepthMax);
MetricRecord compute_metrics(const Tensor& pred, const DepthMap& gt,
                             bool median_scale = false,
                             double clamp_min = kDepthMin,
                             double clamp_max = kDepthMax);

// Per-pixel confidence weights for distillation, from the teacher's sigma.
//   kUW:  w = 1/sigma                  (soft weighting, the default)
//   kUT:  w = 1 where sigma < tau      (hard threshold)
//   kUWT: w = 1/sigma where sigma < tau
// sigma must be positive everywhere.
enum class DistillMode { kUW, kUT, kUWT };

DistillMode parse_distill_mode(const std::string& name);  // "uw"|"ut"|"uwt"
const char* distill_mode_name(DistillMode mode);

Tensor distillation_weight(DistillMode mode, const Tensor& sigma, double tau);

// CSV/JSON formatting shared by the trainer and the command-line tools.
std::string metrics_csv_header();  // "abs_rel,sq_rel,rmse,rmse_log,a1,a2,a3"
std::string metrics_csv_row(const MetricRecord& r);
std::string metrics_json(const MetricRecord& r);  // {"abs_rel":...,...}

// Full-resolution scale-0 prediction for one frame, network in
// inference mode (no augmentation).
struct BranchPrediction {
  Tensor depth;      // [H,W]
  Tensor log_sigma;  // [H,W]
};
BranchPrediction predict_full(const BranchNetwork& net, const Tensor& image);

// Mean of per-frame metric records; the standard dataset-level protocol.
MetricRecord average_records(const std::vector<MetricRecord>& records);

// Evaluates one branch over a list of frames against dense ground truth when
// present, else the sparse targets.
MetricRecord evaluate_branch(const BranchNetwork& net,
                             const std::vector<FrameSample>& frames,
                             bool median_scale = false);

// Evaluates both branches and picks the final one: the unsupervised branch by
// default (the framework's choice), the supervised branch when forced.
struct BranchSelection {
  MetricRecord supervised;
  MetricRecord unsupervised;
  std::string selected;  // "supervised" | "unsupervised"
};
BranchSelection select_final_branch(const BranchNetwork& sup,
                                    const BranchNetwork& uns,
                                    const std::vector<FrameSample>& frames,
                                    bool force_supervised = false,
                                    bool median_scale = false);

}  // namespace md
