#include "mutualdepth/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "mutualdepth/nn.hpp"

namespace md {

namespace {

double median_of(std::vector<double> v) {
  check(!v.empty(), "median: empty");
  const size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    // Average of the two middle elements, matching the usual numpy protocol.
    const double lower = *std::max_element(v.begin(), v.begin() + mid);
    m = 0.5 * (m + lower);
  }
  return m;
}

std::string format_fields(const MetricRecord& r, bool with_names,
                          const char* sep, const char* prefix,
                          const char* suffix) {
  const struct {
    const char* name;
    double value;
  } fields[7] = {{"abs_rel", r.abs_rel}, {"sq_rel", r.sq_rel},
                 {"rmse", r.rmse},       {"rmse_log", r.rmse_log},
                 {"a1", r.a1},           {"a2", r.a2},
                 {"a3", r.a3}};
  std::string out = prefix;
  char buf[64];
  for (int i = 0; i < 7; ++i) {
    if (i) out += sep;
    if (with_names)
      std::snprintf(buf, sizeof(buf), "\"%s\": %.17g", fields[i].name,
                    fields[i].value);
    else
      std::snprintf(buf, sizeof(buf), "%.17g", fields[i].value);
    out += buf;
  }
  return out + suffix;
}

}  // namespace

MetricRecord compute_metrics(const Tensor& pred, const Tensor& gt_values,
                             const Tensor& gt_valid, bool median_scale,
                             double clamp_min, double clamp_max) {
  check(pred.same_shape(gt_values) && pred.same_shape(gt_valid),
        "compute_metrics: pred/gt/valid shapes must match");
  check(clamp_min > 0.0 && clamp_min < clamp_max,
        "compute_metrics: clamp range must be positive and ordered");

  std::vector<double> p, g;
  for (int64_t i = 0; i < pred.numel(); ++i) {
    if (gt_valid[i] == 0.0) continue;
    check(std::isfinite(pred[i]), "compute_metrics: non-finite prediction");
    check(std::isfinite(gt_values[i]) && gt_values[i] > 0.0,
          "compute_metrics: ground truth must be positive where valid");
    p.push_back(pred[i]);
    g.push_back(gt_values[i]);
  }
  check(!p.empty(), "compute_metrics: no valid ground-truth pixels");

  if (median_scale) {
    const double scale = median_of(g) / median_of(p);
    for (double& x : p) x *= scale;
  }
  for (double& x : p) x = std::min(std::max(x, clamp_min), clamp_max);

  MetricRecord r;
  const double n = static_cast<double>(p.size());
  const double t1 = 1.25, t2 = 1.25 * 1.25, t3 = 1.25 * 1.25 * 1.25;
  std::vector<double> abs_terms(p.size()), sq_terms(p.size()), se_terms(p.size()),
      sle_terms(p.size());
  for (size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - g[i];
    abs_terms[i] = std::abs(d) / g[i];
    sq_terms[i] = d * d / g[i];
    se_terms[i] = d * d;
    const double dl = std::log(p[i]) - std::log(g[i]);
    sle_terms[i] = dl * dl;
    const double ratio = std::max(p[i] / g[i], g[i] / p[i]);
    r.a1 += ratio < t1 ? 1.0 : 0.0;
    r.a2 += ratio < t2 ? 1.0 : 0.0;
    r.a3 += ratio < t3 ? 1.0 : 0.0;
  }
  // Sorted summation makes each mean a function of the pixel multiset alone,
  // so metrics are bitwise invariant under any pixel permutation.
  const auto sorted_sum = [](std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc;
  };
  r.abs_rel = sorted_sum(abs_terms) / n;
  r.sq_rel = sorted_sum(sq_terms) / n;
  r.rmse = std::sqrt(sorted_sum(se_terms) / n);
  r.rmse_log = std::sqrt(sorted_sum(sle_terms) / n);
  r.a1 /= n;
  r.a2 /= n;
  r.a3 /= n;
  return r;
}

MetricRecord compute_metrics(const Tensor& pred, const SparseDepthTarget& gt,
                             bool median_scale, double clamp_min,
                             double clamp_max) {
  return compute_metrics(pred, gt.values, gt.valid, median_scale, clamp_min,
                         clamp_max);
}

MetricRecord compute_metrics(const Tensor& pred, const DepthMap& gt,
                             bool median_scale, double clamp_min,
                             double clamp_max) {
  Tensor all_valid(gt.data.shape(), 1.0);
  return compute_metrics(pred, gt.data, all_valid, median_scale, clamp_min,
                         clamp_max);
}

DistillMode parse_distill_mode(const std::string& name) {
  if (name == "uw") return DistillMode::kUW;
  if (name == "ut") return DistillMode::kUT;
  if (name == "uwt") return DistillMode::kUWT;
  throw std::runtime_error("unknown distillation mode '" + name +
                           "' (expected uw, ut, or uwt)");
}

const char* distill_mode_name(DistillMode mode) {
  switch (mode) {
    case DistillMode::kUW: return "uw";
    case DistillMode::kUT: return "ut";
    case DistillMode::kUWT: return "uwt";
  }
  return "?";
}

Tensor distillation_weight(DistillMode mode, const Tensor& sigma, double tau) {
  check(tau > 0.0, "distillation_weight: tau must be positive");
  Tensor w(sigma.shape());
  for (int64_t i = 0; i < sigma.numel(); ++i) {
    const double s = sigma[i];
    check(std::isfinite(s) && s > 0.0,
          "distillation_weight: sigma must be positive");
    switch (mode) {
      case DistillMode::kUW: w[i] = 1.0 / s; break;
      case DistillMode::kUT: w[i] = s < tau ? 1.0 : 0.0; break;
      case DistillMode::kUWT: w[i] = s < tau ? 1.0 / s : 0.0; break;
    }
  }
  return w;
}

std::string metrics_csv_header() {
  return "abs_rel,sq_rel,rmse,rmse_log,a1,a2,a3";
}

std::string metrics_csv_row(const MetricRecord& r) {
  return format_fields(r, false, ",", "", "");
}

std::string metrics_json(const MetricRecord& r) {
  return format_fields(r, true, ", ", "{", "}");
}

BranchPrediction predict_full(const BranchNetwork& net, const Tensor& image) {
  const BranchOutput out = net.forward(image);
  const int64_t h = image.dim(1), w = image.dim(2);
  const auto full = [&](const Var& grid) {
    if (grid.value().dim(0) == h && grid.value().dim(1) == w)
      return grid.value();
    Var up = reshape(grid, {1, grid.value().dim(0), grid.value().dim(1)});
    return reshape(resize_bilinear(up, h, w), {h, w}).value();
  };
  return {full(out.depth[0]), full(out.log_sigma[0])};
}

MetricRecord average_records(const std::vector<MetricRecord>& records) {
  check(!records.empty(), "average_records: empty");
  MetricRecord r;
  for (const auto& x : records) {
    r.abs_rel += x.abs_rel;
    r.sq_rel += x.sq_rel;
    r.rmse += x.rmse;
    r.rmse_log += x.rmse_log;
    r.a1 += x.a1;
    r.a2 += x.a2;
    r.a3 += x.a3;
  }
  const double n = static_cast<double>(records.size());
  r.abs_rel /= n;
  r.sq_rel /= n;
  r.rmse /= n;
  r.rmse_log /= n;
  r.a1 /= n;
  r.a2 /= n;
  r.a3 /= n;
  return r;
}

MetricRecord evaluate_branch(const BranchNetwork& net,
                             const std::vector<FrameSample>& frames,
                             bool median_scale) {
  check(!frames.empty(), "evaluate_branch: no frames");
  std::vector<MetricRecord> records;
  for (const auto& f : frames) {
    const BranchPrediction pred = predict_full(net, f.target.data);
    if (f.dense_gt.has_value())
      records.push_back(compute_metrics(pred.depth, *f.dense_gt, median_scale));
    else
      records.push_back(compute_metrics(pred.depth, f.sparse_gt, median_scale));
  }
  return average_records(records);
}

BranchSelection select_final_branch(const BranchNetwork& sup,
                                    const BranchNetwork& uns,
                                    const std::vector<FrameSample>& frames,
                                    bool force_supervised, bool median_scale) {
  BranchSelection sel;
  sel.supervised = evaluate_branch(sup, frames, median_scale);
  sel.unsupervised = evaluate_branch(uns, frames, median_scale);
  sel.selected = force_supervised ? "supervised" : "unsupervised";
  return sel;
}

}  // namespace md
