#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mutualdepth/augment.hpp"
#include "mutualdepth/config.hpp"
#include "mutualdepth/eval.hpp"
#include "mutualdepth/losses.hpp"
#include "mutualdepth/model.hpp"
#include "mutualdepth/synthdata.hpp"

namespace md {

// Adam with bias correction (update: p -= lr * m_hat / (sqrt(v_hat) + eps)).
// Parameters without a gradient this step contribute zero to the moments.
// step() consumes and clears each parameter's gradient.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8);

  void step(const std::vector<Var>& params);

  double lr() const { return lr_; }
  int64_t t() const { return t_; }
  const std::vector<Tensor>& m_state() const { return m_; }
  const std::vector<Tensor>& v_state() const { return v_; }
  void restore(int64_t t, std::vector<Tensor> m, std::vector<Tensor> v);

 private:
  double lr_, b1_, b2_, eps_;
  int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

// Everything train_step needs besides the networks and the batch.
struct TrainOptions {
  LossWeights weights;
  bool filtering = true;      // uncertainty demanded on unlabeled pixels
  bool noise_augment = true;  // per-branch jitter + instance noise
  bool flip = true;           // shared horizontal flip (off only for tests)
  DistillMode distill_mode = DistillMode::kUW;
  double distill_tau = 0.1;
  int64_t warmup = 500;  // steps before distillation terms activate
  PhotometricReduce reduce = PhotometricReduce::kMin;
  bool automask = false;
  bool smooth_normalized = true;
  uint64_t seed = 0;

  static TrainOptions from_config(const Config& cfg);
};

// The per-step losses as graph roots, exposed separately from the optimizer
// update so invariants (teacher detachment, warmup gating) are inspectable
// by gradient checks.
struct StepLosses {
  Var total_s;  // supervised-branch objective
  Var total_u;  // unsupervised-branch objective
  LossReport report;
};

// Dual-branch losses for one batch: augment each sample into a supervised
// and an unsupervised view (shared flip, independent photometry), forward
// the matching branch on each, upsample all scales to full resolution,
// average the probabilistic losses over scales and samples, and add the
// mutual distillation terms (teachers detached) once step >= warmup.
StepLosses build_dual_losses(const BranchNetwork& sup, const BranchNetwork& uns,
                             const std::vector<FrameSample>& batch,
                             const TrainOptions& opts, int64_t step);

// Single-network objective: plain L1 (or the probabilistic supervised loss
// when filtering is on) + weighted photometric + smoothness. total_s and
// total_u are the same root.
StepLosses build_baseline_losses(const BranchNetwork& net,
                                 const std::vector<FrameSample>& batch,
                                 const TrainOptions& opts, int64_t step);

// One optimization step: build losses, verify every term is finite (abort
// naming the offending term otherwise), backpropagate, update each branch
// with its own optimizer.
LossReport train_step(BranchNetwork& sup, BranchNetwork& uns,
                      AdamOptimizer& opt_s, AdamOptimizer& opt_u,
                      const std::vector<FrameSample>& batch,
                      const TrainOptions& opts, int64_t step);
LossReport baseline_step(BranchNetwork& net, AdamOptimizer& opt,
                         const std::vector<FrameSample>& batch,
                         const TrainOptions& opts, int64_t step);

BranchConfig branch_config_from(const Config& cfg);
SceneParams scene_params_from(const Config& cfg);

// On-disk training state: versioned binary, written atomically (tmp+rename)
// so an interrupted run always leaves the previous checkpoint intact.
struct Checkpoint {
  Config config;
  int64_t step = 0;
  // One entry per network: {supervised, unsupervised} for dual training,
  // one entry for baseline training.
  std::vector<std::vector<Tensor>> params;
  struct OptState {
    int64_t t = 0;
    std::vector<Tensor> m, v;
  };
  std::vector<OptState> opt;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// Builds a network from the config's widths and overwrites its parameters
// with the stored tensors.
BranchNetwork restore_network(const BranchConfig& bc,
                              const std::vector<Tensor>& params);

// Full training run driven by a config. Writes into out_dir:
//   loss_history.csv   step,l_s,l_u,l_smooth,l_su,l_uu,l_sd,l_ud,total_s,total_u
//   val_history.csv    step,branch,abs_rel,...
//   checkpoint.bin     latest state (every train.checkpoint_every and at end)
// Returns the final validation records. should_stop, when provided, is
// polled once per step for cooperative interruption.
struct FitResult {
  bool dual = true;
  MetricRecord supervised;    // final validation
  MetricRecord unsupervised;  // equals `supervised` for baseline runs
  int64_t steps_run = 0;
  std::string checkpoint_path;
};

FitResult fit(const Config& cfg, const std::string& out_dir,
              std::function<bool()> should_stop = {});

}  // namespace md
