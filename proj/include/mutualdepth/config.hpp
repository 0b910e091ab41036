#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mutualdepth/core.hpp"
#include "mutualdepth/eval.hpp"
#include "mutualdepth/losses.hpp"

namespace md {

// Flat key-value run configuration. One line per key in the file form:
//   train.steps = 5000      # comments and blank lines are fine
// Unknown keys and malformed values are errors so typos cannot silently
// change a run.
struct Config {
  uint64_t seed = 0;
  std::string dataset_root;

  // data generation (gen-data and the sparsifier used when loading)
  int64_t data_sequences = 20;
  int64_t data_frames = 12;
  int64_t data_height = 64;
  int64_t data_width = 96;
  int64_t data_boxes = 6;
  int64_t data_scanlines = 8;
  double data_dropout = 0.28;
  double data_horizon = 0.55;

  std::vector<int> model_widths = {16, 32, 64, 128, 256};

  int64_t train_steps = 5000;
  int64_t train_batch = 2;
  double train_lr = 1e-4;
  int64_t train_warmup = 500;
  double train_val_fraction = 0.2;
  int64_t train_checkpoint_every = 1000;
  int64_t train_eval_every = 1000;
  bool train_distill = true;  // D: off = single-network baseline

  LossWeights weights;         // loss.lambda_s, loss.lambda_u, ...
  bool loss_filtering = true;  // M: uncertainty on unlabeled pixels

  bool augment_noise = true;  // N: per-branch jitter + instance noise

  std::string photometric_reduce = "min";  // "min" | "mean"
  bool photometric_automask = false;
  bool smoothness_normalized = true;

  std::string distill_mode = "uw";  // "uw" | "ut" | "uwt"
  double distill_tau = 0.1;

  bool eval_median_scale = false;
  std::string eval_select = "unsupervised";  // | "supervised"

  PhotometricReduce reduce() const;
  DistillMode mode() const;
  void validate() const;
};

// Parses file text (not a path). Later assignments win.
Config parse_config_text(const std::string& text);
Config load_config_file(const std::string& path);

// Applies one `key=value` override in place.
void apply_override(Config& cfg, const std::string& key,
                    const std::string& value);

// Canonical text: every key, one per line, sorted; parse(serialize(c)) == c.
std::string serialize_config(const Config& cfg);

}  // namespace md
