#include "mutualdepth/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mutualdepth/nn.hpp"
#include "mutualdepth/rng.hpp"
#include "mutualdepth/synthdata.hpp"

namespace md {

namespace {

// Seed-stream tags so augmentation, shuffling, and the two network
// initializations never share an Rng sequence.
constexpr uint64_t kStreamAugment = 0xA1;
constexpr uint64_t kStreamShuffle = 0x51;
constexpr uint64_t kStreamInitSup = 0x15;
constexpr uint64_t kStreamInitUns = 0x16;

uint64_t augment_seed(uint64_t base, int64_t step, int64_t index) {
  return mix_seed(mix_seed(mix_seed(base, kStreamAugment),
                           static_cast<uint64_t>(step)),
                  static_cast<uint64_t>(index));
}

AugmentOptions augment_options(const TrainOptions& opts) {
  AugmentOptions aug;
  aug.shared_flip = opts.flip;
  aug.per_branch_jitter = opts.noise_augment;
  aug.instance_noise = opts.noise_augment;
  return aug;
}

// [sh,sw] prediction -> [h,w] full resolution.
Var upsample_full(const Var& x, int64_t h, int64_t w) {
  check(x.shape().size() == 2, "upsample_full: expected a rank-2 map");
  if (x.shape()[0] == h && x.shape()[1] == w) return x;
  Var r = reshape(x, {1, x.shape()[0], x.shape()[1]});
  r = resize_bilinear(r, h, w);
  return reshape(r, {h, w});
}

void check_batch(const std::vector<FrameSample>& batch, const char* fn) {
  check(!batch.empty(), std::string(fn) + ": empty batch");
  for (const FrameSample& s : batch) {
    check(s.sparse_gt.valid_count() >= 1,
          std::string(fn) + ": a batch sample has no labeled depth pixels");
    check(!s.sources.empty(),
          std::string(fn) + ": a batch sample has no source views");
  }
}

void ensure_finite(double v, const char* term, int64_t step) {
  if (!std::isfinite(v)) {
    throw std::runtime_error("train_step: non-finite " + std::string(term) +
                             " at step " + std::to_string(step));
  }
}

void ensure_report_finite(const LossReport& r, int64_t step) {
  ensure_finite(r.l_s, "l_s", step);
  ensure_finite(r.l_u, "l_u", step);
  ensure_finite(r.l_smooth, "l_smooth", step);
  ensure_finite(r.l_su, "l_su", step);
  ensure_finite(r.l_uu, "l_uu", step);
  ensure_finite(r.l_sd, "l_sd", step);
  ensure_finite(r.l_ud, "l_ud", step);
  ensure_finite(r.total_s, "total_s", step);
  ensure_finite(r.total_u, "total_u", step);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Adam

AdamOptimizer::AdamOptimizer(double lr, double beta1, double beta2, double eps)
    : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
  check(lr > 0 && eps > 0, "AdamOptimizer: lr and eps must be positive");
  check(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1,
        "AdamOptimizer: betas must lie in [0,1)");
}

void AdamOptimizer::step(const std::vector<Var>& params) {
  check(!params.empty(), "AdamOptimizer::step: no parameters");
  if (m_.empty()) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Var& p : params) {
      m_.push_back(Tensor::zeros(p.shape()));
      v_.push_back(Tensor::zeros(p.shape()));
    }
  }
  check(m_.size() == params.size(),
        "AdamOptimizer::step: parameter count changed between steps");
  t_ += 1;
  const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    Var p = params[i];  // shares the node; gives mutable access to the value
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    check(m.shape() == p.shape(),
          "AdamOptimizer::step: parameter shape changed between steps");
    const Tensor* g = p.has_grad() ? &p.grad() : nullptr;
    Tensor& val = p.value();
    const int64_t n = val.numel();
    for (int64_t k = 0; k < n; ++k) {
      const double gk = g ? (*g)[k] : 0.0;
      m[k] = b1_ * m[k] + (1.0 - b1_) * gk;
      v[k] = b2_ * v[k] + (1.0 - b2_) * gk * gk;
      val[k] -= lr_ * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + eps_);
    }
    p.clear_grad();
  }
}

void AdamOptimizer::restore(int64_t t, std::vector<Tensor> m,
                            std::vector<Tensor> v) {
  check(t >= 0, "AdamOptimizer::restore: negative step count");
  check(m.size() == v.size(),
        "AdamOptimizer::restore: moment vectors differ in length");
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

// ---------------------------------------------------------------------------
// Options / config bridges

TrainOptions TrainOptions::from_config(const Config& cfg) {
  TrainOptions o;
  o.weights = cfg.weights;
  o.filtering = cfg.loss_filtering;
  o.noise_augment = cfg.augment_noise;
  o.distill_mode = cfg.mode();
  o.distill_tau = cfg.distill_tau;
  o.warmup = cfg.train_warmup;
  o.reduce = cfg.reduce();
  o.automask = cfg.photometric_automask;
  o.smooth_normalized = cfg.smoothness_normalized;
  o.seed = cfg.seed;
  return o;
}

BranchConfig branch_config_from(const Config& cfg) {
  BranchConfig bc;
  bc.widths.assign(cfg.model_widths.begin(), cfg.model_widths.end());
  return bc;
}

SceneParams scene_params_from(const Config& cfg) {
  SceneParams sp;
  sp.height = cfg.data_height;
  sp.width = cfg.data_width;
  sp.frames = static_cast<int>(cfg.data_frames);
  sp.boxes = static_cast<int>(cfg.data_boxes);
  sp.scanlines = static_cast<int>(cfg.data_scanlines);
  sp.dropout = cfg.data_dropout;
  sp.horizon_frac = cfg.data_horizon;
  return sp;
}

// ---------------------------------------------------------------------------
// Loss composition

StepLosses build_dual_losses(const BranchNetwork& sup, const BranchNetwork& uns,
                             const std::vector<FrameSample>& batch,
                             const TrainOptions& opts, int64_t step) {
  check_batch(batch, "build_dual_losses");
  opts.weights.validate();
  const LossWeights& w = opts.weights;
  const AugmentOptions aug = augment_options(opts);
  const bool distill_on = step >= opts.warmup;

  Var l_su = Var::scalar(0.0);
  Var l_uu = Var::scalar(0.0);
  Var l_sd = Var::scalar(0.0);
  Var l_ud = Var::scalar(0.0);
  Var l_smooth = Var::scalar(0.0);
  double diag_l_s = 0.0;
  double diag_l_u = 0.0;
  int64_t terms = 0;

  for (size_t i = 0; i < batch.size(); ++i) {
    const AugmentedPair pair = augment_pair(
        batch[i], augment_seed(opts.seed, step, static_cast<int64_t>(i)), aug);
    const BranchOutput out_s = sup.forward(pair.view_s.target.data);
    const BranchOutput out_u = uns.forward(pair.view_u.target.data);
    const int64_t h = pair.view_u.target.data.dim(1);
    const int64_t ww = pair.view_u.target.data.dim(2);
    check(out_s.depth.size() == out_u.depth.size(),
          "build_dual_losses: branch scale counts differ");

    for (size_t s = 0; s < out_s.depth.size(); ++s) {
      const Var d_s = upsample_full(out_s.depth[s], h, ww);
      const Var sig_s = upsample_full(out_s.log_sigma[s], h, ww);
      const Var d_u = upsample_full(out_u.depth[s], h, ww);
      const Var sig_u = upsample_full(out_u.log_sigma[s], h, ww);

      l_su = l_su + supervised_uncertainty_loss(d_s, sig_s,
                                                pair.view_s.sparse_gt, w.mu_s,
                                                w.m, opts.filtering);
      const PhotoError pe =
          reprojection_error(pair.view_u.target.data, pair.view_u.sources, d_u,
                             pair.view_u.camera, w.alpha, opts.reduce,
                             opts.automask);
      l_uu = l_uu + unsupervised_uncertainty_loss(pe, sig_u, w.mu_u);
      l_smooth =
          l_smooth + smoothness_loss(d_u, pair.view_u.target.data,
                                     opts.smooth_normalized);

      // Plain-loss diagnostics on detached values; no graph growth.
      diag_l_s += supervised_l1(Var::constant(d_s.value()),
                                pair.view_s.sparse_gt)
                      .item();
      diag_l_u += unsupervised_photometric_loss(
                      PhotoError{Var::constant(pe.pe.value()), pe.valid,
                                 pe.n_valid})
                      .item();

      if (distill_on) {
        // Each branch is the other's student; teachers enter as plain
        // tensors so no gradient flows into them.
        const Tensor w_from_u = distillation_weight(
            opts.distill_mode, sigma_from_log(sig_u.value()), opts.distill_tau);
        const Tensor w_from_s = distillation_weight(
            opts.distill_mode, sigma_from_log(sig_s.value()), opts.distill_tau);
        l_sd = l_sd + weighted_distillation_loss(d_s, d_u.value(), w_from_u);
        l_ud = l_ud + weighted_distillation_loss(d_u, d_s.value(), w_from_s);
      }
      ++terms;
    }
  }

  const double inv = 1.0 / static_cast<double>(terms);
  l_su = l_su * inv;
  l_uu = l_uu * inv;
  l_sd = l_sd * inv;
  l_ud = l_ud * inv;
  l_smooth = l_smooth * inv;

  StepLosses out;
  out.total_s = l_su + w.lambda_s * l_sd;
  out.total_u = l_uu + w.lambda_u * l_ud + w.lambda_smooth * l_smooth;

  out.report.l_s = diag_l_s * inv;
  out.report.l_u = diag_l_u * inv;
  out.report.l_smooth = l_smooth.item();
  out.report.l_su = l_su.item();
  out.report.l_uu = l_uu.item();
  out.report.l_sd = l_sd.item();
  out.report.l_ud = l_ud.item();
  fill_totals(out.report, w);
  return out;
}

StepLosses build_baseline_losses(const BranchNetwork& net,
                                 const std::vector<FrameSample>& batch,
                                 const TrainOptions& opts, int64_t step) {
  check_batch(batch, "build_baseline_losses");
  opts.weights.validate();
  const LossWeights& w = opts.weights;
  AugmentOptions aug = augment_options(opts);
  // The single network consumes one view, and its reprojection loss needs
  // the target photometrically consistent with the sources. Instance noise
  // is target-only by design, so the baseline takes the jitter-only view;
  // the noise toggle degenerates to jitter on/off here.
  aug.instance_noise = false;

  Var sup_term = Var::scalar(0.0);
  Var photo = Var::scalar(0.0);
  Var smooth = Var::scalar(0.0);
  double diag_l_s = 0.0;
  int64_t terms = 0;

  for (size_t i = 0; i < batch.size(); ++i) {
    const AugmentedPair pair = augment_pair(
        batch[i], augment_seed(opts.seed, step, static_cast<int64_t>(i)), aug);
    const FrameSample& view = pair.view_u;
    const BranchOutput out = net.forward(view.target.data);
    const int64_t h = view.target.data.dim(1);
    const int64_t ww = view.target.data.dim(2);

    for (size_t s = 0; s < out.depth.size(); ++s) {
      const Var d = upsample_full(out.depth[s], h, ww);
      if (opts.filtering) {
        const Var sig = upsample_full(out.log_sigma[s], h, ww);
        sup_term = sup_term + supervised_uncertainty_loss(
                                  d, sig, view.sparse_gt, w.mu_s, w.m, true);
      } else {
        sup_term = sup_term + supervised_l1(d, view.sparse_gt);
      }
      photo = photo + unsupervised_photometric_loss(
                          view.target.data, view.sources, d, view.camera,
                          w.alpha, opts.reduce, opts.automask);
      smooth =
          smooth + smoothness_loss(d, view.target.data, opts.smooth_normalized);
      diag_l_s +=
          supervised_l1(Var::constant(d.value()), view.sparse_gt).item();
      ++terms;
    }
  }

  const double inv = 1.0 / static_cast<double>(terms);
  sup_term = sup_term * inv;
  photo = photo * inv;
  smooth = smooth * inv;

  StepLosses out;
  Var total = sup_term + w.lambda_u * photo + w.lambda_smooth * smooth;
  out.total_s = total;
  out.total_u = total;

  out.report.l_s = diag_l_s * inv;
  out.report.l_u = photo.item();
  out.report.l_smooth = smooth.item();
  out.report.l_su = opts.filtering ? sup_term.item() : 0.0;
  const double t = total.item();
  out.report.total_s = t;
  out.report.total_u = t;
  out.report.baseline = t;
  (void)step;
  return out;
}

// ---------------------------------------------------------------------------
// Optimization steps

LossReport train_step(BranchNetwork& sup, BranchNetwork& uns,
                      AdamOptimizer& opt_s, AdamOptimizer& opt_u,
                      const std::vector<FrameSample>& batch,
                      const TrainOptions& opts, int64_t step) {
  const StepLosses sl = build_dual_losses(sup, uns, batch, opts, step);
  ensure_report_finite(sl.report, step);
  // The two objectives live on disjoint graphs (teachers are detached), so
  // one backward pass over the sum reaches exactly each branch's gradients.
  backward(sl.total_s + sl.total_u);
  opt_s.step(sup.parameters());
  opt_u.step(uns.parameters());
  return sl.report;
}

LossReport baseline_step(BranchNetwork& net, AdamOptimizer& opt,
                         const std::vector<FrameSample>& batch,
                         const TrainOptions& opts, int64_t step) {
  const StepLosses sl = build_baseline_losses(net, batch, opts, step);
  ensure_report_finite(sl.report, step);
  backward(sl.total_s);
  opt.step(net.parameters());
  return sl.report;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kCkptMagic[4] = {'M', 'D', 'C', 'P'};
constexpr uint32_t kCkptVersion = 1;

void write_u32(std::ostream& os, uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_i64(std::ostream& os, int64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_string(std::ostream& os, const std::string& s) {
  write_i64(os, static_cast<int64_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void write_tensor(std::ostream& os, const Tensor& t) {
  write_u32(os, static_cast<uint32_t>(t.rank()));
  for (int i = 0; i < t.rank(); ++i) write_i64(os, t.shape()[i]);
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

uint32_t read_u32(std::istream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  check(bool(is), "load_checkpoint: truncated file");
  return v;
}
int64_t read_i64(std::istream& is) {
  int64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  check(bool(is), "load_checkpoint: truncated file");
  return v;
}
std::string read_string(std::istream& is) {
  const int64_t n = read_i64(is);
  check(n >= 0 && n < (1 << 24), "load_checkpoint: corrupt string length");
  std::string s(static_cast<size_t>(n), '\0');
  is.read(s.data(), n);
  check(bool(is), "load_checkpoint: truncated file");
  return s;
}
Tensor read_tensor(std::istream& is) {
  const uint32_t rank = read_u32(is);
  check(rank >= 1 && rank <= 4, "load_checkpoint: corrupt tensor rank");
  std::vector<int64_t> shape(rank);
  int64_t numel = 1;
  for (uint32_t i = 0; i < rank; ++i) {
    shape[i] = read_i64(is);
    check(shape[i] > 0 && shape[i] < (int64_t(1) << 32),
          "load_checkpoint: corrupt tensor shape");
    numel *= shape[i];
  }
  Tensor t(shape);
  is.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(numel * sizeof(double)));
  check(bool(is), "load_checkpoint: truncated file");
  return t;
}

void write_tensor_list(std::ostream& os, const std::vector<Tensor>& ts) {
  write_i64(os, static_cast<int64_t>(ts.size()));
  for (const Tensor& t : ts) write_tensor(os, t);
}
std::vector<Tensor> read_tensor_list(std::istream& is) {
  const int64_t n = read_i64(is);
  check(n >= 0 && n < (1 << 20), "load_checkpoint: corrupt list length");
  std::vector<Tensor> ts;
  ts.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) ts.push_back(read_tensor(is));
  return ts;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  check(ck.params.size() == ck.opt.size(),
        "save_checkpoint: one optimizer state per network required");
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    check(bool(os), "save_checkpoint: cannot open '" + tmp + "'");
    os.write(kCkptMagic, 4);
    write_u32(os, kCkptVersion);
    write_string(os, serialize_config(ck.config));
    write_i64(os, ck.step);
    write_i64(os, static_cast<int64_t>(ck.params.size()));
    for (size_t i = 0; i < ck.params.size(); ++i) {
      write_tensor_list(os, ck.params[i]);
      write_i64(os, ck.opt[i].t);
      write_tensor_list(os, ck.opt[i].m);
      write_tensor_list(os, ck.opt[i].v);
    }
    os.flush();
    check(bool(os), "save_checkpoint: write to '" + tmp + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  check(bool(is), "load_checkpoint: cannot open '" + path + "'");
  char magic[4] = {0, 0, 0, 0};
  is.read(magic, 4);
  check(bool(is) && std::equal(magic, magic + 4, kCkptMagic),
        "load_checkpoint: '" + path + "' is not a checkpoint file");
  const uint32_t version = read_u32(is);
  check(version == kCkptVersion,
        "load_checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ck;
  ck.config = parse_config_text(read_string(is));
  ck.step = read_i64(is);
  const int64_t n_nets = read_i64(is);
  check(n_nets >= 1 && n_nets <= 2, "load_checkpoint: corrupt network count");
  for (int64_t i = 0; i < n_nets; ++i) {
    ck.params.push_back(read_tensor_list(is));
    Checkpoint::OptState st;
    st.t = read_i64(is);
    st.m = read_tensor_list(is);
    st.v = read_tensor_list(is);
    check(st.m.size() == ck.params.back().size() &&
              st.v.size() == ck.params.back().size(),
          "load_checkpoint: optimizer state does not match parameters");
    ck.opt.push_back(std::move(st));
  }
  return ck;
}

BranchNetwork restore_network(const BranchConfig& bc,
                              const std::vector<Tensor>& params) {
  Rng rng(0);
  BranchNetwork net(bc, rng);
  std::vector<Var>& ps = net.parameters();
  check(ps.size() == params.size(),
        "restore_network: checkpoint parameter count does not match the "
        "configured architecture");
  for (size_t i = 0; i < ps.size(); ++i) {
    check(ps[i].shape() == params[i].shape(),
          "restore_network: checkpoint parameter shape mismatch");
    ps[i].value() = params[i];
  }
  return net;
}

// ---------------------------------------------------------------------------
// Full training run

namespace {

std::string loss_csv_header() {
  return "step,l_s,l_u,l_smooth,l_su,l_uu,l_sd,l_ud,total_s,total_u";
}

std::string loss_csv_row(int64_t step, const LossReport& r) {
  std::string row = std::to_string(step);
  for (double v : {r.l_s, r.l_u, r.l_smooth, r.l_su, r.l_uu, r.l_sd, r.l_ud,
                   r.total_s, r.total_u}) {
    row += ',';
    row += format_double(v);
  }
  return row;
}

std::vector<Tensor> parameter_values(const BranchNetwork& net) {
  std::vector<Tensor> out;
  out.reserve(net.parameters().size());
  for (const Var& p : net.parameters()) out.push_back(p.value());
  return out;
}

Checkpoint::OptState optimizer_state(const AdamOptimizer& opt,
                                     const BranchNetwork& net) {
  Checkpoint::OptState st;
  st.t = opt.t();
  st.m = opt.m_state();
  st.v = opt.v_state();
  if (st.m.empty()) {
    // The optimizer allocates its moments on first use; an untouched one is
    // equivalent to all-zero moments, which is what the checkpoint stores.
    for (const Var& p : net.parameters()) {
      st.m.push_back(Tensor::zeros(p.shape()));
      st.v.push_back(Tensor::zeros(p.shape()));
    }
  }
  return st;
}

}  // namespace

FitResult fit(const Config& cfg, const std::string& out_dir,
              std::function<bool()> should_stop) {
  cfg.validate();
  check(!cfg.dataset_root.empty(), "fit: dataset.root is not set");
  std::filesystem::create_directories(out_dir);

  const SceneParams sp = scene_params_from(cfg);
  const std::vector<FrameSample> all =
      load_dataset(cfg.dataset_root, sp, cfg.seed);
  const int64_t n = static_cast<int64_t>(all.size());
  const int64_t n_val =
      std::llround(static_cast<double>(n) * cfg.train_val_fraction);
  check(n_val < n, "fit: validation split leaves no training samples");
  const std::vector<FrameSample> train_set(all.begin(), all.end() - n_val);
  const std::vector<FrameSample> val_set(all.end() - n_val, all.end());
  const int64_t n_train = static_cast<int64_t>(train_set.size());
  const int64_t batch_size = std::min<int64_t>(cfg.train_batch, n_train);

  const BranchConfig bc = branch_config_from(cfg);
  const TrainOptions opts = TrainOptions::from_config(cfg);
  const bool dual = cfg.train_distill;

  Rng rng_sup(mix_seed(cfg.seed, kStreamInitSup));
  Rng rng_uns(mix_seed(cfg.seed, kStreamInitUns));
  BranchNetwork sup(bc, rng_sup);
  // Constructed unconditionally so the supervised stream's draws do not
  // depend on the mode; unused (and untouched) in baseline runs.
  BranchNetwork uns(bc, rng_uns);
  AdamOptimizer opt_s(cfg.train_lr);
  AdamOptimizer opt_u(cfg.train_lr);

  std::ofstream loss_csv(out_dir + "/loss_history.csv", std::ios::trunc);
  check(bool(loss_csv), "fit: cannot write to '" + out_dir + "'");
  loss_csv << loss_csv_header() << '\n';
  std::ofstream val_csv(out_dir + "/val_history.csv", std::ios::trunc);
  val_csv << "step,branch," << metrics_csv_header() << '\n';

  FitResult result;
  result.dual = dual;
  result.checkpoint_path = out_dir + "/checkpoint.bin";

  const auto save_state = [&](int64_t step) {
    Checkpoint ck;
    ck.config = cfg;
    ck.step = step;
    ck.params.push_back(parameter_values(sup));
    ck.opt.push_back(optimizer_state(opt_s, sup));
    if (dual) {
      ck.params.push_back(parameter_values(uns));
      ck.opt.push_back(optimizer_state(opt_u, uns));
    }
    save_checkpoint(result.checkpoint_path, ck);
  };

  const auto validate_now = [&](int64_t step) {
    if (val_set.empty()) return;
    result.supervised = evaluate_branch(sup, val_set, cfg.eval_median_scale);
    result.unsupervised =
        dual ? evaluate_branch(uns, val_set, cfg.eval_median_scale)
             : result.supervised;
    val_csv << step << ",supervised," << metrics_csv_row(result.supervised)
            << '\n';
    if (dual) {
      val_csv << step << ",unsupervised,"
              << metrics_csv_row(result.unsupervised) << '\n';
    }
    val_csv.flush();
  };

  // Shuffled-epoch sampling: consecutive batches from a permutation that is
  // redrawn whenever fewer than batch_size indices remain.
  std::vector<int64_t> order;
  int64_t cursor = 0;
  int64_t epoch = 0;
  const auto next_batch = [&]() {
    if (cursor + batch_size > static_cast<int64_t>(order.size())) {
      order.resize(static_cast<size_t>(n_train));
      for (int64_t i = 0; i < n_train; ++i) order[static_cast<size_t>(i)] = i;
      Rng shuffle_rng(mix_seed(mix_seed(cfg.seed, kStreamShuffle),
                               static_cast<uint64_t>(epoch)));
      for (int64_t i = n_train - 1; i > 0; --i) {
        const int64_t j = shuffle_rng.below(static_cast<uint32_t>(i + 1));
        std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
      }
      cursor = 0;
      ++epoch;
    }
    std::vector<FrameSample> batch;
    batch.reserve(static_cast<size_t>(batch_size));
    for (int64_t k = 0; k < batch_size; ++k) {
      batch.push_back(train_set[static_cast<size_t>(
          order[static_cast<size_t>(cursor + k)])]);
    }
    cursor += batch_size;
    return batch;
  };

  int64_t last_ckpt = -1;
  int64_t last_val = -1;
  int64_t step = 0;
  for (; step < cfg.train_steps; ++step) {
    if (should_stop && should_stop()) break;
    const std::vector<FrameSample> batch = next_batch();
    const LossReport rep =
        dual ? train_step(sup, uns, opt_s, opt_u, batch, opts, step)
             : baseline_step(sup, opt_s, batch, opts, step);
    loss_csv << loss_csv_row(step, rep) << '\n';
    const int64_t done = step + 1;
    if (cfg.train_checkpoint_every > 0 &&
        done % cfg.train_checkpoint_every == 0) {
      save_state(done);
      last_ckpt = done;
    }
    if (cfg.train_eval_every > 0 && done % cfg.train_eval_every == 0) {
      validate_now(done);
      last_val = done;
    }
  }
  result.steps_run = step;
  loss_csv.flush();

  if (last_ckpt != step) save_state(step);
  if (last_val != step) validate_now(step);
  return result;
}

}  // namespace md
