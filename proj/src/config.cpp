#include "mutualdepth/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "mutualdepth/model.hpp"
#include "mutualdepth/synthdata.hpp"

namespace md {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* expected) {
  throw std::runtime_error("config key '" + key + "': cannot parse '" + value +
                           "' as " + expected);
}

// One entry per key: how to read it into the struct and how to print it.
struct KeyEntry {
  const char* key;
  std::function<void(Config&, const std::string&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

KeyEntry int_key(const char* key, int64_t Config::* field) {
  return {key,
          [field](Config& c, const std::string& k, const std::string& v) {
            int64_t out = 0;
            const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
            if (ec != std::errc() || p != v.data() + v.size())
              bad_value(k, v, "an integer");
            c.*field = out;
          },
          [field](const Config& c) { return std::to_string(c.*field); }};
}

KeyEntry double_key(const char* key, double Config::* field) {
  return {key,
          [field](Config& c, const std::string& k, const std::string& v) {
            try {
              size_t used = 0;
              c.*field = std::stod(v, &used);
              if (used != v.size()) bad_value(k, v, "a number");
            } catch (const std::exception&) {
              bad_value(k, v, "a number");
            }
          },
          [field](const Config& c) { return format_double(c.*field); }};
}

KeyEntry weight_key(const char* key, double LossWeights::* field) {
  return {key,
          [field](Config& c, const std::string& k, const std::string& v) {
            try {
              size_t used = 0;
              c.weights.*field = std::stod(v, &used);
              if (used != v.size()) bad_value(k, v, "a number");
            } catch (const std::exception&) {
              bad_value(k, v, "a number");
            }
          },
          [field](const Config& c) { return format_double(c.weights.*field); }};
}

KeyEntry bool_key(const char* key, bool Config::* field) {
  return {key,
          [field](Config& c, const std::string& k, const std::string& v) {
            if (v == "true" || v == "1" || v == "on")
              c.*field = true;
            else if (v == "false" || v == "0" || v == "off")
              c.*field = false;
            else
              bad_value(k, v, "a boolean (true/false)");
          },
          [field](const Config& c) { return c.*field ? "true" : "false"; }};
}

KeyEntry string_key(const char* key, std::string Config::* field) {
  return {key,
          [field](Config& c, const std::string&, const std::string& v) {
            c.*field = v;
          },
          [field](const Config& c) { return c.*field; }};
}

const std::vector<KeyEntry>& registry() {
  static const std::vector<KeyEntry> entries = [] {
    std::vector<KeyEntry> r;
    r.push_back({"seed",
                 [](Config& c, const std::string& k, const std::string& v) {
                   uint64_t out = 0;
                   const auto [p, ec] =
                       std::from_chars(v.data(), v.data() + v.size(), out);
                   if (ec != std::errc() || p != v.data() + v.size())
                     bad_value(k, v, "an unsigned integer");
                   c.seed = out;
                 },
                 [](const Config& c) { return std::to_string(c.seed); }});
    r.push_back(string_key("dataset.root", &Config::dataset_root));
    r.push_back(int_key("data.sequences", &Config::data_sequences));
    r.push_back(int_key("data.frames", &Config::data_frames));
    r.push_back(int_key("data.height", &Config::data_height));
    r.push_back(int_key("data.width", &Config::data_width));
    r.push_back(int_key("data.boxes", &Config::data_boxes));
    r.push_back(int_key("data.scanlines", &Config::data_scanlines));
    r.push_back(double_key("data.dropout", &Config::data_dropout));
    r.push_back(double_key("data.horizon", &Config::data_horizon));
    r.push_back({"model.widths",
                 [](Config& c, const std::string& k, const std::string& v) {
                   std::vector<int> widths;
                   std::stringstream ss(v);
                   std::string part;
                   while (std::getline(ss, part, ',')) {
                     part = trim(part);
                     int out = 0;
                     const auto [p, ec] = std::from_chars(
                         part.data(), part.data() + part.size(), out);
                     if (ec != std::errc() || p != part.data() + part.size())
                       bad_value(k, v, "comma-separated integers");
                     widths.push_back(out);
                   }
                   if (widths.empty()) bad_value(k, v, "comma-separated integers");
                   c.model_widths = std::move(widths);
                 },
                 [](const Config& c) {
                   std::string out;
                   for (size_t i = 0; i < c.model_widths.size(); ++i) {
                     if (i) out += ",";
                     out += std::to_string(c.model_widths[i]);
                   }
                   return out;
                 }});
    r.push_back(int_key("train.steps", &Config::train_steps));
    r.push_back(int_key("train.batch", &Config::train_batch));
    r.push_back(double_key("train.lr", &Config::train_lr));
    r.push_back(int_key("train.warmup", &Config::train_warmup));
    r.push_back(double_key("train.val_fraction", &Config::train_val_fraction));
    r.push_back(int_key("train.checkpoint_every", &Config::train_checkpoint_every));
    r.push_back(int_key("train.eval_every", &Config::train_eval_every));
    r.push_back(bool_key("train.distill", &Config::train_distill));
    r.push_back(weight_key("loss.lambda_s", &LossWeights::lambda_s));
    r.push_back(weight_key("loss.lambda_u", &LossWeights::lambda_u));
    r.push_back(weight_key("loss.lambda_smooth", &LossWeights::lambda_smooth));
    r.push_back(weight_key("loss.mu_s", &LossWeights::mu_s));
    r.push_back(weight_key("loss.mu_u", &LossWeights::mu_u));
    r.push_back(weight_key("loss.m", &LossWeights::m));
    r.push_back(weight_key("loss.alpha", &LossWeights::alpha));
    r.push_back(bool_key("loss.filtering", &Config::loss_filtering));
    r.push_back(bool_key("augment.noise", &Config::augment_noise));
    r.push_back(string_key("photometric.reduce", &Config::photometric_reduce));
    r.push_back(bool_key("photometric.automask", &Config::photometric_automask));
    r.push_back(bool_key("smoothness.normalized", &Config::smoothness_normalized));
    r.push_back(string_key("distill.mode", &Config::distill_mode));
    r.push_back(double_key("distill.tau", &Config::distill_tau));
    r.push_back(bool_key("eval.median_scale", &Config::eval_median_scale));
    r.push_back(string_key("eval.select", &Config::eval_select));
    return r;
  }();
  return entries;
}

const KeyEntry* find_key(const std::string& key) {
  for (const auto& e : registry())
    if (key == e.key) return &e;
  return nullptr;
}

}  // namespace

PhotometricReduce Config::reduce() const {
  if (photometric_reduce == "min") return PhotometricReduce::kMin;
  if (photometric_reduce == "mean") return PhotometricReduce::kMean;
  throw std::runtime_error("config key 'photometric.reduce': expected min or mean, got '" +
                           photometric_reduce + "'");
}

DistillMode Config::mode() const { return parse_distill_mode(distill_mode); }

void Config::validate() const {
  weights.validate();
  (void)reduce();
  (void)mode();
  check(train_steps >= 0, "config: train.steps must be >= 0");
  check(train_batch >= 1, "config: train.batch must be >= 1");
  check(train_lr > 0.0, "config: train.lr must be positive");
  check(train_warmup >= 0, "config: train.warmup must be >= 0");
  check(train_val_fraction >= 0.0 && train_val_fraction < 1.0,
        "config: train.val_fraction must be in [0, 1)");
  check(train_checkpoint_every >= 1, "config: train.checkpoint_every must be >= 1");
  check(train_eval_every >= 1, "config: train.eval_every must be >= 1");
  check(distill_tau > 0.0, "config: distill.tau must be positive");
  check(eval_select == "supervised" || eval_select == "unsupervised",
        "config: eval.select must be supervised or unsupervised");
  BranchConfig bc;
  bc.widths.assign(model_widths.begin(), model_widths.end());
  bc.validate();
  SceneParams sp;
  sp.height = data_height;
  sp.width = data_width;
  sp.frames = static_cast<int>(data_frames);
  sp.boxes = static_cast<int>(data_boxes);
  sp.scanlines = static_cast<int>(data_scanlines);
  sp.dropout = data_dropout;
  sp.horizon_frac = data_horizon;
  sp.validate();
  check(data_sequences >= 1, "config: data.sequences must be >= 1");
}

void apply_override(Config& cfg, const std::string& key,
                    const std::string& value) {
  const KeyEntry* e = find_key(key);
  if (!e) throw std::runtime_error("unknown config key '" + key + "'");
  e->set(cfg, key, value);
}

Config parse_config_text(const std::string& text) {
  Config cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    apply_override(cfg, key, value);
  }
  return cfg;
}

Config load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_config_text(buf.str());
}

std::string serialize_config(const Config& cfg) {
  std::vector<std::pair<std::string, std::string>> rows;
  for (const auto& e : registry()) rows.emplace_back(e.key, e.get(cfg));
  std::sort(rows.begin(), rows.end());
  std::string out;
  for (const auto& [k, v] : rows) out += k + " = " + v + "\n";
  return out;
}

}  // namespace md
