#include <doctest.h>

#include <cmath>
#include <vector>

#include "mutualdepth/model.hpp"
#include "mutualdepth/nn.hpp"
#include "test_util.hpp"

using md::BranchConfig;
using md::BranchNetwork;
using md::BranchOutput;
using md::Rng;
using md::Tensor;
using md::Var;

namespace {

BranchConfig tiny_config() {
  BranchConfig cfg;
  cfg.widths = {4, 8, 8, 16, 16};
  return cfg;
}

Tensor rand_image(int64_t h, int64_t w, uint64_t seed) {
  Rng rng(seed);
  Tensor img({3, h, w});
  for (int64_t i = 0; i < img.numel(); ++i) img[i] = rng.uniform();
  return img;
}

}  // namespace

TEST_CASE("shape contract: four scales, halving with ceil") {
  Rng rng(11);
  BranchNetwork net(tiny_config(), rng);
  const Tensor img = rand_image(64, 96, 1);
  BranchOutput out = net.forward(img);
  REQUIRE(out.depth.size() == 4);
  REQUIRE(out.log_sigma.size() == 4);
  for (int s = 0; s < 4; ++s) {
    const int64_t eh = (64 + (1 << s) - 1) >> s;
    const int64_t ew = (96 + (1 << s) - 1) >> s;
    CHECK(out.depth[s].shape() == std::vector<int64_t>{eh, ew});
    CHECK(out.log_sigma[s].shape() == std::vector<int64_t>{eh, ew});
  }
}

TEST_CASE("fresh network: depths within bounds, sigma near 1 on average") {
  BranchConfig cfg = tiny_config();
  cfg.depth_min = 0.5;
  cfg.depth_max = 20.0;
  const Tensor img = rand_image(32, 64, 2);
  // A single tiny-width draw wanders, but zero head biases make the head
  // output zero-mean over weight draws; average across seeds to test that.
  double mean_ls[4] = {0, 0, 0, 0};
  const int kSeeds = 6;
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(100 + seed);
    BranchNetwork net(cfg, rng);
    BranchOutput out = net.forward(img);
    for (int s = 0; s < 4; ++s) {
      const Tensor& d = out.depth[s].value();
      for (int64_t i = 0; i < d.numel(); ++i) {
        CHECK(d[i] >= cfg.depth_min);
        CHECK(d[i] <= cfg.depth_max);
      }
      mean_ls[s] += out.log_sigma[s].value().mean() / kSeeds;
    }
  }
  // A systematic bias-initialization bug (e.g. log sigma starting at +3)
  // would survive this averaging; sampling noise does not.
  for (int s = 0; s < 4; ++s) CHECK(std::abs(mean_ls[s]) < 1.0);
}

TEST_CASE("forward is deterministic: two calls agree bitwise") {
  Rng rng(3);
  BranchNetwork net(tiny_config(), rng);
  const Tensor img = rand_image(32, 32, 4);
  BranchOutput a = net.forward(img);
  BranchOutput b = net.forward(img);
  for (int s = 0; s < 4; ++s) {
    const Tensor &da = a.depth[s].value(), &db = b.depth[s].value();
    REQUIRE(da.same_shape(db));
    for (int64_t i = 0; i < da.numel(); ++i) CHECK(da[i] == db[i]);
    const Tensor &sa = a.log_sigma[s].value(), &sb = b.log_sigma[s].value();
    for (int64_t i = 0; i < sa.numel(); ++i) CHECK(sa[i] == sb[i]);
  }
}

TEST_CASE("same seed reproduces the same network") {
  Rng r1(42), r2(42);
  BranchNetwork n1(tiny_config(), r1), n2(tiny_config(), r2);
  REQUIRE(n1.parameters().size() == n2.parameters().size());
  for (size_t i = 0; i < n1.parameters().size(); ++i) {
    const Tensor &a = n1.parameters()[i].value(), &b = n2.parameters()[i].value();
    REQUIRE(a.same_shape(b));
    for (int64_t j = 0; j < a.numel(); ++j) CHECK(a[j] == b[j]);
  }
}

TEST_CASE("two branches: equal parameter counts, no sharing") {
  Rng rng(5);
  BranchNetwork sup(tiny_config(), rng);
  BranchNetwork uns(tiny_config(), rng);
  CHECK(sup.parameter_count() == uns.parameter_count());
  CHECK(sup.parameter_count() > 0);

  const Tensor img = rand_image(32, 32, 6);
  const Tensor before = uns.forward(img).depth[0].value();

  // Perturbing every supervised parameter must leave the other branch alone.
  for (Var& p : sup.parameters())
    for (int64_t i = 0; i < p.numel(); ++i) p.value()[i] += 0.25;
  const Tensor after = uns.forward(img).depth[0].value();
  for (int64_t i = 0; i < before.numel(); ++i) CHECK(before[i] == after[i]);

  // ... and the perturbed branch must actually change.
  // (guards against accidentally testing a constant function)
  BranchNetwork fresh_rng_branch = [&] {
    Rng r(5);
    return BranchNetwork(tiny_config(), r);
  }();
  const Tensor d0 = fresh_rng_branch.forward(img).depth[0].value();
  const Tensor d1 = sup.forward(img).depth[0].value();
  double diff = 0;
  for (int64_t i = 0; i < d0.numel(); ++i) diff += std::abs(d0[i] - d1[i]);
  CHECK(diff > 0.0);
}

TEST_CASE("default config lands in the desk-scale parameter budget") {
  Rng rng(1);
  BranchNetwork net(BranchConfig{}, rng);
  CHECK(net.parameter_count() >= 1'000'000);
  CHECK(net.parameter_count() <= 2'000'000);
}

TEST_CASE("non-multiple-of-32 input is padded then cropped") {
  Rng rng(9);
  BranchNetwork net(tiny_config(), rng);
  BranchOutput out = net.forward(rand_image(50, 70, 8));
  CHECK(out.depth[0].shape() == std::vector<int64_t>{50, 70});
  CHECK(out.depth[1].shape() == std::vector<int64_t>{25, 35});
  CHECK(out.depth[2].shape() == std::vector<int64_t>{13, 18});
  CHECK(out.depth[3].shape() == std::vector<int64_t>{7, 9});
  for (int s = 0; s < 4; ++s) {
    CHECK(out.depth[s].value().all_finite());
    CHECK(out.log_sigma[s].value().all_finite());
  }
}

TEST_CASE("rejects bad inputs") {
  Rng rng(13);
  BranchNetwork net(tiny_config(), rng);
  CHECK_THROWS(net.forward(Tensor({1, 32, 32}, 0.5)));  // wrong channel count
  Tensor nan_img({3, 32, 32}, 0.5);
  nan_img[10] = std::nan("");
  CHECK_THROWS(net.forward(nan_img));
  // Too small to reflection-pad up to 32.
  CHECK_THROWS(net.forward(Tensor({3, 10, 32}, 0.5)));
}

TEST_CASE("config validation") {
  Rng rng(1);
  BranchConfig four_stages;
  four_stages.widths = {4, 8, 16, 32};
  CHECK_THROWS(BranchNetwork(four_stages, rng));
  BranchConfig bad_depth = tiny_config();
  bad_depth.depth_min = 5.0;
  bad_depth.depth_max = 1.0;
  CHECK_THROWS(BranchNetwork(bad_depth, rng));
}

TEST_CASE("gradients reach every parameter through the forward pass") {
  BranchConfig cfg = tiny_config();
  Rng rng(21);
  BranchNetwork net(cfg, rng);
  BranchOutput out = net.forward(rand_image(32, 32, 22));
  Var loss = Var::scalar(0.0);
  for (int s = 0; s < 4; ++s)
    loss = loss + md::mean(out.depth[s]) + md::mean(out.log_sigma[s]);
  md::backward(loss);
  int with_grad = 0;
  for (const Var& p : net.parameters())
    if (p.has_grad()) ++with_grad;
  // Every conv weight participates in one of the two decoders' outputs.
  CHECK(with_grad == static_cast<int>(net.parameters().size()));
}
