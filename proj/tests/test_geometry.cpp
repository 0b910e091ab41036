#include <doctest.h>

#include <cmath>
#include <vector>

#include "mutualdepth/geometry.hpp"
#include "mutualdepth/rng.hpp"

using md::CameraModel;
using md::RigidPose;
using md::Tensor;
using md::Var;
using md::Vec3;

namespace {

Tensor rand_tensor(const std::vector<int64_t>& shape, md::Rng& rng, double lo,
                   double hi) {
  Tensor t(shape);
  for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(lo, hi);
  return t;
}

RigidPose small_pose(md::Rng& rng, double rot_scale, double trans_scale) {
  md::Mat3 r = md::rotation_y(rng.uniform(-rot_scale, rot_scale)) *
               md::rotation_x(rng.uniform(-rot_scale, rot_scale)) *
               md::rotation_z(rng.uniform(-rot_scale, rot_scale));
  Vec3 t{rng.uniform(-trans_scale, trans_scale), rng.uniform(-trans_scale, trans_scale),
         rng.uniform(-trans_scale, trans_scale)};
  return {r, t};
}

}  // namespace

TEST_CASE("backproject: pinhole algebra") {
  // unit-focal camera: pixel (u=2, v=3) at depth 4 -> (8, 12, 4)
  Tensor d = Tensor::full({5, 5}, 4.0);
  Var p = md::backproject(Var::constant(d), CameraModel(1, 1, 0, 0));
  CHECK(p.value().at(0, 3, 2) == doctest::Approx(8.0));
  CHECK(p.value().at(1, 3, 2) == doctest::Approx(12.0));
  CHECK(p.value().at(2, 3, 2) == doctest::Approx(4.0));

  // principal point maps to the optical axis
  CameraModel cam(123.0, 77.0, 3.0, 2.0);
  Var q = md::backproject(Var::constant(Tensor::full({5, 5}, 9.0)), cam);
  CHECK(q.value().at(0, 2, 3) == doctest::Approx(0.0));
  CHECK(q.value().at(1, 2, 3) == doctest::Approx(0.0));
  CHECK(q.value().at(2, 2, 3) == doctest::Approx(9.0));

  // fx=fy=100, cx=32, cy=24, pixel (42,24), depth 2 -> (0.2, 0, 2)
  Var r = md::backproject(Var::constant(Tensor::full({25, 43}, 2.0)),
                          CameraModel(100, 100, 32, 24));
  CHECK(r.value().at(0, 24, 42) == doctest::Approx(0.2));
  CHECK(r.value().at(1, 24, 42) == doctest::Approx(0.0));
  CHECK(r.value().at(2, 24, 42) == doctest::Approx(2.0));
}

TEST_CASE("backproject: gradient wrt depth") {
  md::Rng rng(30);
  Var d = Var::leaf(rand_tensor({4, 5}, rng, 1.0, 10.0), true);
  CameraModel cam(20.0, 25.0, 2.0, 1.5);
  Var weights = Var::constant(rand_tensor({3, 4, 5}, rng, -1.0, 1.0));

  Var out = md::sum(md::backproject(d, cam) * weights);
  md::backward(out);
  const Tensor g = d.grad();

  const double step = 1e-6;
  for (int64_t i = 0; i < d.numel(); ++i) {
    const double orig = d.value()[i];
    d.value()[i] = orig + step;
    const double fp = md::sum(md::backproject(d, cam) * weights).item();
    d.value()[i] = orig - step;
    const double fm = md::sum(md::backproject(d, cam) * weights).item();
    d.value()[i] = orig;
    CHECK(g[i] == doctest::Approx((fp - fm) / (2 * step)).epsilon(1e-5));
  }
}

TEST_CASE("project: on-axis point under pure translation") {
  Tensor pts({3, 1, 2});
  pts.at(0, 0, 0) = 0.0;
  pts.at(1, 0, 0) = 0.0;
  pts.at(2, 0, 0) = 2.0;
  pts.at(2, 0, 1) = 2.0;
  RigidPose pose(md::Mat3::identity(), {0.0, 0.0, -1.0});
  md::Projection pr = md::project(Var::constant(pts), pose, CameraModel(1, 1, 0, 0));
  CHECK(pr.mask.at(0, 0) == 1.0);
  CHECK(pr.coords.value().at(0, 0, 0) == doctest::Approx(0.0));
  CHECK(pr.coords.value().at(1, 0, 0) == doctest::Approx(0.0));
}

TEST_CASE("project: behind-camera points are masked with zero coords") {
  Tensor pts({3, 1, 2});
  pts.at(2, 0, 0) = 0.5;    // in front
  pts.at(2, 0, 1) = -2.0;   // behind
  pts.at(0, 0, 1) = 1.0;
  md::Projection pr =
      md::project(Var::constant(pts), RigidPose(), CameraModel(10, 10, 5, 5));
  CHECK(pr.mask.at(0, 0) == 1.0);
  CHECK(pr.mask.at(0, 1) == 0.0);
  CHECK(pr.coords.value().at(0, 0, 1) == 0.0);
  CHECK(pr.coords.value().at(1, 0, 1) == 0.0);

  // exactly-at-threshold depth is masked too
  Tensor eps_pt({3, 1, 1});
  eps_pt.at(2, 0, 0) = md::kZEps;
  CHECK(md::project(Var::constant(eps_pt), RigidPose(), CameraModel(1, 1, 0, 0))
            .mask[0] == 0.0);
}

TEST_CASE("project ∘ backproject with identity pose is the pixel identity") {
  md::Rng rng(31);
  Tensor d = rand_tensor({6, 7}, rng, 0.5, 50.0);
  CameraModel cam(35.0, 40.0, 3.1, 2.9);
  Var pts = md::backproject(Var::constant(d), cam);
  md::Projection pr = md::project(pts, RigidPose(), cam);
  for (int64_t v = 0; v < 6; ++v)
    for (int64_t u = 0; u < 7; ++u) {
      CHECK(pr.mask.at(v, u) == 1.0);
      CHECK(pr.coords.value().at(0, v, u) ==
            doctest::Approx(static_cast<double>(u)).epsilon(1).scale(1e-9));
      CHECK(pr.coords.value().at(1, v, u) ==
            doctest::Approx(static_cast<double>(v)).epsilon(1).scale(1e-9));
    }
}

TEST_CASE("project: matches an independent scalar reference") {
  md::Rng rng(32);
  for (int trial = 0; trial < 5; ++trial) {
    RigidPose pose = small_pose(rng, 0.5, 2.0);
    CameraModel cam(rng.uniform(20, 80), rng.uniform(20, 80), rng.uniform(0, 8),
                    rng.uniform(0, 6));
    Tensor pts = rand_tensor({3, 3, 4}, rng, -3.0, 3.0);
    // keep z comfortably positive so the reference needs no masking logic
    for (int64_t i = 0; i < 12; ++i) pts.data()[2 * 12 + i] = rng.uniform(1.0, 10.0);

    md::Projection pr = md::project(Var::constant(pts), pose, cam);
    for (int64_t v = 0; v < 3; ++v)
      for (int64_t u = 0; u < 4; ++u) {
        // reference: expand the matrix product elementwise
        const double px = pts.at(0, v, u), py = pts.at(1, v, u), pz = pts.at(2, v, u);
        const double qx = pose.r.m[0] * px + pose.r.m[1] * py + pose.r.m[2] * pz + pose.t.x;
        const double qy = pose.r.m[3] * px + pose.r.m[4] * py + pose.r.m[5] * pz + pose.t.y;
        const double qz = pose.r.m[6] * px + pose.r.m[7] * py + pose.r.m[8] * pz + pose.t.z;
        REQUIRE(qz > md::kZEps);
        CHECK(pr.coords.value().at(0, v, u) ==
              doctest::Approx(cam.fx * qx / qz + cam.cx).epsilon(1e-9));
        CHECK(pr.coords.value().at(1, v, u) ==
              doctest::Approx(cam.fy * qy / qz + cam.cy).epsilon(1e-9));
      }
  }
}

TEST_CASE("project: gradient wrt points") {
  md::Rng rng(33);
  Tensor pts = rand_tensor({3, 3, 3}, rng, -2.0, 2.0);
  for (int64_t i = 0; i < 9; ++i) pts.data()[2 * 9 + i] = rng.uniform(1.0, 5.0);
  Var p = Var::leaf(pts, true);
  RigidPose pose = small_pose(rng, 0.4, 1.0);
  CameraModel cam(30.0, 28.0, 1.5, 1.5);
  Var weights = Var::constant(rand_tensor({2, 3, 3}, rng, -1.0, 1.0));

  auto build = [&] { return md::sum(md::project(p, pose, cam).coords * weights); };
  Var out = build();
  md::backward(out);
  const Tensor g = p.grad();
  const double step = 1e-6;
  for (int64_t i = 0; i < p.numel(); ++i) {
    const double orig = p.value()[i];
    p.value()[i] = orig + step;
    const double fp = build().item();
    p.value()[i] = orig - step;
    const double fm = build().item();
    p.value()[i] = orig;
    const double fd = (fp - fm) / (2 * step);
    CHECK(std::abs(g[i] - fd) / std::max({1.0, std::abs(fd), std::abs(g[i])}) < 1e-5);
  }
}

TEST_CASE("bilinear_sample: lattice points are exact, midpoint interpolates") {
  Tensor img({1, 2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor co({2, 2, 3});
  for (int64_t v = 0; v < 2; ++v)
    for (int64_t u = 0; u < 3; ++u) {
      co.at(0, v, u) = static_cast<double>(u);
      co.at(1, v, u) = static_cast<double>(v);
    }
  md::Sampled s = md::bilinear_sample(Var::constant(img), Var::constant(co));
  for (int64_t i = 0; i < 6; ++i) {
    CHECK(s.image.value()[i] == img[i]);  // exact, not approximate
    CHECK(s.validity[i % 6 < 3 ? i % 3 : i] >= 0.0);
  }
  for (int64_t i = 0; i < 6; ++i) CHECK(s.validity[i] == 1.0);

  // midpoint of [0,1]
  Tensor img2({1, 1, 2}, {0.0, 1.0});
  // 1-row image is below the 2x2 minimum, so embed in 2 rows
  Tensor img3({1, 2, 2}, {0.0, 1.0, 0.0, 1.0});
  Tensor mid({2, 1, 1});
  mid.at(0, 0, 0) = 0.5;
  mid.at(1, 0, 0) = 0.0;
  md::Sampled m = md::bilinear_sample(Var::constant(img3), Var::constant(mid));
  CHECK(m.image.value()[0] == doctest::Approx(0.5));
  CHECK(m.validity[0] == 1.0);
  (void)img2;
}

TEST_CASE("bilinear_sample: matches a scalar 4-neighbor reference") {
  md::Rng rng(34);
  Tensor img = rand_tensor({2, 5, 6}, rng, 0.0, 1.0);
  Tensor co({2, 3, 3});
  for (int64_t i = 0; i < 9; ++i) {
    co.data()[i] = rng.uniform(0.0, 5.0);       // x in [0, W-1]
    co.data()[9 + i] = rng.uniform(0.0, 4.0);   // y in [0, H-1]
  }
  md::Sampled s = md::bilinear_sample(Var::constant(img), Var::constant(co));
  for (int64_t v = 0; v < 3; ++v)
    for (int64_t u = 0; u < 3; ++u) {
      const double x = co.at(0, v, u), y = co.at(1, v, u);
      const auto x0 = static_cast<int64_t>(std::floor(x));
      const auto y0 = static_cast<int64_t>(std::floor(y));
      const double wx = x - x0, wy = y - y0;
      for (int64_t c = 0; c < 2; ++c) {
        const double want =
            (1 - wy) * ((1 - wx) * img.at(c, y0, x0) + wx * img.at(c, y0, x0 + 1)) +
            wy * ((1 - wx) * img.at(c, y0 + 1, x0) + wx * img.at(c, y0 + 1, x0 + 1));
        CHECK(s.image.value().at(c, v, u) == doctest::Approx(want).epsilon(1e-9));
      }
      CHECK(s.validity.at(v, u) == 1.0);
    }
}

TEST_CASE("bilinear_sample: out-of-bounds coordinates are invalid and zero") {
  Tensor img = Tensor::full({1, 3, 3}, 0.5);
  Tensor co({2, 1, 4});
  co.at(0, 0, 0) = -0.001; co.at(1, 0, 0) = 1.0;   // left of the image
  co.at(0, 0, 1) = 2.001;  co.at(1, 0, 1) = 1.0;   // right of the image
  co.at(0, 0, 2) = 1.0;    co.at(1, 0, 2) = -5.0;  // above
  co.at(0, 0, 3) = 2.0;    co.at(1, 0, 3) = 2.0;   // corner: still valid
  md::Sampled s = md::bilinear_sample(Var::constant(img), Var::constant(co));
  for (int i = 0; i < 3; ++i) {
    CHECK(s.validity[i] == 0.0);
    CHECK(s.image.value()[i] == 0.0);
  }
  CHECK(s.validity[3] == 1.0);
  CHECK(s.image.value()[3] == doctest::Approx(0.5));
}

TEST_CASE("bilinear_sample: gradients wrt image and coords") {
  md::Rng rng(35);
  Var img = Var::leaf(rand_tensor({2, 4, 5}, rng, 0.0, 1.0), true);
  Tensor ct({2, 2, 3});
  for (int64_t i = 0; i < 3 * 2; ++i) {
    // keep strictly inside and away from lattice points so FD stays smooth
    ct.data()[i] = rng.uniform(0.3, 3.7);
    if (std::abs(ct.data()[i] - std::round(ct.data()[i])) < 0.05)
      ct.data()[i] += 0.1;
    ct.data()[6 + i] = rng.uniform(0.3, 2.7);
    if (std::abs(ct.data()[6 + i] - std::round(ct.data()[6 + i])) < 0.05)
      ct.data()[6 + i] += 0.1;
  }
  Var co = Var::leaf(ct, true);
  Var w = Var::constant(rand_tensor({2, 2, 3}, rng, -1.0, 1.0));

  auto build = [&] { return md::sum(md::bilinear_sample(img, co).image * w); };
  img.clear_grad();
  co.clear_grad();
  Var out = build();
  md::backward(out);

  const double step = 1e-6;
  for (Var* leaf : {&img, &co}) {
    const Tensor g = leaf->grad();
    for (int64_t i = 0; i < leaf->numel(); ++i) {
      const double orig = leaf->value()[i];
      leaf->value()[i] = orig + step;
      const double fp = build().item();
      leaf->value()[i] = orig - step;
      const double fm = build().item();
      leaf->value()[i] = orig;
      const double fd = (fp - fm) / (2 * step);
      CHECK(std::abs(g[i] - fd) / std::max({1.0, std::abs(fd), std::abs(g[i])}) < 1e-5);
    }
  }
}

TEST_CASE("synthesize_view: identity pose reproduces the source exactly") {
  md::Rng rng(36);
  Tensor src = rand_tensor({3, 5, 6}, rng, 0.0, 1.0);
  Tensor depth = rand_tensor({5, 6}, rng, 0.5, 40.0);
  CameraModel cam(12.0, 14.0, 2.5, 2.0);
  md::Sampled s = md::synthesize_view(src, Var::constant(depth), RigidPose(), cam);
  for (int64_t i = 0; i < src.numel(); ++i) CHECK(s.image.value()[i] == src[i]);
  for (int64_t i = 0; i < depth.numel(); ++i) CHECK(s.validity[i] == 1.0);
}

TEST_CASE("synthesize_view: constant source stays constant wherever valid") {
  md::Rng rng(37);
  Tensor src = Tensor::full({3, 6, 7}, 0.42);
  Tensor depth = rand_tensor({6, 7}, rng, 2.0, 20.0);
  RigidPose pose = small_pose(rng, 0.05, 0.3);
  CameraModel cam(8.0, 8.0, 3.0, 2.5);
  md::Sampled s = md::synthesize_view(src, Var::constant(depth), pose, cam);
  int64_t n_valid = 0;
  for (int64_t v = 0; v < 6; ++v)
    for (int64_t u = 0; u < 7; ++u)
      if (s.validity.at(v, u) == 1.0) {
        ++n_valid;
        for (int64_t c = 0; c < 3; ++c)
          CHECK(s.image.value().at(c, v, u) == doctest::Approx(0.42).epsilon(1e-12));
      } else {
        for (int64_t c = 0; c < 3; ++c) CHECK(s.image.value().at(c, v, u) == 0.0);
      }
  CHECK(n_valid > 0);
}

TEST_CASE("synthesize_view: depth gradient matches finite differences") {
  md::Rng rng(38);
  // smooth source so bilinear interpolation is well-conditioned
  Tensor src({3, 8, 9});
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t v = 0; v < 8; ++v)
      for (int64_t u = 0; u < 9; ++u)
        src.at(c, v, u) =
            0.5 + 0.4 * std::sin(0.4 * u + 0.3 * v + static_cast<double>(c));
  Tensor dt = rand_tensor({8, 9}, rng, 3.0, 8.0);
  Var depth = Var::leaf(dt, true);
  RigidPose pose = small_pose(rng, 0.02, 0.15);
  CameraModel cam(10.0, 10.0, 4.0, 3.5);

  // fix the validity pattern once; FD perturbations must not flip it
  Tensor v0 = md::synthesize_view(src, Var::constant(dt), pose, cam).validity;
  Tensor wmask({3, 8, 9});
  md::Rng wrng(39);
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t i = 0; i < 72; ++i)
      wmask.data()[c * 72 + i] = v0[i] * wrng.uniform(-1.0, 1.0);
  Var w = Var::constant(wmask);

  auto build = [&] { return md::sum(md::synthesize_view(src, depth, pose, cam).image * w); };
  Var out = build();
  md::backward(out);
  const Tensor g = depth.grad();

  const double step = 1e-5;
  double worst = 0.0;
  for (int64_t i = 0; i < depth.numel(); ++i) {
    const double orig = depth.value()[i];
    depth.value()[i] = orig + step;
    const double fp = build().item();
    depth.value()[i] = orig - step;
    const double fm = build().item();
    depth.value()[i] = orig;
    const double fd = (fp - fm) / (2 * step);
    const double err =
        std::abs(g[i] - fd) / std::max({1.0, std::abs(fd), std::abs(g[i])});
    worst = std::max(worst, err);
  }
  CHECK(worst < 1e-4);
}
