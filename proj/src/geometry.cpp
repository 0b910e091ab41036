#include "mutualdepth/geometry.hpp"

#include <cmath>

namespace md {

Var backproject(const Var& depth, const CameraModel& cam) {
  const Tensor& d = depth.value();
  check(d.rank() == 2, "backproject: depth must be [H,W]");
  const int64_t h = d.dim(0), w = d.dim(1);
  Tensor out({3, h, w});
  for (int64_t v = 0; v < h; ++v)
    for (int64_t u = 0; u < w; ++u) {
      const double dv = d.at(v, u);
      out.at(0, v, u) = dv * (static_cast<double>(u) - cam.cx) / cam.fx;
      out.at(1, v, u) = dv * (static_cast<double>(v) - cam.cy) / cam.fy;
      out.at(2, v, u) = dv;
    }
  return make_op("backproject", std::move(out), {depth}, [cam, h, w](Node& self) {
    Node& nd = *self.parents[0];
    if (!nd.requires_grad) return;
    Tensor dd({h, w});
    for (int64_t v = 0; v < h; ++v)
      for (int64_t u = 0; u < w; ++u)
        dd.at(v, u) = self.grad.at(0, v, u) * (static_cast<double>(u) - cam.cx) / cam.fx +
                      self.grad.at(1, v, u) * (static_cast<double>(v) - cam.cy) / cam.fy +
                      self.grad.at(2, v, u);
    nd.add_grad(dd);
  });
}

Projection project(const Var& points, const RigidPose& pose, const CameraModel& cam) {
  const Tensor& p = points.value();
  check(p.rank() == 3 && p.dim(0) == 3, "project: points must be [3,H,W]");
  check(p.all_finite(), "project: points must be finite");
  const int64_t h = p.dim(1), w = p.dim(2);

  auto pprime = std::make_shared<Tensor>(Tensor({3, h, w}));
  Tensor mask({h, w});
  Tensor coords({2, h, w});
  for (int64_t v = 0; v < h; ++v)
    for (int64_t u = 0; u < w; ++u) {
      const Vec3 q = pose.r * Vec3{p.at(0, v, u), p.at(1, v, u), p.at(2, v, u)} + pose.t;
      pprime->at(0, v, u) = q.x;
      pprime->at(1, v, u) = q.y;
      pprime->at(2, v, u) = q.z;
      if (q.z > kZEps) {
        mask.at(v, u) = 1.0;
        coords.at(0, v, u) = cam.fx * q.x / q.z + cam.cx;
        coords.at(1, v, u) = cam.fy * q.y / q.z + cam.cy;
      }
    }

  auto mask_copy = std::make_shared<Tensor>(mask);
  Var c = make_op("project", std::move(coords), {points},
                  [pose, cam, pprime, mask_copy, h, w](Node& self) {
    Node& np = *self.parents[0];
    if (!np.requires_grad) return;
    const Mat3 rt = transpose(pose.r);
    Tensor dp({3, h, w});
    for (int64_t v = 0; v < h; ++v)
      for (int64_t u = 0; u < w; ++u) {
        if (mask_copy->at(v, u) == 0.0) continue;
        const double x = pprime->at(0, v, u);
        const double y = pprime->at(1, v, u);
        const double z = pprime->at(2, v, u);
        const double gu = self.grad.at(0, v, u);
        const double gv = self.grad.at(1, v, u);
        const Vec3 gq{gu * cam.fx / z, gv * cam.fy / z,
                      -(gu * cam.fx * x + gv * cam.fy * y) / (z * z)};
        const Vec3 gp = rt * gq;
        dp.at(0, v, u) = gp.x;
        dp.at(1, v, u) = gp.y;
        dp.at(2, v, u) = gp.z;
      }
    np.add_grad(dp);
  });
  return {c, std::move(mask)};
}

namespace {
// Lattice snap shared by forward and backward so they see identical weights.
inline void snap(double& x) {
  const double r = std::round(x);
  if (std::abs(x - r) < 1e-9) x = r;
}
}  // namespace

Sampled bilinear_sample(const Var& image, const Var& coords) {
  const Tensor& img = image.value();
  const Tensor& co = coords.value();
  check(img.rank() == 3, "bilinear_sample: image must be [C,H,W]");
  check(co.rank() == 3 && co.dim(0) == 2, "bilinear_sample: coords must be [2,H,W]");
  check(co.all_finite(), "bilinear_sample: coords must be finite");
  const int64_t c = img.dim(0), ih = img.dim(1), iw = img.dim(2);
  const int64_t h = co.dim(1), w = co.dim(2);
  check(ih >= 2 && iw >= 2, "bilinear_sample: image must be at least 2x2");

  Tensor out({c, h, w});
  Tensor validity({h, w});
  auto snapped = std::make_shared<Tensor>(Tensor({2, h, w}));
  for (int64_t v = 0; v < h; ++v)
    for (int64_t u = 0; u < w; ++u) {
      double x = co.at(0, v, u), y = co.at(1, v, u);
      snap(x);
      snap(y);
      snapped->at(0, v, u) = x;
      snapped->at(1, v, u) = y;
      if (x < 0.0 || x > static_cast<double>(iw - 1) || y < 0.0 ||
          y > static_cast<double>(ih - 1))
        continue;  // out of bounds: value 0, validity 0
      validity.at(v, u) = 1.0;
      int64_t x0 = std::min<int64_t>(static_cast<int64_t>(x), iw - 2);
      int64_t y0 = std::min<int64_t>(static_cast<int64_t>(y), ih - 2);
      const double wx = x - static_cast<double>(x0);
      const double wy = y - static_cast<double>(y0);
      for (int64_t ch = 0; ch < c; ++ch) {
        const double v00 = img.at(ch, y0, x0), v01 = img.at(ch, y0, x0 + 1);
        const double v10 = img.at(ch, y0 + 1, x0), v11 = img.at(ch, y0 + 1, x0 + 1);
        out.at(ch, v, u) = (1 - wy) * ((1 - wx) * v00 + wx * v01) +
                           wy * ((1 - wx) * v10 + wx * v11);
      }
    }

  auto valid_copy = std::make_shared<Tensor>(validity);
  Var s = make_op("bilinear_sample", std::move(out), {image, coords},
                  [snapped, valid_copy, c, ih, iw, h, w](Node& self) {
    Node& nimg = *self.parents[0];
    Node& nco = *self.parents[1];
    Tensor dimg = nimg.requires_grad ? Tensor(nimg.value.shape()) : Tensor({1});
    Tensor dco = nco.requires_grad ? Tensor({2, h, w}) : Tensor({1});
    const Tensor& img = nimg.value;
    for (int64_t v = 0; v < h; ++v)
      for (int64_t u = 0; u < w; ++u) {
        if (valid_copy->at(v, u) == 0.0) continue;
        const double x = snapped->at(0, v, u), y = snapped->at(1, v, u);
        int64_t x0 = std::min<int64_t>(static_cast<int64_t>(x), iw - 2);
        int64_t y0 = std::min<int64_t>(static_cast<int64_t>(y), ih - 2);
        const double wx = x - static_cast<double>(x0);
        const double wy = y - static_cast<double>(y0);
        double gx = 0.0, gy = 0.0;
        for (int64_t ch = 0; ch < c; ++ch) {
          const double g = self.grad.at(ch, v, u);
          if (g == 0.0) continue;
          if (nimg.requires_grad) {
            dimg.at(ch, y0, x0) += g * (1 - wy) * (1 - wx);
            dimg.at(ch, y0, x0 + 1) += g * (1 - wy) * wx;
            dimg.at(ch, y0 + 1, x0) += g * wy * (1 - wx);
            dimg.at(ch, y0 + 1, x0 + 1) += g * wy * wx;
          }
          const double v00 = img.at(ch, y0, x0), v01 = img.at(ch, y0, x0 + 1);
          const double v10 = img.at(ch, y0 + 1, x0), v11 = img.at(ch, y0 + 1, x0 + 1);
          gx += g * ((1 - wy) * (v01 - v00) + wy * (v11 - v10));
          gy += g * ((1 - wx) * (v10 - v00) + wx * (v11 - v01));
        }
        if (nco.requires_grad) {
          dco.at(0, v, u) = gx;
          dco.at(1, v, u) = gy;
        }
      }
    if (nimg.requires_grad) nimg.add_grad(dimg);
    if (nco.requires_grad) nco.add_grad(dco);
  });
  return {s, std::move(validity)};
}

Sampled synthesize_view(const Tensor& source, const Var& depth, const RigidPose& pose,
                        const CameraModel& cam) {
  check(source.rank() == 3, "synthesize_view: source must be [C,H,W]");
  check(source.dim(1) == depth.value().dim(0) && source.dim(2) == depth.value().dim(1),
        "synthesize_view: source and depth shapes must match");
  Var points = backproject(depth, cam);
  Projection pr = project(points, pose, cam);
  Sampled sm = bilinear_sample(Var::constant(source), pr.coords);

  const int64_t c = source.dim(0), h = source.dim(1), w = source.dim(2);
  Tensor validity({h, w});
  for (int64_t i = 0; i < h * w; ++i)
    validity[i] = pr.mask[i] != 0.0 && sm.validity[i] != 0.0 ? 1.0 : 0.0;

  // Zero invalid pixels (and their gradients) so downstream losses can use
  // the validity mask as plain data.
  Tensor vmask({c, h, w});
  for (int64_t ch = 0; ch < c; ++ch)
    std::copy(validity.data(), validity.data() + h * w, vmask.data() + ch * h * w);
  Var img = sm.image * Var::constant(vmask);
  return {img, std::move(validity)};
}

}  // namespace md
