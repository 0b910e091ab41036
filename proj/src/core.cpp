#include "mutualdepth/core.hpp"

#include <cmath>

namespace md {

Vec3 operator*(const Mat3& r, const Vec3& v) {
  return {r.m[0] * v.x + r.m[1] * v.y + r.m[2] * v.z,
          r.m[3] * v.x + r.m[4] * v.y + r.m[5] * v.z,
          r.m[6] * v.x + r.m[7] * v.y + r.m[8] * v.z};
}

Mat3 operator*(const Mat3& a, const Mat3& b) {
  Mat3 c;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

Mat3 transpose(const Mat3& r) {
  Mat3 t;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t(i, j) = r(j, i);
  return t;
}

double det(const Mat3& r) {
  return r(0, 0) * (r(1, 1) * r(2, 2) - r(1, 2) * r(2, 1)) -
         r(0, 1) * (r(1, 0) * r(2, 2) - r(1, 2) * r(2, 0)) +
         r(0, 2) * (r(1, 0) * r(2, 1) - r(1, 1) * r(2, 0));
}

Mat3 rotation_x(double a) {
  Mat3 r;
  const double c = std::cos(a), s = std::sin(a);
  r(1, 1) = c; r(1, 2) = -s;
  r(2, 1) = s; r(2, 2) = c;
  return r;
}

Mat3 rotation_y(double a) {
  Mat3 r;
  const double c = std::cos(a), s = std::sin(a);
  r(0, 0) = c; r(0, 2) = s;
  r(2, 0) = -s; r(2, 2) = c;
  return r;
}

Mat3 rotation_z(double a) {
  Mat3 r;
  const double c = std::cos(a), s = std::sin(a);
  r(0, 0) = c; r(0, 1) = -s;
  r(1, 0) = s; r(1, 1) = c;
  return r;
}

RigidPose::RigidPose(const Mat3& rotation, const Vec3& translation)
    : r(rotation), t(translation) {
  for (int i = 0; i < 9; ++i) check(std::isfinite(r.m[i]), "pose: rotation not finite");
  check(std::isfinite(t.x) && std::isfinite(t.y) && std::isfinite(t.z),
        "pose: translation not finite");
  const Mat3 rtr = transpose(r) * r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double want = i == j ? 1.0 : 0.0;
      check(std::abs(rtr(i, j) - want) <= 1e-6, "pose: rotation is not orthonormal");
    }
  check(std::abs(det(r) - 1.0) <= 1e-6, "pose: rotation determinant must be +1");
}

RigidPose RigidPose::inverse() const {
  RigidPose inv;
  inv.r = transpose(r);
  const Vec3 rt = inv.r * t;
  inv.t = {-rt.x, -rt.y, -rt.z};
  return inv;
}

RigidPose operator*(const RigidPose& a, const RigidPose& b) {
  RigidPose c;
  c.r = a.r * b.r;
  c.t = a.r * b.t + a.t;
  return c;
}

CameraModel::CameraModel(double fx_, double fy_, double cx_, double cy_)
    : fx(fx_), fy(fy_), cx(cx_), cy(cy_) {
  check(std::isfinite(fx) && std::isfinite(fy) && std::isfinite(cx) && std::isfinite(cy),
        "camera: intrinsics not finite");
  check(fx > 0 && fy > 0, "camera: focal lengths must be positive");
}

void CameraModel::check_bounds(int64_t h, int64_t w) const {
  check(cx >= 0 && cx < static_cast<double>(w), "camera: cx outside image");
  check(cy >= 0 && cy < static_cast<double>(h), "camera: cy outside image");
}

ImageTensor::ImageTensor(Tensor t) : data(std::move(t)) {
  check(data.rank() == 3 && data.dim(0) == 3, "image: expected [3,H,W]");
  check(data.dim(1) >= 2 && data.dim(2) >= 2, "image: H and W must be >= 2");
  check(data.all_finite(), "image: values not finite");
  check(data.min() >= 0.0 && data.max() <= 1.0, "image: values must lie in [0,1]");
}

DepthMap::DepthMap(Tensor t, double d_min, double d_max) : data(std::move(t)) {
  check(0 < d_min && d_min < d_max, "depth: bounds must satisfy 0 < d_min < d_max");
  check(data.rank() == 2, "depth: expected [H,W]");
  check(data.all_finite(), "depth: values not finite");
  check(data.min() >= d_min && data.max() <= d_max, "depth: values outside [d_min, d_max]");
}

LogUncertaintyMap::LogUncertaintyMap(Tensor t) : data(std::move(t)) {
  check(data.rank() == 2, "log-uncertainty: expected [H,W]");
  check(data.all_finite(), "log-uncertainty: values not finite");
}

SparseDepthTarget::SparseDepthTarget(Tensor values_, Tensor valid_)
    : values(std::move(values_)), valid(std::move(valid_)) {
  check(values.rank() == 2 && values.same_shape(valid), "sparse depth: grids must be [H,W]");
  check(values.all_finite() && valid.all_finite(), "sparse depth: values not finite");
  for (int64_t i = 0; i < valid.numel(); ++i) {
    check(valid[i] == 0.0 || valid[i] == 1.0, "sparse depth: valid mask must be 0/1");
    if (valid[i] != 0.0) check(values[i] > 0.0, "sparse depth: valid entries must be positive");
  }
}

int64_t SparseDepthTarget::valid_count() const {
  int64_t n = 0;
  for (int64_t i = 0; i < valid.numel(); ++i) n += valid[i] != 0.0;
  return n;
}

void validate_frame(const FrameSample& fs) {
  const int64_t h = fs.target.height(), w = fs.target.width();
  check(!fs.sources.empty(), "frame: needs at least one source view");
  for (const auto& s : fs.sources)
    check(s.image.height() == h && s.image.width() == w, "frame: source shape mismatch");
  fs.camera.check_bounds(h, w);
  check(fs.sparse_gt.values.dim(0) == h && fs.sparse_gt.values.dim(1) == w,
        "frame: sparse depth shape mismatch");
  if (fs.dense_gt)
    check(fs.dense_gt->height() == h && fs.dense_gt->width() == w,
          "frame: dense depth shape mismatch");
  check(fs.instance_mask.rank() == 2 && fs.instance_mask.dim(0) == h &&
            fs.instance_mask.dim(1) == w,
        "frame: instance mask shape mismatch");
}

void LossWeights::validate() const {
  check(lambda_s >= 0 && lambda_u >= 0 && lambda_smooth >= 0 && mu_s >= 0 && mu_u >= 0 &&
            m >= 0,
        "loss weights: must be nonnegative");
  check(alpha >= 0.0 && alpha <= 1.0, "loss weights: alpha must lie in [0,1]");
}

Tensor disparity_to_depth(const Tensor& raw, double d_min, double d_max) {
  check(0 < d_min && d_min < d_max, "disparity_to_depth: bad bounds");
  check(raw.all_finite(), "disparity_to_depth: raw values not finite");
  check(raw.min() >= 0.0 && raw.max() <= 1.0, "disparity_to_depth: raw must lie in [0,1]");
  Tensor out(raw.shape());
  const double lo = 1.0 / d_max, hi = 1.0 / d_min;
  for (int64_t i = 0; i < raw.numel(); ++i)
    out.data()[i] = 1.0 / (raw[i] * hi + (1.0 - raw[i]) * lo);
  return out;
}

Var disparity_to_depth(const Var& raw, double d_min, double d_max) {
  check(0 < d_min && d_min < d_max, "disparity_to_depth: bad bounds");
  const double lo = 1.0 / d_max, hi = 1.0 / d_min;
  return 1.0 / (raw * (hi - lo) + lo);
}

Tensor sigma_from_log(const Tensor& s) {
  check(s.all_finite(), "sigma_from_log: values not finite");
  Tensor out(s.shape());
  for (int64_t i = 0; i < s.numel(); ++i)
    out.data()[i] = std::min(kSigmaMax, std::max(kSigmaMin, std::exp(s[i])));
  return out;
}

Var sigma_from_log(const Var& s) { return clamp(exp(s), kSigmaMin, kSigmaMax); }

}  // namespace md
