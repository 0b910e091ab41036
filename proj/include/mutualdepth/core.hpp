#pragma once

#include <optional>
#include <vector>

#include "mutualdepth/autograd.hpp"
#include "mutualdepth/tensor.hpp"

namespace md {

// Depth parameterization bounds and the clamp applied to predicted scales.
// sigma near 0 makes the log terms of the probabilistic losses diverge when
// the residual vanishes, so consumers always see exp(s) clamped to this range.
constexpr double kDepthMin = 0.1;
constexpr double kDepthMax = 100.0;
constexpr double kSigmaMin = 1e-3;
constexpr double kSigmaMax = 1e3;
constexpr double kZEps = 1e-3;  // front-of-camera threshold, meters

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a.x, s * a.y, s * a.z}; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

struct Mat3 {
  // row-major
  double m[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Mat3 identity() { return {}; }
  double operator()(int i, int j) const { return m[i * 3 + j]; }
  double& operator()(int i, int j) { return m[i * 3 + j]; }
};

Vec3 operator*(const Mat3& r, const Vec3& v);
Mat3 operator*(const Mat3& a, const Mat3& b);
Mat3 transpose(const Mat3& r);
double det(const Mat3& r);
Mat3 rotation_x(double radians);
Mat3 rotation_y(double radians);
Mat3 rotation_z(double radians);

// Maps points from the reference camera frame to the source camera frame:
// p_src = r * p_ref + t.
struct RigidPose {
  Mat3 r;
  Vec3 t;

  RigidPose() = default;
  // Validates orthonormality and det +1 within 1e-6.
  RigidPose(const Mat3& rotation, const Vec3& translation);

  static RigidPose identity() { return {}; }
  RigidPose inverse() const;
};

// a ∘ b: apply b first, then a (same order as homogeneous matrix product).
RigidPose operator*(const RigidPose& a, const RigidPose& b);

struct CameraModel {
  double fx = 1, fy = 1, cx = 0, cy = 0;

  CameraModel() = default;
  CameraModel(double fx_, double fy_, double cx_, double cy_);
  // Checks the principal point lies inside a [0,W)x[0,H) image.
  void check_bounds(int64_t h, int64_t w) const;
};

// RGB grid [3,H,W] with every value finite and inside [0,1].
struct ImageTensor {
  Tensor data;

  explicit ImageTensor(Tensor t);
  int64_t height() const { return data.dim(1); }
  int64_t width() const { return data.dim(2); }
};

// Metric depth grid [H,W], every value inside [d_min, d_max].
struct DepthMap {
  Tensor data;

  explicit DepthMap(Tensor t, double d_min = kDepthMin, double d_max = kDepthMax);
  int64_t height() const { return data.dim(0); }
  int64_t width() const { return data.dim(1); }
};

// Grid of s = log(sigma), [H,W]; finite but otherwise unconstrained.
struct LogUncertaintyMap {
  Tensor data;

  explicit LogUncertaintyMap(Tensor t);
};

// Sparse metric ground truth: values wherever valid != 0, ignored elsewhere.
struct SparseDepthTarget {
  Tensor values;  // [H,W] meters
  Tensor valid;   // [H,W], 0 or 1

  SparseDepthTarget(Tensor values_, Tensor valid_);
  int64_t valid_count() const;
};

struct SourceView {
  ImageTensor image;
  RigidPose pose;  // reference -> this view
};

struct FrameSample {
  ImageTensor target;
  std::vector<SourceView> sources;
  CameraModel camera;
  SparseDepthTarget sparse_gt;
  std::optional<DepthMap> dense_gt;  // synthetic data only; evaluation
  Tensor instance_mask;              // [H,W], 1 = object instance pixel
};

// Shape/consistency checks across the aggregate's members.
void validate_frame(const FrameSample& fs);

struct LossWeights {
  double lambda_s = 1.0;
  double lambda_u = 0.05;
  double lambda_smooth = 0.001;
  double mu_s = 3.0;
  double mu_u = 0.03;
  double m = 2.0;     // pseudo-residual for pixels without ground truth
  double alpha = 0.85;

  void validate() const;
};

// depth = 1 / (raw/d_min + (1-raw)/d_max); raw in [0,1] -> [d_min, d_max],
// strictly decreasing.
Tensor disparity_to_depth(const Tensor& raw, double d_min = kDepthMin,
                          double d_max = kDepthMax);
Var disparity_to_depth(const Var& raw, double d_min = kDepthMin,
                       double d_max = kDepthMax);

// exp(s) clamped to [kSigmaMin, kSigmaMax]; the only way losses consume s.
Tensor sigma_from_log(const Tensor& s);
Var sigma_from_log(const Var& s);

}  // namespace md
