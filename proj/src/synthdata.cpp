#include "mutualdepth/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "mutualdepth/image_io.hpp"
#include "mutualdepth/rng.hpp"

namespace fs = std::filesystem;

namespace md {

namespace {

// ---------------------------------------------------------------- scene ----

// Smooth Lambertian texture: per channel a base level plus three sinusoids
// over world coordinates, clamped to [0.05, 0.95]. Rendering box-filters the
// sinusoids over each pixel's footprint (eval_filtered), so surfaces at
// grazing incidence blur out instead of aliasing, and bilinear resampling
// error stays well below the photometric tolerance while the matching
// problem keeps usable gradients.
struct SurfaceTexture {
  double base[3];
  double amp[3][3];
  Vec3 freq[3][3];
  double phase[3][3];

  static SurfaceTexture draw(Rng& rng) {
    SurfaceTexture t;
    for (int c = 0; c < 3; ++c) {
      t.base[c] = rng.uniform(0.30, 0.70);
      for (int j = 0; j < 3; ++j) {
        t.amp[c][j] = rng.uniform(0.06, 0.14);
        t.freq[c][j] = Vec3{rng.uniform(-2.2, 2.2), rng.uniform(-2.2, 2.2),
                            rng.uniform(-2.2, 2.2)};
        t.phase[c][j] = rng.uniform(0.0, 2.0 * M_PI);
      }
    }
    return t;
  }

  double eval(int c, const Vec3& p) const {
    double v = base[c];
    for (int j = 0; j < 3; ++j)
      v += amp[c][j] * std::sin(dot(freq[c][j], p) + phase[c][j]);
    return std::min(0.95, std::max(0.05, v));
  }

  // Box-filtered value over the parallelogram pixel footprint spanned by
  // du, dv around p. The integral of a sinusoid over the footprint is the
  // point value attenuated by sinc(f.du/2)*sinc(f.dv/2); without this
  // anti-aliasing, surfaces at grazing incidence render with frequencies
  // past Nyquist, and the aliases differ per viewpoint, breaking the
  // brightness constancy the photometric losses rely on.
  double eval_filtered(int c, const Vec3& p, const Vec3& du,
                       const Vec3& dv) const {
    auto sinc = [](double x) {
      return std::abs(x) < 1e-8 ? 1.0 : std::sin(x) / x;
    };
    double v = base[c];
    for (int j = 0; j < 3; ++j) {
      const double att = sinc(0.5 * dot(freq[c][j], du)) *
                         sinc(0.5 * dot(freq[c][j], dv));
      v += amp[c][j] * att * std::sin(dot(freq[c][j], p) + phase[c][j]);
    }
    return std::min(0.95, std::max(0.05, v));
  }
};

struct Aabb {
  Vec3 lo, hi;
};

// Camera coordinates: x right, y down, z forward. The room interior.
constexpr double kRoomX = 6.0;    // |x| walls
constexpr double kFloorY = 1.2;   // floor plane (below the camera; y is down)
constexpr double kCeilY = -2.8;   // ceiling plane
constexpr double kBackZ = 18.0;   // far wall
constexpr double kFrontZ = -4.0;  // wall behind the camera start

struct Scene {
  std::vector<Aabb> boxes;
  std::vector<SurfaceTexture> box_tex;
  SurfaceTexture wall_tex[6];  // -x, +x, floor, ceiling, back, front
};

Scene build_scene(Rng& rng, int n_boxes) {
  Scene s;
  for (auto& w : s.wall_tex) w = SurfaceTexture::draw(rng);
  for (int i = 0; i < n_boxes; ++i) {
    const double sx = rng.uniform(0.5, 1.5);
    // Tall boxes reach above the horizon and occlude the distant walls,
    // which is what gives neighboring views an appreciable occluded band.
    const double sy = rng.uniform(0.6, 2.6);
    const double sz = rng.uniform(0.5, 1.5);
    const double side = rng.bernoulli(0.5) ? 1.0 : -1.0;
    const double x = side * rng.uniform(1.2, 4.0);  // clear of the camera lane
    const double z = rng.uniform(3.0, 12.0);
    Aabb box;
    box.lo = Vec3{x - sx / 2, kFloorY - sy, z - sz / 2};
    box.hi = Vec3{x + sx / 2, kFloorY, z + sz / 2};
    s.boxes.push_back(box);
    s.box_tex.push_back(SurfaceTexture::draw(rng));
  }
  return s;
}

// Ray-AABB slab test; returns the entry distance or +inf on a miss, and the
// axis of the face the ray enters through (for footprint computation).
double ray_box(const Vec3& o, const Vec3& d, const Aabb& b,
               int* hit_axis = nullptr) {
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  int axis = 0;
  const double ov[3] = {o.x, o.y, o.z};
  const double dv[3] = {d.x, d.y, d.z};
  const double lov[3] = {b.lo.x, b.lo.y, b.lo.z};
  const double hiv[3] = {b.hi.x, b.hi.y, b.hi.z};
  for (int a = 0; a < 3; ++a) {
    if (dv[a] == 0.0) {
      if (ov[a] < lov[a] || ov[a] > hiv[a])
        return std::numeric_limits<double>::infinity();
      continue;
    }
    double t0 = (lov[a] - ov[a]) / dv[a];
    double t1 = (hiv[a] - ov[a]) / dv[a];
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > tmin) {
      tmin = t0;
      axis = a;
    }
    tmax = std::min(tmax, t1);
  }
  if (tmax < tmin || tmax < 1e-9) return std::numeric_limits<double>::infinity();
  if (hit_axis) *hit_axis = axis;
  return std::max(tmin, 1e-9);
}

// Distance to the room shell (rays start inside, so this is the exit
// distance), plus the index of the wall hit.
double ray_room(const Vec3& o, const Vec3& d, int& wall) {
  double best = std::numeric_limits<double>::infinity();
  wall = -1;
  const struct {
    int axis;
    double bound;
    int id;
  } planes[6] = {{0, -kRoomX, 0}, {0, kRoomX, 1}, {1, kFloorY, 2},
                 {1, kCeilY, 3},  {2, kBackZ, 4}, {2, kFrontZ, 5}};
  const double ov[3] = {o.x, o.y, o.z};
  const double dv[3] = {d.x, d.y, d.z};
  for (const auto& pl : planes) {
    if (dv[pl.axis] == 0.0) continue;
    const double t = (pl.bound - ov[pl.axis]) / dv[pl.axis];
    if (t > 1e-9 && t < best) {
      best = t;
      wall = pl.id;
    }
  }
  return best;
}

struct CameraPath {
  std::vector<Vec3> centers;  // camera center in world coordinates
  std::vector<double> yaw;
};

CameraPath draw_path(Rng& rng, const SceneParams& p) {
  CameraPath path;
  const double lat_phase = rng.uniform(0.0, 2.0 * M_PI);
  const double yaw_phase = rng.uniform(0.0, 2.0 * M_PI);
  const double lat_cycles = rng.uniform(1.0, 2.0);
  const double yaw_cycles = rng.uniform(1.0, 2.0);
  for (int k = 0; k < p.frames; ++k) {
    const double s = static_cast<double>(k) / std::max(1, p.frames - 1);
    path.centers.push_back(
        Vec3{p.lateral_amp * std::sin(2.0 * M_PI * lat_cycles * s + lat_phase),
             0.0, p.forward_step * k});
    path.yaw.push_back(p.yaw_amp *
                       std::sin(2.0 * M_PI * yaw_cycles * s + yaw_phase));
  }
  return path;
}

// ------------------------------------------------------------ file names ----

std::string frame_name(int64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06lld.png", static_cast<long long>(i));
  return buf;
}

std::string seq_dir_name(int64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "seq_%04lld", static_cast<long long>(i));
  return buf;
}

[[noreturn]] void fail_file(const std::string& path, const std::string& what) {
  throw std::runtime_error("dataset: " + what + ": " + path);
}

}  // namespace

void SceneParams::validate() const {
  check(height >= 2 && width >= 2, "scene: image size too small");
  check(frames >= 3, "scene: need at least 3 frames");
  check(boxes >= 0 && boxes <= 255, "scene: box count must fit 8-bit labels");
  check(focal_scale > 0, "scene: focal_scale must be positive");
  check(forward_step >= 0 && lateral_amp >= 0,
        "scene: motion amplitudes must be nonnegative");
  check(scanlines >= 1, "scene: need at least one scanline");
  check(dropout >= 0.0 && dropout <= 1.0, "scene: dropout must lie in [0,1]");
  check(horizon_frac >= 0.0 && horizon_frac < 1.0,
        "scene: horizon_frac must lie in [0,1)");
}

Sequence generate_sequence(uint64_t seed, const SceneParams& params) {
  params.validate();
  Rng rng(mix_seed(seed, 101));
  const Scene scene = build_scene(rng, params.boxes);
  const CameraPath path = draw_path(rng, params);

  if (!params.allow_static) {
    double max_baseline = 0.0;
    for (int k = 0; k + 1 < params.frames; ++k) {
      const Vec3 d = path.centers[k + 1] - path.centers[k];
      max_baseline = std::max(max_baseline, std::sqrt(dot(d, d)));
    }
    check(max_baseline > 1e-9,
          "generate_sequence: degenerate camera path (zero baseline); set "
          "allow_static to render it anyway");
  }

  const int64_t h = params.height, w = params.width;
  Sequence seq;
  seq.camera = CameraModel(params.focal_scale * static_cast<double>(w),
                           params.focal_scale * static_cast<double>(w),
                           (static_cast<double>(w) - 1.0) / 2.0,
                           (static_cast<double>(h) - 1.0) / 2.0);

  for (int k = 0; k < params.frames; ++k) {
    const Mat3 r_wc = rotation_y(path.yaw[k]);  // camera-to-world
    const Mat3 r_cw = transpose(r_wc);
    const Vec3& c = path.centers[k];
    seq.poses.emplace_back(r_cw, -1.0 * (r_cw * c));

    Tensor img({3, h, w});
    Tensor dep({h, w});
    Tensor ids({h, w});
    const int64_t n = h * w;
    // Intersection of the ray through pixel (u, v) with an axis plane; used
    // to span the pixel's world footprint on the surface the center ray hit.
    // Grazing or receding offset rays get a huge footprint, which the sinc
    // attenuation maps to the texture's base color (fully smeared).
    const auto hit_on_plane = [&](double u, double v, int axis,
                                  double bound) -> Vec3 {
      const Vec3 dir{(u - seq.camera.cx) / seq.camera.fx,
                     (v - seq.camera.cy) / seq.camera.fy, 1.0};
      const Vec3 dw = r_wc * dir;
      const double denom = axis == 0 ? dw.x : axis == 1 ? dw.y : dw.z;
      const double co = axis == 0 ? c.x : axis == 1 ? c.y : c.z;
      double t = std::abs(denom) < 1e-12 ? 1e6 : (bound - co) / denom;
      t = std::min(std::max(t, 0.0), 1e6);
      return c + t * dw;
    };
    constexpr int kWallAxis[6] = {0, 0, 1, 1, 2, 2};
    constexpr double kWallBound[6] = {-kRoomX, kRoomX,  kFloorY,
                                      kCeilY,  kBackZ, kFrontZ};
    for (int64_t v = 0; v < h; ++v) {
      for (int64_t u = 0; u < w; ++u) {
        const Vec3 dir_cam{(static_cast<double>(u) - seq.camera.cx) / seq.camera.fx,
                           (static_cast<double>(v) - seq.camera.cy) / seq.camera.fy,
                           1.0};
        const Vec3 d = r_wc * dir_cam;  // z-component of dir_cam is 1, so the
                                        // ray parameter equals camera depth
        int wall = -1;
        double t = ray_room(c, d, wall);
        int surface = wall;  // 0..5 walls; >= 6 are boxes
        int axis = wall >= 0 ? kWallAxis[wall] : 2;
        for (size_t b = 0; b < scene.boxes.size(); ++b) {
          int box_axis = 0;
          const double tb = ray_box(c, d, scene.boxes[b], &box_axis);
          if (tb < t) {
            t = tb;
            surface = 6 + static_cast<int>(b);
            axis = box_axis;
          }
        }
        check(std::isfinite(t), "generate_sequence: ray escaped the room");
        const Vec3 p = c + t * d;
        double bound;
        if (surface < 6) {
          bound = kWallBound[surface];
        } else {
          const Aabb& b = scene.boxes[surface - 6];
          const double dv_a = axis == 0 ? d.x : axis == 1 ? d.y : d.z;
          const Vec3& face = dv_a > 0.0 ? b.lo : b.hi;
          bound = axis == 0 ? face.x : axis == 1 ? face.y : face.z;
        }
        const double uu = static_cast<double>(u), vv = static_cast<double>(v);
        const Vec3 dpu = hit_on_plane(uu + 0.5, vv, axis, bound) -
                         hit_on_plane(uu - 0.5, vv, axis, bound);
        const Vec3 dpv = hit_on_plane(uu, vv + 0.5, axis, bound) -
                         hit_on_plane(uu, vv - 0.5, axis, bound);
        const SurfaceTexture& tex =
            surface < 6 ? scene.wall_tex[surface] : scene.box_tex[surface - 6];
        for (int cch = 0; cch < 3; ++cch)
          img[cch * n + v * w + u] = tex.eval_filtered(cch, p, dpu, dpv);
        dep.at(v, u) = t;
        ids.at(v, u) = surface < 6 ? 0.0 : static_cast<double>(surface - 5);
      }
    }
    seq.images.emplace_back(std::move(img));
    seq.depth.push_back(std::move(dep));
    seq.instance_labels.push_back(std::move(ids));
  }
  return seq;
}

namespace {

// Core sparsifier over a raw depth grid where value > 0 marks a usable pixel.
SparseDepthTarget sparsify(const Tensor& dense, int scanlines, double dropout,
                           double horizon_frac, uint64_t seed) {
  check(scanlines >= 1, "sparse_lidar_sample: need at least one scanline");
  check(dropout >= 0.0 && dropout <= 1.0,
        "sparse_lidar_sample: dropout must lie in [0,1]");
  const int64_t h = dense.dim(0), w = dense.dim(1);
  const int64_t first = std::min<int64_t>(
      h - 1,
      static_cast<int64_t>(std::ceil(horizon_frac * static_cast<double>(h))));

  std::set<int64_t> rows;
  if (scanlines == 1) {
    rows.insert(first);
  } else {
    for (int i = 0; i < scanlines; ++i) {
      const double f = static_cast<double>(i) / (scanlines - 1);
      rows.insert(first + static_cast<int64_t>(std::llround(
                              f * static_cast<double>(h - 1 - first))));
    }
  }

  // One Bernoulli draw per candidate pixel, in scan order, so the pattern is
  // a pure function of the seed.
  Rng rng(mix_seed(seed, 202));
  Tensor values({h, w}), valid({h, w});
  for (int64_t r : rows)
    for (int64_t u = 0; u < w; ++u) {
      const bool keep = !rng.bernoulli(dropout);
      if (keep && dense.at(r, u) > 0.0) {
        valid.at(r, u) = 1.0;
        values.at(r, u) = dense.at(r, u);
      }
    }
  return SparseDepthTarget(std::move(values), std::move(valid));
}

}  // namespace

SparseDepthTarget sparse_lidar_sample(const DepthMap& dense, int scanlines,
                                      double dropout, double horizon_frac,
                                      uint64_t seed) {
  return sparsify(dense.data, scanlines, dropout, horizon_frac, seed);
}

Tensor occlusion_mask(const Tensor& target_depth, const Tensor& source_depth,
                      const RigidPose& source_from_target,
                      const CameraModel& cam, int dilate) {
  check(target_depth.rank() == 2 && source_depth.rank() == 2 &&
            target_depth.same_shape(source_depth),
        "occlusion_mask: depth maps must be equal-shaped [H,W]");
  const int64_t h = target_depth.dim(0), w = target_depth.dim(1);
  Tensor mask({h, w});
  for (int64_t v = 0; v < h; ++v)
    for (int64_t u = 0; u < w; ++u) {
      const double z = target_depth.at(v, u);
      const Vec3 p{(static_cast<double>(u) - cam.cx) / cam.fx * z,
                   (static_cast<double>(v) - cam.cy) / cam.fy * z, z};
      const Vec3 q = source_from_target.r * p + source_from_target.t;
      if (q.z <= kZEps) continue;  // behind the source camera: not "occluded"
      const double us = cam.fx * q.x / q.z + cam.cx;
      const double vs = cam.fy * q.y / q.z + cam.cy;
      if (us < 0.0 || us > static_cast<double>(w - 1) || vs < 0.0 ||
          vs > static_cast<double>(h - 1))
        continue;  // out of frame: handled by warp validity, not occlusion
      const int64_t x0 = std::min<int64_t>(static_cast<int64_t>(us), w - 2);
      const int64_t y0 = std::min<int64_t>(static_cast<int64_t>(vs), h - 2);
      const double ax = us - static_cast<double>(x0);
      const double ay = vs - static_cast<double>(y0);
      const double ds =
          (1 - ay) * ((1 - ax) * source_depth.at(y0, x0) +
                      ax * source_depth.at(y0, x0 + 1)) +
          ay * ((1 - ax) * source_depth.at(y0 + 1, x0) +
                ax * source_depth.at(y0 + 1, x0 + 1));
      if (q.z > ds + std::max(0.05, 0.02 * ds)) mask.at(v, u) = 1.0;
    }
  for (int round = 0; round < dilate; ++round) {
    Tensor grown = mask;
    for (int64_t v = 0; v < h; ++v)
      for (int64_t u = 0; u < w; ++u) {
        if (mask.at(v, u) != 0.0) continue;
        for (int dy = -1; dy <= 1 && grown.at(v, u) == 0.0; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int64_t vv = v + dy, uu = u + dx;
            if (vv >= 0 && vv < h && uu >= 0 && uu < w &&
                mask.at(vv, uu) != 0.0) {
              grown.at(v, u) = 1.0;
              break;
            }
          }
      }
    mask = std::move(grown);
  }
  return mask;
}

std::vector<FrameSample> to_frame_samples(const Sequence& seq,
                                          const SceneParams& params,
                                          uint64_t seed) {
  const int64_t k = static_cast<int64_t>(seq.images.size());
  check(k >= 3, "to_frame_samples: need at least 3 frames");
  check(seq.depth.size() == seq.images.size() &&
            seq.poses.size() == seq.images.size() &&
            seq.instance_labels.size() == seq.images.size(),
        "to_frame_samples: ragged sequence");

  std::vector<FrameSample> out;
  for (int64_t i = 1; i + 1 < k; ++i) {
    std::vector<SourceView> sources;
    for (int64_t j : {i - 1, i + 1}) {
      const RigidPose rel = seq.poses[j] * seq.poses[i].inverse();
      sources.push_back(SourceView{seq.images[j], rel});
    }
    const int64_t n = seq.instance_labels[i].numel();
    Tensor mask(seq.instance_labels[i].shape());
    for (int64_t t = 0; t < n; ++t)
      mask[t] = seq.instance_labels[i][t] > 0.0 ? 1.0 : 0.0;

    bool fully_valid = true;
    for (int64_t t = 0; t < seq.depth[i].numel() && fully_valid; ++t)
      fully_valid = seq.depth[i][t] > 0.0;
    std::optional<DepthMap> dense;
    if (fully_valid) dense = DepthMap(seq.depth[i]);

    FrameSample fs{seq.images[i],
                   std::move(sources),
                   seq.camera,
                   sparsify(seq.depth[i], params.scanlines, params.dropout,
                            params.horizon_frac,
                            mix_seed(seed, static_cast<uint64_t>(i))),
                   std::move(dense),
                   std::move(mask)};
    validate_frame(fs);
    out.push_back(std::move(fs));
  }
  return out;
}

// ------------------------------------------------------------------- I/O ----

void save_sequence(const std::string& seq_dir, const Sequence& seq) {
  const int64_t k = static_cast<int64_t>(seq.images.size());
  check(k >= 1, "save_sequence: empty sequence");
  fs::create_directories(fs::path(seq_dir) / "image");
  fs::create_directories(fs::path(seq_dir) / "depth");
  fs::create_directories(fs::path(seq_dir) / "instance");

  for (int64_t i = 0; i < k; ++i) {
    write_png_rgb8((fs::path(seq_dir) / "image" / frame_name(i)).string(),
                   seq.images[i].data);
    Tensor d16(seq.depth[i].shape());
    for (int64_t t = 0; t < d16.numel(); ++t) d16[t] = seq.depth[i][t] * 256.0;
    write_png_gray16((fs::path(seq_dir) / "depth" / frame_name(i)).string(),
                     d16);
    write_png_gray8((fs::path(seq_dir) / "instance" / frame_name(i)).string(),
                    seq.instance_labels[i]);
  }

  std::ofstream poses((fs::path(seq_dir) / "poses.txt").string());
  check(poses.good(), "save_sequence: cannot write poses.txt");
  poses.precision(17);
  for (const RigidPose& p : seq.poses) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) poses << p.r(i, j) << ' ';
      poses << (i == 0 ? p.t.x : i == 1 ? p.t.y : p.t.z);
      poses << (i == 2 ? '\n' : ' ');
    }
  }
  std::ofstream intr((fs::path(seq_dir) / "intrinsics.txt").string());
  check(intr.good(), "save_sequence: cannot write intrinsics.txt");
  intr.precision(17);
  intr << seq.camera.fx << ' ' << seq.camera.fy << ' ' << seq.camera.cx << ' '
       << seq.camera.cy << '\n';
}

Sequence load_sequence(const std::string& seq_dir) {
  const fs::path dir(seq_dir);
  if (!fs::is_directory(dir)) fail_file(seq_dir, "not a directory");

  std::vector<std::string> frames;
  const fs::path image_dir = dir / "image";
  if (!fs::is_directory(image_dir)) fail_file(image_dir.string(), "missing");
  for (const auto& e : fs::directory_iterator(image_dir))
    if (e.path().extension() == ".png") frames.push_back(e.path().filename().string());
  std::sort(frames.begin(), frames.end());
  if (frames.empty()) fail_file(image_dir.string(), "no frames in");

  Sequence seq;
  for (const std::string& name : frames) {
    Tensor img = read_png_rgb8((image_dir / name).string());
    const fs::path depth_path = dir / "depth" / name;
    if (!fs::exists(depth_path)) fail_file(depth_path.string(), "missing");
    Tensor d16 = read_png_gray16(depth_path.string());
    const fs::path inst_path = dir / "instance" / name;
    if (!fs::exists(inst_path)) fail_file(inst_path.string(), "missing");
    Tensor ids = read_png_gray8(inst_path.string());
    check(d16.dim(0) == img.dim(1) && d16.dim(1) == img.dim(2) &&
              ids.same_shape(d16),
          "load_sequence: shape mismatch at " + (dir / "*" / name).string());
    for (int64_t t = 0; t < d16.numel(); ++t) d16[t] /= 256.0;  // 0 stays invalid
    seq.images.emplace_back(std::move(img));
    seq.depth.push_back(std::move(d16));
    seq.instance_labels.push_back(std::move(ids));
  }

  const fs::path poses_path = dir / "poses.txt";
  std::ifstream poses(poses_path.string());
  if (!poses.good()) fail_file(poses_path.string(), "missing");
  std::string line;
  while (std::getline(poses, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    double m[12];
    for (double& v : m)
      if (!(ss >> v)) fail_file(poses_path.string(), "malformed pose line in");
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = m[i * 4 + j];
    seq.poses.emplace_back(r, Vec3{m[3], m[7], m[11]});
  }
  if (seq.poses.size() != seq.images.size())
    fail_file(poses_path.string(), "pose count does not match frame count in");

  const fs::path intr_path = dir / "intrinsics.txt";
  std::ifstream intr(intr_path.string());
  if (!intr.good()) fail_file(intr_path.string(), "missing");
  double fx, fy, cx, cy;
  if (!(intr >> fx >> fy >> cx >> cy))
    fail_file(intr_path.string(), "malformed intrinsics in");
  seq.camera = CameraModel(fx, fy, cx, cy);
  return seq;
}

void save_dataset(const std::string& root, const std::vector<Sequence>& seqs) {
  check(!seqs.empty(), "save_dataset: no sequences");
  fs::create_directories(root);
  for (size_t i = 0; i < seqs.size(); ++i)
    save_sequence((fs::path(root) / seq_dir_name(static_cast<int64_t>(i))).string(),
                  seqs[i]);
}

std::vector<FrameSample> load_dataset(const std::string& root,
                                      const SceneParams& params,
                                      uint64_t seed) {
  if (!fs::is_directory(root)) fail_file(root, "not a directory");
  std::vector<std::string> dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && e.path().filename().string().rfind("seq_", 0) == 0)
      dirs.push_back(e.path().string());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) fail_file(root, "no seq_* directories under");

  std::vector<FrameSample> out;
  for (size_t i = 0; i < dirs.size(); ++i) {
    const Sequence seq = load_sequence(dirs[i]);
    std::vector<FrameSample> samples =
        to_frame_samples(seq, params, mix_seed(seed, i));
    for (FrameSample& s : samples) out.push_back(std::move(s));
  }
  return out;
}

}  // namespace md
