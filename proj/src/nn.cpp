#include "mutualdepth/nn.hpp"

#include <Eigen/Core>

#include <cmath>

namespace md {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConst = Eigen::Map<const RowMat>;

// col is [C*9, Ho*Wo]; zero padding 1, kernel 3.
Tensor im2col(const Tensor& x, int stride, int64_t ho, int64_t wo) {
  const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor col({c * 9, ho * wo});
  for (int64_t ch = 0; ch < c; ++ch) {
    for (int ki = 0; ki < 3; ++ki) {
      for (int kj = 0; kj < 3; ++kj) {
        double* row = col.data() + ((ch * 3 + ki) * 3 + kj) * ho * wo;
        for (int64_t oy = 0; oy < ho; ++oy) {
          const int64_t iy = oy * stride + ki - 1;
          if (iy < 0 || iy >= h) continue;  // stays zero
          const double* src = x.data() + (ch * h + iy) * w;
          double* dst = row + oy * wo;
          for (int64_t ox = 0; ox < wo; ++ox) {
            const int64_t ix = ox * stride + kj - 1;
            if (ix >= 0 && ix < w) dst[ox] = src[ix];
          }
        }
      }
    }
  }
  return col;
}

void col2im_add(const Tensor& col, int stride, int64_t ho, int64_t wo, Tensor& dx) {
  const int64_t c = dx.dim(0), h = dx.dim(1), w = dx.dim(2);
  for (int64_t ch = 0; ch < c; ++ch) {
    for (int ki = 0; ki < 3; ++ki) {
      for (int kj = 0; kj < 3; ++kj) {
        const double* row = col.data() + ((ch * 3 + ki) * 3 + kj) * ho * wo;
        for (int64_t oy = 0; oy < ho; ++oy) {
          const int64_t iy = oy * stride + ki - 1;
          if (iy < 0 || iy >= h) continue;
          double* dst = dx.data() + (ch * h + iy) * w;
          const double* src = row + oy * wo;
          for (int64_t ox = 0; ox < wo; ++ox) {
            const int64_t ix = ox * stride + kj - 1;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  check(xv.rank() == 3, "conv2d: input must be [C,H,W]");
  check(wv.rank() == 4 && wv.dim(2) == 3 && wv.dim(3) == 3, "conv2d: weight must be [K,C,3,3]");
  check(wv.dim(1) == xv.dim(0), "conv2d: channel mismatch");
  check(bv.rank() == 1 && bv.dim(0) == wv.dim(0), "conv2d: bias must be [K]");
  check(stride == 1 || stride == 2, "conv2d: stride must be 1 or 2");

  const int64_t k = wv.dim(0), c = xv.dim(0), h = xv.dim(1), wd = xv.dim(2);
  const int64_t ho = (h - 1) / stride + 1;
  const int64_t wo = (wd - 1) / stride + 1;

  auto col = std::make_shared<Tensor>(im2col(xv, stride, ho, wo));

  Tensor out({k, ho, wo});
  {
    MapConst wm(wv.data(), k, c * 9);
    MapConst cm(col->data(), c * 9, ho * wo);
    MapMat om(out.data(), k, ho * wo);
    om.noalias() = wm * cm;
  }
  for (int64_t kk = 0; kk < k; ++kk) {
    double* o = out.data() + kk * ho * wo;
    const double bias = bv[kk];
    for (int64_t i = 0; i < ho * wo; ++i) o[i] += bias;
  }

  return make_op("conv2d", std::move(out), {x, w, b},
                 [col, stride, k, c, h, wd, ho, wo](Node& self) {
    Node& nx = *self.parents[0];
    Node& nw = *self.parents[1];
    Node& nb = *self.parents[2];
    MapConst gm(self.grad.data(), k, ho * wo);

    if (nb.requires_grad) {
      Tensor db({k});
      for (int64_t kk = 0; kk < k; ++kk) db[kk] = gm.row(kk).sum();
      nb.add_grad(db);
    }
    if (nw.requires_grad) {
      Tensor dw({k, c, 3, 3});
      MapMat dwm(dw.data(), k, c * 9);
      MapConst cm(col->data(), c * 9, ho * wo);
      dwm.noalias() = gm * cm.transpose();
      nw.add_grad(dw);
    }
    if (nx.requires_grad) {
      Tensor dcol({c * 9, ho * wo});
      MapMat dcm(dcol.data(), c * 9, ho * wo);
      MapConst wm(nw.value.data(), k, c * 9);
      dcm.noalias() = wm.transpose() * gm;
      Tensor dx({c, h, wd});
      col2im_add(dcol, stride, ho, wo, dx);
      nx.add_grad(dx);
    }
  });
}

namespace {
inline int64_t reflect_index(int64_t i, int64_t n) {
  if (i < 0) i = -i;
  if (i >= n) i = 2 * n - 2 - i;
  return i;
}
}  // namespace

Var pad_reflect(const Var& x, int left, int right, int top, int bottom) {
  const Tensor& xv = x.value();
  check(xv.rank() == 3, "pad_reflect: input must be [C,H,W]");
  const int64_t c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  check(left < w && right < w && top < h && bottom < h,
        "pad_reflect: padding must be smaller than the image");
  const int64_t oh = h + top + bottom, ow = w + left + right;
  Tensor out({c, oh, ow});
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t i = 0; i < oh; ++i) {
      const int64_t si = reflect_index(i - top, h);
      for (int64_t j = 0; j < ow; ++j)
        out.at(ch, i, j) = xv.at(ch, si, reflect_index(j - left, w));
    }
  return make_op("pad_reflect", std::move(out), {x}, [left, top, c, h, w, oh, ow](Node& self) {
    Node& nx = *self.parents[0];
    if (!nx.requires_grad) return;
    Tensor dx({c, h, w});
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t i = 0; i < oh; ++i) {
        const int64_t si = reflect_index(i - top, h);
        for (int64_t j = 0; j < ow; ++j)
          dx.at(ch, si, reflect_index(j - left, w)) += self.grad.at(ch, i, j);
      }
    nx.add_grad(dx);
  });
}

Var crop(const Var& x, int top, int left, int64_t h, int64_t w) {
  const Tensor& xv = x.value();
  check(xv.rank() == 3, "crop: input must be [C,H,W]");
  const int64_t c = xv.dim(0);
  check(top + h <= xv.dim(1) && left + w <= xv.dim(2), "crop: out of range");
  Tensor out({c, h, w});
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t i = 0; i < h; ++i)
      for (int64_t j = 0; j < w; ++j) out.at(ch, i, j) = xv.at(ch, top + i, left + j);
  return make_op("crop", std::move(out), {x}, [top, left, c, h, w](Node& self) {
    Node& nx = *self.parents[0];
    if (!nx.requires_grad) return;
    Tensor dx(nx.value.shape());
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t i = 0; i < h; ++i)
        for (int64_t j = 0; j < w; ++j)
          dx.at(ch, top + i, left + j) = self.grad.at(ch, i, j);
    nx.add_grad(dx);
  });
}

Var box_mean3(const Var& x) {
  const Tensor& xv = x.value();
  check(xv.rank() == 3 && xv.dim(1) >= 3 && xv.dim(2) >= 3, "box_mean3: input too small");
  const int64_t c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  const int64_t oh = h - 2, ow = w - 2;
  Tensor out({c, oh, ow});
  constexpr double kInv9 = 1.0 / 9.0;
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t i = 0; i < oh; ++i)
      for (int64_t j = 0; j < ow; ++j) {
        double s = 0.0;
        for (int di = 0; di < 3; ++di)
          for (int dj = 0; dj < 3; ++dj) s += xv.at(ch, i + di, j + dj);
        out.at(ch, i, j) = s * kInv9;
      }
  return make_op("box_mean3", std::move(out), {x}, [c, oh, ow](Node& self) {
    Node& nx = *self.parents[0];
    if (!nx.requires_grad) return;
    Tensor dx(nx.value.shape());
    constexpr double kInv9 = 1.0 / 9.0;
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t i = 0; i < oh; ++i)
        for (int64_t j = 0; j < ow; ++j) {
          const double g = self.grad.at(ch, i, j) * kInv9;
          for (int di = 0; di < 3; ++di)
            for (int dj = 0; dj < 3; ++dj) dx.at(ch, i + di, j + dj) += g;
        }
    nx.add_grad(dx);
  });
}

Var upsample_nearest2(const Var& x) {
  const Tensor& xv = x.value();
  check(xv.rank() == 3, "upsample_nearest2: input must be [C,H,W]");
  const int64_t c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  Tensor out({c, h * 2, w * 2});
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t i = 0; i < 2 * h; ++i)
      for (int64_t j = 0; j < 2 * w; ++j) out.at(ch, i, j) = xv.at(ch, i / 2, j / 2);
  return make_op("upsample_nearest2", std::move(out), {x}, [c, h, w](Node& self) {
    Node& nx = *self.parents[0];
    if (!nx.requires_grad) return;
    Tensor dx({c, h, w});
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t i = 0; i < 2 * h; ++i)
        for (int64_t j = 0; j < 2 * w; ++j)
          dx.at(ch, i / 2, j / 2) += self.grad.at(ch, i, j);
    nx.add_grad(dx);
  });
}

namespace {
struct Lerp {
  int64_t i0, i1;
  double w1;  // weight of i1; weight of i0 is 1-w1
};

Lerp bilinear_axis(int64_t dst, int64_t in_n, int64_t out_n) {
  const double scale = static_cast<double>(in_n) / static_cast<double>(out_n);
  double src = (static_cast<double>(dst) + 0.5) * scale - 0.5;
  if (src < 0.0) src = 0.0;
  if (src > static_cast<double>(in_n - 1)) src = static_cast<double>(in_n - 1);
  Lerp l;
  l.i0 = static_cast<int64_t>(src);
  if (l.i0 > in_n - 2) l.i0 = in_n >= 2 ? in_n - 2 : 0;
  l.i1 = in_n >= 2 ? l.i0 + 1 : 0;
  l.w1 = src - static_cast<double>(l.i0);
  return l;
}
}  // namespace

Var resize_bilinear(const Var& x, int64_t out_h, int64_t out_w) {
  const Tensor& xv = x.value();
  check(xv.rank() == 3, "resize_bilinear: input must be [C,H,W]");
  check(out_h >= 1 && out_w >= 1, "resize_bilinear: bad output size");
  const int64_t c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  if (out_h == h && out_w == w) return x * 1.0;

  std::vector<Lerp> ly(out_h), lx(out_w);
  for (int64_t i = 0; i < out_h; ++i) ly[i] = bilinear_axis(i, h, out_h);
  for (int64_t j = 0; j < out_w; ++j) lx[j] = bilinear_axis(j, w, out_w);

  Tensor out({c, out_h, out_w});
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t i = 0; i < out_h; ++i)
      for (int64_t j = 0; j < out_w; ++j) {
        const Lerp& a = ly[i];
        const Lerp& b = lx[j];
        out.at(ch, i, j) = (1 - a.w1) * ((1 - b.w1) * xv.at(ch, a.i0, b.i0) +
                                         b.w1 * xv.at(ch, a.i0, b.i1)) +
                           a.w1 * ((1 - b.w1) * xv.at(ch, a.i1, b.i0) +
                                   b.w1 * xv.at(ch, a.i1, b.i1));
      }
  return make_op("resize_bilinear", std::move(out), {x},
                 [c, out_h, out_w, ly, lx](Node& self) {
    Node& nx = *self.parents[0];
    if (!nx.requires_grad) return;
    Tensor dx(nx.value.shape());
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t i = 0; i < out_h; ++i)
        for (int64_t j = 0; j < out_w; ++j) {
          const Lerp& a = ly[i];
          const Lerp& b = lx[j];
          const double g = self.grad.at(ch, i, j);
          dx.at(ch, a.i0, b.i0) += (1 - a.w1) * (1 - b.w1) * g;
          dx.at(ch, a.i0, b.i1) += (1 - a.w1) * b.w1 * g;
          dx.at(ch, a.i1, b.i0) += a.w1 * (1 - b.w1) * g;
          dx.at(ch, a.i1, b.i1) += a.w1 * b.w1 * g;
        }
    nx.add_grad(dx);
  });
}

Var concat_channels(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  check(av.rank() == 3 && bv.rank() == 3 && av.dim(1) == bv.dim(1) && av.dim(2) == bv.dim(2),
        "concat_channels: spatial shapes must match");
  const int64_t ca = av.dim(0), cb = bv.dim(0), h = av.dim(1), w = av.dim(2);
  Tensor out({ca + cb, h, w});
  std::copy(av.data(), av.data() + av.numel(), out.data());
  std::copy(bv.data(), bv.data() + bv.numel(), out.data() + av.numel());
  return make_op("concat", std::move(out), {a, b}, [ca, cb, h, w](Node& self) {
    Node& na = *self.parents[0];
    Node& nb = *self.parents[1];
    const int64_t na_n = ca * h * w, nb_n = cb * h * w;
    if (na.requires_grad) {
      Tensor da({ca, h, w});
      std::copy(self.grad.data(), self.grad.data() + na_n, da.data());
      na.add_grad(da);
    }
    if (nb.requires_grad) {
      Tensor db({cb, h, w});
      std::copy(self.grad.data() + na_n, self.grad.data() + na_n + nb_n, db.data());
      nb.add_grad(db);
    }
  });
}

namespace {
// Shared forward-difference implementation; axis 1 = x (last dim), 0 = y.
Var diff_impl(const char* name, const Var& x, int axis) {
  const Tensor& xv = x.value();
  check(xv.rank() >= 2, "diff: rank must be >= 2");
  const int64_t h = xv.dim(xv.rank() - 2), w = xv.dim(xv.rank() - 1);
  int64_t lead = xv.numel() / (h * w);
  std::vector<int64_t> oshape = xv.shape();
  if (axis == 1) {
    check(w >= 2, "diff_x: width must be >= 2");
    oshape[xv.rank() - 1] = w - 1;
  } else {
    check(h >= 2, "diff_y: height must be >= 2");
    oshape[xv.rank() - 2] = h - 1;
  }
  Tensor out(oshape);
  const int64_t oh = axis == 1 ? h : h - 1;
  const int64_t ow = axis == 1 ? w - 1 : w;
  for (int64_t l = 0; l < lead; ++l) {
    const double* src = xv.data() + l * h * w;
    double* dst = out.data() + l * oh * ow;
    for (int64_t i = 0; i < oh; ++i)
      for (int64_t j = 0; j < ow; ++j)
        dst[i * ow + j] = axis == 1 ? src[i * w + j + 1] - src[i * w + j]
                                    : src[(i + 1) * w + j] - src[i * w + j];
  }
  return make_op(name, std::move(out), {x}, [axis, lead, h, w, oh, ow](Node& self) {
    Node& nx = *self.parents[0];
    if (!nx.requires_grad) return;
    Tensor dx(nx.value.shape());
    for (int64_t l = 0; l < lead; ++l) {
      const double* g = self.grad.data() + l * oh * ow;
      double* dst = dx.data() + l * h * w;
      for (int64_t i = 0; i < oh; ++i)
        for (int64_t j = 0; j < ow; ++j) {
          const double gv = g[i * ow + j];
          if (axis == 1) {
            dst[i * w + j + 1] += gv;
            dst[i * w + j] -= gv;
          } else {
            dst[(i + 1) * w + j] += gv;
            dst[i * w + j] -= gv;
          }
        }
    }
    nx.add_grad(dx);
  });
}
}  // namespace

Var diff_x(const Var& x) { return diff_impl("diff_x", x, 1); }
Var diff_y(const Var& x) { return diff_impl("diff_y", x, 0); }

}  // namespace md
