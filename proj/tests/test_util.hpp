#pragma once

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "mutualdepth/autograd.hpp"
#include "mutualdepth/rng.hpp"
#include "mutualdepth/tensor.hpp"

namespace md::testing {

inline Tensor rand_tensor(const std::vector<int64_t>& shape, Rng& rng, double lo = -1.0,
                          double hi = 1.0) {
  Tensor t(shape);
  for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(lo, hi);
  return t;
}

// Central-difference check of d(build())/d(leaf) for every element of every
// leaf. build() must return a scalar and re-run the graph on each call.
// Returns the worst relative error.
inline double max_grad_err(std::vector<Var> leaves, const std::function<Var()>& build,
                           double step = 1e-5) {
  for (auto& l : leaves) l.clear_grad();
  Var out = build();
  md::backward(out);
  double worst = 0.0;
  for (auto& leaf : leaves) {
    REQUIRE(leaf.has_grad());
    const Tensor& g = leaf.grad();
    Tensor& v = leaf.value();
    for (int64_t i = 0; i < v.numel(); ++i) {
      const double orig = v.data()[i];
      v.data()[i] = orig + step;
      const double fp = build().item();
      v.data()[i] = orig - step;
      const double fm = build().item();
      v.data()[i] = orig;
      const double fd = (fp - fm) / (2.0 * step);
      const double err = std::abs(fd - g.data()[i]) /
                         std::max({1.0, std::abs(fd), std::abs(g.data()[i])});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace md::testing
