#include "mutualdepth/autograd.hpp"

#include <cmath>
#include <unordered_set>

namespace md {

void Node::add_grad(const Tensor& g) {
  if (!has_grad) {
    grad = g;
    has_grad = true;
    return;
  }
  double* dst = grad.data();
  const double* src = g.data();
  for (int64_t i = 0, n = grad.numel(); i < n; ++i) dst[i] += src[i];
}

void Node::add_grad_scalar(double g) {
  if (!has_grad) {
    grad = Tensor::scalar(0.0);
    has_grad = true;
  }
  grad[0] += g;
}

void Node::clear_grad() {
  grad = Tensor();
  has_grad = false;
}

Var Var::leaf(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return Var(n);
}

Var make_op(const char* name, Tensor value, std::vector<Var> parents,
            std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = name;
  bool needs = false;
  for (const Var& p : parents) needs = needs || p.requires_grad();
  n->requires_grad = needs;
  if (needs) {
    n->parents.reserve(parents.size());
    for (Var& p : parents) n->parents.push_back(p.node());
    n->backward_fn = std::move(backward);
  }
  return Var(n);
}

void backward(const Var& root) {
  check(root.defined() && root.numel() == 1, "backward: root must be a scalar");
  if (!root.requires_grad()) return;

  // Iterative post-order DFS; reverse of it is a valid topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.push_back({root.node().get(), 0});
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->add_grad(Tensor::scalar(1.0));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->has_grad) n->backward_fn(*n);
  }
}

namespace {

enum class BinKind { kAdd, kSub, kMul, kDiv };

// Shared implementation for binary elementwise ops with scalar broadcast.
Var binary_op(const char* name, const Var& a, const Var& b, BinKind kind) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  bool a_scalar = av.numel() == 1;
  bool b_scalar = bv.numel() == 1;
  check(a_scalar || b_scalar || av.same_shape(bv),
        std::string(name) + ": shape mismatch " + av.shape_str() + " vs " + bv.shape_str());

  const Tensor& big = b_scalar ? av : bv;
  Tensor out(big.shape());
  const int64_t n = out.numel();
  const double* pa = av.data();
  const double* pb = bv.data();
  double* po = out.data();
  for (int64_t i = 0; i < n; ++i) {
    double x = pa[a_scalar ? 0 : i];
    double y = pb[b_scalar ? 0 : i];
    switch (kind) {
      case BinKind::kAdd: po[i] = x + y; break;
      case BinKind::kSub: po[i] = x - y; break;
      case BinKind::kMul: po[i] = x * y; break;
      case BinKind::kDiv: po[i] = x / y; break;
    }
  }

  return make_op(name, std::move(out), {a, b}, [kind, a_scalar, b_scalar](Node& self) {
    const Tensor& g = self.grad;
    Node& na = *self.parents[0];
    Node& nb = *self.parents[1];
    const double* pa = na.value.data();
    const double* pb = nb.value.data();
    const double* pg = g.data();
    const int64_t n = g.numel();

    auto accumulate = [&](Node& target, bool is_scalar, auto dfn) {
      if (!target.requires_grad) return;
      if (is_scalar) {
        double s = 0.0;
        for (int64_t i = 0; i < n; ++i) s += dfn(i) * pg[i];
        target.add_grad_scalar(s);
      } else {
        Tensor t(g.shape());
        double* pt = t.data();
        for (int64_t i = 0; i < n; ++i) pt[i] = dfn(i) * pg[i];
        target.add_grad(t);
      }
    };

    auto xa = [&](int64_t i) { return pa[a_scalar ? 0 : i]; };
    auto xb = [&](int64_t i) { return pb[b_scalar ? 0 : i]; };

    switch (kind) {
      case BinKind::kAdd:
        accumulate(na, a_scalar, [&](int64_t) { return 1.0; });
        accumulate(nb, b_scalar, [&](int64_t) { return 1.0; });
        break;
      case BinKind::kSub:
        accumulate(na, a_scalar, [&](int64_t) { return 1.0; });
        accumulate(nb, b_scalar, [&](int64_t) { return -1.0; });
        break;
      case BinKind::kMul:
        accumulate(na, a_scalar, [&](int64_t i) { return xb(i); });
        accumulate(nb, b_scalar, [&](int64_t i) { return xa(i); });
        break;
      case BinKind::kDiv:
        accumulate(na, a_scalar, [&](int64_t i) { return 1.0 / xb(i); });
        accumulate(nb, b_scalar, [&](int64_t i) { return -xa(i) / (xb(i) * xb(i)); });
        break;
    }
  });
}

// Unary elementwise op: fwd(x) and dfdx(x, y) where y = fwd(x).
template <typename F, typename DF>
Var unary_op(const char* name, const Var& a, F fwd, DF dfdx) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  const double* pa = av.data();
  double* po = out.data();
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = fwd(pa[i]);

  Tensor saved = out;  // many derivatives are cheaper in terms of the output
  return make_op(name, std::move(out), {a}, [saved, dfdx](Node& self) {
    Node& na = *self.parents[0];
    if (!na.requires_grad) return;
    const double* pa = na.value.data();
    const double* py = saved.data();
    const double* pg = self.grad.data();
    Tensor t(self.grad.shape());
    double* pt = t.data();
    for (int64_t i = 0, n = t.numel(); i < n; ++i) pt[i] = dfdx(pa[i], py[i]) * pg[i];
    na.add_grad(t);
  });
}

}  // namespace

Var operator+(const Var& a, const Var& b) { return binary_op("add", a, b, BinKind::kAdd); }
Var operator-(const Var& a, const Var& b) { return binary_op("sub", a, b, BinKind::kSub); }
Var operator*(const Var& a, const Var& b) { return binary_op("mul", a, b, BinKind::kMul); }
Var operator/(const Var& a, const Var& b) { return binary_op("div", a, b, BinKind::kDiv); }
Var operator-(const Var& a) { return a * -1.0; }
Var operator+(const Var& a, double b) { return a + Var::scalar(b); }
Var operator+(double a, const Var& b) { return Var::scalar(a) + b; }
Var operator-(const Var& a, double b) { return a - Var::scalar(b); }
Var operator-(double a, const Var& b) { return Var::scalar(a) - b; }
Var operator*(const Var& a, double b) { return a * Var::scalar(b); }
Var operator*(double a, const Var& b) { return Var::scalar(a) * b; }
Var operator/(const Var& a, double b) { return a / Var::scalar(b); }
Var operator/(double a, const Var& b) { return Var::scalar(a) / b; }

Var abs(const Var& a) {
  return unary_op("abs", a, [](double x) { return std::fabs(x); },
                  [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var log(const Var& a) {
  return unary_op("log", a, [](double x) { return std::log(x); },
                  [](double x, double) { return 1.0 / x; });
}

Var exp(const Var& a) {
  return unary_op("exp", a, [](double x) { return std::exp(x); },
                  [](double, double y) { return y; });
}

Var sqrt(const Var& a) {
  return unary_op("sqrt", a, [](double x) { return std::sqrt(x); },
                  [](double, double y) { return 0.5 / y; });
}

Var square(const Var& a) {
  return unary_op("square", a, [](double x) { return x * x; },
                  [](double x, double) { return 2.0 * x; });
}

Var sigmoid(const Var& a) {
  return unary_op("sigmoid", a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                  [](double, double y) { return y * (1.0 - y); });
}

Var elu(const Var& a) {
  return unary_op("elu", a, [](double x) { return x > 0.0 ? x : std::expm1(x); },
                  [](double x, double y) { return x > 0.0 ? 1.0 : y + 1.0; });
}

Var relu(const Var& a) {
  return unary_op("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
                  [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var clamp(const Var& a, double lo, double hi) {
  check(lo < hi, "clamp: lo must be < hi");
  return unary_op("clamp", a,
                  [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
                  [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Var minimum(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  check(av.same_shape(bv), "minimum: shape mismatch");
  Tensor out(av.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = av[i] <= bv[i] ? av[i] : bv[i];
  return make_op("minimum", std::move(out), {a, b}, [](Node& self) {
    Node& na = *self.parents[0];
    Node& nb = *self.parents[1];
    const int64_t n = self.grad.numel();
    if (na.requires_grad) {
      Tensor t(self.grad.shape());
      for (int64_t i = 0; i < n; ++i)
        t[i] = na.value[i] <= nb.value[i] ? self.grad[i] : 0.0;
      na.add_grad(t);
    }
    if (nb.requires_grad) {
      Tensor t(self.grad.shape());
      for (int64_t i = 0; i < n; ++i)
        t[i] = na.value[i] <= nb.value[i] ? 0.0 : self.grad[i];
      nb.add_grad(t);
    }
  });
}

Var sum(const Var& a) {
  Tensor out = Tensor::scalar(a.value().sum());
  return make_op("sum", std::move(out), {a}, [](Node& self) {
    Node& na = *self.parents[0];
    if (!na.requires_grad) return;
    Tensor t(na.value.shape(), self.grad[0]);
    na.add_grad(t);
  });
}

Var mean(const Var& a) { return sum(a) / static_cast<double>(a.numel()); }

Var reshape(const Var& a, std::vector<int64_t> shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return make_op("reshape", std::move(out), {a}, [](Node& self) {
    Node& na = *self.parents[0];
    if (!na.requires_grad) return;
    na.add_grad(self.grad.reshaped(na.value.shape()));
  });
}

Var channel_mean(const Var& a) {
  const Tensor& av = a.value();
  check(av.rank() == 3, "channel_mean: expected [C,H,W]");
  const int64_t c = av.dim(0), h = av.dim(1), w = av.dim(2), hw = h * w;
  Tensor out({h, w});
  for (int64_t k = 0; k < c; ++k)
    for (int64_t i = 0; i < hw; ++i) out[i] += av[k * hw + i];
  const double inv = 1.0 / static_cast<double>(c);
  for (int64_t i = 0; i < hw; ++i) out[i] *= inv;
  return make_op("channel_mean", std::move(out), {a}, [c, hw, inv](Node& self) {
    Node& na = *self.parents[0];
    if (!na.requires_grad) return;
    Tensor t(na.value.shape());
    for (int64_t k = 0; k < c; ++k)
      for (int64_t i = 0; i < hw; ++i) t[k * hw + i] = self.grad[i] * inv;
    na.add_grad(t);
  });
}

}  // namespace md
