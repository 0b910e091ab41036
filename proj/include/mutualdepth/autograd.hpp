#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "mutualdepth/tensor.hpp"

namespace md {

// Reverse-mode autodiff over fp64 tensors. Nodes own their value and (lazily)
// their gradient; children hold shared_ptrs to parents, so releasing the root
// of a step's graph frees everything except persistent leaves (parameters).

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  bool has_grad = false;
  const char* op = "leaf";
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward_fn;

  void add_grad(const Tensor& g);
  void add_grad_scalar(double g);
  void clear_grad();
};

class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : node_(std::move(n)) {}

  static Var leaf(Tensor value, bool requires_grad = false);
  static Var constant(Tensor value) { return leaf(std::move(value), false); }
  static Var scalar(double v) { return constant(Tensor::scalar(v)); }

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  bool has_grad() const { return node_->has_grad; }
  bool requires_grad() const { return node_->requires_grad; }
  const NodePtr& node() const { return node_; }

  const std::vector<int64_t>& shape() const { return node_->value.shape(); }
  int64_t numel() const { return node_->value.numel(); }
  double item() const {
    check(numel() == 1, "Var::item: tensor is not scalar");
    return node_->value[0];
  }

  Var detach() const { return constant(node_->value); }
  void clear_grad() { node_->clear_grad(); }

 private:
  NodePtr node_;
};

// Builds a graph node. If no parent requires a gradient the parents and the
// backward closure are dropped, pruning dead subgraphs eagerly.
Var make_op(const char* name, Tensor value, std::vector<Var> parents,
            std::function<void(Node&)> backward);

// Accumulates gradients of a scalar root into every reachable requires_grad
// node. Does not clear previous gradients.
void backward(const Var& root);

// --- elementwise arithmetic (shapes must match, or one side scalar) ---
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
Var operator+(const Var& a, double b);
Var operator+(double a, const Var& b);
Var operator-(const Var& a, double b);
Var operator-(double a, const Var& b);
Var operator*(const Var& a, double b);
Var operator*(double a, const Var& b);
Var operator/(const Var& a, double b);
Var operator/(double a, const Var& b);

Var abs(const Var& a);          // subgradient 0 at the kink
Var log(const Var& a);
Var exp(const Var& a);
Var sqrt(const Var& a);
Var square(const Var& a);
Var sigmoid(const Var& a);
Var elu(const Var& a);
Var relu(const Var& a);
Var clamp(const Var& a, double lo, double hi);  // zero gradient outside [lo,hi]
Var minimum(const Var& a, const Var& b);        // ties route the gradient to a

Var sum(const Var& a);
Var mean(const Var& a);
Var reshape(const Var& a, std::vector<int64_t> shape);
Var channel_mean(const Var& a);  // [C,H,W] -> [H,W]

}  // namespace md
