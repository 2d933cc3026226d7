#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace gir {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

/// N-dimensional row-major array of doubles with an optional gradient slot.
/// Cheap to copy: a Tensor is a shared handle to its storage node. Data is
/// treated as immutable once it has entered a recorded computation; the grad
/// buffer is the only part mutated afterwards.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape[i]; }
  std::size_t size() const { return node_->data.size(); }

  std::vector<double>& data() { return node_->data; }
  const std::vector<double>& data() const { return node_->data; }
  double& operator[](std::size_t i) { return node_->data[i]; }
  double operator[](std::size_t i) const { return node_->data[i]; }

  // 2-D / 3-D element access (row-major; for 3-D the layout is C,H,W).
  double& at(std::size_t i, std::size_t j) {
    return node_->data[i * node_->shape[1] + j];
  }
  double at(std::size_t i, std::size_t j) const {
    return node_->data[i * node_->shape[1] + j];
  }
  double& at(std::size_t c, std::size_t i, std::size_t j) {
    return node_->data[(c * node_->shape[1] + i) * node_->shape[2] + j];
  }
  double at(std::size_t c, std::size_t i, std::size_t j) const {
    return node_->data[(c * node_->shape[1] + i) * node_->shape[2] + j];
  }

  double item() const;  // single-element tensors only

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }

  /// Gradient buffer, allocated (zeroed) on first access. Mutable through
  /// const handles: a Tensor is a shared reference to its storage node.
  std::vector<double>& grad() const {
    node_->ensure_grad();
    return node_->grad;
  }
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  void zero_grad() {
    if (node_) node_->grad.assign(node_->data.size(), 0.0);
  }

  /// Reverse-mode sweep from a scalar. Accumulates into every reachable
  /// grad-requiring tensor's grad buffer.
  void backward() const;

  /// Same data, detached from the recorded graph.
  Tensor detach() const;

  std::shared_ptr<detail::Node> node() const { return node_; }
  static Tensor wrap(std::shared_ptr<detail::Node> n);

 private:
  std::shared_ptr<detail::Node> node_;
};

/// A named, grad-requiring tensor registered with a network.
struct Parameter {
  std::string name;
  Tensor value;
};

/// Counter-based deterministic generator (splitmix64 core). Identical seed
/// produces an identical stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);
  /// Standard normal (Box-Muller on counter draws).
  double normal();

 private:
  std::uint64_t state_;
};

}  // namespace gir
