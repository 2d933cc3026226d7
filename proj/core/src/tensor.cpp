#include "gir/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace gir {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad) {
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->data.assign(shape_numel(node_->shape), fill);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != data.size())
    throw std::invalid_argument("tensor: shape " + shape_str(shape) +
                                " does not match data length " +
                                std::to_string(data.size()));
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

double Tensor::item() const {
  if (size() != 1)
    throw std::invalid_argument("item(): tensor has " +
                                std::to_string(size()) + " elements");
  return node_->data[0];
}

Tensor Tensor::wrap(std::shared_ptr<detail::Node> n) {
  Tensor t;
  t.node_ = std::move(n);
  return t;
}

Tensor Tensor::detach() const {
  Tensor t;
  t.node_ = std::make_shared<detail::Node>();
  t.node_->shape = node_->shape;
  t.node_->data = node_->data;
  return t;
}

void Tensor::backward() const {
  if (!node_) throw std::invalid_argument("backward(): undefined tensor");
  if (size() != 1)
    throw std::invalid_argument("backward(): loss must be scalar, got " +
                                shape_str(shape()));

  // Post-order topological sort, iterative to survive deep graphs.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  struct Frame {
    detail::Node* n;
    std::size_t next_child;
  };
  std::vector<Frame> stack;
  if (seen.insert(node_.get()).second) stack.push_back({node_.get(), 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_child < f.n->parents.size()) {
      detail::Node* child = f.n->parents[f.next_child++].get();
      if (seen.insert(child).second) stack.push_back({child, 0});
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }

  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

std::uint64_t Rng::next_u64() {
  // splitmix64
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  double u1 = uniform();
  double u2 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
}

}  // namespace gir
