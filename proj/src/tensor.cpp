#include "revsum/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "revsum/errors.hpp"

namespace revsum {

namespace {
thread_local bool t_grad_enabled = true;
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::vector<double>& detail::Node::ensure_grad() {
  if (grad.empty()) grad.assign(values.size(), 0.0);
  return grad;
}

Tensor::Tensor() : node_(std::make_shared<detail::Node>()) {
  node_->shape = {0};
}

Tensor::Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return filled(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  auto n = shape_size(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  if (shape_size(shape) != values.size()) {
    throw ShapeError("shape " + shape_string(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  Shape shape{values.size()};
  return from(std::move(shape), std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values, bool requires_grad) {
  return from({rows, cols}, std::move(values), requires_grad);
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     shape_string(shape()));
  }
  return node_->shape[axis];
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows() on " + shape_string(shape()));
  return node_->shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols() on " + shape_string(shape()));
  return node_->shape[1];
}

double Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("item() on non-scalar " + shape_string(shape()));
  }
  return node_->values[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  return node_->values[row * cols() + col];
}

void Tensor::set_requires_grad(bool flag) { node_->requires_grad = flag; }

std::span<double> Tensor::mutable_grad() { return node_->ensure_grad(); }

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  return from(node_->shape, node_->values, false);
}

Tensor Tensor::make_result(Shape shape, std::vector<double> values,
                           std::vector<Tensor> inputs,
                           std::function<void(detail::Node&)> backward) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  if (t_grad_enabled) {
    bool tracked = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) {
      return t.requires_grad();
    });
    if (tracked) {
      node->requires_grad = true;
      node->parents.reserve(inputs.size());
      for (auto& input : inputs) node->parents.push_back(input.node_);
      node->backward = std::move(backward);
    }
  }
  return Tensor(std::move(node));
}

Tape Tape::record(const Tensor& root) {
  Tape tape;
  tape.root_ = root.node_;
  if (!root.requires_grad()) return tape;
  std::unordered_set<const detail::Node*> visited{root.node_.get()};
  std::vector<std::shared_ptr<detail::Node>> order;
  // Iterative post-order DFS yields a topological order.
  std::vector<std::shared_ptr<detail::Node>> node_stack{root.node_};
  std::vector<std::size_t> child_stack{0};
  while (!node_stack.empty()) {
    auto& current = node_stack.back();
    auto& child = child_stack.back();
    if (child < current->parents.size()) {
      auto next = current->parents[child++];
      if (next->requires_grad && visited.insert(next.get()).second) {
        node_stack.push_back(std::move(next));
        child_stack.push_back(0);
      }
    } else {
      order.push_back(std::move(current));
      node_stack.pop_back();
      child_stack.pop_back();
    }
  }
  tape.nodes_ = std::move(order);
  return tape;
}

void Tape::run_backward() {
  if (nodes_.empty()) return;
  for (auto& node : nodes_) {
    if (!node->is_leaf()) node->grad.assign(node->values.size(), 0.0);
  }
  auto& seed = root_->ensure_grad();
  for (auto& g : seed) g += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    auto& node = **it;
    if (node.backward) node.backward(node);
  }
}

void backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ShapeError("backward requires a scalar loss, got " +
                     shape_string(loss.shape()));
  }
  Tape::record(loss).run_backward();
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) {
  t_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

}  // namespace revsum
