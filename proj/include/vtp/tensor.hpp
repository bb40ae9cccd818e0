#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace vtp {

using Shape = std::vector<int>;

inline std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("shape dims must be positive");
    n *= d;
  }
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i)
    s += (i ? "," : "") + std::to_string(shape[i]);
  return s + ")";
}

namespace detail {
struct TensorNode {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // lazily sized; kept across steps for parameters
  bool requires_grad = false;
};
}  // namespace detail

/// Shared handle to a dense double tensor. Copies alias the same storage;
/// the token embedding / output projection weight tying relies on that.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return Tensor(std::move(shape), {}, requires_grad, true);
  }
  static Tensor from_values(Shape shape, std::vector<double> values,
                            bool requires_grad = false) {
    return Tensor(std::move(shape), std::move(values), requires_grad, false);
  }
  static Tensor scalar(double v) { return from_values({1}, {v}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::int64_t numel() const {
    return static_cast<std::int64_t>(node_->values.size());
  }
  std::vector<double>& values() { return node_->values; }
  const std::vector<double>& values() const { return node_->values; }
  double item() const {
    if (numel() != 1) throw std::logic_error("item() on non-scalar tensor");
    return node_->values[0];
  }

  bool requires_grad() const { return node_->requires_grad; }

  /// Gradient buffer, allocated as zeros on first touch.
  std::vector<double>& grad() {
    if (node_->grad.size() != node_->values.size())
      node_->grad.assign(node_->values.size(), 0.0);
    return node_->grad;
  }
  void zero_grad() { node_->grad.assign(node_->values.size(), 0.0); }

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

 private:
  Tensor(Shape shape, std::vector<double> values, bool requires_grad,
         bool fill_zero)
      : node_(std::make_shared<detail::TensorNode>()) {
    const std::int64_t n = shape_numel(shape);
    node_->shape = std::move(shape);
    if (fill_zero) {
      node_->values.assign(static_cast<std::size_t>(n), 0.0);
    } else {
      if (static_cast<std::int64_t>(values.size()) != n)
        throw std::invalid_argument("value count does not match shape " +
                                    shape_str(node_->shape));
      node_->values = std::move(values);
    }
    node_->requires_grad = requires_grad;
  }

  std::shared_ptr<detail::TensorNode> node_;
};

/// Ordered record of backward closures. Ops append during the forward pass;
/// backward() runs them once, in reverse. Recording can be switched off for
/// value-only evaluation (finite differences, inference).
class Tape {
 public:
  void record(std::function<void()> backward_fn) {
    if (recording_) records_.push_back(std::move(backward_fn));
  }
  bool recording() const { return recording_; }
  void set_recording(bool on) { recording_ = on; }
  std::size_t size() const { return records_.size(); }
  void clear() { records_.clear(); }

  /// Seeds d(loss)/d(loss) = 1 and propagates through the recorded ops.
  void backward(Tensor loss) {
    if (loss.numel() != 1)
      throw std::invalid_argument("backward requires a scalar loss, got " +
                                  shape_str(loss.shape()));
    loss.grad()[0] += 1.0;
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
  }

 private:
  std::vector<std::function<void()>> records_;
  bool recording_ = true;
};

}  // namespace vtp
