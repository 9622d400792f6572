#pragma once

// Dense row-major tensors with a per-thread dynamic tape for reverse-mode
// differentiation. The tape is rebuilt every forward pass; `backward` walks it
// in strict reverse execution order and may run once per `reset`.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "shotfuse/errors.hpp"

namespace shotfuse {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <class T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until materialized
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
};

template <class T>
class Tensor {
 public:
  using value_type = T;
  using Node = TensorNode<T>;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t ndim() const { return node_->shape.size(); }
  /// Extent of axis `axis`; negative values count from the back.
  std::size_t dim(int axis) const;
  std::size_t numel() const { return node_->data.size(); }

  std::span<const T> data() const { return node_->data; }
  std::span<T> mutable_data() { return node_->data; }
  T item() const;
  T at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on);
  bool has_grad() const { return node_->grad.size() == node_->data.size() && !node_->data.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad();

  /// Copy of the values with no tape history.
  Tensor detach() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Propagates the upstream gradient of an op output into its inputs.
template <class T>
using BackwardFn = std::function<void(const TensorNode<T>& out)>;

template <class T>
class Tape {
 public:
  struct Record {
    const char* op;
    std::vector<std::shared_ptr<TensorNode<T>>> inputs;
    std::shared_ptr<TensorNode<T>> output;
    BackwardFn<T> backward;
  };

  /// Tape of the calling thread.
  static Tape& current();

  void record(const char* op, std::vector<std::shared_ptr<TensorNode<T>>> inputs,
              std::shared_ptr<TensorNode<T>> output, BackwardFn<T> backward);

  /// Drops all records and re-arms `backward`.
  void reset();

  /// Populates gradients of every requires-grad tensor that `loss` depends on.
  /// `loss` must be a one-element tensor produced on this tape.
  void backward(const Tensor<T>& loss);

  std::size_t size() const { return records_.size(); }
  bool consumed() const { return consumed_; }
  /// Op names in execution order.
  std::vector<std::string> op_names() const;

 private:
  std::vector<Record> records_;
  bool consumed_ = false;
};

template <class T>
void backward(const Tensor<T>& loss) {
  Tape<T>::current().backward(loss);
}

template <class T>
void reset_tape() {
  Tape<T>::current().reset();
}

/// Whether new ops are recorded on the tape (per thread).
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {

/// Wraps freshly computed values as an op output: validates finiteness,
/// and records `backward` when any input requires grad.
template <class T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> values,
                      std::vector<std::shared_ptr<TensorNode<T>>> inputs, BackwardFn<T> backward);

template <class T>
void check_finite(const char* op, std::span<const T> values);

}  // namespace detail

}  // namespace shotfuse
