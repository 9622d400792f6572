#include "shotfuse/tensor.hpp"

#include <cmath>
#include <sstream>

namespace shotfuse {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

template <class T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <class T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->data.assign(shape_numel(shape), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <class T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return full({}, value, requires_grad);
}

template <class T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values, bool requires_grad) {
  if (shape_numel(shape) != values.size())
    throw DimensionError("tensor shape " + shape_str(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <class T>
std::size_t Tensor<T>::dim(int axis) const {
  const int nd = static_cast<int>(ndim());
  const int a = axis < 0 ? axis + nd : axis;
  if (a < 0 || a >= nd)
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(shape()));
  return node_->shape[static_cast<std::size_t>(a)];
}

template <class T>
T Tensor<T>::item() const {
  if (numel() != 1)
    throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

template <class T>
T Tensor<T>::at(std::initializer_list<std::size_t> index) const {
  if (index.size() != ndim()) throw DimensionError("index rank does not match " + shape_str(shape()));
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= node_->shape[axis]) throw DimensionError("index out of range for " + shape_str(shape()));
    flat = flat * node_->shape[axis] + i;
    ++axis;
  }
  return node_->data[flat];
}

template <class T>
void Tensor<T>::set_requires_grad(bool on) {
  node_->requires_grad = on;
  if (!on) node_->grad.clear();
}

template <class T>
void Tensor<T>::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <class T>
Tensor<T> Tensor<T>::detach() const {
  return from(shape(), node_->data, false);
}

// ---------------------------------------------------------------------------

template <class T>
Tape<T>& Tape<T>::current() {
  thread_local Tape tape;
  return tape;
}

template <class T>
void Tape<T>::record(const char* op, std::vector<std::shared_ptr<TensorNode<T>>> inputs,
                     std::shared_ptr<TensorNode<T>> output, BackwardFn<T> backward) {
  records_.push_back({op, std::move(inputs), std::move(output), std::move(backward)});
}

template <class T>
void Tape<T>::reset() {
  records_.clear();
  consumed_ = false;
}

template <class T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw ContractError("backward requires a scalar loss, got shape " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  if (consumed_) throw ContractError("backward called twice on the same tape without reset");
  if (records_.empty()) throw ContractError("backward on an empty tape");
  if (!loss.requires_grad()) throw ContractError("loss does not depend on any requires-grad tensor");

  auto& root = *loss.node();
  root.ensure_grad();
  root.grad[0] += T(1);
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    const auto& out = *it->output;
    if (out.grad.empty()) continue;
    for (auto& in : it->inputs)
      if (in->requires_grad) in->ensure_grad();
    it->backward(out);
  }
  consumed_ = true;
}

template <class T>
std::vector<std::string> Tape<T>::op_names() const {
  std::vector<std::string> names;
  names.reserve(records_.size());
  for (const auto& r : records_) names.emplace_back(r.op);
  return names;
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

namespace detail {

template <class T>
void check_finite(const char* op, std::span<const T> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      std::ostringstream os;
      os << op << ": non-finite value " << values[i] << " at flat index " << i;
      throw NumericError(os.str());
    }
  }
}

template <class T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> values,
                      std::vector<std::shared_ptr<TensorNode<T>>> inputs, BackwardFn<T> backward) {
  check_finite<T>(op, values);
  auto node = std::make_shared<TensorNode<T>>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  bool needs = false;
  if (grad_enabled())
    for (const auto& in : inputs) needs = needs || in->requires_grad;
  if (needs) {
    node->requires_grad = true;
    Tape<T>::current().record(op, std::move(inputs), node, std::move(backward));
  }
  return Tensor<T>(std::move(node));
}

template void check_finite<float>(const char*, std::span<const float>);
template void check_finite<double>(const char*, std::span<const double>);
template Tensor<float> make_result<float>(const char*, Shape, std::vector<float>,
                                          std::vector<std::shared_ptr<TensorNode<float>>>,
                                          BackwardFn<float>);
template Tensor<double> make_result<double>(const char*, Shape, std::vector<double>,
                                            std::vector<std::shared_ptr<TensorNode<double>>>,
                                            BackwardFn<double>);

}  // namespace detail

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace shotfuse
