#pragma once

// Differentiable tensor operations. Every op records itself on the calling
// thread's tape when an input requires grad.
//
// Broadcasting: the two operands of a binary op must either have equal shapes,
// or one operand's shape (after dropping its leading size-1 axes) must equal a
// trailing suffix of the other's. The smaller operand is repeated over the
// leading axes of the larger one; nothing else is broadcast.

#include <vector>

#include "shotfuse/tensor.hpp"

namespace shotfuse {

template <class T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);

template <class T> Tensor<T> add_scalar(const Tensor<T>& x, T c);
template <class T> Tensor<T> mul_scalar(const Tensor<T>& x, T c);
template <class T> Tensor<T> neg(const Tensor<T>& x);

template <class T> Tensor<T> exp(const Tensor<T>& x);
/// Throws DomainError on any non-positive element.
template <class T> Tensor<T> log(const Tensor<T>& x);
template <class T> Tensor<T> tanh(const Tensor<T>& x);
/// Elementwise x^p. Non-integer p requires x > 0; negative integer p requires x != 0.
template <class T> Tensor<T> pow(const Tensor<T>& x, T p);
template <class T> Tensor<T> sqrt(const Tensor<T>& x);

template <class T> Tensor<T> sigmoid(const Tensor<T>& x);
template <class T> Tensor<T> relu(const Tensor<T>& x);
template <class T> Tensor<T> leaky_relu(const Tensor<T>& x, T negative_slope);
/// x * sigmoid(x)
template <class T> Tensor<T> swish(const Tensor<T>& x);

/// [M,K]x[K,N] -> [M,N]; [M,K]x[K] -> [M]; [K]x[K,N] -> [N].
template <class T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// [M,K] x [N,K]^T -> [M,N]
template <class T> Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);

template <class T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);
/// Stacks equal-shape tensors along a new leading axis.
template <class T> Tensor<T> stack(const std::vector<Tensor<T>>& parts);
/// Half-open range [begin, end) along `axis`.
template <class T> Tensor<T> slice(const Tensor<T>& x, int axis, std::size_t begin, std::size_t end);
template <class T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
/// Two-dimensional transpose.
template <class T> Tensor<T> transpose(const Tensor<T>& x);
template <class T> Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& order);

template <class T> Tensor<T> sum(const Tensor<T>& x);
template <class T> Tensor<T> sum(const Tensor<T>& x, int axis, bool keepdim = false);
template <class T> Tensor<T> mean(const Tensor<T>& x);
template <class T> Tensor<T> mean(const Tensor<T>& x, int axis, bool keepdim = false);

/// Max-shifted softmax along `axis`.
template <class T> Tensor<T> softmax(const Tensor<T>& x, int axis);
template <class T> Tensor<T> log_softmax(const Tensor<T>& x, int axis);

/// Elementwise arithmetic mean of a nonempty list of equal-shape tensors.
template <class T> Tensor<T> mean_pool(const std::vector<Tensor<T>>& items);

}  // namespace shotfuse
