#pragma once

#include <memory>
#include <string>
#include <vector>

#include "shotfuse/tensor.hpp"

namespace shotfuse::detail {

template <class T>
using NodePtr = std::shared_ptr<TensorNode<T>>;

inline std::size_t normalize_axis(int axis, std::size_t ndim, const Shape& shape) {
  const int nd = static_cast<int>(ndim);
  const int a = axis < 0 ? axis + nd : axis;
  if (a < 0 || a >= nd)
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(shape));
  return static_cast<std::size_t>(a);
}

/// Shape viewed as [outer, extent, inner] around one axis.
struct AxisView {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

inline AxisView axis_view(const Shape& shape, std::size_t axis) {
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

inline void require_same_shape(const char* op, const Shape& a, const Shape& b) {
  if (a != b)
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
}

}  // namespace shotfuse::detail
