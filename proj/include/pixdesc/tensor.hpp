#pragma once

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "pixdesc/common.hpp"

namespace pixdesc {

// Dense row-major tensor. float in training, double for gradient checks.
template <class S>
struct TensorT {
  std::vector<int> shape;
  std::vector<S> data;

  TensorT() = default;
  explicit TensorT(std::vector<int> sh, S fill = S(0))
      : shape(std::move(sh)), data(count(shape), fill) {}

  static std::size_t count(const std::vector<int>& sh) {
    std::size_t n = 1;
    for (int d : sh) n *= std::size_t(d);
    return n;
  }

  static TensorT zeros(std::vector<int> sh) { return TensorT(std::move(sh)); }

  std::size_t size() const { return data.size(); }
  int rank() const { return int(shape.size()); }
  int dim(int i) const { return shape[std::size_t(i)]; }

  S* ptr() { return data.data(); }
  const S* ptr() const { return data.data(); }

  // (row, col) access for rank-2, (y, x, c) for rank-3.
  S& at2(int r, int c) { return data[std::size_t(r) * shape[1] + c]; }
  S at2(int r, int c) const { return data[std::size_t(r) * shape[1] + c]; }
  S& at3(int y, int x, int c) {
    return data[(std::size_t(y) * shape[1] + x) * shape[2] + c];
  }
  S at3(int y, int x, int c) const {
    return data[(std::size_t(y) * shape[1] + x) * shape[2] + c];
  }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  template <class T>
  TensorT<T> cast() const {
    TensorT<T> out;
    out.shape = shape;
    out.data.assign(data.begin(), data.end());
    return out;
  }

  bool operator==(const TensorT&) const = default;
};

using TensorF = TensorT<float>;
using TensorD = TensorT<double>;

template <class S>
std::string shape_str(const TensorT<S>& t) {
  std::string s = "(";
  for (std::size_t i = 0; i < t.shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(t.shape[i]);
  }
  return s + ")";
}

}  // namespace pixdesc
