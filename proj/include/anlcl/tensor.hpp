#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <vector>

#include "anlcl/error.hpp"

namespace anlcl {

template <typename T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using ArrX = Eigen::Array<T, Eigen::Dynamic, 1>;
template <typename T>
using ArrXXr = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense planar (channel, row, col) tensor. Used both for images in [0,1]
// and for network feature maps.
template <typename T>
class Tensor {
 public:
  using Scalar = T;

  Tensor() = default;
  Tensor(int channels, int height, int width)
      : c_(channels), h_(height), w_(width), data_(std::size_t(channels) * height * width, T(0)) {
    if (channels < 0 || height < 0 || width < 0)
      throw Error(ErrorKind::dimension, "negative tensor extent");
  }

  static Tensor constant(int c, int h, int w, T v) {
    Tensor t(c, h, w);
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  int channels() const { return c_; }
  int height() const { return h_; }
  int width() const { return w_; }
  std::int64_t size() const { return std::int64_t(c_) * h_ * w_; }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator()(int c, int y, int x) { return data_[(std::size_t(c) * h_ + y) * w_ + x]; }
  const T& operator()(int c, int y, int x) const { return data_[(std::size_t(c) * h_ + y) * w_ + x]; }

  Eigen::Map<ArrXXr<T>> channel(int c) { return {data() + std::size_t(c) * h_ * w_, h_, w_}; }
  Eigen::Map<const ArrXXr<T>> channel(int c) const { return {data() + std::size_t(c) * h_ * w_, h_, w_}; }

  Eigen::Map<ArrX<T>> flat() { return {data(), Eigen::Index(data_.size())}; }
  Eigen::Map<const ArrX<T>> flat() const { return {data(), Eigen::Index(data_.size())}; }

  bool same_shape(const Tensor& o) const { return c_ == o.c_ && h_ == o.h_ && w_ == o.w_; }

  void set_zero() { std::fill(data_.begin(), data_.end(), T(0)); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(c_, h_, w_);
    for (std::size_t i = 0; i < data_.size(); ++i) out.data()[i] = U(data_[i]);
    return out;
  }

 private:
  int c_ = 0, h_ = 0, w_ = 0;
  std::vector<T> data_;
};

using Image = Tensor<float>;

template <typename T>
void clip01_inplace(Tensor<T>& t) {
  t.flat() = t.flat().cwiseMax(T(0)).cwiseMin(T(1));
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (!a.same_shape(b)) throw Error(ErrorKind::dimension, std::string(what) + ": shape mismatch");
}

}  // namespace anlcl
