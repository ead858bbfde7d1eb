#pragma once

#include <any>
#include <memory>
#include <string>
#include <vector>

#include "anlcl/rng.hpp"
#include "anlcl/tensor.hpp"

namespace anlcl::nn {

template <typename T>
struct ParamRef {
  std::string name;
  MatX<T>* value;
  MatX<T>* grad;
};

template <typename T>
using ParamSet = std::vector<ParamRef<T>>;

template <typename T>
void zero_grads(const ParamSet<T>& ps) {
  for (const auto& p : ps) p.grad->setZero();
}

template <typename T>
std::int64_t param_count(const ParamSet<T>& ps) {
  std::int64_t n = 0;
  for (const auto& p : ps) n += p.value->size();
  return n;
}

template <typename T>
void check_finite(const ParamSet<T>& ps, const char* what) {
  for (const auto& p : ps)
    if (!p.value->allFinite())
      throw Error(ErrorKind::numeric, std::string(what) + ": non-finite parameter in " + p.name);
}

namespace detail {

inline int conv_out(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

// Patch matrix with K = C*kh*kw rows and L = out_h*out_w columns; row index
// runs (c, ky, kx), column index runs (y, x) row-major. Zero padding.
template <typename T>
MatX<T> im2col(const Tensor<T>& x, int kh, int kw, int stride, int pad) {
  const int c_in = x.channels(), h = x.height(), w = x.width();
  const int oh = conv_out(h, kh, stride, pad), ow = conv_out(w, kw, stride, pad);
  MatX<T> cols = MatX<T>::Zero(std::int64_t(c_in) * kh * kw, std::int64_t(oh) * ow);
  for (int c = 0; c < c_in; ++c)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        const std::int64_t row = (std::int64_t(c) * kh + ky) * kw + kx;
        for (int oy = 0; oy < oh; ++oy) {
          const int sy = oy * stride - pad + ky;
          if (sy < 0 || sy >= h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int sx = ox * stride - pad + kx;
            if (sx < 0 || sx >= w) continue;
            cols(row, std::int64_t(oy) * ow + ox) = x(c, sy, sx);
          }
        }
      }
  return cols;
}

// Adjoint of im2col: scatter-adds columns back into an image tensor.
template <typename T>
void col2im_add(const MatX<T>& cols, Tensor<T>& x, int kh, int kw, int stride, int pad) {
  const int c_in = x.channels(), h = x.height(), w = x.width();
  const int oh = conv_out(h, kh, stride, pad), ow = conv_out(w, kw, stride, pad);
  for (int c = 0; c < c_in; ++c)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        const std::int64_t row = (std::int64_t(c) * kh + ky) * kw + kx;
        for (int oy = 0; oy < oh; ++oy) {
          const int sy = oy * stride - pad + ky;
          if (sy < 0 || sy >= h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int sx = ox * stride - pad + kx;
            if (sx < 0 || sx >= w) continue;
            x(c, sy, sx) += cols(row, std::int64_t(oy) * ow + ox);
          }
        }
      }
}

template <typename T>
MatX<T> tensor_as_rows(const Tensor<T>& t) {
  // (channels x H*W) copy out of the planar layout.
  MatX<T> m(t.channels(), std::int64_t(t.height()) * t.width());
  for (int c = 0; c < t.channels(); ++c)
    m.row(c) = Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(
        t.data() + std::int64_t(c) * t.height() * t.width(), m.cols());
  return m;
}

template <typename T>
Tensor<T> rows_as_tensor(const MatX<T>& m, int h, int w) {
  Tensor<T> t(int(m.rows()), h, w);
  for (int c = 0; c < m.rows(); ++c)
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(t.data() + std::int64_t(c) * h * w, m.cols()) =
        m.row(c);
  return t;
}

}  // namespace detail

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(const Tensor<T>& x, std::any& cache) const = 0;
  virtual Tensor<T> backward(const Tensor<T>& dy, std::any& cache) = 0;
  virtual void collect(ParamSet<T>& ps, const std::string& prefix) {}
  virtual const char* kind() const = 0;
};

template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(int in_c, int out_c, int k, int stride, int pad, Rng& rng)
      : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(pad) {
    const std::int64_t fan = std::int64_t(in_c) * k * k;
    w_.resize(out_c, fan);
    for (std::int64_t i = 0; i < w_.size(); ++i) w_.data()[i] = T(rng.normal() * 0.02);
    b_ = MatX<T>::Zero(out_c, 1);
    gw_ = MatX<T>::Zero(out_c, fan);
    gb_ = MatX<T>::Zero(out_c, 1);
  }

  Tensor<T> forward(const Tensor<T>& x, std::any& cache) const override {
    if (x.channels() != in_c_) throw Error(ErrorKind::dimension, "conv input channels mismatch");
    const int oh = detail::conv_out(x.height(), k_, stride_, pad_);
    const int ow = detail::conv_out(x.width(), k_, stride_, pad_);
    if (oh < 1 || ow < 1) throw Error(ErrorKind::dimension, "conv input too small");
    const MatX<T> cols = detail::im2col(x, k_, k_, stride_, pad_);
    MatX<T> y = w_ * cols;
    y.colwise() += b_.col(0);
    cache = x;  // im2col is recomputed in backward to keep live memory low
    return detail::rows_as_tensor(y, oh, ow);
  }

  Tensor<T> backward(const Tensor<T>& dy, std::any& cache) override {
    const Tensor<T>& x = *std::any_cast<Tensor<T>>(&cache);
    const MatX<T> cols = detail::im2col(x, k_, k_, stride_, pad_);
    const MatX<T> dyr = detail::tensor_as_rows(dy);
    gw_.noalias() += dyr * cols.transpose();
    gb_.col(0) += dyr.rowwise().sum();
    const MatX<T> dcols = w_.transpose() * dyr;
    Tensor<T> dx(in_c_, x.height(), x.width());
    detail::col2im_add(dcols, dx, k_, k_, stride_, pad_);
    return dx;
  }

  void collect(ParamSet<T>& ps, const std::string& prefix) override {
    ps.push_back({prefix + "/w", &w_, &gw_});
    ps.push_back({prefix + "/b", &b_, &gb_});
  }
  const char* kind() const override { return "conv"; }

 private:
  int in_c_, out_c_, k_, stride_, pad_;
  MatX<T> w_, b_, gw_, gb_;
};

// Fractional-stride convolution expressed through the mirror conv geometry:
// forward is the mirror conv's data-gradient, so out = (in-1)*s - 2p + k + op.
template <typename T>
class ConvTranspose2d final : public Layer<T> {
 public:
  ConvTranspose2d(int in_c, int out_c, int k, int stride, int pad, int out_pad, Rng& rng)
      : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(pad), out_pad_(out_pad) {
    const std::int64_t fan = std::int64_t(out_c) * k * k;
    w_.resize(in_c, fan);
    for (std::int64_t i = 0; i < w_.size(); ++i) w_.data()[i] = T(rng.normal() * 0.02);
    b_ = MatX<T>::Zero(out_c, 1);
    gw_ = MatX<T>::Zero(in_c, fan);
    gb_ = MatX<T>::Zero(out_c, 1);
  }

  Tensor<T> forward(const Tensor<T>& x, std::any& cache) const override {
    if (x.channels() != in_c_) throw Error(ErrorKind::dimension, "convT input channels mismatch");
    const int oh = (x.height() - 1) * stride_ - 2 * pad_ + k_ + out_pad_;
    const int ow = (x.width() - 1) * stride_ - 2 * pad_ + k_ + out_pad_;
    if (detail::conv_out(oh, k_, stride_, pad_) != x.height() ||
        detail::conv_out(ow, k_, stride_, pad_) != x.width())
      throw Error(ErrorKind::dimension, "convT geometry mismatch");
    const MatX<T> xr = detail::tensor_as_rows(x);
    const MatX<T> m = w_.transpose() * xr;  // (out_c*k*k) x (h*w)
    Tensor<T> y(out_c_, oh, ow);
    detail::col2im_add(m, y, k_, k_, stride_, pad_);
    for (int c = 0; c < out_c_; ++c) y.channel(c) += b_(c, 0);
    cache = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, std::any& cache) override {
    const Tensor<T>& x = *std::any_cast<Tensor<T>>(&cache);
    const MatX<T> dm = detail::im2col(dy, k_, k_, stride_, pad_);
    const MatX<T> xr = detail::tensor_as_rows(x);
    gw_.noalias() += xr * dm.transpose();
    for (int c = 0; c < out_c_; ++c) gb_(c, 0) += dy.channel(c).sum();
    const MatX<T> dxr = w_ * dm;
    return detail::rows_as_tensor(dxr, x.height(), x.width());
  }

  void collect(ParamSet<T>& ps, const std::string& prefix) override {
    ps.push_back({prefix + "/w", &w_, &gw_});
    ps.push_back({prefix + "/b", &b_, &gb_});
  }
  const char* kind() const override { return "convT"; }

 private:
  int in_c_, out_c_, k_, stride_, pad_, out_pad_;
  MatX<T> w_, b_, gw_, gb_;
};

template <typename T>
class InstanceNorm final : public Layer<T> {
 public:
  explicit InstanceNorm(int channels) : c_(channels) {
    gamma_ = MatX<T>::Ones(channels, 1);
    beta_ = MatX<T>::Zero(channels, 1);
    ggamma_ = MatX<T>::Zero(channels, 1);
    gbeta_ = MatX<T>::Zero(channels, 1);
  }

  struct Cache {
    Tensor<T> xhat;
    VecX<T> inv_std;
  };

  Tensor<T> forward(const Tensor<T>& x, std::any& cache) const override {
    if (x.channels() != c_) throw Error(ErrorKind::dimension, "instance norm channels mismatch");
    Cache cc;
    cc.xhat = Tensor<T>(x.channels(), x.height(), x.width());
    cc.inv_std.resize(c_);
    Tensor<T> y(x.channels(), x.height(), x.width());
    for (int c = 0; c < c_; ++c) {
      const auto xc = x.channel(c);
      const T mu = xc.mean();
      const T var = (xc - mu).square().mean();
      const T inv = T(1) / std::sqrt(var + T(1e-5));
      cc.inv_std[c] = inv;
      cc.xhat.channel(c) = (xc - mu) * inv;
      y.channel(c) = cc.xhat.channel(c) * gamma_(c, 0) + beta_(c, 0);
    }
    cache = std::move(cc);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, std::any& cache) override {
    const Cache& cc = *std::any_cast<Cache>(&cache);
    Tensor<T> dx(dy.channels(), dy.height(), dy.width());
    for (int c = 0; c < c_; ++c) {
      const auto dyc = dy.channel(c);
      const auto xh = cc.xhat.channel(c);
      ggamma_(c, 0) += (dyc * xh).sum();
      gbeta_(c, 0) += dyc.sum();
      const T g = gamma_(c, 0);
      const T mean_dxh = dyc.mean() * g;
      const T mean_dxh_xh = (dyc * xh).mean() * g;
      dx.channel(c) = cc.inv_std[c] * (dyc * g - mean_dxh - xh * mean_dxh_xh);
    }
    return dx;
  }

  void collect(ParamSet<T>& ps, const std::string& prefix) override {
    ps.push_back({prefix + "/gamma", &gamma_, &ggamma_});
    ps.push_back({prefix + "/beta", &beta_, &gbeta_});
  }
  const char* kind() const override { return "inorm"; }

 private:
  int c_;
  MatX<T> gamma_, beta_, ggamma_, gbeta_;
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, std::any& cache) const override {
    Tensor<T> y = x;
    y.flat() = y.flat().cwiseMax(T(0));
    cache = y;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy, std::any& cache) override {
    const Tensor<T>& y = *std::any_cast<Tensor<T>>(&cache);
    Tensor<T> dx = dy;
    for (std::int64_t i = 0; i < dx.size(); ++i)
      if (y.data()[i] <= 0) dx.data()[i] = 0;
    return dx;
  }
  const char* kind() const override { return "relu"; }
};

template <typename T>
class LeakyReLU final : public Layer<T> {
 public:
  explicit LeakyReLU(T slope) : slope_(slope) {}
  Tensor<T> forward(const Tensor<T>& x, std::any& cache) const override {
    Tensor<T> y = x;
    for (std::int64_t i = 0; i < y.size(); ++i)
      if (y.data()[i] < 0) y.data()[i] *= slope_;
    cache = y;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy, std::any& cache) override {
    const Tensor<T>& y = *std::any_cast<Tensor<T>>(&cache);
    Tensor<T> dx = dy;
    for (std::int64_t i = 0; i < dx.size(); ++i)
      if (y.data()[i] < 0) dx.data()[i] *= slope_;
    return dx;
  }
  const char* kind() const override { return "lrelu"; }

 private:
  T slope_;
};

// 0.5*(tanh(x)+1): squashing output activation onto [0,1].
template <typename T>
class Tanh01 final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, std::any& cache) const override {
    Tensor<T> y = x;
    y.flat() = (y.flat().tanh() + T(1)) * T(0.5);
    cache = y;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy, std::any& cache) override {
    const Tensor<T>& y = *std::any_cast<Tensor<T>>(&cache);
    Tensor<T> dx = dy;
    dx.flat() *= T(2) * y.flat() * (T(1) - y.flat());
    return dx;
  }
  const char* kind() const override { return "tanh01"; }
};

template <typename T>
class ReflectPad final : public Layer<T> {
 public:
  explicit ReflectPad(int pad) : pad_(pad) {}

  Tensor<T> forward(const Tensor<T>& x, std::any& cache) const override {
    const int h = x.height(), w = x.width();
    if (pad_ >= h || pad_ >= w) throw Error(ErrorKind::dimension, "reflect pad exceeds extent");
    Tensor<T> y(x.channels(), h + 2 * pad_, w + 2 * pad_);
    for (int c = 0; c < x.channels(); ++c)
      for (int yy = 0; yy < y.height(); ++yy) {
        const int sy = mirror(yy - pad_, h);
        for (int xx = 0; xx < y.width(); ++xx) y(c, yy, xx) = x(c, sy, mirror(xx - pad_, w));
      }
    cache = std::pair<int, int>(h, w);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, std::any& cache) override {
    const auto [h, w] = *std::any_cast<std::pair<int, int>>(&cache);
    Tensor<T> dx(dy.channels(), h, w);
    for (int c = 0; c < dy.channels(); ++c)
      for (int yy = 0; yy < dy.height(); ++yy) {
        const int sy = mirror(yy - pad_, h);
        for (int xx = 0; xx < dy.width(); ++xx) dx(c, sy, mirror(xx - pad_, w)) += dy(c, yy, xx);
      }
    return dx;
  }
  const char* kind() const override { return "rpad"; }

 private:
  static int mirror(int i, int n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
  }
  int pad_;
};

// Two 3x3 conv + instance norm stages with a skip connection.
template <typename T>
class ResidualBlock final : public Layer<T> {
 public:
  ResidualBlock(int channels, Rng& rng) {
    inner_.emplace_back(std::make_unique<ReflectPad<T>>(1));
    inner_.emplace_back(std::make_unique<Conv2d<T>>(channels, channels, 3, 1, 0, rng));
    inner_.emplace_back(std::make_unique<InstanceNorm<T>>(channels));
    inner_.emplace_back(std::make_unique<ReLU<T>>());
    inner_.emplace_back(std::make_unique<ReflectPad<T>>(1));
    inner_.emplace_back(std::make_unique<Conv2d<T>>(channels, channels, 3, 1, 0, rng));
    inner_.emplace_back(std::make_unique<InstanceNorm<T>>(channels));
  }

  Tensor<T> forward(const Tensor<T>& x, std::any& cache) const override {
    std::vector<std::any> caches(inner_.size());
    Tensor<T> y = x;
    for (std::size_t i = 0; i < inner_.size(); ++i) y = inner_[i]->forward(y, caches[i]);
    y.flat() += x.flat();
    cache = std::move(caches);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, std::any& cache) override {
    auto& caches = *std::any_cast<std::vector<std::any>>(&cache);
    Tensor<T> g = dy;
    for (int i = int(inner_.size()) - 1; i >= 0; --i) g = inner_[i]->backward(g, caches[i]);
    g.flat() += dy.flat();
    return g;
  }

  void collect(ParamSet<T>& ps, const std::string& prefix) override {
    for (std::size_t i = 0; i < inner_.size(); ++i)
      inner_[i]->collect(ps, prefix + "/" + std::to_string(i) + ":" + inner_[i]->kind());
  }
  const char* kind() const override { return "resblock"; }

 private:
  std::vector<std::unique_ptr<Layer<T>>> inner_;
};

// Forward state of one Sequential pass: per-layer caches plus recorded tap
// activations ("-1" taps the input itself, i >= 0 taps the output of layer i).
template <typename T>
struct Trace {
  std::vector<std::any> caches;
  std::vector<Tensor<T>> taps;
  int start = 0;
  int stop = 0;  // exclusive
};

template <typename T>
class Sequential {
 public:
  void add(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }
  int size() const { return int(layers_.size()); }

  Tensor<T> forward(const Tensor<T>& x, Trace<T>& trace,
                    const std::vector<int>* tap_ids = nullptr) const {
    return forward_range(x, 0, size(), trace, tap_ids);
  }

  Tensor<T> forward_range(const Tensor<T>& x, int start, int stop, Trace<T>& trace,
                          const std::vector<int>* tap_ids = nullptr) const {
    trace.caches.assign(layers_.size(), {});
    trace.taps.clear();
    trace.start = start;
    trace.stop = stop;
    if (tap_ids) trace.taps.resize(tap_ids->size());
    auto record = [&](int id, const Tensor<T>& v) {
      if (!tap_ids) return;
      for (std::size_t t = 0; t < tap_ids->size(); ++t)
        if ((*tap_ids)[t] == id) trace.taps[t] = v;
    };
    record(-1, x);
    Tensor<T> y = x;
    for (int i = start; i < stop; ++i) {
      y = layers_[i]->forward(y, trace.caches[i]);
      record(i, y);
    }
    return y;
  }

  // tap_grads, when given, aligns with the tap_ids used in forward.
  Tensor<T> backward(const Tensor<T>& dy, Trace<T>& trace,
                     const std::vector<int>* tap_ids = nullptr,
                     const std::vector<Tensor<T>>* tap_grads = nullptr) {
    Tensor<T> g = dy;
    auto inject = [&](int id, Tensor<T>& acc) {
      if (!tap_ids || !tap_grads) return;
      for (std::size_t t = 0; t < tap_ids->size(); ++t)
        if ((*tap_ids)[t] == id && (*tap_grads)[t].size() > 0) acc.flat() += (*tap_grads)[t].flat();
    };
    for (int i = trace.stop - 1; i >= trace.start; --i) {
      inject(i, g);
      g = layers_[i]->backward(g, trace.caches[i]);
    }
    inject(-1, g);
    return g;
  }

  void collect(ParamSet<T>& ps, const std::string& prefix) {
    for (std::size_t i = 0; i < layers_.size(); ++i)
      layers_[i]->collect(ps, prefix + "/" + std::to_string(i) + ":" + layers_[i]->kind());
  }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

// Fully connected map over row-vector batches (used by projection heads).
template <typename T>
class Dense {
 public:
  Dense() = default;
  Dense(int in, int out, Rng& rng) {
    w_.resize(out, in);
    const T scale = T(std::sqrt(2.0 / in));
    for (std::int64_t i = 0; i < w_.size(); ++i) w_.data()[i] = T(rng.normal()) * scale;
    b_ = MatX<T>::Zero(out, 1);
    gw_ = MatX<T>::Zero(out, in);
    gb_ = MatX<T>::Zero(out, 1);
  }

  MatX<T> forward(const MatX<T>& x, MatX<T>& cache) const {
    cache = x;
    MatX<T> y = x * w_.transpose();
    y.rowwise() += b_.col(0).transpose();
    return y;
  }

  MatX<T> backward(const MatX<T>& dy, const MatX<T>& cache) {
    gw_.noalias() += dy.transpose() * cache;
    gb_.col(0) += dy.colwise().sum().transpose();
    return dy * w_;
  }

  void collect(ParamSet<T>& ps, const std::string& prefix) {
    ps.push_back({prefix + "/w", &w_, &gw_});
    ps.push_back({prefix + "/b", &b_, &gb_});
  }
  int in_dim() const { return int(w_.cols()); }
  int out_dim() const { return int(w_.rows()); }

 private:
  MatX<T> w_, b_, gw_, gb_;
};

}  // namespace anlcl::nn
