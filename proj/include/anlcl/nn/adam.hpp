#pragma once

#include <cmath>
#include <vector>

#include "anlcl/nn/layers.hpp"

namespace anlcl::nn {

// Adaptive-moment optimizer over a parameter registry. Slot order follows the
// registry, so the registry must not change between steps.
template <typename T>
class Adam {
 public:
  explicit Adam(const ParamSet<T>& params, double lr, double beta1 = 0.5, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params) {
      m_.push_back(MatX<T>::Zero(p.value->rows(), p.value->cols()));
      v_.push_back(MatX<T>::Zero(p.value->rows(), p.value->cols()));
    }
  }

  void step(const ParamSet<T>& params) {
    if (params.size() != m_.size()) throw Error(ErrorKind::dimension, "optimizer registry changed");
    ++t_;
    const T c1 = T(1.0 - std::pow(beta1_, t_));
    const T c2 = T(1.0 - std::pow(beta2_, t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const MatX<T>& g = *params[i].grad;
      if (!g.allFinite())
        throw Error(ErrorKind::numeric, "non-finite gradient for " + params[i].name);
      m_[i] = T(beta1_) * m_[i] + T(1.0 - beta1_) * g;
      v_[i] = T(beta2_) * v_[i] + T(1.0 - beta2_) * g.cwiseProduct(g);
      params[i].value->array() -=
          T(lr_) * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + T(eps_));
    }
  }

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<MatX<T>> m_, v_;
};

}  // namespace anlcl::nn
