#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <vector>

#include "anlcl/analysis.hpp"
#include "anlcl/tensor.hpp"

namespace anlcl {

struct ContrastiveConfig {
  double temperature = 0.77;
  double margin = 1.0;
  // The printed softmax-ratio forms of the two symmetric contrastive losses
  // carry no -log and (for the location loss) a positive sign; minimizing
  // them as printed does not pull positives together. use_log_form=true (the
  // default) applies -log to each ratio term, giving the usual InfoNCE
  // objective; false evaluates the ratios exactly as printed, with the
  // printed prefactors, for identity testing.
  bool use_log_form = true;
  // Mean (rather than raw-sum) reduction over sample pairs for the layer,
  // margin and asymmetric losses, so magnitudes do not scale with the sample
  // counts. Ignored by the literal forms.
  bool normalize_pairs = true;
};

inline void validate(const ContrastiveConfig& c) {
  if (c.temperature <= 0) throw Error(ErrorKind::parameter, "temperature must be > 0");
  if (c.margin < 0) throw Error(ErrorKind::parameter, "margin must be >= 0");
}

// Balance coefficients of the six training objectives.
struct LossWeights {
  double w_sparse = 0.1;
  double w_adv = 1.0;
  double w_mse = 1.0;
  double w_loc = 1.0;
  double w_layer = 1.0;
  double w_asy = 0.01;
};

inline void validate(const LossWeights& w) {
  if (w.w_sparse < 0 || w.w_adv < 0 || w.w_mse < 0 || w.w_loc < 0 || w.w_layer < 0 || w.w_asy < 0)
    throw Error(ErrorKind::parameter, "loss weights must be >= 0");
}

// ---------------------------------------------------------------------------
// Pixel-space decomposition losses
// ---------------------------------------------------------------------------

// mean((B + R - O)^2). Gradients are accumulated into any non-null outputs.
template <typename T>
T self_consistency(const Tensor<T>& o, const Tensor<T>& b, const Tensor<T>& r,
                   Tensor<T>* d_b = nullptr, Tensor<T>* d_r = nullptr, Tensor<T>* d_o = nullptr) {
  require_same_shape(o, b, "self_consistency");
  require_same_shape(o, r, "self_consistency");
  const T inv_n = T(1) / T(o.size());
  T loss = 0;
  for (std::int64_t i = 0; i < o.size(); ++i) {
    const T d = b.data()[i] + r.data()[i] - o.data()[i];
    loss += d * d;
    const T g = T(2) * d * inv_n;
    if (d_b) d_b->data()[i] += g;
    if (d_r) d_r->data()[i] += g;
    if (d_o) d_o->data()[i] -= g;
  }
  return loss * inv_n;
}

// mean(|R|).
template <typename T>
T rain_sparsity(const Tensor<T>& r, Tensor<T>* d_r = nullptr) {
  const T inv_n = T(1) / T(r.size());
  T loss = 0;
  for (std::int64_t i = 0; i < r.size(); ++i) {
    const T v = r.data()[i];
    loss += std::abs(v);
    if (d_r) d_r->data()[i] += (v > 0 ? inv_n : v < 0 ? -inv_n : T(0));
  }
  return loss * inv_n;
}

template <typename T>
struct AdvLoss {
  T loss_d = 0;
  T loss_g = 0;
};

// Non-saturating GAN losses over per-patch probability maps (sigmoid already
// applied). log arguments are clamped at 1e-12.
template <typename T>
AdvLoss<T> adversarial_losses(const Tensor<T>& d_real, const Tensor<T>& d_fake,
                              Tensor<T>* grad_real_for_d = nullptr,
                              Tensor<T>* grad_fake_for_d = nullptr,
                              Tensor<T>* grad_fake_for_g = nullptr) {
  const T clamp = T(1e-12);
  AdvLoss<T> out;
  const T inv_nr = T(1) / T(d_real.size());
  for (std::int64_t i = 0; i < d_real.size(); ++i) {
    const T p = std::max(d_real.data()[i], clamp);
    out.loss_d -= std::log(p) * inv_nr;
    if (grad_real_for_d && d_real.data()[i] > clamp) grad_real_for_d->data()[i] -= inv_nr / p;
  }
  const T inv_nf = T(1) / T(d_fake.size());
  for (std::int64_t i = 0; i < d_fake.size(); ++i) {
    const T q = d_fake.data()[i];
    const T one_minus = std::max(T(1) - q, clamp);
    out.loss_d -= std::log(one_minus) * inv_nf;
    if (grad_fake_for_d && T(1) - q > clamp) grad_fake_for_d->data()[i] += inv_nf / one_minus;
    const T qc = std::max(q, clamp);
    out.loss_g -= std::log(qc) * inv_nf;
    if (grad_fake_for_g && q > clamp) grad_fake_for_g->data()[i] -= inv_nf / qc;
  }
  return out;
}

// The generator-side slice of the non-saturating objective, for steps where
// no real batch is at hand. Equals adversarial_losses(.., d_fake).loss_g.
template <typename T>
T generator_adv_loss(const Tensor<T>& d_fake, Tensor<T>* grad_fake = nullptr) {
  const T clamp = T(1e-12);
  const T inv_n = T(1) / T(d_fake.size());
  T loss = 0;
  for (std::int64_t i = 0; i < d_fake.size(); ++i) {
    const T q = std::max(d_fake.data()[i], clamp);
    loss -= std::log(q) * inv_n;
    if (grad_fake && d_fake.data()[i] > clamp) grad_fake->data()[i] -= inv_n / q;
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Embedding-space contrastive losses. Rows are embeddings.
// ---------------------------------------------------------------------------

template <typename T>
using Emb = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

namespace detail {

// One direction of the symmetric layer loss: anchors against same-layer
// positives with other-layer negatives in the denominator.
template <typename T>
T contrastive_side(const Emb<T>& anchors, const Emb<T>& positives, const Emb<T>& negatives,
                   const ContrastiveConfig& cfg, Emb<T>* d_anchors, Emb<T>* d_positives,
                   Emb<T>* d_negatives) {
  const Eigen::Index na = anchors.rows(), np = positives.rows(), nn = negatives.rows();
  if (na < 1 || np < 1 || nn < 1) throw Error(ErrorKind::parameter, "empty embedding batch");
  if (anchors.cols() != positives.cols() || anchors.cols() != negatives.cols())
    throw Error(ErrorKind::dimension, "embedding dims differ");
  const T tau = T(cfg.temperature);

  Emb<T> s = anchors * positives.transpose() / tau;   // na x np
  Emb<T> m = anchors * negatives.transpose() / tau;   // na x nn
  Eigen::Array<T, Eigen::Dynamic, 1> shift(na);
  for (Eigen::Index i = 0; i < na; ++i)
    shift[i] = std::max(s.row(i).maxCoeff(), m.row(i).maxCoeff());

  Emb<T> es(na, np), em(na, nn);
  Eigen::Array<T, Eigen::Dynamic, 1> z(na);
  for (Eigen::Index i = 0; i < na; ++i) {
    es.row(i) = (s.row(i).array() - shift[i]).exp().matrix();
    em.row(i) = (m.row(i).array() - shift[i]).exp().matrix();
    z[i] = em.row(i).sum();
  }

  T loss = 0;
  Emb<T> ds = Emb<T>::Zero(na, np), dm = Emb<T>::Zero(na, nn);
  if (cfg.use_log_form) {
    const T w = cfg.normalize_pairs ? T(1) / T(na * np) : T(1) / T(np);
    for (Eigen::Index i = 0; i < na; ++i) {
      const T logz = std::log(z[i]) + shift[i];
      for (Eigen::Index k = 0; k < np; ++k) loss += w * (-s(i, k) + logz);
      ds.row(i).setConstant(-w);
      dm.row(i) = (w * T(np) / z[i]) * em.row(i);
    }
  } else {
    const T w = T(1) / T(np);  // prefactor as printed
    for (Eigen::Index i = 0; i < na; ++i) {
      const T row_ratio_sum = es.row(i).sum() / z[i];
      loss -= w * row_ratio_sum;
      ds.row(i) = (-w / z[i]) * es.row(i);
      dm.row(i) = (w * row_ratio_sum / z[i]) * em.row(i);
    }
  }

  if (d_anchors) *d_anchors += (ds * positives + dm * negatives) / tau;
  if (d_positives) *d_positives += ds.transpose() * anchors / tau;
  if (d_negatives) *d_negatives += dm.transpose() * anchors / tau;
  return loss;
}

}  // namespace detail

template <typename T>
struct LayerContrastiveGrads {
  Emb<T> d_fb_anchor, d_fb_pos, d_fr_anchor, d_fr_pos, d_fb_neg, d_fr_neg;
};

// Bidirectional layer contrast: clean-layer anchors pulled to clean-layer
// positives against rain negatives, plus the mirrored rain-side term.
template <typename T>
T layer_contrastive(const Emb<T>& fb_anchor, const Emb<T>& fb_pos, const Emb<T>& fr_anchor,
                    const Emb<T>& fr_pos, const Emb<T>& fb_neg, const Emb<T>& fr_neg,
                    const ContrastiveConfig& cfg, LayerContrastiveGrads<T>* grads = nullptr) {
  validate(cfg);
  auto zero_like = [](const Emb<T>& x) { return Emb<T>::Zero(x.rows(), x.cols()).eval(); };
  if (grads) {
    grads->d_fb_anchor = zero_like(fb_anchor);
    grads->d_fb_pos = zero_like(fb_pos);
    grads->d_fr_anchor = zero_like(fr_anchor);
    grads->d_fr_pos = zero_like(fr_pos);
    grads->d_fb_neg = zero_like(fb_neg);
    grads->d_fr_neg = zero_like(fr_neg);
  }
  T loss = detail::contrastive_side(fb_anchor, fb_pos, fr_neg, cfg,
                                    grads ? &grads->d_fb_anchor : nullptr,
                                    grads ? &grads->d_fb_pos : nullptr,
                                    grads ? &grads->d_fr_neg : nullptr);
  loss += detail::contrastive_side(fr_anchor, fr_pos, fb_neg, cfg,
                                   grads ? &grads->d_fr_anchor : nullptr,
                                   grads ? &grads->d_fr_pos : nullptr,
                                   grads ? &grads->d_fb_neg : nullptr);
  return loss;
}

template <typename T>
struct LocationContrastiveGrads {
  Emb<T> d_v_o_pos, d_v_b_anchor, d_v_o_neg;
};

// Same-location InfoNCE between O and the estimated clean layer. v_o_neg is
// anchor-major: row i*n_neg+j is the j-th negative of anchor i. The positive
// similarity also appears in the denominator.
template <typename T>
T location_contrastive(const Emb<T>& v_o_pos, const Emb<T>& v_b_anchor, const Emb<T>& v_o_neg,
                       const ContrastiveConfig& cfg, LocationContrastiveGrads<T>* grads = nullptr) {
  validate(cfg);
  const Eigen::Index n = v_b_anchor.rows();
  if (n < 1 || v_o_pos.rows() != n) throw Error(ErrorKind::dimension, "one positive per anchor required");
  if (v_o_neg.rows() % n != 0) throw Error(ErrorKind::dimension, "negatives not divisible by anchors");
  const Eigen::Index n_neg = v_o_neg.rows() / n;
  const T tau = T(cfg.temperature);

  if (grads) {
    grads->d_v_o_pos = Emb<T>::Zero(v_o_pos.rows(), v_o_pos.cols());
    grads->d_v_b_anchor = Emb<T>::Zero(v_b_anchor.rows(), v_b_anchor.cols());
    grads->d_v_o_neg = Emb<T>::Zero(v_o_neg.rows(), v_o_neg.cols());
  }

  T loss = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto anchor = v_b_anchor.row(i);
    const T u = anchor.dot(v_o_pos.row(i)) / tau;
    Eigen::Array<T, Eigen::Dynamic, 1> w(n_neg);
    for (Eigen::Index j = 0; j < n_neg; ++j) w[j] = anchor.dot(v_o_neg.row(i * n_neg + j)) / tau;

    const T shift = std::max(u, w.maxCoeff());
    const T eu = std::exp(u - shift);
    const Eigen::Array<T, Eigen::Dynamic, 1> ew = (w - shift).exp();
    const T z = eu + ew.sum();
    const T sig_u = eu / z;

    T du, dw_scale;
    if (cfg.use_log_form) {
      loss += (-u + std::log(z) + shift) / T(n);
      du = (sig_u - T(1)) / T(n);
      dw_scale = T(1) / T(n);
    } else {
      loss += sig_u;  // sign and sum as printed
      du = sig_u * (T(1) - sig_u);
      dw_scale = -sig_u;
    }
    if (grads) {
      grads->d_v_o_pos.row(i) += (du / tau) * anchor;
      grads->d_v_b_anchor.row(i) += (du / tau) * v_o_pos.row(i);
      for (Eigen::Index j = 0; j < n_neg; ++j) {
        const T dwj = dw_scale * (ew[j] / z);
        grads->d_v_o_neg.row(i * n_neg + j) += (dwj / tau) * anchor;
        grads->d_v_b_anchor.row(i) += (dwj / tau) * v_o_neg.row(i * n_neg + j);
      }
    }
  }
  return loss;
}

// Hinge over every (rain pair, image pair) combination of distinct samples:
// mean/sum of max(0, eps + eta*||r_i - r_j||^2 - ||b_m - b_n||^2), i != j,
// m != n.
template <typename T>
T margin_loss(const Emb<T>& f_r, const Emb<T>& f_b, double eps, int eta, bool normalize_pairs = true,
              Emb<T>* d_f_r = nullptr, Emb<T>* d_f_b = nullptr) {
  if (eta != 1 && eta != -1) throw Error(ErrorKind::parameter, "eta must be +1 or -1");
  const Eigen::Index nr = f_r.rows(), nb = f_b.rows();
  if (nr < 2 || nb < 2) throw Error(ErrorKind::parameter, "need at least 2 rows per batch");

  std::vector<T> dr2(nr * nr), db2(nb * nb);
  for (Eigen::Index i = 0; i < nr; ++i)
    for (Eigen::Index j = 0; j < nr; ++j) dr2[i * nr + j] = (f_r.row(i) - f_r.row(j)).squaredNorm();
  for (Eigen::Index m = 0; m < nb; ++m)
    for (Eigen::Index n = 0; n < nb; ++n) db2[m * nb + n] = (f_b.row(m) - f_b.row(n)).squaredNorm();

  const T w = normalize_pairs ? T(1) / T(nr * (nr - 1) * nb * (nb - 1)) : T(1);
  T loss = 0;
  Eigen::Array<T, Eigen::Dynamic, 1> act_r = Eigen::Array<T, Eigen::Dynamic, 1>::Zero(nr * nr);
  Eigen::Array<T, Eigen::Dynamic, 1> act_b = Eigen::Array<T, Eigen::Dynamic, 1>::Zero(nb * nb);
  for (Eigen::Index i = 0; i < nr; ++i)
    for (Eigen::Index j = 0; j < nr; ++j) {
      if (i == j) continue;
      const std::size_t ij = std::size_t(i * nr + j);
      const T thr = T(eps) + T(eta) * dr2[ij];
      for (Eigen::Index m = 0; m < nb; ++m)
        for (Eigen::Index n = 0; n < nb; ++n) {
          if (m == n) continue;
          const std::size_t mn = std::size_t(m * nb + n);
          const T h = thr - db2[mn];
          if (h > 0) {
            loss += w * h;
            act_r[ij] += 1;
            act_b[mn] += 1;
          }
        }
    }

  if (d_f_r) {
    for (Eigen::Index i = 0; i < nr; ++i)
      for (Eigen::Index j = 0; j < nr; ++j) {
        const T a = act_r[i * nr + j] + act_r[j * nr + i];
        if (a > 0) d_f_r->row(i) += (T(2 * eta) * w * a) * (f_r.row(i) - f_r.row(j));
      }
  }
  if (d_f_b) {
    for (Eigen::Index m = 0; m < nb; ++m)
      for (Eigen::Index n = 0; n < nb; ++n) {
        const T a = act_b[m * nb + n] + act_b[n * nb + m];
        if (a > 0) d_f_b->row(m) -= (T(2) * w * a) * (f_b.row(m) - f_b.row(n));
      }
  }
  return loss;
}

// Eta-signed intra-similarity ratio between the rain and image groups:
// -(1/(N_R N_B)) * (sum_ij exp(r_i.r_j/tau) / sum_mn exp(b_m.b_n/tau))^eta.
// Both sums run over all ordered pairs including the diagonal.
template <typename T>
T asymmetric_contrastive(const Emb<T>& f_r, const Emb<T>& f_b, const ContrastiveConfig& cfg, int eta,
                         Emb<T>* d_f_r = nullptr, Emb<T>* d_f_b = nullptr, T* ratio_out = nullptr) {
  validate(cfg);
  if (eta != 1 && eta != -1) throw Error(ErrorKind::parameter, "eta must be +1 or -1");
  const Eigen::Index nr = f_r.rows(), nb = f_b.rows();
  if (nr < 1 || nb < 1) throw Error(ErrorKind::parameter, "empty embedding batch");
  const T tau = T(cfg.temperature);

  auto group_logsum = [&](const Emb<T>& f, Emb<T>& softmax) {
    Emb<T> s = f * f.transpose() / tau;
    const T shift = s.maxCoeff();
    softmax = (s.array() - shift).exp().matrix();
    const T total = softmax.sum();
    softmax /= total;
    return std::log(total) + shift;
  };

  Emb<T> p_r, p_b;
  T log_su = group_logsum(f_r, p_r);
  T log_sd = group_logsum(f_b, p_b);
  if (cfg.normalize_pairs) {
    log_su -= std::log(T(nr * nr));
    log_sd -= std::log(T(nb * nb));
  }

  const T log_ratio = log_su - log_sd;
  if (ratio_out) *ratio_out = std::exp(log_ratio);
  const T k = T(1) / T(nr * nb);
  const T loss = -k * std::exp(T(eta) * log_ratio);

  if (d_f_r) {
    const Emb<T> ds = (T(eta) * loss) * p_r;
    *d_f_r += (ds + ds.transpose()) * f_r / tau;
  }
  if (d_f_b) {
    const Emb<T> ds = (-T(eta) * loss) * p_b;
    *d_f_b += (ds + ds.transpose()) * f_b / tau;
  }
  return loss;
}

// +1 when the sampled image patches carry at least as much histogram entropy
// as the sampled rain patches, else -1.
template <typename T>
int eta_from_entropy(const PatchStack<T>& image_patches, const PatchStack<T>& rain_patches,
                     int bins = 256) {
  return mean_patch_entropy(image_patches, bins) >= mean_patch_entropy(rain_patches, bins) ? 1 : -1;
}

struct LossComponents {
  double mse = 0;
  double sparse = 0;
  double adv = 0;
  double loc = 0;
  double layer = 0;
  double asy = 0;
};

inline double overall_loss(const LossComponents& c, const LossWeights& w) {
  const double parts[] = {c.mse, c.sparse, c.adv, c.loc, c.layer, c.asy};
  for (double p : parts)
    if (!std::isfinite(p)) throw Error(ErrorKind::numeric, "non-finite loss component");
  return w.w_mse * c.mse + w.w_sparse * c.sparse + w.w_adv * c.adv + w.w_loc * c.loc +
         w.w_layer * c.layer + w.w_asy * c.asy;
}

}  // namespace anlcl
