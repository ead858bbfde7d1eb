#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <vector>

#include "anlcl/patch.hpp"
#include "anlcl/rng.hpp"

namespace anlcl {

// Shannon entropy in bits of the equal-width-bin intensity histogram over all
// pixels and channels of a patch. Values are assumed to lie in [0,1].
template <typename T>
double patch_entropy(const Tensor<T>& patch, int bins = 256) {
  if (bins < 2) throw Error(ErrorKind::parameter, "bins must be >= 2");
  if (patch.size() == 0) throw Error(ErrorKind::parameter, "empty patch");
  std::vector<std::int64_t> hist(bins, 0);
  const auto v = patch.flat();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    int b = int(double(v[i]) * bins);
    b = std::min(std::max(b, 0), bins - 1);
    ++hist[b];
  }
  const double n = double(patch.size());
  double h = 0.0;
  for (std::int64_t c : hist)
    if (c > 0) {
      const double p = double(c) / n;
      h -= p * std::log2(p);
    }
  return h;
}

template <typename T>
double mean_patch_entropy(const PatchStack<T>& stack, int bins = 256) {
  if (stack.size() == 0) throw Error(ErrorKind::parameter, "empty patch stack");
  double s = 0.0;
  for (const auto& p : stack.patches) s += patch_entropy(p, bins);
  return s / double(stack.size());
}

struct SpectrumReport {
  std::vector<double> singular_values;  // descending
  std::vector<double> energy_fraction;  // cumulative, ends at 1 (or empty if all zero)

  // Smallest rank whose cumulative energy reaches `threshold`.
  int rank_at_energy(double threshold) const {
    for (std::size_t k = 0; k < energy_fraction.size(); ++k)
      if (energy_fraction[k] >= threshold) return int(k) + 1;
    return int(energy_fraction.size());
  }
};

// Exact singular values of the mean-centered patch matrix (rows = flattened
// patches), descending.
template <typename T>
SpectrumReport singular_spectrum(const PatchStack<T>& stack) {
  if (stack.size() < 2) throw Error(ErrorKind::parameter, "need at least 2 patches");
  const Eigen::Index n = Eigen::Index(stack.size());
  const Eigen::Index m = Eigen::Index(stack.patches[0].size());
  Eigen::MatrixXd x(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (stack.patches[i].size() != m) throw Error(ErrorKind::dimension, "ragged patch stack");
    x.row(i) = stack.patches[i].flat().template cast<double>().matrix().transpose();
  }
  x.rowwise() -= x.colwise().mean();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x);
  SpectrumReport rep;
  rep.singular_values.assign(svd.singularValues().data(),
                             svd.singularValues().data() + svd.singularValues().size());
  double total = 0.0;
  for (double s : rep.singular_values) total += s * s;
  if (total > 0) {
    double acc = 0.0;
    for (double s : rep.singular_values) {
      acc += s * s;
      rep.energy_fraction.push_back(acc / total);
    }
    rep.energy_fraction.back() = 1.0;
  } else {
    rep.energy_fraction.assign(rep.singular_values.size(), 1.0);
  }
  return rep;
}

// Top-two principal component projection of embedding rows. Axis signs are
// fixed by making the largest-magnitude loading positive, so the output is
// deterministic.
template <typename T>
Eigen::MatrixXd embed_2d(const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>& rows) {
  if (rows.rows() < 3) throw Error(ErrorKind::parameter, "need at least 3 rows");
  Eigen::MatrixXd x = rows.template cast<double>();
  x.rowwise() -= x.colwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  const int k = std::min<int>(2, int(svd.matrixV().cols()));
  Eigen::MatrixXd v = svd.matrixV().leftCols(k);
  for (int j = 0; j < v.cols(); ++j) {
    Eigen::Index imax = 0;
    v.col(j).cwiseAbs().maxCoeff(&imax);
    if (v(imax, j) < 0) v.col(j) = -v.col(j);
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(x.rows(), 2);
  out.leftCols(k) = x * v;
  return out;
}

// Seeded Gaussian random projection; the stochastic alternative to the
// deterministic principal-component view.
template <typename T>
Eigen::MatrixXd embed_2d_random(const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>& rows,
                                std::uint64_t seed) {
  if (rows.rows() < 3) throw Error(ErrorKind::parameter, "need at least 3 rows");
  Rng rng(seed);
  Eigen::MatrixXd proj(rows.cols(), 2);
  for (Eigen::Index i = 0; i < proj.rows(); ++i)
    for (int j = 0; j < 2; ++j) proj(i, j) = rng.normal() / std::sqrt(double(rows.cols()));
  return rows.template cast<double>() * proj;
}

template <typename T>
double mse(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mse");
  return double(
      (a.flat().template cast<double>() - b.flat().template cast<double>()).square().mean());
}

// Peak signal-to-noise ratio in dB, capped at 99 for (near-)identical inputs.
template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b, double peak = 1.0) {
  const double m = mse(a, b);
  if (m < 1e-10) return 99.0;
  return std::min(99.0, 10.0 * std::log10(peak * peak / m));
}

// Mean local SSIM with the standard 11x11 Gaussian window (sigma 1.5),
// k1=0.01, k2=0.03, dynamic range 1; channels averaged.
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "ssim");
  constexpr int win = 11;
  if (a.height() < win || a.width() < win)
    throw Error(ErrorKind::dimension, "ssim needs at least 11x11 images");

  Eigen::Matrix<double, win, 1> g;
  for (int i = 0; i < win; ++i) {
    const double d = i - (win - 1) / 2.0;
    g[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
  }
  g /= g.sum();

  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const int oh = a.height() - win + 1, ow = a.width() - win + 1;

  auto smooth = [&](const Eigen::ArrayXXd& img) {
    // Separable valid-mode Gaussian filter.
    Eigen::ArrayXXd tmp(img.rows(), ow);
    for (Eigen::Index y = 0; y < img.rows(); ++y)
      for (int x = 0; x < ow; ++x) {
        double s = 0;
        for (int k = 0; k < win; ++k) s += g[k] * img(y, x + k);
        tmp(y, x) = s;
      }
    Eigen::ArrayXXd out(oh, ow);
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double s = 0;
        for (int k = 0; k < win; ++k) s += g[k] * tmp(y + k, x);
        out(y, x) = s;
      }
    return out;
  };

  double total = 0.0;
  for (int c = 0; c < a.channels(); ++c) {
    const Eigen::ArrayXXd xa = a.channel(c).template cast<double>();
    const Eigen::ArrayXXd xb = b.channel(c).template cast<double>();
    const Eigen::ArrayXXd mu_a = smooth(xa);
    const Eigen::ArrayXXd mu_b = smooth(xb);
    const Eigen::ArrayXXd var_a = smooth(xa * xa) - mu_a * mu_a;
    const Eigen::ArrayXXd var_b = smooth(xb * xb) - mu_b * mu_b;
    const Eigen::ArrayXXd cov = smooth(xa * xb) - mu_a * mu_b;
    const Eigen::ArrayXXd num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
    const Eigen::ArrayXXd den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
    total += (num / den).mean();
  }
  return total / a.channels();
}

}  // namespace anlcl
