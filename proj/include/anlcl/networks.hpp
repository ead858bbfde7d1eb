#pragma once

#include <array>
#include <string>
#include <vector>

#include "anlcl/nn/layers.hpp"
#include "anlcl/patch.hpp"

namespace anlcl {

enum class EncoderChoice { discriminator, image_generator, image_rain_generator };

const char* to_string(EncoderChoice c);
EncoderChoice encoder_choice_from_string(const std::string& s);

struct NetworkSpec {
  int image_channels = 3;
  int gen_base_channels = 64;  // c7s1-64, d128, d256 scaling
  int gen_res_blocks = 9;
  int disc_base_channels = 64;
  int proj_hidden = 256;
  int embed_dim = 256;
  bool share_encoder = true;  // discriminator doubles as the layer-contrastive encoder
};

inline void validate(const NetworkSpec& s) {
  if (s.image_channels != 1 && s.image_channels != 3)
    throw Error(ErrorKind::parameter, "image_channels must be 1 or 3");
  if (s.gen_base_channels < 1 || s.disc_base_channels < 1)
    throw Error(ErrorKind::parameter, "channel counts must be >= 1");
  if (s.gen_res_blocks < 1) throw Error(ErrorKind::parameter, "need at least 1 residual block");
  if (s.proj_hidden < 1 || s.embed_dim < 1)
    throw Error(ErrorKind::parameter, "projection widths must be >= 1");
}

// Residual encoder-decoder (c7s1-k, d2k, d4k, res blocks, u2k, uk, c7s1-C)
// with a [0,1] output activation. The encoder half feeds the location
// contrastive features.
template <typename T>
struct Generator {
  nn::Sequential<T> seq;
  int enc_end = 0;  // layers [0, enc_end) are the encoder half
  std::vector<int> enc_taps;
  std::vector<int> enc_tap_strides;
  int in_channels = 0;

  void collect(nn::ParamSet<T>& ps, const std::string& prefix) { seq.collect(ps, prefix); }
};

template <typename T>
Generator<T> make_generator(const NetworkSpec& spec, Rng& rng) {
  validate(spec);
  const int c = spec.image_channels, b = spec.gen_base_channels;
  Generator<T> g;
  g.in_channels = c;
  g.seq.add(std::make_unique<nn::ReflectPad<T>>(3));
  g.seq.add(std::make_unique<nn::Conv2d<T>>(c, b, 7, 1, 0, rng));
  g.seq.add(std::make_unique<nn::InstanceNorm<T>>(b));
  g.seq.add(std::make_unique<nn::ReLU<T>>());
  g.seq.add(std::make_unique<nn::Conv2d<T>>(b, 2 * b, 3, 2, 1, rng));
  g.seq.add(std::make_unique<nn::InstanceNorm<T>>(2 * b));
  g.seq.add(std::make_unique<nn::ReLU<T>>());
  g.seq.add(std::make_unique<nn::Conv2d<T>>(2 * b, 4 * b, 3, 2, 1, rng));
  g.seq.add(std::make_unique<nn::InstanceNorm<T>>(4 * b));
  g.seq.add(std::make_unique<nn::ReLU<T>>());
  for (int i = 0; i < spec.gen_res_blocks; ++i)
    g.seq.add(std::make_unique<nn::ResidualBlock<T>>(4 * b, rng));
  g.enc_end = g.seq.size();
  g.enc_taps = {-1, 3, 6, g.enc_end - 1};
  g.enc_tap_strides = {1, 1, 2, 4};
  g.seq.add(std::make_unique<nn::ConvTranspose2d<T>>(4 * b, 2 * b, 3, 2, 1, 1, rng));
  g.seq.add(std::make_unique<nn::InstanceNorm<T>>(2 * b));
  g.seq.add(std::make_unique<nn::ReLU<T>>());
  g.seq.add(std::make_unique<nn::ConvTranspose2d<T>>(2 * b, b, 3, 2, 1, 1, rng));
  g.seq.add(std::make_unique<nn::InstanceNorm<T>>(b));
  g.seq.add(std::make_unique<nn::ReLU<T>>());
  g.seq.add(std::make_unique<nn::ReflectPad<T>>(3));
  g.seq.add(std::make_unique<nn::Conv2d<T>>(b, c, 7, 1, 0, rng));
  g.seq.add(std::make_unique<nn::Tanh01<T>>());
  return g;
}

// 70x70 receptive-field patch classifier: three stride-2 stages, one stride-1
// stage, then the 1-channel logits conv. 256x256 input gives a 30x30 map.
template <typename T>
struct Discriminator {
  nn::Sequential<T> seq;
  std::vector<int> taps;
  std::vector<int> tap_strides;
  int in_channels = 0;

  void collect(nn::ParamSet<T>& ps, const std::string& prefix) { seq.collect(ps, prefix); }
};

template <typename T>
Discriminator<T> make_discriminator(const NetworkSpec& spec, Rng& rng) {
  validate(spec);
  const int c = spec.image_channels, d = spec.disc_base_channels;
  Discriminator<T> disc;
  disc.in_channels = c;
  disc.seq.add(std::make_unique<nn::Conv2d<T>>(c, d, 4, 2, 1, rng));
  disc.seq.add(std::make_unique<nn::LeakyReLU<T>>(T(0.2)));
  disc.seq.add(std::make_unique<nn::Conv2d<T>>(d, 2 * d, 4, 2, 1, rng));
  disc.seq.add(std::make_unique<nn::InstanceNorm<T>>(2 * d));
  disc.seq.add(std::make_unique<nn::LeakyReLU<T>>(T(0.2)));
  disc.seq.add(std::make_unique<nn::Conv2d<T>>(2 * d, 4 * d, 4, 2, 1, rng));
  disc.seq.add(std::make_unique<nn::InstanceNorm<T>>(4 * d));
  disc.seq.add(std::make_unique<nn::LeakyReLU<T>>(T(0.2)));
  disc.seq.add(std::make_unique<nn::Conv2d<T>>(4 * d, 8 * d, 4, 1, 1, rng));
  disc.seq.add(std::make_unique<nn::InstanceNorm<T>>(8 * d));
  disc.seq.add(std::make_unique<nn::LeakyReLU<T>>(T(0.2)));
  disc.seq.add(std::make_unique<nn::Conv2d<T>>(8 * d, 1, 4, 1, 1, rng));
  disc.taps = {-1, 1, 4, 7};
  disc.tap_strides = {1, 2, 4, 8};
  return disc;
}

// Multilayer pooled feature width for a tap set over `channels`-channel input.
inline int pooled_dim_disc(const NetworkSpec& s) {
  return s.image_channels + 7 * s.disc_base_channels;
}
inline int pooled_dim_gen(const NetworkSpec& s) {
  return s.image_channels + 7 * s.gen_base_channels;
}

// Two dense layers with an L2-normalized output row per patch.
template <typename T>
class ProjectionHead {
 public:
  ProjectionHead() = default;
  ProjectionHead(int in, int hidden, int out, Rng& rng) : fc1_(in, hidden, rng), fc2_(hidden, out, rng) {}

  struct Cache {
    MatX<T> c1, hidden, c2, prenorm;
    VecX<T> inv_norm;
  };

  MatX<T> forward(const MatX<T>& x, Cache& cache) const {
    MatX<T> h = fc1_.forward(x, cache.c1);
    h = h.cwiseMax(T(0));
    cache.hidden = h;
    MatX<T> z = fc2_.forward(h, cache.c2);
    cache.prenorm = z;
    cache.inv_norm.resize(z.rows());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const T n = std::max(z.row(i).norm(), T(1e-12));
      cache.inv_norm[i] = T(1) / n;
      z.row(i) *= cache.inv_norm[i];
    }
    return z;
  }

  MatX<T> backward(const MatX<T>& d_emb, const Cache& cache) {
    MatX<T> dz(d_emb.rows(), d_emb.cols());
    for (Eigen::Index i = 0; i < d_emb.rows(); ++i) {
      const auto y = cache.prenorm.row(i) * cache.inv_norm[i];
      dz.row(i) = (d_emb.row(i) - y * d_emb.row(i).dot(y)) * cache.inv_norm[i];
    }
    MatX<T> dh = fc2_.backward(dz, cache.c2);
    dh = (cache.hidden.array() > 0).select(dh, MatX<T>::Zero(dh.rows(), dh.cols()));
    return fc1_.backward(dh, cache.c1);
  }

  void collect(nn::ParamSet<T>& ps, const std::string& prefix) {
    fc1_.collect(ps, prefix + "/fc1");
    fc2_.collect(ps, prefix + "/fc2");
  }
  int in_dim() const { return fc1_.in_dim(); }
  int out_dim() const { return fc2_.out_dim(); }

 private:
  nn::Dense<T> fc1_, fc2_;
};

// ---------------------------------------------------------------------------
// Patch feature pooling over tapped multilayer activations
// ---------------------------------------------------------------------------

namespace detail {

struct Footprint {
  int r0, r1, c0, c1;  // half-open cell range on a tap map
};

inline Footprint footprint_on_tap(const PatchRef& ref, int stride, int map_h, int map_w) {
  Footprint f;
  f.r0 = std::max(0, ref.top / stride);
  f.r1 = std::min(map_h, (ref.top + ref.size + stride - 1) / stride);
  f.c0 = std::max(0, ref.left / stride);
  f.c1 = std::min(map_w, (ref.left + ref.size + stride - 1) / stride);
  if (f.r1 <= f.r0) f.r1 = f.r0 + 1;
  if (f.c1 <= f.c0) f.c1 = f.c0 + 1;
  return f;
}

}  // namespace detail

// Spatially averages each tapped map over the patch footprint and
// concatenates across taps; one row per ref.
template <typename T>
MatX<T> pool_patch_features(const std::vector<Tensor<T>>& maps, const std::vector<int>& strides,
                            const std::vector<PatchRef>& refs) {
  if (maps.size() != strides.size()) throw Error(ErrorKind::dimension, "taps/strides mismatch");
  int dim = 0;
  for (const auto& m : maps) dim += m.channels();
  MatX<T> pooled(Eigen::Index(refs.size()), dim);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    int off = 0;
    for (std::size_t t = 0; t < maps.size(); ++t) {
      const auto& m = maps[t];
      const auto f = detail::footprint_on_tap(refs[i], strides[t], m.height(), m.width());
      for (int c = 0; c < m.channels(); ++c)
        pooled(i, off + c) = m.channel(c).block(f.r0, f.c0, f.r1 - f.r0, f.c1 - f.c0).mean();
      off += m.channels();
    }
  }
  return pooled;
}

// Adjoint of pool_patch_features; accumulates into per-tap gradient tensors
// (allocated on first use).
template <typename T>
void scatter_patch_feature_grads(const MatX<T>& d_pooled, const std::vector<Tensor<T>>& maps,
                                 const std::vector<int>& strides, const std::vector<PatchRef>& refs,
                                 std::vector<Tensor<T>>& d_maps) {
  if (d_maps.size() != maps.size()) d_maps.resize(maps.size());
  for (std::size_t t = 0; t < maps.size(); ++t)
    if (d_maps[t].size() == 0)
      d_maps[t] = Tensor<T>(maps[t].channels(), maps[t].height(), maps[t].width());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    int off = 0;
    for (std::size_t t = 0; t < maps.size(); ++t) {
      const auto& m = maps[t];
      const auto f = detail::footprint_on_tap(refs[i], strides[t], m.height(), m.width());
      const T inv_area = T(1) / T((f.r1 - f.r0) * (f.c1 - f.c0));
      for (int c = 0; c < m.channels(); ++c)
        d_maps[t].channel(c).block(f.r0, f.c0, f.r1 - f.r0, f.c1 - f.c0) +=
            d_pooled(i, off + c) * inv_area;
      off += m.channels();
    }
  }
}

// ---------------------------------------------------------------------------
// Stateless user-facing passes
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> generator_forward(const Generator<T>& gen, const Tensor<T>& img) {
  if (img.height() % 4 != 0 || img.width() % 4 != 0)
    throw Error(ErrorKind::dimension, "generator input dims must be divisible by 4");
  if (img.channels() != gen.in_channels)
    throw Error(ErrorKind::dimension, "generator channel mismatch");
  nn::Trace<T> trace;
  Tensor<T> out = gen.seq.forward(img, trace);
  clip01_inplace(out);
  return out;
}

template <typename T>
struct DiscOutput {
  Tensor<T> logits;
  std::vector<Tensor<T>> features;
};

template <typename T>
DiscOutput<T> discriminator_forward(const Discriminator<T>& disc, const Tensor<T>& img,
                                    bool tap_features) {
  if (img.height() < 70 || img.width() < 70)
    throw Error(ErrorKind::dimension, "discriminator input must be at least 70x70");
  nn::Trace<T> trace;
  DiscOutput<T> out;
  out.logits = disc.seq.forward(img, trace, tap_features ? &disc.taps : nullptr);
  if (tap_features) out.features = trace.taps;
  return out;
}

template <typename T>
Tensor<T> sigmoid_map(const Tensor<T>& logits) {
  Tensor<T> p = logits;
  p.flat() = T(1) / (T(1) + (-p.flat()).exp());
  return p;
}

// Encoder pass + footprint pooling + projection for a set of refs into one
// source image. Rows follow ref order and are unit length.
template <typename T>
MatX<T> embed_patches(const Discriminator<T>& encoder, const ProjectionHead<T>& proj,
                      const Tensor<T>& source, const std::vector<PatchRef>& refs) {
  for (const auto& r : refs) check_ref_bounds(r, source.height(), source.width());
  nn::Trace<T> trace;
  encoder.seq.forward(source, trace, &encoder.taps);
  const MatX<T> pooled = pool_patch_features(trace.taps, encoder.tap_strides, refs);
  typename ProjectionHead<T>::Cache cache;
  return proj.forward(pooled, cache);
}

template <typename T>
MatX<T> embed_patches(const Generator<T>& encoder, const ProjectionHead<T>& proj,
                      const Tensor<T>& source, const std::vector<PatchRef>& refs) {
  for (const auto& r : refs) check_ref_bounds(r, source.height(), source.width());
  nn::Trace<T> trace;
  encoder.seq.forward_range(source, 0, encoder.enc_end, trace, &encoder.enc_taps);
  const MatX<T> pooled = pool_patch_features(trace.taps, encoder.enc_tap_strides, refs);
  typename ProjectionHead<T>::Cache cache;
  return proj.forward(pooled, cache);
}

// key' = m * key + (1 - m) * online, elementwise over matching registries.
template <typename T>
void momentum_update(const nn::ParamSet<T>& online, const nn::ParamSet<T>& key, double m) {
  if (m < 0 || m > 1) throw Error(ErrorKind::parameter, "momentum must lie in [0,1]");
  if (online.size() != key.size()) throw Error(ErrorKind::dimension, "parameter group count mismatch");
  for (std::size_t i = 0; i < online.size(); ++i) {
    if (online[i].value->rows() != key[i].value->rows() ||
        online[i].value->cols() != key[i].value->cols())
      throw Error(ErrorKind::dimension, "parameter shape mismatch at " + online[i].name);
    *key[i].value = T(m) * *key[i].value + T(1.0 - m) * *online[i].value;
  }
}

template <typename T>
void copy_params(const nn::ParamSet<T>& src, const nn::ParamSet<T>& dst) {
  momentum_update(src, dst, 0.0);
}

struct MomentumConfig {
  double m = 0.99;
};

inline void validate(const MomentumConfig& c) {
  if (c.m < 0 || c.m > 1) throw Error(ErrorKind::parameter, "momentum must lie in [0,1]");
}

}  // namespace anlcl
