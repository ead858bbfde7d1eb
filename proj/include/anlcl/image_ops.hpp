#pragma once

#include "anlcl/patch.hpp"
#include "anlcl/rng.hpp"
#include "anlcl/tensor.hpp"

namespace anlcl {

struct CropWindow {
  int top = 0;
  int left = 0;
  int size = 0;
};

inline CropWindow pick_crop_window(int height, int width, int size, Rng& rng) {
  if (size <= 0 || size > height || size > width)
    throw Error(ErrorKind::dimension, "crop size exceeds image");
  CropWindow w;
  w.size = size;
  w.top = rng.uniform_int(height - size + 1);
  w.left = rng.uniform_int(width - size + 1);
  return w;
}

template <typename T>
Tensor<T> crop(const Tensor<T>& img, const CropWindow& w) {
  return read_patch(img, PatchRef{0, w.top, w.left, w.size});
}

template <typename T>
Tensor<T> random_crop(const Tensor<T>& img, int size, Rng& rng) {
  return crop(img, pick_crop_window(img.height(), img.width(), size, rng));
}

template <typename T>
Tensor<T> random_crop(const Tensor<T>& img, int size, std::uint64_t seed) {
  Rng rng(seed);
  return random_crop(img, size, rng);
}

// Symmetric reflection pad on the bottom/right edges only (used to reach a
// multiple of the downsample factor without discarding pixels).
template <typename T>
Tensor<T> reflect_pad_to_multiple(const Tensor<T>& img, int multiple) {
  const int h = img.height(), w = img.width();
  const int ph = (multiple - h % multiple) % multiple;
  const int pw = (multiple - w % multiple) % multiple;
  if (ph == 0 && pw == 0) return img;
  if (ph >= h || pw >= w) throw Error(ErrorKind::parameter, "pad exceeds image size");
  Tensor<T> out(img.channels(), h + ph, w + pw);
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < h + ph; ++y) {
      const int sy = y < h ? y : 2 * h - 2 - y;
      for (int x = 0; x < w + pw; ++x) {
        const int sx = x < w ? x : 2 * w - 2 - x;
        out(c, y, x) = img(c, sy, sx);
      }
    }
  return out;
}

// Area-average downsampling. Non-multiple extents are reflection-padded first.
template <typename T>
Tensor<T> downsample(const Tensor<T>& img, int factor) {
  if (factor < 1) throw Error(ErrorKind::parameter, "downsample factor must be >= 1");
  if (factor == 1) return img;
  const Tensor<T> padded = reflect_pad_to_multiple(img, factor);
  const int oh = padded.height() / factor, ow = padded.width() / factor;
  Tensor<T> out(img.channels(), oh, ow);
  const T inv = T(1) / T(factor * factor);
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x)
        out(c, y, x) = padded.channel(c).block(y * factor, x * factor, factor, factor).sum() * inv;
  return out;
}

// Reflection pad on all sides so both extents become multiples of `multiple`;
// reports the offsets needed to undo the padding.
template <typename T>
Tensor<T> reflect_pad_to_multiple_centered(const Tensor<T>& img, int multiple, int& off_y, int& off_x) {
  const int h = img.height(), w = img.width();
  const int ph = (multiple - h % multiple) % multiple;
  const int pw = (multiple - w % multiple) % multiple;
  off_y = ph / 2;
  off_x = pw / 2;
  if (ph == 0 && pw == 0) return img;
  if (ph >= h || pw >= w) throw Error(ErrorKind::parameter, "pad exceeds image size");
  Tensor<T> out(img.channels(), h + ph, w + pw);
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < h + ph; ++y) {
      int sy = y - off_y;
      if (sy < 0) sy = -sy;
      if (sy >= h) sy = 2 * h - 2 - sy;
      for (int x = 0; x < w + pw; ++x) {
        int sx = x - off_x;
        if (sx < 0) sx = -sx;
        if (sx >= w) sx = 2 * w - 2 - sx;
        out(c, y, x) = img(c, sy, sx);
      }
    }
  return out;
}

}  // namespace anlcl
