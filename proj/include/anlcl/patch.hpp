#pragma once

#include <vector>

#include "anlcl/tensor.hpp"

namespace anlcl {

// A located square window into an image.
struct PatchRef {
  int image_id = 0;
  int top = 0;
  int left = 0;
  int size = 0;

  bool operator==(const PatchRef&) const = default;
};

inline void check_ref_bounds(const PatchRef& r, int height, int width) {
  if (r.size <= 0 || r.top < 0 || r.left < 0 || r.top + r.size > height || r.left + r.size > width)
    throw Error(ErrorKind::dimension, "patch ref out of bounds");
}

template <typename T>
Tensor<T> read_patch(const Tensor<T>& img, const PatchRef& ref) {
  check_ref_bounds(ref, img.height(), img.width());
  Tensor<T> p(img.channels(), ref.size, ref.size);
  for (int c = 0; c < img.channels(); ++c)
    p.channel(c) = img.channel(c).block(ref.top, ref.left, ref.size, ref.size);
  return p;
}

template <typename T>
struct PatchStack {
  std::vector<Tensor<T>> patches;
  std::vector<PatchRef> refs;

  std::size_t size() const { return patches.size(); }
  void push(Tensor<T> p, const PatchRef& r) {
    patches.push_back(std::move(p));
    refs.push_back(r);
  }
};

// Grid anchor positions: top/left in {0, stride, 2*stride, ...}, row-major.
inline std::vector<PatchRef> patch_grid(int height, int width, int size, int stride, int image_id = 0) {
  if (size <= 0 || stride <= 0) throw Error(ErrorKind::parameter, "patch size/stride must be positive");
  if (size > height || size > width) throw Error(ErrorKind::parameter, "patch size exceeds image");
  std::vector<PatchRef> refs;
  for (int top = 0; top + size <= height; top += stride)
    for (int left = 0; left + size <= width; left += stride)
      refs.push_back({image_id, top, left, size});
  return refs;
}

template <typename T>
PatchStack<T> extract_patches(const Tensor<T>& img, int size, int stride) {
  PatchStack<T> stack;
  for (const PatchRef& r : patch_grid(img.height(), img.width(), size, stride))
    stack.push(read_patch(img, r), r);
  return stack;
}

}  // namespace anlcl
