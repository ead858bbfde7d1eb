#include "anlcl/image_io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

namespace anlcl {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) throw Error(ErrorKind::io, "cannot open " + path.string());
  return f;
}

Image from_interleaved(const std::vector<unsigned char>& buf, int h, int w, int channels) {
  Image img(channels, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c)
        img(c, y, x) = float(buf[(std::size_t(y) * w + x) * channels + c]) / 255.0f;
  return img;
}

void png_error_fn(png_structp png, png_const_charp) {
  std::longjmp(*static_cast<std::jmp_buf*>(png_get_error_ptr(png)), 1);
}
void png_warn_fn(png_structp, png_const_charp) {}

Image load_png(std::FILE* f, const std::filesystem::path& path) {
  std::jmp_buf jb;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &jb, png_error_fn, png_warn_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::io, "libpng init failed");
  }
  std::vector<unsigned char> buf;
  int h = 0, w = 0, channels = 0;
  if (setjmp(jb)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::format, "undecodable PNG: " + path.string());
  }
  png_init_io(png, f);
  png_read_info(png, info);

  w = int(png_get_image_width(png, info));
  h = int(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  channels = int(png_get_channels(png, info));
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::format, "unsupported PNG channel count");
  }
  buf.resize(std::size_t(h) * w * channels);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = buf.data() + std::size_t(y) * w * channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return from_interleaved(buf, h, w, channels);
}

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jb;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  std::longjmp(reinterpret_cast<JpegErrorMgr*>(cinfo->err)->jb, 1);
}

Image load_jpeg(std::FILE* f, const std::filesystem::path& path) {
  jpeg_decompress_struct cinfo;
  JpegErrorMgr err;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_exit;
  if (setjmp(err.jb)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorKind::format, "undecodable JPEG: " + path.string());
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);

  const int w = int(cinfo.output_width);
  const int h = int(cinfo.output_height);
  const int channels = int(cinfo.output_components);
  std::vector<unsigned char> buf(std::size_t(h) * w * channels);
  while (cinfo.output_scanline < cinfo.output_height) {
    unsigned char* row = buf.data() + std::size_t(cinfo.output_scanline) * w * channels;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return from_interleaved(buf, h, w, channels);
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::io, "no such file: " + path.string());
  FilePtr f = open_file(path, "rb");

  unsigned char magic[8] = {};
  const std::size_t n = std::fread(magic, 1, sizeof(magic), f.get());
  std::rewind(f.get());

  static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  if (n >= 8 && std::memcmp(magic, png_sig, 8) == 0) return load_png(f.get(), path);
  if (n >= 2 && magic[0] == 0xff && magic[1] == 0xd8) return load_jpeg(f.get(), path);
  throw Error(ErrorKind::format, "not a PNG or JPEG: " + path.string());
}

void save_image(const std::filesystem::path& path, const Image& img) {
  if (img.channels() != 1 && img.channels() != 3)
    throw Error(ErrorKind::dimension, "save_image expects 1 or 3 channels");
  if (img.height() <= 0 || img.width() <= 0) throw Error(ErrorKind::dimension, "empty image");

  FilePtr f = open_file(path, "wb");
  std::jmp_buf jb;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &jb, png_error_fn, png_warn_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::io, "libpng init failed");
  }
  if (setjmp(jb)) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::io, "PNG write failed: " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, png_uint_32(img.width()), png_uint_32(img.height()), 8,
               img.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const int w = img.width(), h = img.height(), ch = img.channels();
  std::vector<unsigned char> row(std::size_t(w) * ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        const float v = std::min(1.0f, std::max(0.0f, img(c, y, x)));
        row[std::size_t(x) * ch + c] = (unsigned char)std::lround(v * 255.0f);
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace anlcl
