// Copyright 2026 The DGR Lab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dgr/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace dgr {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png(const std::string& path, const Image8& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw IoError("write_png: only 1 or 3 channels supported, got " +
                  std::to_string(image.channels));
  }
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("write_png: cannot open " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("write_png: libpng init failed");
  }
  std::vector<png_byte> row(static_cast<std::size_t>(image.width * image.channels));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("write_png: libpng error writing " + path);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8,
               image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (Index i = 0; i < image.height; ++i) {
    for (Index j = 0; j < image.width; ++j)
      for (Index c = 0; c < image.channels; ++c)
        row[static_cast<std::size_t>(j * image.channels + c)] = image.at(c, i, j);
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image8 read_png(const std::string& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("read_png: cannot open " + path);
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError("read_png: not a PNG file: " + path);
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("read_png: libpng init failed");
  }
  Image8 image;
  std::vector<png_byte> row;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("read_png: corrupt PNG " + path);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  const auto color = png_get_color_type(png, info);
  const Index channels = (color == PNG_COLOR_TYPE_GRAY) ? 1 : 3;
  image = Image8(channels, png_get_image_height(png, info), png_get_image_width(png, info));
  row.resize(png_get_rowbytes(png, info));
  for (Index i = 0; i < image.height; ++i) {
    png_read_row(png, row.data(), nullptr);
    for (Index j = 0; j < image.width; ++j)
      for (Index c = 0; c < channels; ++c)
        image.at(c, i, j) = row[static_cast<std::size_t>(j * channels + c)];
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

Image8 to_image8(const Tensor<float>& images, Index b) {
  if (images.rank() != 4) throw ShapeError("to_image8: expected B x C x H x W");
  Image8 out(images.dim(1), images.dim(2), images.dim(3));
  const Index n = out.channels * out.height * out.width;
  const float* src = images.data().data() + b * n;
  for (Index i = 0; i < n; ++i) {
    const double v = std::clamp(static_cast<double>(src[i]), 0.0, 1.0);
    out.data[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return out;
}

Tensor<float> from_image8(const Image8& image) {
  Buffer<float> data(static_cast<Index>(image.data.size()));
  for (std::size_t i = 0; i < image.data.size(); ++i)
    data[static_cast<Index>(i)] = static_cast<float>(image.data[i]) / 255.0f;
  return Tensor<float>(Shape{1, image.channels, image.height, image.width}, std::move(data));
}

}  // namespace dgr
