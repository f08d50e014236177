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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dgr/tensor.hpp"

namespace dgr {

/// Planar 8-bit image, C x H x W. PNG files hold 1 (gray) or 3 (RGB) channels.
struct Image8 {
  Index channels = 0;
  Index height = 0;
  Index width = 0;
  std::vector<std::uint8_t> data;

  Image8() = default;
  Image8(Index c, Index h, Index w)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c * h * w), 0) {}

  std::uint8_t& at(Index c, Index i, Index j) {
    return data[static_cast<std::size_t>((c * height + i) * width + j)];
  }
  std::uint8_t at(Index c, Index i, Index j) const {
    return data[static_cast<std::size_t>((c * height + i) * width + j)];
  }
  bool operator==(const Image8&) const = default;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_png(const std::string& path, const Image8& image);
Image8 read_png(const std::string& path);

/// Quantizes batch item `b` of a B x C x H x W tensor (values in [0, 1]) to 8 bits.
Image8 to_image8(const Tensor<float>& images, Index b = 0);
/// 1 x C x H x W tensor with values v / 255.
Tensor<float> from_image8(const Image8& image);

}  // namespace dgr
