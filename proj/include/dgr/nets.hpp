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
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dgr/tensor.hpp"
#include "dgr/warp.hpp"

namespace dgr {

template <typename Scalar>
using NamedParams = std::vector<std::pair<std::string, Tensor<Scalar>>>;

/// 2-D convolution layer with "same" padding for odd kernels.
template <typename Scalar>
struct Conv2d {
  Tensor<Scalar> weight;  // out x in x k x k
  Tensor<Scalar> bias;    // out
  Index stride = 1;

  Tensor<Scalar> operator()(const Tensor<Scalar>& x) const;
  void append_params(const std::string& name, NamedParams<Scalar>& out) const;
};

/// Encoder/decoder widths of the four resolution levels (full, /2, /4, /8).
struct UNetWidths {
  Index w0, w1, w2, w3;
};

/// Small U-Net: two convs per encoder level, stride-2 downsampling, nearest
/// upsampling with skip concatenation, instance norm + leaky ReLU(0.2).
template <typename Scalar>
struct UNet {
  Conv2d<Scalar> enc0a, enc0b, enc1, enc1b, enc2, enc2b, enc3, enc3b, dec2, dec1, dec0, head;

  /// Returns the raw head output (no final activation).
  Tensor<Scalar> forward(const Tensor<Scalar>& x) const;
  NamedParams<Scalar> named_parameters(const std::string& prefix) const;
};

/// Generator G: 3-channel image in [0, 1] via (tanh + 1) / 2.
template <typename Scalar>
struct Generator {
  UNet<Scalar> net;
  NamedParams<Scalar> named_parameters() const { return net.named_parameters("g."); }
};

/// Patch discriminator D: four stride-2 convs, sigmoid map of size H/16 x W/16.
template <typename Scalar>
struct Discriminator {
  Conv2d<Scalar> c1, c2, c3, c4;
  NamedParams<Scalar> named_parameters() const;
};

/// Registration network: U-Net over the concatenated pair emitting a 2-channel
/// displacement field. The head is zero-initialized, so a fresh network yields
/// the identity field.
template <typename Scalar>
struct RegNet {
  UNet<Scalar> net;
  std::string prefix;
  NamedParams<Scalar> named_parameters() const { return net.named_parameters(prefix); }
};

template <typename Scalar>
struct ModelBundle {
  Generator<Scalar> generator;
  Discriminator<Scalar> discriminator;
  std::optional<RegNet<Scalar>> r1;
  std::optional<RegNet<Scalar>> r2;

  /// All parameters in a fixed order: g, d, r1, r2.
  NamedParams<Scalar> named_parameters() const;
};

/// Which networks init_models creates. G and D always exist.
struct NetworkSet {
  bool r1 = true;
  bool r2 = true;
};

inline constexpr UNetWidths kGeneratorWidths{16, 32, 64, 96};
inline constexpr UNetWidths kRegNetWidths{16, 32, 32, 64};

/// Deterministic initialization: Kaiming-uniform conv weights (leaky ReLU
/// slope 0.2), zero biases, zero RegNet heads. Each network draws from its own
/// stream derived from `seed`, so G and D are identical across network sets.
template <typename Scalar>
ModelBundle<Scalar> init_models(std::uint64_t seed, Index image_channels, NetworkSet which = {});

/// G(x). H and W must be divisible by 8.
template <typename Scalar>
Tensor<Scalar> generator_forward(const Generator<Scalar>& g, const Tensor<Scalar>& x);

/// D(img), clamped to [1e-6, 1 - 1e-6]. H and W must be divisible by 16.
template <typename Scalar>
Tensor<Scalar> discriminator_forward(const Discriminator<Scalar>& d, const Tensor<Scalar>& img);

/// R(a, b): field registering `a` onto `b`. Shapes must match; H, W divisible by 8.
template <typename Scalar>
DeformationField<Scalar> regnet_forward(const RegNet<Scalar>& r, const Tensor<Scalar>& a,
                                        const Tensor<Scalar>& b);

template <typename Scalar>
Index parameter_count(const NamedParams<Scalar>& params);

/// Order-sensitive FNV-1a hash over parameter names and raw bytes.
template <typename Scalar>
std::uint64_t parameter_checksum(const NamedParams<Scalar>& params);

/// Toggles requires_grad on every tensor in `params`.
template <typename Scalar>
void set_trainable(const NamedParams<Scalar>& params, bool on);

}  // namespace dgr
