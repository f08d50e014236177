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

#include "dgr/nets.hpp"

#include <cmath>
#include <random>

#include "dgr/hash.hpp"
#include "dgr/ops.hpp"

namespace dgr {

namespace {

constexpr double kSlope = 0.2;

template <typename Scalar>
Conv2d<Scalar> make_conv(std::mt19937_64& rng, Index in, Index out, Index stride,
                         bool zero_weights = false, double weight_scale = 1.0) {
  constexpr Index k = 3;
  Conv2d<Scalar> conv;
  conv.stride = stride;
  Buffer<Scalar> w = Buffer<Scalar>::Zero(out * in * k * k);
  if (!zero_weights) {
    const double gain = std::sqrt(2.0 / (1.0 + kSlope * kSlope));
    const double bound = weight_scale * gain * std::sqrt(3.0 / static_cast<double>(in * k * k));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Index i = 0; i < w.size(); ++i) w[i] = static_cast<Scalar>(dist(rng));
  }
  conv.weight = Tensor<Scalar>(Shape{out, in, k, k}, std::move(w), true);
  conv.bias = Tensor<Scalar>::zeros(Shape{out}, true);
  return conv;
}

template <typename Scalar>
UNet<Scalar> make_unet(std::mt19937_64& rng, Index in, Index out, UNetWidths w, bool zero_head) {
  UNet<Scalar> u;
  u.enc0a = make_conv<Scalar>(rng, in, w.w0, 1);
  u.enc0b = make_conv<Scalar>(rng, w.w0, w.w0, 1);
  u.enc1 = make_conv<Scalar>(rng, w.w0, w.w1, 2);
  u.enc1b = make_conv<Scalar>(rng, w.w1, w.w1, 1);
  u.enc2 = make_conv<Scalar>(rng, w.w1, w.w2, 2);
  u.enc2b = make_conv<Scalar>(rng, w.w2, w.w2, 1);
  u.enc3 = make_conv<Scalar>(rng, w.w2, w.w3, 2);
  u.enc3b = make_conv<Scalar>(rng, w.w3, w.w3, 1);
  u.dec2 = make_conv<Scalar>(rng, w.w3 + w.w2, w.w2, 1);
  u.dec1 = make_conv<Scalar>(rng, w.w2 + w.w1, w.w1, 1);
  u.dec0 = make_conv<Scalar>(rng, w.w1 + w.w0, w.w0, 1);
  u.head = make_conv<Scalar>(rng, w.w0, out, 1, zero_head);
  return u;
}

template <typename Scalar>
Tensor<Scalar> norm_act(const Tensor<Scalar>& x) {
  return leaky_relu(instance_norm(x), Scalar(kSlope));
}

void require_divisible(const char* op, Index h, Index w, Index by) {
  if (h % by != 0 || w % by != 0) {
    throw ShapeError(std::string(op) + ": spatial size " + std::to_string(h) + "x" +
                     std::to_string(w) + " must be divisible by " + std::to_string(by));
  }
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> Conv2d<Scalar>::operator()(const Tensor<Scalar>& x) const {
  return conv2d(x, weight, bias, stride, weight.dim(2) / 2);
}

template <typename Scalar>
void Conv2d<Scalar>::append_params(const std::string& name, NamedParams<Scalar>& out) const {
  out.emplace_back(name + ".weight", weight);
  out.emplace_back(name + ".bias", bias);
}

template <typename Scalar>
Tensor<Scalar> UNet<Scalar>::forward(const Tensor<Scalar>& x) const {
  const auto s0 = norm_act(enc0b(norm_act(enc0a(x))));
  const auto s1 = norm_act(enc1b(norm_act(enc1(s0))));
  const auto s2 = norm_act(enc2b(norm_act(enc2(s1))));
  const auto s3 = norm_act(enc3b(norm_act(enc3(s2))));
  auto u = norm_act(dec2(concat_channels(upsample_nearest2x(s3), s2)));
  u = norm_act(dec1(concat_channels(upsample_nearest2x(u), s1)));
  u = norm_act(dec0(concat_channels(upsample_nearest2x(u), s0)));
  return head(u);
}

template <typename Scalar>
NamedParams<Scalar> UNet<Scalar>::named_parameters(const std::string& prefix) const {
  NamedParams<Scalar> out;
  enc0a.append_params(prefix + "enc0a", out);
  enc0b.append_params(prefix + "enc0b", out);
  enc1.append_params(prefix + "enc1", out);
  enc1b.append_params(prefix + "enc1b", out);
  enc2.append_params(prefix + "enc2", out);
  enc2b.append_params(prefix + "enc2b", out);
  enc3.append_params(prefix + "enc3", out);
  enc3b.append_params(prefix + "enc3b", out);
  dec2.append_params(prefix + "dec2", out);
  dec1.append_params(prefix + "dec1", out);
  dec0.append_params(prefix + "dec0", out);
  head.append_params(prefix + "head", out);
  return out;
}

template <typename Scalar>
NamedParams<Scalar> Discriminator<Scalar>::named_parameters() const {
  NamedParams<Scalar> out;
  c1.append_params("d.c1", out);
  c2.append_params("d.c2", out);
  c3.append_params("d.c3", out);
  c4.append_params("d.c4", out);
  return out;
}

template <typename Scalar>
NamedParams<Scalar> ModelBundle<Scalar>::named_parameters() const {
  NamedParams<Scalar> out = generator.named_parameters();
  for (auto& p : discriminator.named_parameters()) out.push_back(std::move(p));
  if (r1)
    for (auto& p : r1->named_parameters()) out.push_back(std::move(p));
  if (r2)
    for (auto& p : r2->named_parameters()) out.push_back(std::move(p));
  return out;
}

template <typename Scalar>
ModelBundle<Scalar> init_models(std::uint64_t seed, Index image_channels, NetworkSet which) {
  ModelBundle<Scalar> bundle;
  {
    std::mt19937_64 rng(mix_seed(seed, 0));
    bundle.generator.net =
        make_unet<Scalar>(rng, image_channels, image_channels, kGeneratorWidths, false);
  }
  {
    std::mt19937_64 rng(mix_seed(seed, 1));
    auto& d = bundle.discriminator;
    d.c1 = make_conv<Scalar>(rng, image_channels, 16, 2);
    d.c2 = make_conv<Scalar>(rng, 16, 32, 2);
    d.c3 = make_conv<Scalar>(rng, 32, 64, 2);
    // Small logit layer so an untrained D outputs about 0.5.
    d.c4 = make_conv<Scalar>(rng, 64, 1, 2, false, 0.1);
  }
  if (which.r1) {
    std::mt19937_64 rng(mix_seed(seed, 2));
    bundle.r1 = RegNet<Scalar>{make_unet<Scalar>(rng, 2 * image_channels, 2, kRegNetWidths, true),
                               "r1."};
  }
  if (which.r2) {
    std::mt19937_64 rng(mix_seed(seed, 3));
    bundle.r2 = RegNet<Scalar>{make_unet<Scalar>(rng, 2 * image_channels, 2, kRegNetWidths, true),
                               "r2."};
  }
  return bundle;
}

template <typename Scalar>
Tensor<Scalar> generator_forward(const Generator<Scalar>& g, const Tensor<Scalar>& x) {
  if (x.rank() != 4) throw ShapeError("generator_forward: expected B x C x H x W input");
  require_divisible("generator_forward", x.dim(2), x.dim(3), 8);
  return affine(tanh(g.net.forward(x)), Scalar(0.5), Scalar(0.5));
}

template <typename Scalar>
Tensor<Scalar> discriminator_forward(const Discriminator<Scalar>& d, const Tensor<Scalar>& img) {
  if (img.rank() != 4) throw ShapeError("discriminator_forward: expected B x C x H x W input");
  require_divisible("discriminator_forward", img.dim(2), img.dim(3), 16);
  const Scalar slope(kSlope);
  auto h = leaky_relu(d.c1(img), slope);
  h = leaky_relu(d.c2(h), slope);
  h = leaky_relu(d.c3(h), slope);
  return clamp(sigmoid(d.c4(h)), Scalar(1e-6), Scalar(1) - Scalar(1e-6));
}

template <typename Scalar>
DeformationField<Scalar> regnet_forward(const RegNet<Scalar>& r, const Tensor<Scalar>& a,
                                        const Tensor<Scalar>& b) {
  detail::require_same_shape("regnet_forward", a.shape(), b.shape());
  require_divisible("regnet_forward", a.dim(2), a.dim(3), 8);
  return DeformationField<Scalar>(r.net.forward(concat_channels(a, b)));
}

template <typename Scalar>
Index parameter_count(const NamedParams<Scalar>& params) {
  Index n = 0;
  for (const auto& [name, t] : params) n += t.size();
  return n;
}

template <typename Scalar>
std::uint64_t parameter_checksum(const NamedParams<Scalar>& params) {
  std::uint64_t h = kFnvOffset;
  for (const auto& [name, t] : params) {
    h = fnv1a(name, h);
    h = fnv1a(t.data().data(), static_cast<std::size_t>(t.size()) * sizeof(Scalar), h);
  }
  return h;
}

template <typename Scalar>
void set_trainable(const NamedParams<Scalar>& params, bool on) {
  for (auto [name, t] : params) t.set_requires_grad(on);
}

#define DGR_INSTANTIATE_NETS(S)                                                                  \
  template struct Conv2d<S>;                                                                     \
  template struct UNet<S>;                                                                       \
  template struct Discriminator<S>;                                                              \
  template struct ModelBundle<S>;                                                                \
  template ModelBundle<S> init_models<S>(std::uint64_t, Index, NetworkSet);                      \
  template Tensor<S> generator_forward(const Generator<S>&, const Tensor<S>&);                   \
  template Tensor<S> discriminator_forward(const Discriminator<S>&, const Tensor<S>&);           \
  template DeformationField<S> regnet_forward(const RegNet<S>&, const Tensor<S>&,                \
                                              const Tensor<S>&);                                 \
  template Index parameter_count(const NamedParams<S>&);                                         \
  template std::uint64_t parameter_checksum(const NamedParams<S>&);                              \
  template void set_trainable(const NamedParams<S>&, bool);

DGR_INSTANTIATE_NETS(float)
DGR_INSTANTIATE_NETS(double)

}  // namespace dgr
