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

#include "dgr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dgr/ops.hpp"

namespace dgr {

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::baseline: return "baseline";
    case TrainMode::rnr: return "rnr";
    case TrainMode::dgr: return "dgr";
  }
  return "?";
}

TrainMode parse_mode(const std::string& name) {
  if (name == "baseline") return TrainMode::baseline;
  if (name == "rnr") return TrainMode::rnr;
  if (name == "dgr") return TrainMode::dgr;
  throw std::invalid_argument("unknown mode '" + name + "' (expected baseline, rnr or dgr)");
}

bool LossBreakdown::all_finite() const {
  for (double v : {l1, ssim, smooth_r1, adv, t1, t2, t1r, t2r, total_g_r1, total_r2, total_d})
    if (!std::isfinite(v)) return false;
  return true;
}

std::vector<double> ssim_gaussian_taps() {
  std::vector<double> taps(kSsimWindow);
  const int r = kSsimWindow / 2;
  double total = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    taps[i] = std::exp(-double((i - r) * (i - r)) / (2.0 * kSsimSigma * kSsimSigma));
    total += taps[i];
  }
  for (double& t : taps) t /= total;
  return taps;
}

namespace {

using Plane = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Valid-mode separable filtering of an h x w plane with the SSIM window.
Plane filter_valid(const Plane& in, const std::vector<double>& taps) {
  const Index k = static_cast<Index>(taps.size());
  const Index h = in.rows(), w = in.cols(), ho = h - k + 1, wo = w - k + 1;
  Plane rows = Plane::Zero(h, wo);
  for (Index i = 0; i < h; ++i)
    for (Index j = 0; j < wo; ++j) {
      double s = 0.0;
      for (Index t = 0; t < k; ++t) s += taps[t] * in(i, j + t);
      rows(i, j) = s;
    }
  Plane out = Plane::Zero(ho, wo);
  for (Index i = 0; i < ho; ++i)
    for (Index t = 0; t < k; ++t) out.row(i) += taps[t] * rows.row(i + t);
  return out;
}

// Adjoint of filter_valid: scatters an ho x wo map back onto h x w.
Plane filter_valid_adjoint(const Plane& m, const std::vector<double>& taps, Index h, Index w) {
  const Index k = static_cast<Index>(taps.size());
  const Index ho = m.rows(), wo = m.cols();
  Plane rows = Plane::Zero(h, wo);
  for (Index i = 0; i < ho; ++i)
    for (Index t = 0; t < k; ++t) rows.row(i + t) += taps[t] * m.row(i);
  Plane out = Plane::Zero(h, w);
  for (Index i = 0; i < h; ++i)
    for (Index j = 0; j < wo; ++j)
      for (Index t = 0; t < k; ++t) out(i, j + t) += taps[t] * rows(i, j);
  return out;
}

struct SsimStats {
  Plane mx, my, exx, eyy, exy;
};

template <typename Scalar>
Plane load_plane(const Tensor<Scalar>& t, Index plane, Index h, Index w) {
  Plane p(h, w);
  const Scalar* src = t.data().data() + plane * h * w;
  for (Index i = 0; i < h * w; ++i) p.data()[i] = static_cast<double>(src[i]);
  return p;
}

SsimStats ssim_stats(const Plane& x, const Plane& y, const std::vector<double>& taps) {
  return {filter_valid(x, taps), filter_valid(y, taps), filter_valid(x * x, taps),
          filter_valid(y * y, taps), filter_valid(x * y, taps)};
}

template <typename Scalar>
Tensor<Scalar> warp_or_pass(const Tensor<Scalar>& img, const DeformationField<Scalar>& field) {
  return field.tensor().defined() ? resample(img, field) : img;
}

template <typename Scalar>
Tensor<Scalar> neg_log_one_plus_ssim(const Tensor<Scalar>& a, const Tensor<Scalar>& b);

template <typename Scalar>
void require_finite(const char* what, const Tensor<Scalar>& t) {
  if (!t.data().allFinite()) throw std::domain_error(std::string(what) + ": non-finite input");
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> ssim_index(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require_same_shape("ssim_index", a.shape(), b.shape());
  detail::require_rank("ssim_index", a.shape(), 4);
  const Index planes = a.dim(0) * a.dim(1), h = a.dim(2), w = a.dim(3);
  if (h < kSsimWindow || w < kSsimWindow) {
    throw ShapeError("ssim_index: images " + shape_str(a.shape()) + " are smaller than the " +
                     std::to_string(kSsimWindow) + "x" + std::to_string(kSsimWindow) + " window");
  }
  const auto taps = ssim_gaussian_taps();
  const Index ho = h - kSsimWindow + 1, wo = w - kSsimWindow + 1;
  const double count = static_cast<double>(planes * ho * wo);
  double total = 0.0;
  for (Index p = 0; p < planes; ++p) {
    const auto s = ssim_stats(load_plane(a, p, h, w), load_plane(b, p, h, w), taps);
    const Plane vx = s.exx - s.mx * s.mx, vy = s.eyy - s.my * s.my, cxy = s.exy - s.mx * s.my;
    const Plane num = (2 * s.mx * s.my + kSsimC1) * (2 * cxy + kSsimC2);
    const Plane den = (s.mx * s.mx + s.my * s.my + kSsimC1) * (vx + vy + kSsimC2);
    total += (num / den).sum();
  }
  return make_result<Scalar>(
      "ssim_index", Shape{1}, Buffer<Scalar>::Constant(1, static_cast<Scalar>(total / count)),
      {a, b}, [planes, h, w, count, taps](detail::Node<Scalar>& out) {
        auto& pa = *out.parents[0];
        auto& pb = *out.parents[1];
        const double g = static_cast<double>(out.grad[0]) / count;
        const Tensor<Scalar> ta(out.parents[0]), tb(out.parents[1]);
        for (Index p = 0; p < planes; ++p) {
          const Plane x = load_plane(ta, p, h, w), y = load_plane(tb, p, h, w);
          const auto s = ssim_stats(x, y, taps);
          const Plane a1 = 2 * s.mx * s.my + kSsimC1;
          const Plane a2 = 2 * (s.exy - s.mx * s.my) + kSsimC2;
          const Plane b1 = s.mx * s.mx + s.my * s.my + kSsimC1;
          const Plane b2 = (s.exx - s.mx * s.mx) + (s.eyy - s.my * s.my) + kSsimC2;
          const Plane den = b1 * b2;
          const Plane ssim = a1 * a2 / den;
          // Partials w.r.t. the independent window statistics.
          const Plane d_exy = g * 2 * a1 / den;
          if (pa.requires_grad) {
            const Plane d_mx = g * (2 * s.my * (a2 - a1) - ssim * 2 * s.mx * (b2 - b1)) / den;
            const Plane d_exx = -g * ssim / b2;
            const Plane dx = filter_valid_adjoint(d_mx, taps, h, w) +
                             2 * x * filter_valid_adjoint(d_exx, taps, h, w) +
                             y * filter_valid_adjoint(d_exy, taps, h, w);
            auto& ga = pa.grad_buffer();
            for (Index i = 0; i < h * w; ++i) ga[p * h * w + i] += static_cast<Scalar>(dx.data()[i]);
          }
          if (pb.requires_grad) {
            const Plane d_my = g * (2 * s.mx * (a2 - a1) - ssim * 2 * s.my * (b2 - b1)) / den;
            const Plane d_eyy = -g * ssim / b2;
            const Plane dy = filter_valid_adjoint(d_my, taps, h, w) +
                             2 * y * filter_valid_adjoint(d_eyy, taps, h, w) +
                             x * filter_valid_adjoint(d_exy, taps, h, w);
            auto& gb = pb.grad_buffer();
            for (Index i = 0; i < h * w; ++i) gb[p * h * w + i] += static_cast<Scalar>(dy.data()[i]);
          }
        }
      });
}

namespace {
template <typename Scalar>
Tensor<Scalar> neg_log_one_plus_ssim(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  const auto s = ssim_index(a, b);
  return scale(log_clamped(clamp(affine(s, Scalar(1), Scalar(1)), Scalar(1e-6), Scalar(2))),
               Scalar(-1));
}
}  // namespace

template <typename Scalar>
Tensor<Scalar> pix2pix_l1(const Tensor<Scalar>& gx, const Tensor<Scalar>& y) {
  return l1_mean(gx, y);
}

template <typename Scalar>
Tensor<Scalar> corrected_l1(const Tensor<Scalar>& gx, const Tensor<Scalar>& y,
                            const DeformationField<Scalar>& field) {
  return l1_mean(resample(gx, field), y);
}

template <typename Scalar>
Tensor<Scalar> ssim_loss(const Tensor<Scalar>& gx, const Tensor<Scalar>& y,
                         const DeformationField<Scalar>& field) {
  return neg_log_one_plus_ssim(warp_or_pass(gx, field), y);
}

template <typename Scalar>
Tensor<Scalar> adv_generator(const Tensor<Scalar>& d_fake) {
  return scale(mean(log_clamped(d_fake)), Scalar(-1));
}

template <typename Scalar>
Tensor<Scalar> adv_discriminator(const Tensor<Scalar>& d_fake, const Tensor<Scalar>& d_real) {
  const auto fake_term = mean(log_clamped(affine(d_fake, Scalar(-1), Scalar(1))));
  const auto real_term = mean(log_clamped(d_real));
  return weighted_sum<Scalar>({{Scalar(-1), fake_term}, {Scalar(-1), real_term}});
}

template <typename Scalar>
Tensor<Scalar> t1_loss(const Tensor<Scalar>& /*x*/, const Tensor<Scalar>& gx,
                       const DeformationField<Scalar>& r2_field_self) {
  return l1_mean(resample(gx, r2_field_self), gx);
}

template <typename Scalar>
Tensor<Scalar> t2_loss(const Tensor<Scalar>& gx, const DeformationField<Scalar>& r2_field_cross,
                       const DeformationField<Scalar>& r1_field) {
  return l1_mean(resample(gx, r2_field_cross), resample(gx, r1_field));
}

template <typename Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> r2_smoothness(const DeformationField<Scalar>& field_self,
                                                        const DeformationField<Scalar>& field_cross) {
  return {smoothness_penalty(field_self), smoothness_penalty(field_cross)};
}

template <typename Scalar>
Tensor<Scalar> rnr_total(const RnrTerms<Scalar>& t, const LossWeights& w) {
  return weighted_sum<Scalar>({{Scalar(w.alpha), t.l1},
                               {Scalar(w.beta), t.ssim},
                               {Scalar(w.gamma), t.smooth},
                               {Scalar(w.delta), t.adv}});
}

template <typename Scalar>
GeneratorPhase<Scalar> objective_g_r1(const Batch<Scalar>& batch, const ModelBundle<Scalar>& bundle,
                                      const LossWeights& w, const ObjectiveOptions& opts) {
  require_finite("objective_g_r1 x", batch.x);
  require_finite("objective_g_r1 y", batch.y);
  GeneratorPhase<Scalar> out;
  out.gx = generator_forward(bundle.generator, batch.x);
  const auto d_fake = discriminator_forward(bundle.discriminator, out.gx);
  RnrTerms<Scalar> terms;
  terms.adv = adv_generator(d_fake);

  if (opts.mode == TrainMode::baseline) {
    out.r1_field = identity_field<Scalar>(batch.x.dim(0), batch.x.dim(2), batch.x.dim(3));
    terms.l1 = pix2pix_l1(out.gx, batch.y);
  } else {
    if (!bundle.r1) throw std::invalid_argument("objective_g_r1: mode requires R1");
    out.r1_field = regnet_forward(*bundle.r1, out.gx, batch.y);
    const auto warped = resample(out.gx, out.r1_field);
    terms.l1 = l1_mean(warped, batch.y);
    terms.ssim = neg_log_one_plus_ssim(warped, batch.y);
    terms.smooth = smoothness_penalty(out.r1_field);
  }

  Tensor<Scalar> t1;
  if (opts.mode == TrainMode::dgr) {
    if (!bundle.r2) throw std::invalid_argument("objective_g_r1: dgr mode requires R2");
    auto field = regnet_forward(*bundle.r2, batch.x, out.gx);
    if (opts.t1_detach_field) field = field.detach();
    t1 = t1_loss(batch.x, out.gx, field);
  }
  out.total = weighted_sum<Scalar>({{Scalar(w.alpha), terms.l1},
                                    {Scalar(w.beta), terms.ssim},
                                    {Scalar(w.gamma), terms.smooth},
                                    {Scalar(w.delta), terms.adv},
                                    {Scalar(w.epsilon), t1}});

  auto& bd = out.breakdown;
  bd.l1 = terms.l1.item();
  bd.adv = terms.adv.item();
  if (terms.ssim.defined()) bd.ssim = terms.ssim.item();
  if (terms.smooth.defined()) bd.smooth_r1 = terms.smooth.item();
  if (t1.defined()) bd.t1 = t1.item();
  bd.total_g_r1 = out.total.item();
  return out;
}

template <typename Scalar>
std::pair<Tensor<Scalar>, LossBreakdown> objective_r2(const Batch<Scalar>& batch,
                                                      const ModelBundle<Scalar>& bundle,
                                                      const LossWeights& w,
                                                      const Tensor<Scalar>& gx_in,
                                                      const DeformationField<Scalar>& r1_in) {
  if (!bundle.r1 || !bundle.r2) throw std::invalid_argument("objective_r2: requires R1 and R2");
  Tensor<Scalar> gx = gx_in;
  DeformationField<Scalar> r1_field = r1_in;
  {
    NoGradGuard no_grad;
    if (!gx.defined()) gx = generator_forward(bundle.generator, batch.x);
    if (!r1_field.tensor().defined()) r1_field = regnet_forward(*bundle.r1, gx, batch.y);
  }
  gx = gx.detach();
  r1_field = r1_field.detach();

  const auto field_self = regnet_forward(*bundle.r2, batch.x, gx);
  const auto field_cross = regnet_forward(*bundle.r2, batch.x, batch.y);
  const auto t1 = t1_loss(batch.x, gx, field_self);
  const auto t2 = t2_loss(gx, field_cross, r1_field);
  const auto [t1r, t2r] = r2_smoothness(field_self, field_cross);
  const Scalar g(w.gamma);
  auto total = weighted_sum<Scalar>({{Scalar(1), t1}, {g, t1r}, {Scalar(1), t2}, {g, t2r}});

  LossBreakdown bd;
  bd.t1 = t1.item();
  bd.t2 = t2.item();
  bd.t1r = t1r.item();
  bd.t2r = t2r.item();
  bd.total_r2 = total.item();
  return {total, bd};
}

template <typename Scalar>
Tensor<Scalar> objective_d(const Batch<Scalar>& batch, const ModelBundle<Scalar>& bundle,
                           const Tensor<Scalar>& gx) {
  const auto d_fake = discriminator_forward(bundle.discriminator, gx.detach());
  const auto d_real = discriminator_forward(bundle.discriminator, batch.y);
  return adv_discriminator(d_fake, d_real);
}

#define DGR_INSTANTIATE_LOSSES(S)                                                               \
  template Tensor<S> ssim_index(const Tensor<S>&, const Tensor<S>&);                            \
  template Tensor<S> pix2pix_l1(const Tensor<S>&, const Tensor<S>&);                            \
  template Tensor<S> corrected_l1(const Tensor<S>&, const Tensor<S>&, const DeformationField<S>&); \
  template Tensor<S> ssim_loss(const Tensor<S>&, const Tensor<S>&, const DeformationField<S>&); \
  template Tensor<S> adv_generator(const Tensor<S>&);                                           \
  template Tensor<S> adv_discriminator(const Tensor<S>&, const Tensor<S>&);                     \
  template Tensor<S> t1_loss(const Tensor<S>&, const Tensor<S>&, const DeformationField<S>&);    \
  template Tensor<S> t2_loss(const Tensor<S>&, const DeformationField<S>&,                      \
                             const DeformationField<S>&);                                       \
  template std::pair<Tensor<S>, Tensor<S>> r2_smoothness(const DeformationField<S>&,            \
                                                         const DeformationField<S>&);           \
  template Tensor<S> rnr_total(const RnrTerms<S>&, const LossWeights&);                         \
  template GeneratorPhase<S> objective_g_r1(const Batch<S>&, const ModelBundle<S>&,             \
                                            const LossWeights&, const ObjectiveOptions&);       \
  template std::pair<Tensor<S>, LossBreakdown> objective_r2(                                    \
      const Batch<S>&, const ModelBundle<S>&, const LossWeights&, const Tensor<S>&,             \
      const DeformationField<S>&);                                                              \
  template Tensor<S> objective_d(const Batch<S>&, const ModelBundle<S>&, const Tensor<S>&);

DGR_INSTANTIATE_LOSSES(float)
DGR_INSTANTIATE_LOSSES(double)

}  // namespace dgr
