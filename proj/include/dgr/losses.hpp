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

#include <string>
#include <vector>

#include "dgr/nets.hpp"
#include "dgr/tensor.hpp"
#include "dgr/warp.hpp"

namespace dgr {

/// Weights of the composite objectives.
///   alpha   corrected L1
///   beta    SSIM term
///   gamma   every smoothness term (R1 and both R2 fields)
///   delta   adversarial generator term
///   epsilon position-consistency term T1 in the G/R1 objective
struct LossWeights {
  double alpha = 10.0;
  double beta = 0.5;
  double gamma = 10.0;
  double delta = 0.1;
  double epsilon = 5.0;

  bool valid() const { return alpha >= 0 && beta >= 0 && gamma >= 0 && delta >= 0 && epsilon >= 0; }
  bool operator==(const LossWeights&) const = default;
};

enum class TrainMode { baseline, rnr, dgr };

std::string to_string(TrainMode mode);
TrainMode parse_mode(const std::string& name);

/// Per-step scalar record. total_g_r1 / total_r2 / total_d are the objectives
/// of the three update phases; terms a mode does not use stay 0.
struct LossBreakdown {
  double l1 = 0, ssim = 0, smooth_r1 = 0, adv = 0, t1 = 0, t2 = 0, t1r = 0, t2r = 0;
  double total_g_r1 = 0, total_r2 = 0, total_d = 0;

  bool all_finite() const;
};

// SSIM: 11x11 Gaussian window (sigma 1.5), C1 = 0.01^2, C2 = 0.03^2, L = 1,
// evaluated at valid window positions only, averaged over batch and channels.
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 1e-4;
inline constexpr double kSsimC2 = 9e-4;

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
std::vector<double> ssim_gaussian_taps();

template <typename Scalar>
Tensor<Scalar> ssim_index(const Tensor<Scalar>& a, const Tensor<Scalar>& b);

/// Eq-1 style pixel loss: mean |G(x) - y|.
template <typename Scalar>
Tensor<Scalar> pix2pix_l1(const Tensor<Scalar>& gx, const Tensor<Scalar>& y);

/// mean |resample(G(x), field) - y|
template <typename Scalar>
Tensor<Scalar> corrected_l1(const Tensor<Scalar>& gx, const Tensor<Scalar>& y,
                            const DeformationField<Scalar>& field);

/// -log(clamp(1 + ssim(resample(G(x), field), y), 1e-6, 2))
template <typename Scalar>
Tensor<Scalar> ssim_loss(const Tensor<Scalar>& gx, const Tensor<Scalar>& y,
                         const DeformationField<Scalar>& field);

/// Non-saturating generator loss: -mean log D(G(x)).
template <typename Scalar>
Tensor<Scalar> adv_generator(const Tensor<Scalar>& d_fake);

/// -mean[log(1 - D(G(x)))] - mean[log D(y)].
template <typename Scalar>
Tensor<Scalar> adv_discriminator(const Tensor<Scalar>& d_fake, const Tensor<Scalar>& d_real);

/// mean |resample(G(x), R2(x, G(x))) - G(x)|
template <typename Scalar>
Tensor<Scalar> t1_loss(const Tensor<Scalar>& x, const Tensor<Scalar>& gx,
                       const DeformationField<Scalar>& r2_field_self);

/// mean |resample(G(x), R2(x, y)) - resample(G(x), R1(G(x), y))|
template <typename Scalar>
Tensor<Scalar> t2_loss(const Tensor<Scalar>& gx, const DeformationField<Scalar>& r2_field_cross,
                       const DeformationField<Scalar>& r1_field);

template <typename Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> r2_smoothness(const DeformationField<Scalar>& field_self,
                                                        const DeformationField<Scalar>& field_cross);

/// Scalar components of the registration-for-noise-reduction objective.
template <typename Scalar>
struct RnrTerms {
  Tensor<Scalar> l1, ssim, smooth, adv;
};

/// alpha*l1 + beta*ssim + gamma*smooth + delta*adv; undefined terms are skipped.
template <typename Scalar>
Tensor<Scalar> rnr_total(const RnrTerms<Scalar>& terms, const LossWeights& w);

template <typename Scalar>
struct Batch {
  Tensor<Scalar> x;  // input stain, B x C x H x W
  Tensor<Scalar> y;  // (possibly misaligned) target stain
};

/// Forward products of the G/R1 phase, reused (detached) by later phases.
template <typename Scalar>
struct GeneratorPhase {
  Tensor<Scalar> total;
  LossBreakdown breakdown;
  Tensor<Scalar> gx;                   // G(x), attached to the graph
  DeformationField<Scalar> r1_field;   // R1(G(x), y); identity in baseline mode
};

struct ObjectiveOptions {
  TrainMode mode = TrainMode::dgr;
  /// Stop the T1 gradient at R2's output field instead of routing it through
  /// R2's forward pass into G.
  bool t1_detach_field = false;
};

/// G/R1 objective. baseline: alpha*L1 + delta*adv. rnr: the RNR sum.
/// dgr: RNR + epsilon*T1. Gradients reach only parameters that currently
/// require grad; the caller freezes R2 and D.
template <typename Scalar>
GeneratorPhase<Scalar> objective_g_r1(const Batch<Scalar>& batch, const ModelBundle<Scalar>& bundle,
                                      const LossWeights& w, const ObjectiveOptions& opts);

/// R2 objective: T1 + gamma*T1R + T2 + gamma*T2R. When `gx` / `r1_field` are
/// supplied they are used as constants; otherwise G and R1 run without grad.
template <typename Scalar>
std::pair<Tensor<Scalar>, LossBreakdown> objective_r2(const Batch<Scalar>& batch,
                                                      const ModelBundle<Scalar>& bundle,
                                                      const LossWeights& w,
                                                      const Tensor<Scalar>& gx = {},
                                                      const DeformationField<Scalar>& r1_field = {});

/// Discriminator objective on detached G(x) and the target.
template <typename Scalar>
Tensor<Scalar> objective_d(const Batch<Scalar>& batch, const ModelBundle<Scalar>& bundle,
                           const Tensor<Scalar>& gx);

}  // namespace dgr
