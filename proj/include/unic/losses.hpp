// Copyright 2026 The UnicKit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cmath>
#include <sstream>

#include "unic/error.hpp"
#include "unic/geometry.hpp"
#include "unic/views.hpp"

namespace unic {

/// Confidence clamp applied before logarithms so saturated predictions keep
/// the loss bounded.
inline constexpr double kConfClamp = 1e-6;

struct LossWeights {
  double lambda_iou = 2.0;
  double lambda_focal = 2.0;
  double beta = 2.0;
};

struct LossBreakdown {
  double reg = 0.0;
  double giou = 0.0;
  double focal = 0.0;
  double total = 0.0;
};

namespace detail {

inline void check_weights(const LossWeights& w) {
  if (!std::isfinite(w.lambda_iou) || !std::isfinite(w.lambda_focal) ||
      !std::isfinite(w.beta) || w.lambda_iou < 0.0 || w.lambda_focal < 0.0 ||
      w.beta < 0.0) {
    throw DomainError("loss weights must be finite and non-negative");
  }
}

}  // namespace detail

/// l1 distance over the four center-format parameters.
inline double reg_loss(const CompBox& pred, const CompBox& gt) {
  return std::abs(pred.cx() - gt.cx()) + std::abs(pred.cy() - gt.cy()) +
         std::abs(pred.w() - gt.w()) + std::abs(pred.h() - gt.h());
}

/// Generalized IoU loss: 1 - (IoU - uncovered/enclosing) where "uncovered"
/// is the part of the smallest enclosing box not covered by the union.
/// Ranges over [0, 2]; exactly 0 for identical boxes.
inline double giou_loss(const CompBox& pred, const CompBox& gt) {
  const CornerBox cp = to_corners(pred);
  const CornerBox cg = to_corners(gt);
  const double area_p = area(cp);
  const double area_g = area(cg);
  const double inter =
      std::min({detail::intersection_area_corners(cp, cg), area_p, area_g});
  const double uni = area_p + area_g - inter;
  const double iou_v = inter / std::max(uni, kAreaFloor);
  const double enc = area(enclosing_corners(cp, cg));
  const double uncovered = (enc - uni) / std::max(enc, kAreaFloor);
  return 1.0 - (iou_v - uncovered);
}

/// Focal confidence loss with modulating factor |p - p_pred|^beta. The
/// factor uses the raw prediction so an exact hit costs exactly zero; only
/// the logarithm arguments are clamped to keep the loss finite.
inline double focal_loss(double p_pred, double p, double beta) {
  detail::check_unit_interval(p_pred, "p_pred");
  detail::check_unit_interval(p, "p");
  if (!std::isfinite(beta) || beta < 0.0) {
    throw DomainError("focal beta must be finite and non-negative");
  }
  const double ph = std::clamp(p_pred, kConfClamp, 1.0 - kConfClamp);
  const double ce = p * std::log(ph) + (1.0 - p) * std::log1p(-ph);
  return -std::pow(std::abs(p - p_pred), beta) * ce;
}

/// Literal transcription of the focal formula with prediction and target
/// swapped inside the logarithms. Kept only for reference: it is non-finite
/// for every binary target, which is why the conventional form above is the
/// one used everywhere.
inline double focal_loss_printed_form(double p_pred, double p, double beta) {
  detail::check_unit_interval(p_pred, "p_pred");
  detail::check_unit_interval(p, "p");
  return -std::pow(std::abs(p_pred - p), beta) *
         ((1.0 - p_pred) * std::log(1.0 - p) + p_pred * std::log(p));
}

/// Per-pair matching cost, identical to the per-pair loss: geometry terms
/// gated on the slot being a valid view, focal always present with target
/// p = 1 (valid) or p = 0 (empty).
inline double pair_cost(const PredictedView& pred, const PaddedGtSlot& gt,
                        const LossWeights& w) {
  detail::check_weights(w);
  if (!gt.valid()) {
    return w.lambda_focal * focal_loss(pred.confidence, 0.0, w.beta);
  }
  return reg_loss(pred.box, gt.box()) +
         w.lambda_iou * giou_loss(pred.box, gt.box()) +
         w.lambda_focal * focal_loss(pred.confidence, 1.0, w.beta);
}

/// Partial derivatives of pair_cost with respect to the prediction's
/// (cx, cy, w, h, confidence). `at_kink` reports that the evaluation point
/// sits exactly on a non-differentiability (l1 equality, touching or
/// coincident corners, clamp boundary); the returned values are then a
/// deterministic subgradient choice.
struct LossGradients {
  double d_cx = 0.0;
  double d_cy = 0.0;
  double d_w = 0.0;
  double d_h = 0.0;
  double d_conf = 0.0;
  bool at_kink = false;
};

namespace detail {

using Grad4 = std::array<double, 4>;  // d/d(cx, cy, w, h)

inline Grad4 operator+(const Grad4& a, const Grad4& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]};
}

inline Grad4 operator-(const Grad4& a, const Grad4& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]};
}

inline Grad4 operator*(double s, const Grad4& a) {
  return {s * a[0], s * a[1], s * a[2], s * a[3]};
}

/// d(giou_loss)/d(pred params). Works in corner space with indicator-gated
/// chain rule; sets *kink when a min/max argument tie or an exact touch of
/// the intersection makes the derivative one-sided.
inline Grad4 giou_gradient(const CompBox& pred, const CompBox& gt,
                           bool* kink) {
  const CornerBox p = to_corners(pred);
  const CornerBox g = to_corners(gt);

  const Grad4 dp_x0{1.0, 0.0, -0.5, 0.0};
  const Grad4 dp_x1{1.0, 0.0, 0.5, 0.0};
  const Grad4 dp_y0{0.0, 1.0, 0.0, -0.5};
  const Grad4 dp_y1{0.0, 1.0, 0.0, 0.5};
  const Grad4 zero{0.0, 0.0, 0.0, 0.0};

  if (p.x0() == g.x0() || p.x1() == g.x1() || p.y0() == g.y0() ||
      p.y1() == g.y1()) {
    *kink = true;
  }

  // Intersection window and its derivative (ties resolved toward the
  // ground-truth side, i.e. zero contribution).
  const double ix0 = std::max(p.x0(), g.x0());
  const double ix1 = std::min(p.x1(), g.x1());
  const double iy0 = std::max(p.y0(), g.y0());
  const double iy1 = std::min(p.y1(), g.y1());
  const Grad4 dix0 = p.x0() > g.x0() ? dp_x0 : zero;
  const Grad4 dix1 = p.x1() < g.x1() ? dp_x1 : zero;
  const Grad4 diy0 = p.y0() > g.y0() ? dp_y0 : zero;
  const Grad4 diy1 = p.y1() < g.y1() ? dp_y1 : zero;

  const double iw = ix1 - ix0;
  const double ih = iy1 - iy0;
  if (iw == 0.0 || ih == 0.0) *kink = true;

  double inter = 0.0;
  Grad4 dinter = zero;
  if (iw > 0.0 && ih > 0.0) {
    inter = iw * ih;
    dinter = ih * (dix1 - dix0) + iw * (diy1 - diy0);
  }

  const double aw = p.width();
  const double ah = p.height();
  const double area_p = aw * ah;
  const Grad4 darea_p = ah * (dp_x1 - dp_x0) + aw * (dp_y1 - dp_y0);

  const double uni = area_p + area(g) - inter;
  const Grad4 duni = darea_p - dinter;

  const double ex0 = std::min(p.x0(), g.x0());
  const double ex1 = std::max(p.x1(), g.x1());
  const double ey0 = std::min(p.y0(), g.y0());
  const double ey1 = std::max(p.y1(), g.y1());
  const Grad4 dex0 = p.x0() < g.x0() ? dp_x0 : zero;
  const Grad4 dex1 = p.x1() > g.x1() ? dp_x1 : zero;
  const Grad4 dey0 = p.y0() < g.y0() ? dp_y0 : zero;
  const Grad4 dey1 = p.y1() > g.y1() ? dp_y1 : zero;

  const double ew = ex1 - ex0;
  const double eh = ey1 - ey0;
  const double enc = ew * eh;
  const Grad4 denc = eh * (dex1 - dex0) + ew * (dey1 - dey0);

  // loss = 1 - inter/uni + (enc - uni)/enc
  const Grad4 diou = (1.0 / (uni * uni)) * (uni * dinter - inter * duni);
  const Grad4 dratio = (-1.0 / (enc * enc)) * (enc * duni - uni * denc);
  return dratio - diou;
}

/// d(focal_loss)/d(p_pred) for the conventional form used above.
inline double focal_gradient(double p_pred, double p, double beta,
                             bool* kink) {
  const double ph = std::clamp(p_pred, kConfClamp, 1.0 - kConfClamp);
  const bool clamped = p_pred < kConfClamp || p_pred > 1.0 - kConfClamp;
  if (p_pred == kConfClamp || p_pred == 1.0 - kConfClamp) *kink = true;

  const double delta = p - p_pred;
  if (delta == 0.0 && beta <= 1.0) *kink = true;

  const double ce = p * std::log(ph) + (1.0 - p) * std::log1p(-ph);
  const double mod = std::pow(std::abs(delta), beta);
  double dmod = 0.0;
  if (delta != 0.0) {
    dmod = -beta * std::pow(std::abs(delta), beta - 1.0) *
           (delta > 0.0 ? 1.0 : -1.0);
  }
  // delta == 0: for beta > 1 the factor is flat; for beta <= 1 the point was
  // flagged above and 0 is the midpoint subgradient choice.
  double dce = 0.0;
  if (!clamped) dce = p / ph - (1.0 - p) / (1.0 - ph);
  return -(dmod * ce + mod * dce);
}

}  // namespace detail

inline LossGradients loss_gradients(const PredictedView& pred,
                                    const PaddedGtSlot& gt,
                                    const LossWeights& w) {
  detail::check_weights(w);
  LossGradients g;
  bool kink = false;
  if (gt.valid()) {
    const CompBox& gb = gt.box();
    const double dp[4] = {pred.box.cx() - gb.cx(), pred.box.cy() - gb.cy(),
                          pred.box.w() - gb.w(), pred.box.h() - gb.h()};
    detail::Grad4 reg{};
    for (int i = 0; i < 4; ++i) {
      if (dp[i] == 0.0) {
        kink = true;  // l1 kink, midpoint subgradient 0
      } else {
        reg[i] = dp[i] > 0.0 ? 1.0 : -1.0;
      }
    }
    const detail::Grad4 giou = detail::giou_gradient(pred.box, gb, &kink);
    g.d_cx = reg[0] + w.lambda_iou * giou[0];
    g.d_cy = reg[1] + w.lambda_iou * giou[1];
    g.d_w = reg[2] + w.lambda_iou * giou[2];
    g.d_h = reg[3] + w.lambda_iou * giou[3];
    g.d_conf =
        w.lambda_focal * detail::focal_gradient(pred.confidence, 1.0, w.beta, &kink);
  } else {
    g.d_conf =
        w.lambda_focal * detail::focal_gradient(pred.confidence, 0.0, w.beta, &kink);
  }
  g.at_kink = kink;
  return g;
}

}  // namespace unic
