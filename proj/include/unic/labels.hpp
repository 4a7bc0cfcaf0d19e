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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <sstream>
#include <vector>

#include "unic/error.hpp"
#include "unic/geometry.hpp"
#include "unic/views.hpp"

namespace unic {

/// Endpoints of the linear map from annotated quality score to soft label.
struct QualityGuidanceConfig {
  double s_lo = 0.0;
  double s_hi = 1.0;

  /// Convenience: endpoints from the observed score range of a dataset.
  static QualityGuidanceConfig from_scores(
      const std::vector<AnnotatedView>& views) {
    if (views.empty()) throw DomainError("no views to derive score range");
    QualityGuidanceConfig cfg;
    cfg.s_lo = views.front().score;
    cfg.s_hi = views.front().score;
    for (const AnnotatedView& v : views) {
      cfg.s_lo = std::min(cfg.s_lo, v.score);
      cfg.s_hi = std::max(cfg.s_hi, v.score);
    }
    return cfg;
  }
};

/// Exponential moving average of a flat parameter vector. Single-writer:
/// one updater at a time, readers snapshot between updates.
struct EmaState {
  std::vector<double> values;
  double decay = 0.999;
};

struct LabelSchedule {
  std::size_t switch_iteration = 0;
};

enum class LabelStrategy { kQualityGuidance, kSelfDistillation };

/// Soft label for an unmatched prediction: the quality score of its
/// maximum-IoU annotated neighbor (ties -> lowest index), mapped linearly
/// from [s_lo, s_hi] onto [0, 1] and clamped.
inline double quality_guided_label(const CompBox& pred_box,
                                   const std::vector<AnnotatedView>& annotated,
                                   const QualityGuidanceConfig& cfg) {
  if (annotated.empty()) {
    throw DomainError("quality guidance needs at least one annotated view");
  }
  if (!(cfg.s_hi > cfg.s_lo) || !std::isfinite(cfg.s_lo) ||
      !std::isfinite(cfg.s_hi)) {
    throw DomainError("quality guidance endpoints require s_hi > s_lo");
  }
  std::size_t best = 0;
  double best_iou = iou(pred_box, annotated[0].box);
  for (std::size_t i = 1; i < annotated.size(); ++i) {
    const double v = iou(pred_box, annotated[i].box);
    if (v > best_iou) {
      best_iou = v;
      best = i;
    }
  }
  const double s = annotated[best].score;
  return std::clamp((s - cfg.s_lo) / (cfg.s_hi - cfg.s_lo), 0.0, 1.0);
}

inline EmaState ema_update(const EmaState& state,
                           std::span<const double> current) {
  if (state.decay < 0.0 || state.decay > 1.0 || !std::isfinite(state.decay)) {
    throw DomainError("EMA decay must lie in [0, 1]");
  }
  if (current.size() != state.values.size()) {
    std::ostringstream os;
    os << "EMA update length " << current.size() << " != state length "
       << state.values.size();
    throw ShapeError(os.str());
  }
  EmaState next;
  next.decay = state.decay;
  next.values.resize(state.values.size());
  for (std::size_t i = 0; i < current.size(); ++i) {
    next.values[i] =
        state.decay * state.values[i] + (1.0 - state.decay) * current[i];
  }
  return next;
}

/// Self-distillation labels: each unmatched prediction adopts the EMA
/// teacher's confidence for the same query index.
inline std::map<std::size_t, double> self_distilled_labels(
    std::span<const double> teacher_confidences,
    const std::vector<std::size_t>& unmatched_indices) {
  std::map<std::size_t, double> labels;
  for (std::size_t idx : unmatched_indices) {
    if (idx >= teacher_confidences.size()) {
      std::ostringstream os;
      os << "unmatched index " << idx << " out of range for "
         << teacher_confidences.size() << " teacher confidences";
      throw DomainError(os.str());
    }
    const double c = teacher_confidences[idx];
    detail::check_unit_interval(c, "teacher confidence");
    labels[idx] = c;
  }
  return labels;
}

/// Quality guidance first, self-distillation from switch_iteration onward.
inline LabelStrategy strategy_for_iteration(const LabelSchedule& sched,
                                            std::size_t iter) {
  return iter < sched.switch_iteration ? LabelStrategy::kQualityGuidance
                                       : LabelStrategy::kSelfDistillation;
}

}  // namespace unic
