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

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "unic/error.hpp"
#include "unic/geometry.hpp"
#include "unic/rng.hpp"
#include "unic/views.hpp"

namespace unic {

/// Densely annotated full image: every view is expressed in full-image
/// normalized coordinates and lies inside [0,1]^2 (source crop datasets
/// annotate in-frame views only).
struct FullViewAnnotation {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::vector<AnnotatedView> views;
};

/// Parameters of the sampling rule: the init view is an aspect-preserving
/// sub-window with relative scale in [scale_min, scale_max], placed so that
/// the top-quality view keeps a visible-area fraction in
/// [visible_lo, visible_hi].
struct GenParams {
  double scale_min = 0.5;
  double scale_max = 0.8;
  double visible_lo = 0.4;
  double visible_hi = 0.9;
  int max_attempts = 1000;
};

/// One synthesized sample: the init view (full-image coordinates) plus all
/// ground-truth views re-expressed in init-view coordinates, where at least
/// one of them extends beyond [0,1]^2.
struct UicSample {
  std::string image_id;
  CornerBox init_view{0.0, 0.0, 1.0, 1.0};
  std::vector<AnnotatedView> gt_views;
};

namespace detail {

inline void check_gen_params(const GenParams& p) {
  const bool scale_ok = p.scale_min > 0.0 && p.scale_max < 1.0 &&
                        p.scale_min <= p.scale_max;
  const bool frac_ok = p.visible_lo > 0.0 && p.visible_hi < 1.0 &&
                       p.visible_lo <= p.visible_hi;
  if (!scale_ok || !frac_ok || p.max_attempts < 1) {
    std::ostringstream os;
    os << "invalid generation parameters: scale [" << p.scale_min << ", "
       << p.scale_max << "] must lie in (0,1), visible fraction ["
       << p.visible_lo << ", " << p.visible_hi
       << "] must lie in (0,1), max_attempts >= 1";
    throw DomainError(os.str());
  }
}

inline bool strictly_inside_unit(const CornerBox& b) {
  return b.x0() > 0.0 && b.y0() > 0.0 && b.x1() < 1.0 && b.y1() < 1.0;
}

/// Fraction of the view's area that falls inside the window.
inline double visible_fraction(const CornerBox& view, const CornerBox& window) {
  return intersection_area_corners(view, window) / area(view);
}

inline std::size_t top_quality_index(const std::vector<AnnotatedView>& views) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < views.size(); ++i) {
    if (views[i].score > views[best].score) best = i;
  }
  return best;
}

}  // namespace detail

/// Coordinate change from full-image coordinates into init-view coordinates:
/// translate by the window origin, scale by the inverse window size.
inline CompBox renormalize_box(const CompBox& box, const CornerBox& init) {
  return CompBox((box.cx() - init.x0()) / init.width(),
                 (box.cy() - init.y0()) / init.height(),
                 box.w() / init.width(), box.h() / init.height());
}

/// Inverse of renormalize_box.
inline CompBox denormalize_box(const CompBox& box, const CornerBox& init) {
  return CompBox(box.cx() * init.width() + init.x0(),
                 box.cy() * init.height() + init.y0(),
                 box.w() * init.width(), box.h() * init.height());
}

/// Rejection-samples an init view for one image. Acceptance requires the
/// window strictly inside the image, the top-quality view's visible fraction
/// within bounds, and at least one view crossing the window border (the
/// sample would otherwise not be an unbounded-composition instance).
inline UicSample generate_sample(const FullViewAnnotation& full,
                                 const GenParams& params,
                                 std::uint64_t rng_seed) {
  detail::check_gen_params(params);
  if (full.views.empty()) {
    throw DomainError("image '" + full.image_id + "' has no annotated views");
  }
  for (const AnnotatedView& v : full.views) {
    const CornerBox c = to_corners(v.box);
    if (c.x0() < 0.0 || c.y0() < 0.0 || c.x1() > 1.0 || c.y1() > 1.0) {
      throw DomainError("image '" + full.image_id +
                        "' has a view outside the full frame");
    }
  }

  const std::size_t top = detail::top_quality_index(full.views);
  const CornerBox top_view = to_corners(full.views[top].box);

  Rng rng(rng_seed);
  for (int attempt = 0; attempt < params.max_attempts; ++attempt) {
    const double s = rng.uniform(params.scale_min, params.scale_max);
    const double x0 = rng.uniform(0.0, 1.0 - s);
    const double y0 = rng.uniform(0.0, 1.0 - s);
    const CornerBox init(x0, y0, x0 + s, y0 + s);
    if (!detail::strictly_inside_unit(init)) continue;

    const double visible = detail::visible_fraction(top_view, init);
    if (visible < params.visible_lo || visible > params.visible_hi) continue;

    bool crosses = false;
    for (const AnnotatedView& v : full.views) {
      if (!contains(init, to_corners(v.box))) {
        crosses = true;
        break;
      }
    }
    if (!crosses) continue;

    UicSample sample;
    sample.image_id = full.image_id;
    sample.init_view = init;
    sample.gt_views.reserve(full.views.size());
    for (const AnnotatedView& v : full.views) {
      sample.gt_views.emplace_back(renormalize_box(v.box, init), v.score);
    }
    return sample;
  }

  std::ostringstream os;
  os << "no admissible init view for image '" << full.image_id << "' within "
     << params.max_attempts << " attempts";
  throw GenerationError(os.str());
}

}  // namespace unic
