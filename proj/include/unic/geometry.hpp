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
#include <sstream>
#include <string>

#include "unic/error.hpp"

namespace unic {

inline constexpr double kAreaFloor = 1e-12;

/// Composition view box in center format (cx, cy, w, h). Coordinates are
/// normalized to the initial view; centers are unconstrained in sign and
/// magnitude so a view may extend beyond [0,1]^2. Sizes must be positive:
/// a zero-area view is meaningless and clamping would hide upstream bugs,
/// so bad sizes are rejected here at construction.
class CompBox {
 public:
  CompBox(double cx, double cy, double w, double h)
      : cx_(cx), cy_(cy), w_(w), h_(h) {
    if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(w) ||
        !std::isfinite(h) || !(w > 0.0) || !(h > 0.0)) {
      std::ostringstream os;
      os << "invalid CompBox (cx=" << cx << ", cy=" << cy << ", w=" << w
         << ", h=" << h << "): sizes must be finite and positive";
      throw DomainError(os.str());
    }
  }

  double cx() const { return cx_; }
  double cy() const { return cy_; }
  double w() const { return w_; }
  double h() const { return h_; }

  bool operator==(const CompBox& o) const {
    return cx_ == o.cx_ && cy_ == o.cy_ && w_ == o.w_ && h_ == o.h_;
  }

 private:
  double cx_, cy_, w_, h_;
};

/// Min/max-corner form, the internal representation for area arithmetic.
class CornerBox {
 public:
  CornerBox(double x0, double y0, double x1, double y1)
      : x0_(x0), y0_(y0), x1_(x1), y1_(y1) {
    if (!std::isfinite(x0) || !std::isfinite(y0) || !std::isfinite(x1) ||
        !std::isfinite(y1) || !(x0 < x1) || !(y0 < y1)) {
      std::ostringstream os;
      os << "invalid CornerBox (" << x0 << ", " << y0 << ", " << x1 << ", "
         << y1 << "): corners must be finite with x0 < x1 and y0 < y1";
      throw DomainError(os.str());
    }
  }

  double x0() const { return x0_; }
  double y0() const { return y0_; }
  double x1() const { return x1_; }
  double y1() const { return y1_; }

  double width() const { return x1_ - x0_; }
  double height() const { return y1_ - y0_; }

  bool operator==(const CornerBox& o) const {
    return x0_ == o.x0_ && y0_ == o.y0_ && x1_ == o.x1_ && y1_ == o.y1_;
  }

 private:
  double x0_, y0_, x1_, y1_;
};

inline CornerBox to_corners(const CompBox& b) {
  return CornerBox(b.cx() - b.w() / 2.0, b.cy() - b.h() / 2.0,
                   b.cx() + b.w() / 2.0, b.cy() + b.h() / 2.0);
}

inline CompBox from_corners(const CornerBox& c) {
  return CompBox((c.x0() + c.x1()) / 2.0, (c.y0() + c.y1()) / 2.0, c.width(),
                 c.height());
}

inline double area(const CornerBox& c) { return c.width() * c.height(); }

/// Box area, computed from the corner form. All geometry in this module works
/// in corner space so that identities like intersection(a,a) == area(a) hold
/// exactly in floating point, not just in exact arithmetic.
inline double area(const CompBox& b) { return area(to_corners(b)); }

namespace detail {

inline double intersection_area_corners(const CornerBox& a,
                                        const CornerBox& b) {
  const double iw = std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0());
  const double ih = std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

}  // namespace detail

inline double intersection_area(const CompBox& a, const CompBox& b) {
  const CornerBox ca = to_corners(a);
  const CornerBox cb = to_corners(b);
  const double raw = detail::intersection_area_corners(ca, cb);
  // min/max monotonicity already bounds the raw value by either box area in
  // floating point; the clamp keeps the contract explicit.
  return std::min({raw, area(ca), area(cb)});
}

inline double union_area(const CompBox& a, const CompBox& b) {
  return area(a) + area(b) - intersection_area(a, b);
}

inline double iou(const CompBox& a, const CompBox& b) {
  const double inter = intersection_area(a, b);
  const double uni = union_area(a, b);
  const double v = inter / std::max(uni, kAreaFloor);
  return std::clamp(v, 0.0, 1.0);
}

inline CornerBox enclosing_corners(const CornerBox& a, const CornerBox& b) {
  return CornerBox(std::min(a.x0(), b.x0()), std::min(a.y0(), b.y0()),
                   std::max(a.x1(), b.x1()), std::max(a.y1(), b.y1()));
}

/// Smallest axis-aligned box containing both inputs.
inline CompBox enclosing_box(const CompBox& a, const CompBox& b) {
  return from_corners(enclosing_corners(to_corners(a), to_corners(b)));
}

inline bool contains(const CornerBox& outer, const CornerBox& inner) {
  return outer.x0() <= inner.x0() && outer.y0() <= inner.y0() &&
         outer.x1() >= inner.x1() && outer.y1() >= inner.y1();
}

}  // namespace unic
