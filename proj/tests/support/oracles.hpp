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

// Independent oracles used by the test suites. Everything here derives
// expected values from first principles (counting, enumeration, finite
// differences) without touching the analytic implementation paths.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "unic/geometry.hpp"
#include "unic/losses.hpp"
#include "unic/rng.hpp"
#include "unic/views.hpp"

namespace oracles {

// ---------------------------------------------------------------------------
// Rasterization IoU oracle: discretize the pair's enclosing region onto a
// cells x cells grid and count cell centers. Counting is done per axis via
// index arithmetic, which is exactly equivalent to scanning every cell.
// ---------------------------------------------------------------------------

inline long long cells_covered(double a, double b, double lo, double delta,
                               long long cells) {
  // Indices i with a < lo + (i + 0.5) * delta < b.
  const double ia = (a - lo) / delta - 0.5;
  const double ib = (b - lo) / delta - 0.5;
  long long first = static_cast<long long>(std::floor(ia)) + 1;
  long long last = static_cast<long long>(std::ceil(ib)) - 1;
  first = std::max(first, 0LL);
  last = std::min(last, cells - 1);
  return std::max(0LL, last - first + 1);
}

inline double raster_iou(const unic::CompBox& a, const unic::CompBox& b,
                         long long cells = 4000) {
  const unic::CornerBox ca = unic::to_corners(a);
  const unic::CornerBox cb = unic::to_corners(b);
  const double lo_x = std::min(ca.x0(), cb.x0());
  const double hi_x = std::max(ca.x1(), cb.x1());
  const double lo_y = std::min(ca.y0(), cb.y0());
  const double hi_y = std::max(ca.y1(), cb.y1());
  const double dx = (hi_x - lo_x) / static_cast<double>(cells);
  const double dy = (hi_y - lo_y) / static_cast<double>(cells);

  const long long ax = cells_covered(ca.x0(), ca.x1(), lo_x, dx, cells);
  const long long ay = cells_covered(ca.y0(), ca.y1(), lo_y, dy, cells);
  const long long bx = cells_covered(cb.x0(), cb.x1(), lo_x, dx, cells);
  const long long by = cells_covered(cb.y0(), cb.y1(), lo_y, dy, cells);

  const double ix0 = std::max(ca.x0(), cb.x0());
  const double ix1 = std::min(ca.x1(), cb.x1());
  const double iy0 = std::max(ca.y0(), cb.y0());
  const double iy1 = std::min(ca.y1(), cb.y1());
  long long inter = 0;
  if (ix0 < ix1 && iy0 < iy1) {
    inter = cells_covered(ix0, ix1, lo_x, dx, cells) *
            cells_covered(iy0, iy1, lo_y, dy, cells);
  }
  const long long uni = ax * ay + bx * by - inter;
  if (uni <= 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// ---------------------------------------------------------------------------
// Exhaustive assignment oracle: enumerates permutations in lexicographic
// order and keeps the strictly best total, so equal-cost optima resolve to
// the lexicographically smallest permutation.
// ---------------------------------------------------------------------------

struct BruteForceAssignment {
  std::vector<std::size_t> sigma;
  double total = 0.0;
};

inline BruteForceAssignment brute_force_assignment(
    const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  BruteForceAssignment best;
  best.total = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += cost[i][perm[i]];
    if (total < best.total) {
      best.total = total;
      best.sigma = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

inline std::vector<std::vector<double>> cost_matrix(
    const std::vector<unic::PredictedView>& preds,
    const std::vector<unic::PaddedGtSlot>& slots, const unic::LossWeights& w) {
  std::vector<std::vector<double>> cost(preds.size(),
                                        std::vector<double>(slots.size()));
  for (std::size_t i = 0; i < preds.size(); ++i)
    for (std::size_t j = 0; j < slots.size(); ++j)
      cost[i][j] = unic::pair_cost(preds[i], slots[j], w);
  return cost;
}

// ---------------------------------------------------------------------------
// Central finite differences of pair_cost over (cx, cy, w, h, confidence).
// ---------------------------------------------------------------------------

inline std::array<double, 5> fd_pair_cost_gradient(
    const unic::PredictedView& pred, const unic::PaddedGtSlot& gt,
    const unic::LossWeights& w, double step = 1e-5) {
  const auto eval = [&](double cx, double cy, double bw, double bh,
                        double conf) {
    return unic::pair_cost(
        unic::PredictedView(unic::CompBox(cx, cy, bw, bh), conf), gt, w);
  };
  const double cx = pred.box.cx(), cy = pred.box.cy();
  const double bw = pred.box.w(), bh = pred.box.h();
  const double conf = pred.confidence;
  return {
      (eval(cx + step, cy, bw, bh, conf) - eval(cx - step, cy, bw, bh, conf)) /
          (2 * step),
      (eval(cx, cy + step, bw, bh, conf) - eval(cx, cy - step, bw, bh, conf)) /
          (2 * step),
      (eval(cx, cy, bw + step, bh, conf) - eval(cx, cy, bw - step, bh, conf)) /
          (2 * step),
      (eval(cx, cy, bw, bh + step, conf) - eval(cx, cy, bw, bh - step, conf)) /
          (2 * step),
      (eval(cx, cy, bw, bh, conf + step) - eval(cx, cy, bw, bh, conf - step)) /
          (2 * step),
  };
}

/// Distance of the evaluation point from the nearest non-differentiability
/// that matters for the finite-difference comparison: l1 parameter equality,
/// coincident corner coordinates, or touching/min-max ties of the
/// intersection and enclosing boxes.
inline double kink_distance(const unic::CompBox& pred, const unic::CompBox& gt) {
  const unic::CornerBox p = unic::to_corners(pred);
  const unic::CornerBox g = unic::to_corners(gt);
  double d = std::numeric_limits<double>::infinity();
  d = std::min(d, std::abs(pred.cx() - gt.cx()));
  d = std::min(d, std::abs(pred.cy() - gt.cy()));
  d = std::min(d, std::abs(pred.w() - gt.w()));
  d = std::min(d, std::abs(pred.h() - gt.h()));
  for (double v : {p.x0() - g.x0(), p.x1() - g.x1(), p.x0() - g.x1(),
                   p.x1() - g.x0(), p.y0() - g.y0(), p.y1() - g.y1(),
                   p.y0() - g.y1(), p.y1() - g.y0()}) {
    d = std::min(d, std::abs(v));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Random fixtures.
// ---------------------------------------------------------------------------

inline unic::CompBox random_box(unic::Rng& rng, double center_lo,
                                double center_hi, double size_lo,
                                double size_hi) {
  return unic::CompBox(rng.uniform(center_lo, center_hi),
                       rng.uniform(center_lo, center_hi),
                       rng.uniform(size_lo, size_hi),
                       rng.uniform(size_lo, size_hi));
}

/// Box pair whose corners stay inside [-1, 2]^2, for the raster oracle runs.
inline std::pair<unic::CompBox, unic::CompBox> random_box_pair_unit_region(
    unic::Rng& rng) {
  const auto one = [&] {
    const double w = rng.uniform(0.5, 1.5);
    const double h = rng.uniform(0.5, 1.5);
    const double cx = rng.uniform(-1.0 + w / 2, 2.0 - w / 2);
    const double cy = rng.uniform(-1.0 + h / 2, 2.0 - h / 2);
    return unic::CompBox(cx, cy, w, h);
  };
  return {one(), one()};
}

}  // namespace oracles
