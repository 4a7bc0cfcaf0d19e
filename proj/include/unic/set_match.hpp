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
#include <limits>
#include <map>
#include <sstream>
#include <vector>

#include "unic/error.hpp"
#include "unic/losses.hpp"
#include "unic/views.hpp"

namespace unic {

/// Default padded set size N. The number of annotated views per image is
/// typically far smaller; callers that know their model's query count should
/// pass that instead.
inline constexpr std::size_t kDefaultPaddedSetSize = 90;

/// One-to-one mapping of prediction index -> padded ground-truth slot index,
/// together with the matched total cost. The cost is always the plain sum of
/// pair_cost over matched pairs, recomputable from scratch.
struct MatchAssignment {
  std::vector<std::size_t> sigma;
  double total_cost = 0.0;
};

/// Pads the ground-truth views with empty slots up to size n. Valid views
/// keep their order and occupy the leading slots.
inline std::vector<PaddedGtSlot> pad_ground_truth(
    const std::vector<AnnotatedView>& gt, std::size_t n) {
  if (n < gt.size()) {
    std::ostringstream os;
    os << "cannot pad " << gt.size() << " ground-truth views into " << n
       << " slots";
    throw CapacityError(os.str());
  }
  std::vector<PaddedGtSlot> slots;
  slots.reserve(n);
  for (const AnnotatedView& v : gt) slots.push_back(PaddedGtSlot::from_view(v));
  while (slots.size() < n) slots.push_back(PaddedGtSlot::empty());
  return slots;
}

namespace detail {

struct HungarianResult {
  std::vector<std::size_t> col_of_row;
  std::vector<double> row_potential;
  std::vector<double> col_potential;
};

/// O(n^3) shortest-augmenting-path assignment solver over a dense square
/// cost matrix. On return the potentials are dual-feasible
/// (cost[i][j] - u[i] - v[j] >= 0 up to rounding) and matched edges are
/// tight, which the lexicographic tie-break below relies on.
inline HungarianResult solve_assignment(
    const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // 1-indexed with column 0 as the staging slot.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      std::size_t j1 = 0;
      double delta = kInf;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  HungarianResult r;
  r.col_of_row.assign(n, 0);
  r.row_potential.assign(n, 0.0);
  r.col_potential.assign(n, 0.0);
  for (std::size_t j = 1; j <= n; ++j) r.col_of_row[p[j] - 1] = j - 1;
  for (std::size_t i = 1; i <= n; ++i) r.row_potential[i - 1] = u[i];
  for (std::size_t j = 1; j <= n; ++j) r.col_potential[j - 1] = v[j];
  return r;
}

/// Rewrites an optimal assignment into the lexicographically smallest
/// permutation among all cost-optimal ones. By complementary slackness every
/// optimal assignment is a perfect matching of the tight-edge graph
/// (reduced cost ~ 0), so the refinement fixes rows in ascending order to
/// their smallest tight column that still admits a perfect completion.
inline void lexicographic_refine(const std::vector<std::vector<double>>& cost,
                                 HungarianResult* hr) {
  const std::size_t n = cost.size();
  double scale = 1.0;
  for (const auto& row : cost)
    for (double c : row) scale = std::max(scale, std::abs(c));
  const double tol = 1e-9 * scale;

  std::vector<std::vector<std::size_t>> tight(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      // Matched edges are tight by construction; keep them in the graph even
      // if rounding pushed their reduced cost past the tolerance.
      if (cost[i][j] - hr->row_potential[i] - hr->col_potential[j] <= tol ||
          hr->col_of_row[i] == j) {
        tight[i].push_back(j);
      }
    }
  }

  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> row_of_col(n, kNone);
  std::vector<std::size_t>& col_of_row = hr->col_of_row;
  for (std::size_t i = 0; i < n; ++i) row_of_col[col_of_row[i]] = i;

  std::vector<bool> col_fixed(n, false);
  std::vector<bool> visited(n, false);

  // Kuhn-style augmenting search restricted to tight, unfixed columns.
  auto try_rematch = [&](auto&& self, std::size_t row) -> bool {
    for (std::size_t c : tight[row]) {
      if (col_fixed[c] || visited[c]) continue;
      visited[c] = true;
      if (row_of_col[c] == kNone || self(self, row_of_col[c])) {
        col_of_row[row] = c;
        row_of_col[c] = row;
        return true;
      }
    }
    return false;
  };

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : tight[i]) {
      if (col_fixed[j]) continue;
      if (col_of_row[i] == j) {
        col_fixed[j] = true;
        break;
      }
      // Tentatively steal column j and try to reroute its current row.
      const std::size_t displaced = row_of_col[j];
      const std::size_t old_col = col_of_row[i];
      col_of_row[i] = j;
      row_of_col[j] = i;
      row_of_col[old_col] = kNone;
      col_fixed[j] = true;
      bool ok = true;
      if (displaced != kNone) {
        std::fill(visited.begin(), visited.end(), false);
        ok = try_rematch(try_rematch, displaced);
      }
      if (ok) break;
      col_fixed[j] = false;
      col_of_row[i] = old_col;
      row_of_col[old_col] = i;
      row_of_col[j] = displaced;
    }
  }
}

}  // namespace detail

/// Cost-optimal bipartite assignment of predictions to padded slots under
/// pair_cost. Ties between equal-cost optima resolve to the
/// lexicographically smallest permutation so reports are reproducible.
inline MatchAssignment optimal_assignment(
    const std::vector<PredictedView>& preds,
    const std::vector<PaddedGtSlot>& slots, const LossWeights& w) {
  if (preds.size() != slots.size()) {
    std::ostringstream os;
    os << "prediction count " << preds.size() << " != slot count "
       << slots.size();
    throw ShapeError(os.str());
  }
  const std::size_t n = preds.size();
  MatchAssignment out;
  if (n == 0) return out;

  std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double c = pair_cost(preds[i], slots[j], w);
      if (!std::isfinite(c)) {
        std::ostringstream os;
        os << "non-finite pair cost at (" << i << ", " << j << ")";
        throw NumericError(os.str());
      }
      cost[i][j] = c;
    }
  }

  detail::HungarianResult hr = detail::solve_assignment(cost);
  detail::lexicographic_refine(cost, &hr);

  out.sigma = hr.col_of_row;
  for (std::size_t i = 0; i < n; ++i) out.total_cost += cost[i][out.sigma[i]];
  return out;
}

/// Composite loss over a matched instance. Regression and GIoU terms sum
/// only over pairs whose slot holds a valid view; the focal term covers all
/// pairs. Predictions matched to empty slots default to target 0 unless
/// `soft_labels` supplies a smooth label for that prediction index.
inline LossBreakdown composite_loss(
    const std::vector<PredictedView>& preds,
    const std::vector<PaddedGtSlot>& slots, const MatchAssignment& assignment,
    const LossWeights& w, const std::map<std::size_t, double>& soft_labels = {}) {
  detail::check_weights(w);
  const std::size_t n = preds.size();
  if (slots.size() != n || assignment.sigma.size() != n) {
    throw ShapeError("assignment does not cover predictions and slots");
  }
  std::vector<bool> seen(n, false);
  for (std::size_t j : assignment.sigma) {
    if (j >= n || seen[j]) throw ShapeError("assignment is not a bijection");
    seen[j] = true;
  }

  LossBreakdown b;
  for (std::size_t i = 0; i < n; ++i) {
    const PaddedGtSlot& slot = slots[assignment.sigma[i]];
    if (slot.valid()) {
      b.reg += reg_loss(preds[i].box, slot.box());
      b.giou += giou_loss(preds[i].box, slot.box());
      b.focal += focal_loss(preds[i].confidence, 1.0, w.beta);
    } else {
      double target = 0.0;
      if (auto it = soft_labels.find(i); it != soft_labels.end()) {
        detail::check_unit_interval(it->second, "soft label");
        target = it->second;
      }
      b.focal += focal_loss(preds[i].confidence, target, w.beta);
    }
  }
  b.total = b.reg + w.lambda_iou * b.giou + w.lambda_focal * b.focal;
  return b;
}

}  // namespace unic
