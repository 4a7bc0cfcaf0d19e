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
#include <exception>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "unic/error.hpp"
#include "unic/geometry.hpp"
#include "unic/views.hpp"

namespace unic {

struct MetricsConfig {
  std::vector<std::size_t> k_values{1, 5};
  std::vector<std::size_t> n_values{5, 10};
  std::vector<double> thresholds{0.90, 0.85};
};

struct AccKey {
  std::size_t k = 0;
  std::size_t n = 0;
  double eps = 0.0;

  friend bool operator<(const AccKey& a, const AccKey& b) {
    return std::tie(a.k, a.n, a.eps) < std::tie(b.k, b.n, b.eps);
  }
  friend bool operator==(const AccKey& a, const AccKey& b) {
    return a.k == b.k && a.n == b.n && a.eps == b.eps;
  }
};

struct MetricsReport {
  std::map<AccKey, double> acc;
  double mean_iou = 0.0;
  double mean_disp = 0.0;
  std::size_t image_count = 0;
};

/// Boundary displacement error: mean absolute difference of the four
/// normalized boundary coordinates (left/right x, top/bottom y).
inline double disp(const CompBox& pred, const CompBox& gt) {
  const CornerBox p = to_corners(pred);
  const CornerBox g = to_corners(gt);
  return (std::abs(p.x0() - g.x0()) + std::abs(p.x1() - g.x1()) +
          std::abs(p.y0() - g.y0()) + std::abs(p.y1() - g.y1())) /
         4.0;
}

namespace detail {

/// Fixed-order pairwise summation; deterministic regardless of how the
/// per-element values were produced.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

inline void parallel_for(std::size_t count, std::size_t threads,
                         const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::thread::hardware_concurrency();
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < count; i += threads) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (std::thread& th : pool) th.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Indices of the top-k predictions by confidence, ties to the lower index.
inline std::vector<std::size_t> top_k_predictions(
    const std::vector<PredictedView>& preds, std::size_t k) {
  std::vector<std::size_t> idx(preds.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return preds[a].confidence > preds[b].confidence;
  });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

/// Indices of the top-n annotated views by quality, ties to the lower index.
inline std::vector<std::size_t> top_n_ground_truth(
    const std::vector<AnnotatedView>& views, std::size_t n) {
  std::vector<std::size_t> idx(views.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return views[a].score > views[b].score;
  });
  idx.resize(std::min(n, idx.size()));
  return idx;
}

/// Number of the image's top-k predictions whose best IoU against the top-n
/// ground-truth candidate set reaches eps.
inline std::size_t count_hits(const std::vector<PredictedView>& preds,
                              const std::vector<AnnotatedView>& gts,
                              std::size_t k, std::size_t n, double eps) {
  const std::vector<std::size_t> top_preds = top_k_predictions(preds, k);
  const std::vector<std::size_t> candidates = top_n_ground_truth(gts, n);
  std::size_t hits = 0;
  for (std::size_t pi : top_preds) {
    double best = 0.0;
    for (std::size_t gi : candidates) {
      best = std::max(best, iou(preds[pi].box, gts[gi].box));
    }
    if (best >= eps) ++hits;
  }
  return hits;
}

inline void check_metric_params(std::size_t k, std::size_t n, double eps) {
  if (k == 0 || n == 0) throw DomainError("K and N must be at least 1");
  if (!(eps > 0.0) || eps > 1.0 || !std::isfinite(eps)) {
    std::ostringstream os;
    os << "threshold " << eps << " outside (0, 1]";
    throw DomainError(os.str());
  }
}

}  // namespace detail

/// Acc_{K/N}: the fraction of top-K-confidence predictions whose maximum IoU
/// against the image's top-N quality ground-truth views reaches eps,
/// averaged as one pool of T*K predictions. Images with fewer than n views
/// use all of their views as the candidate set.
inline double acc_k_n(const std::vector<std::vector<PredictedView>>& preds_per_image,
                      const std::vector<std::vector<AnnotatedView>>& gts_per_image,
                      std::size_t k, std::size_t n, double eps) {
  detail::check_metric_params(k, n, eps);
  if (preds_per_image.size() != gts_per_image.size()) {
    throw ShapeError("prediction and ground-truth image lists differ in size");
  }
  const std::size_t t = preds_per_image.size();
  if (t == 0) throw EvaluationError("no images to evaluate");

  std::vector<double> per_image(t, 0.0);
  for (std::size_t i = 0; i < t; ++i) {
    if (preds_per_image[i].size() < k) {
      std::ostringstream os;
      os << "image #" << i << " has " << preds_per_image[i].size()
         << " predictions, need at least " << k;
      throw EvaluationError(os.str());
    }
    if (gts_per_image[i].empty()) {
      std::ostringstream os;
      os << "image #" << i << " has no annotated views";
      throw EvaluationError(os.str());
    }
    per_image[i] = static_cast<double>(
        detail::count_hits(preds_per_image[i], gts_per_image[i], k, n, eps));
  }
  return detail::pairwise_sum(per_image) /
         (static_cast<double>(t) * static_cast<double>(k));
}

using AnnotationSet = std::map<std::string, std::vector<AnnotatedView>>;
using PredictionSet = std::map<std::string, std::vector<PredictedView>>;

/// Full evaluation run: Acc_{K/N} for every (K, N, eps) combination plus
/// mean IoU and mean Disp between each image's top-1 confidence prediction
/// and its top-1 quality ground-truth view. Images are processed in id
/// order with a fixed-order reduction, so the report does not depend on
/// input order or thread count.
inline MetricsReport evaluate(const AnnotationSet& annotations,
                              const PredictionSet& predictions,
                              const MetricsConfig& cfg,
                              std::size_t threads = 0) {
  for (std::size_t k : cfg.k_values)
    for (std::size_t n : cfg.n_values)
      for (double eps : cfg.thresholds) detail::check_metric_params(k, n, eps);
  if (cfg.k_values.empty() || cfg.n_values.empty() || cfg.thresholds.empty()) {
    throw DomainError("metrics config must list K, N and threshold values");
  }
  if (predictions.empty()) {
    throw EvaluationError("prediction set is empty");
  }

  std::vector<const std::string*> ids;
  ids.reserve(predictions.size());
  const std::size_t max_k =
      *std::max_element(cfg.k_values.begin(), cfg.k_values.end());
  for (const auto& [id, preds] : predictions) {
    const auto ann = annotations.find(id);
    if (ann == annotations.end()) {
      throw ReferenceError("prediction image '" + id +
                           "' not present in annotations");
    }
    if (ann->second.empty()) {
      throw EvaluationError("image '" + id + "' has no annotated views");
    }
    if (preds.size() < max_k) {
      std::ostringstream os;
      os << "image '" << id << "' has " << preds.size()
         << " predictions, need at least " << max_k;
      throw EvaluationError(os.str());
    }
    ids.push_back(&id);
  }

  struct Combo {
    std::size_t k, n;
    double eps;
  };
  std::vector<Combo> combos;
  for (std::size_t k : cfg.k_values)
    for (std::size_t n : cfg.n_values)
      for (double eps : cfg.thresholds) combos.push_back({k, n, eps});

  const std::size_t t = ids.size();
  std::vector<std::vector<double>> hit_counts(combos.size(),
                                              std::vector<double>(t, 0.0));
  std::vector<double> top1_iou(t, 0.0);
  std::vector<double> top1_disp(t, 0.0);

  detail::parallel_for(t, threads, [&](std::size_t i) {
    const std::vector<PredictedView>& preds = predictions.at(*ids[i]);
    const std::vector<AnnotatedView>& gts = annotations.at(*ids[i]);
    for (std::size_t c = 0; c < combos.size(); ++c) {
      hit_counts[c][i] = static_cast<double>(detail::count_hits(
          preds, gts, combos[c].k, combos[c].n, combos[c].eps));
    }
    const std::size_t p1 = detail::top_k_predictions(preds, 1).front();
    const std::size_t g1 = detail::top_n_ground_truth(gts, 1).front();
    top1_iou[i] = iou(preds[p1].box, gts[g1].box);
    top1_disp[i] = disp(preds[p1].box, gts[g1].box);
  });

  MetricsReport report;
  report.image_count = t;
  for (std::size_t c = 0; c < combos.size(); ++c) {
    report.acc[{combos[c].k, combos[c].n, combos[c].eps}] =
        detail::pairwise_sum(hit_counts[c]) /
        (static_cast<double>(t) * static_cast<double>(combos[c].k));
  }
  report.mean_iou = detail::pairwise_sum(top1_iou) / static_cast<double>(t);
  report.mean_disp = detail::pairwise_sum(top1_disp) / static_cast<double>(t);
  return report;
}

}  // namespace unic
