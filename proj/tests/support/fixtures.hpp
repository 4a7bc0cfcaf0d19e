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

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "unic/geometry.hpp"
#include "unic/io.hpp"
#include "unic/metrics.hpp"
#include "unic/rng.hpp"
#include "unic/views.hpp"

namespace fixtures {

// ---------------------------------------------------------------------------
// Hand-computed two-image evaluation fixture.
//
// All boxes are axis-aligned squares; a horizontal shift of d against a box
// of width w gives IoU (w-d)/(w+d), so every IoU below is exact by hand:
//
// img1 ground truth (w=h=0.4), scores 5.0 .. 0.5, g5 is the quality-lowest
// and drops out of the candidate set when N=5 (6 views):
//   g0 (0.3,0.3) 5.0 | g1 (1.0,0.3) 4.0 | g2 (0.3,0.9) 3.0
//   g3 (1.0,0.9) 2.0 | g4 (0.3,1.5) 1.0 | g5 (1.0,1.5) 0.5
// img1 predictions (confidence order p0..p5; K=5 uses p0..p4):
//   p0 = g0                  conf .95  IoU 1.0      hit @.85  hit @.90
//   p1 = g1 shifted x+0.02   conf .90  IoU .38/.42  hit @.85  hit @.90
//   p2 = g2 shifted x+0.03   conf .85  IoU .37/.43  hit @.85  miss @.90
//   p3 = g5                  conf .80  IoU 1 vs g5: hit only when N=10
//   p4 (0.3,2.5)             conf .75  disjoint     miss
//   p5 = g0 shifted x+0.2    conf .70  not in top-5
// img1 hits: K=1 -> 1 | K=5: @.85 N=5 -> 3, N=10 -> 4; @.90 N=5 -> 2, N=10 -> 3
//
// img2 ground truth (w=h=0.5); h4 is a far-away low-score filler that no
// prediction touches, so N=5 and N=10 hit the same views while clones of
// this image still cover K=5:
//   h0 (0.5,0.5) 9.1 | h1 (1.4,0.5) 8.0 | h2 (0.5,1.4) 7.2
//   h3 (1.4,1.4) 6.5 | h4 (3.5,3.5) 0.1
// img2 predictions:
//   q0 = h0 shifted x+0.05   conf .9  IoU .45/.55 = 9/11   miss both eps
//   q1 = h1 shifted x+0.025  conf .8  IoU .475/.525        hit both
//   q2 = h2 shifted x+0.0375 conf .7  IoU .4625/.5375      hit @.85 only
//   q3 = h3 shifted x+0.1    conf .6  IoU 2/3              miss
//   q4 (2.5,2.5)             conf .5  disjoint             miss
// img2 hits: K=1 -> 0 | K=5: @.85 -> 2, @.90 -> 1 (any N)
//
// Acc_{K/N}@eps = (hits_img1 + hits_img2) / (2 * K):
//   1/5@0.85  = 0.5     1/5@0.90  = 0.5
//   1/10@0.85 = 0.5     1/10@0.90 = 0.5
//   5/5@0.85  = 0.5     5/5@0.90  = 0.3
//   5/10@0.85 = 0.6     5/10@0.90 = 0.4
// mean_iou  = (1 + 9/11) / 2 = 10/11
// mean_disp = (0 + (0.05 + 0.05)/4) / 2 = 0.0125
// ---------------------------------------------------------------------------

struct TwoImageFixture {
  unic::AnnotationSet annotations;
  unic::PredictionSet predictions;
  std::map<unic::AccKey, double> expected_acc;
  double expected_mean_iou = 0.0;
  double expected_mean_disp = 0.0;
};

inline TwoImageFixture two_image_fixture() {
  using unic::AnnotatedView;
  using unic::CompBox;
  using unic::PredictedView;

  TwoImageFixture f;
  f.annotations["img1"] = {
      AnnotatedView(CompBox(0.3, 0.3, 0.4, 0.4), 5.0),
      AnnotatedView(CompBox(1.0, 0.3, 0.4, 0.4), 4.0),
      AnnotatedView(CompBox(0.3, 0.9, 0.4, 0.4), 3.0),
      AnnotatedView(CompBox(1.0, 0.9, 0.4, 0.4), 2.0),
      AnnotatedView(CompBox(0.3, 1.5, 0.4, 0.4), 1.0),
      AnnotatedView(CompBox(1.0, 1.5, 0.4, 0.4), 0.5),
  };
  f.predictions["img1"] = {
      PredictedView(CompBox(0.3, 0.3, 0.4, 0.4), 0.95),
      PredictedView(CompBox(1.02, 0.3, 0.4, 0.4), 0.90),
      PredictedView(CompBox(0.33, 0.9, 0.4, 0.4), 0.85),
      PredictedView(CompBox(1.0, 1.5, 0.4, 0.4), 0.80),
      PredictedView(CompBox(0.3, 2.5, 0.4, 0.4), 0.75),
      PredictedView(CompBox(0.5, 0.3, 0.4, 0.4), 0.70),
  };
  f.annotations["img2"] = {
      AnnotatedView(CompBox(0.5, 0.5, 0.5, 0.5), 9.1),
      AnnotatedView(CompBox(1.4, 0.5, 0.5, 0.5), 8.0),
      AnnotatedView(CompBox(0.5, 1.4, 0.5, 0.5), 7.2),
      AnnotatedView(CompBox(1.4, 1.4, 0.5, 0.5), 6.5),
      AnnotatedView(CompBox(3.5, 3.5, 0.5, 0.5), 0.1),
  };
  f.predictions["img2"] = {
      PredictedView(CompBox(0.55, 0.5, 0.5, 0.5), 0.9),
      PredictedView(CompBox(1.425, 0.5, 0.5, 0.5), 0.8),
      PredictedView(CompBox(0.5375, 1.4, 0.5, 0.5), 0.7),
      PredictedView(CompBox(1.5, 1.4, 0.5, 0.5), 0.6),
      PredictedView(CompBox(2.5, 2.5, 0.5, 0.5), 0.5),
  };

  f.expected_acc[{1, 5, 0.85}] = 0.5;
  f.expected_acc[{1, 5, 0.90}] = 0.5;
  f.expected_acc[{1, 10, 0.85}] = 0.5;
  f.expected_acc[{1, 10, 0.90}] = 0.5;
  f.expected_acc[{5, 5, 0.85}] = 0.5;
  f.expected_acc[{5, 5, 0.90}] = 0.3;
  f.expected_acc[{5, 10, 0.85}] = 0.6;
  f.expected_acc[{5, 10, 0.90}] = 0.4;
  f.expected_mean_iou = 10.0 / 11.0;
  f.expected_mean_disp = 0.0125;
  return f;
}

/// Annotation set whose predictions are clones of the ground truth, with
/// confidences descending in quality order so the top-1 pairs line up.
inline std::pair<unic::AnnotationSet, unic::PredictionSet> clone_fixture() {
  const TwoImageFixture base = two_image_fixture();
  unic::PredictionSet preds;
  for (const auto& [id, views] : base.annotations) {
    std::vector<std::size_t> order(views.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return views[a].score > views[b].score;
    });
    std::vector<unic::PredictedView> cloned;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      cloned.emplace_back(views[order[rank]].box,
                          1.0 - 0.01 * static_cast<double>(rank));
    }
    preds[id] = std::move(cloned);
  }
  return {base.annotations, preds};
}

/// Random evaluation set for property runs: every image gets enough
/// predictions for the largest K and distinct confidences.
inline std::pair<unic::AnnotationSet, unic::PredictionSet> random_eval_set(
    unic::Rng& rng, std::size_t images = 4, std::size_t min_views = 3,
    std::size_t max_views = 8) {
  unic::AnnotationSet ann;
  unic::PredictionSet pred;
  for (std::size_t i = 0; i < images; ++i) {
    const std::string id = "img" + std::to_string(i);
    const std::size_t n_gt =
        min_views + static_cast<std::size_t>(rng.uniform() *
                                             double(max_views - min_views + 1));
    std::vector<unic::AnnotatedView> views;
    for (std::size_t v = 0; v < n_gt; ++v) {
      views.emplace_back(unic::CompBox(rng.uniform(-0.2, 1.2),
                                       rng.uniform(-0.2, 1.2),
                                       rng.uniform(0.2, 0.8),
                                       rng.uniform(0.2, 0.8)),
                         rng.uniform(0.0, 10.0));
    }
    const std::size_t n_pred =
        min_views + static_cast<std::size_t>(rng.uniform() *
                                             double(max_views - min_views + 1));
    std::vector<unic::PredictedView> preds;
    for (std::size_t v = 0; v < n_pred; ++v) {
      // Half the predictions hover near a ground-truth view so the hit
      // indicator is exercised at many IoU levels.
      if (v % 2 == 0) {
        const unic::AnnotatedView& target = views[v % views.size()];
        preds.emplace_back(
            unic::CompBox(target.box.cx() + rng.uniform(-0.05, 0.05),
                          target.box.cy() + rng.uniform(-0.05, 0.05),
                          target.box.w(), target.box.h()),
            rng.uniform(0.0, 1.0));
      } else {
        preds.emplace_back(unic::CompBox(rng.uniform(-0.2, 1.2),
                                         rng.uniform(-0.2, 1.2),
                                         rng.uniform(0.2, 0.8),
                                         rng.uniform(0.2, 0.8)),
                           rng.uniform(0.0, 1.0));
      }
    }
    ann[id] = std::move(views);
    pred[id] = std::move(preds);
  }
  return {ann, pred};
}

/// io-layer files from in-memory sets, for CLI fixtures.
inline unic::io::AnnotationFile annotation_file_from(
    const unic::AnnotationSet& set, int width = 640, int height = 480) {
  unic::io::AnnotationFile file;
  for (const auto& [id, views] : set) {
    file.images.push_back({id, width, height, views});
  }
  return file;
}

inline unic::io::PredictionFile prediction_file_from(
    const unic::PredictionSet& set) {
  unic::io::PredictionFile file;
  for (const auto& [id, views] : set) {
    file.images.push_back({id, views});
  }
  return file;
}

/// Deterministic annotation corpus for generator runs: views are in-frame
/// with varied sizes and scores.
inline unic::io::AnnotationFile synthetic_corpus(std::size_t images,
                                                 std::uint64_t seed) {
  unic::io::AnnotationFile file;
  for (std::size_t i = 0; i < images; ++i) {
    unic::Rng rng(unic::derive_seed(seed, "corpus" + std::to_string(i)));
    unic::io::AnnotationImage img;
    img.id = "image_" + std::to_string(i);
    img.width = 1024;
    img.height = 768;
    const std::size_t n_views = 2 + static_cast<std::size_t>(rng.uniform() * 5.0);
    for (std::size_t v = 0; v < n_views; ++v) {
      const double w = rng.uniform(0.25, 0.6);
      const double h = rng.uniform(0.25, 0.6);
      const double cx = rng.uniform(w / 2, 1.0 - w / 2);
      const double cy = rng.uniform(h / 2, 1.0 - h / 2);
      img.views.emplace_back(unic::CompBox(cx, cy, w, h),
                             rng.uniform(1.0, 5.0));
    }
    file.images.push_back(std::move(img));
  }
  return file;
}

}  // namespace fixtures
