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

#include <cmath>
#include <optional>
#include <sstream>
#include <utility>

#include "unic/error.hpp"
#include "unic/geometry.hpp"

namespace unic {

namespace detail {

inline void check_unit_interval(double v, const char* name) {
  if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
    std::ostringstream os;
    os << name << " = " << v << " outside [0, 1]";
    throw DomainError(os.str());
  }
}

}  // namespace detail

/// Ground-truth composition view: box plus annotated quality score.
struct AnnotatedView {
  AnnotatedView(CompBox box_in, double score_in)
      : box(std::move(box_in)), score(score_in) {
    if (!std::isfinite(score)) {
      throw DomainError("AnnotatedView score must be finite");
    }
  }

  CompBox box;
  double score;
};

/// Predicted composition view: box plus confidence in [0, 1].
struct PredictedView {
  PredictedView(CompBox box_in, double confidence_in)
      : box(std::move(box_in)), confidence(confidence_in) {
    if (!std::isfinite(confidence) || confidence < 0.0 || confidence > 1.0) {
      std::ostringstream os;
      os << "PredictedView confidence " << confidence << " outside [0, 1]";
      throw DomainError(os.str());
    }
  }

  CompBox box;
  double confidence;
};

/// One slot of the padded ground-truth set: either a valid view (target
/// label p = 1, quality score attached) or the empty marker (p = 0).
class PaddedGtSlot {
 public:
  static PaddedGtSlot empty() { return PaddedGtSlot(); }

  static PaddedGtSlot from_view(const AnnotatedView& v) {
    PaddedGtSlot s;
    s.box_ = v.box;
    s.quality_ = v.score;
    return s;
  }

  bool valid() const { return box_.has_value(); }
  double p() const { return valid() ? 1.0 : 0.0; }

  const CompBox& box() const {
    if (!box_) throw DomainError("empty ground-truth slot has no box");
    return *box_;
  }

  std::optional<double> quality() const { return quality_; }

 private:
  PaddedGtSlot() = default;

  std::optional<CompBox> box_;
  std::optional<double> quality_;
};

}  // namespace unic
