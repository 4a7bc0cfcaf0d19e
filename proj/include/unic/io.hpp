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
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "unic/datagen.hpp"
#include "unic/error.hpp"
#include "unic/geometry.hpp"
#include "unic/losses.hpp"
#include "unic/metrics.hpp"
#include "unic/set_match.hpp"
#include "unic/version.hpp"
#include "unic/views.hpp"

// File-format layer: every interchange format is JSON with floating-point
// values rounded to 9 significant digits before writing, which keeps output
// bytes stable across platforms while round-tripping within the tolerances
// used anywhere in the tool.
namespace unic::io {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

struct AnnotationImage {
  std::string id;
  int width = 0;
  int height = 0;
  std::vector<AnnotatedView> views;
};

struct AnnotationFile {
  std::vector<AnnotationImage> images;
};

struct PredictionImage {
  std::string id;
  std::vector<PredictedView> views;
};

struct PredictionFile {
  std::vector<PredictionImage> images;
};

struct UicHeader {
  std::uint64_t seed = 0;
  GenParams params;
  std::string tool_name = kToolName;
  std::string tool_version = kToolVersion;
};

struct SkippedImage {
  std::string image_id;
  std::string reason;
};

struct UicFile {
  UicHeader header;
  std::vector<UicSample> samples;
  std::vector<SkippedImage> skipped;
};

enum class FileKind { kAnnotations, kPredictions, kUic, kReport, kMatch, kUnknown };

inline double round9(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return std::strtod(buf, nullptr);
}

inline std::string format9(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

/// FNV-1a 64-bit digest of a byte string, hex-encoded. Used to pin report
/// provenance to exact input bytes.
inline std::string fnv1a64_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error("failed writing '" + path + "'");
}

/// Parses JSON, converting nlohmann's byte offset into a line/column message.
inline json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t limit = std::min(e.byte, text.size());
    for (std::size_t i = 0; i < limit; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream os;
    os << origin << ": malformed JSON at line " << line << " column " << col
       << ": " << e.what();
    throw SchemaError(os.str());
  }
}

namespace detail {

inline const json& require_key(const json& j, const char* key,
                               const std::string& ctx) {
  if (!j.is_object() || !j.contains(key)) {
    throw SchemaError(ctx + ": missing required key '" + key + "'");
  }
  return j.at(key);
}

inline std::string require_string(const json& j, const char* key,
                                  const std::string& ctx) {
  const json& v = require_key(j, key, ctx);
  if (!v.is_string()) throw SchemaError(ctx + ": '" + key + "' must be a string");
  return v.get<std::string>();
}

inline double require_number(const json& j, const char* key,
                             const std::string& ctx) {
  const json& v = require_key(j, key, ctx);
  if (!v.is_number()) throw SchemaError(ctx + ": '" + key + "' must be a number");
  return v.get<double>();
}

inline int require_int(const json& j, const char* key, const std::string& ctx) {
  const json& v = require_key(j, key, ctx);
  if (!v.is_number_integer()) {
    throw SchemaError(ctx + ": '" + key + "' must be an integer");
  }
  return v.get<int>();
}

inline CompBox parse_box(const json& v, const std::string& ctx) {
  if (!v.is_array() || v.size() != 4) {
    throw SchemaError(ctx + ": 'box' must be an array [cx, cy, w, h]");
  }
  double f[4];
  for (std::size_t i = 0; i < 4; ++i) {
    if (!v[i].is_number()) {
      throw SchemaError(ctx + ": box coordinates must be numbers");
    }
    f[i] = v[i].get<double>();
  }
  try {
    return CompBox(f[0], f[1], f[2], f[3]);
  } catch (const DomainError& e) {
    throw SchemaError(ctx + ": " + e.what());
  }
}

inline json boxed(const CompBox& b) {
  return json::array({round9(b.cx()), round9(b.cy()), round9(b.w()),
                      round9(b.h())});
}

}  // namespace detail

inline AnnotationFile parse_annotation_file(const json& root,
                                            const std::string& origin) {
  AnnotationFile file;
  const json& images = detail::require_key(root, "images", origin);
  if (!images.is_array()) throw SchemaError(origin + ": 'images' must be an array");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string ctx = origin + ": images[" + std::to_string(i) + "]";
    AnnotationImage img;
    img.id = detail::require_string(images[i], "id", ctx);
    if (!seen.insert(img.id).second) {
      throw SchemaError(ctx + ": duplicate image id '" + img.id + "'");
    }
    img.width = detail::require_int(images[i], "width", ctx);
    img.height = detail::require_int(images[i], "height", ctx);
    if (img.width <= 0 || img.height <= 0) {
      throw SchemaError(ctx + " ('" + img.id + "'): width and height must be positive");
    }
    const json& views = detail::require_key(images[i], "views", ctx);
    if (!views.is_array() || views.empty()) {
      throw SchemaError(ctx + " ('" + img.id + "'): needs at least one view");
    }
    for (std::size_t v = 0; v < views.size(); ++v) {
      const std::string vctx = ctx + ".views[" + std::to_string(v) + "]";
      const CompBox box =
          detail::parse_box(detail::require_key(views[v], "box", vctx), vctx);
      const double score = detail::require_number(views[v], "score", vctx);
      if (!std::isfinite(score)) {
        throw SchemaError(vctx + ": score must be finite");
      }
      img.views.emplace_back(box, score);
    }
    file.images.push_back(std::move(img));
  }
  return file;
}

inline PredictionFile parse_prediction_file(const json& root,
                                            const std::string& origin) {
  PredictionFile file;
  const json& images = detail::require_key(root, "images", origin);
  if (!images.is_array()) throw SchemaError(origin + ": 'images' must be an array");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string ctx = origin + ": images[" + std::to_string(i) + "]";
    PredictionImage img;
    img.id = detail::require_string(images[i], "id", ctx);
    if (!seen.insert(img.id).second) {
      throw SchemaError(ctx + ": duplicate image id '" + img.id + "'");
    }
    const json& views = detail::require_key(images[i], "views", ctx);
    if (!views.is_array()) {
      throw SchemaError(ctx + " ('" + img.id + "'): 'views' must be an array");
    }
    for (std::size_t v = 0; v < views.size(); ++v) {
      const std::string vctx = ctx + ".views[" + std::to_string(v) + "]";
      const CompBox box =
          detail::parse_box(detail::require_key(views[v], "box", vctx), vctx);
      const double conf = detail::require_number(views[v], "confidence", vctx);
      if (!std::isfinite(conf) || conf < 0.0 || conf > 1.0) {
        std::ostringstream os;
        os << vctx << ": confidence " << conf << " outside [0, 1]";
        throw SchemaError(os.str());
      }
      img.views.emplace_back(box, conf);
    }
    file.images.push_back(std::move(img));
  }
  return file;
}

inline UicFile parse_uic_file(const json& root, const std::string& origin) {
  UicFile file;
  const json& gen = detail::require_key(root, "generator", origin);
  const std::string gctx = origin + ": generator";
  file.header.seed =
      static_cast<std::uint64_t>(detail::require_number(gen, "seed", gctx));
  const json& scale = detail::require_key(gen, "scale_range", gctx);
  const json& frac = detail::require_key(gen, "visible_frac", gctx);
  if (!scale.is_array() || scale.size() != 2 || !frac.is_array() ||
      frac.size() != 2) {
    throw SchemaError(gctx + ": scale_range and visible_frac must be [lo, hi]");
  }
  file.header.params.scale_min = scale[0].get<double>();
  file.header.params.scale_max = scale[1].get<double>();
  file.header.params.visible_lo = frac[0].get<double>();
  file.header.params.visible_hi = frac[1].get<double>();
  file.header.params.max_attempts = detail::require_int(gen, "max_attempts", gctx);
  if (gen.contains("tool")) {
    file.header.tool_name = gen.at("tool").get<std::string>();
  }
  if (gen.contains("version")) {
    file.header.tool_version = gen.at("version").get<std::string>();
  }

  const json& samples = detail::require_key(root, "samples", origin);
  if (!samples.is_array()) throw SchemaError(origin + ": 'samples' must be an array");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string ctx = origin + ": samples[" + std::to_string(i) + "]";
    UicSample s;
    s.image_id = detail::require_string(samples[i], "image_id", ctx);
    const json& iv = detail::require_key(samples[i], "init_view", ctx);
    if (!iv.is_array() || iv.size() != 4) {
      throw SchemaError(ctx + ": 'init_view' must be [x0, y0, x1, y1]");
    }
    try {
      s.init_view = CornerBox(iv[0].get<double>(), iv[1].get<double>(),
                              iv[2].get<double>(), iv[3].get<double>());
    } catch (const DomainError& e) {
      throw SchemaError(ctx + ": " + e.what());
    }
    const json& views = detail::require_key(samples[i], "gt_views", ctx);
    if (!views.is_array() || views.empty()) {
      throw SchemaError(ctx + " ('" + s.image_id + "'): needs at least one view");
    }
    for (std::size_t v = 0; v < views.size(); ++v) {
      const std::string vctx = ctx + ".gt_views[" + std::to_string(v) + "]";
      const CompBox box =
          detail::parse_box(detail::require_key(views[v], "box", vctx), vctx);
      const double score = detail::require_number(views[v], "score", vctx);
      if (!std::isfinite(score)) {
        throw SchemaError(vctx + ": score must be finite");
      }
      s.gt_views.emplace_back(box, score);
    }
    file.samples.push_back(std::move(s));
  }
  if (root.contains("skipped")) {
    const json& skipped = root.at("skipped");
    if (!skipped.is_array()) throw SchemaError(origin + ": 'skipped' must be an array");
    for (std::size_t i = 0; i < skipped.size(); ++i) {
      const std::string ctx = origin + ": skipped[" + std::to_string(i) + "]";
      file.skipped.push_back({detail::require_string(skipped[i], "image_id", ctx),
                              detail::require_string(skipped[i], "reason", ctx)});
    }
  }
  return file;
}

inline AnnotationFile load_annotation_file(const std::string& path) {
  return parse_annotation_file(parse_json_text(read_text_file(path), path), path);
}

inline PredictionFile load_prediction_file(const std::string& path) {
  return parse_prediction_file(parse_json_text(read_text_file(path), path), path);
}

inline UicFile load_uic_file(const std::string& path) {
  return parse_uic_file(parse_json_text(read_text_file(path), path), path);
}

// ---------------------------------------------------------------------------
// Writers
// ---------------------------------------------------------------------------

inline ordered_json annotation_to_json(const AnnotationFile& file) {
  ordered_json root;
  root["images"] = ordered_json::array();
  for (const AnnotationImage& img : file.images) {
    ordered_json views = ordered_json::array();
    for (const AnnotatedView& v : img.views) {
      views.push_back({{"box", detail::boxed(v.box)}, {"score", round9(v.score)}});
    }
    root["images"].push_back({{"id", img.id},
                              {"width", img.width},
                              {"height", img.height},
                              {"views", std::move(views)}});
  }
  return root;
}

inline ordered_json prediction_to_json(const PredictionFile& file) {
  ordered_json root;
  root["images"] = ordered_json::array();
  for (const PredictionImage& img : file.images) {
    ordered_json views = ordered_json::array();
    for (const PredictedView& v : img.views) {
      views.push_back(
          {{"box", detail::boxed(v.box)}, {"confidence", round9(v.confidence)}});
    }
    root["images"].push_back({{"id", img.id}, {"views", std::move(views)}});
  }
  return root;
}

inline ordered_json uic_to_json(const UicFile& file) {
  ordered_json root;
  root["generator"] = {
      {"tool", file.header.tool_name},
      {"version", file.header.tool_version},
      {"seed", file.header.seed},
      {"scale_range", {round9(file.header.params.scale_min),
                       round9(file.header.params.scale_max)}},
      {"visible_frac", {round9(file.header.params.visible_lo),
                        round9(file.header.params.visible_hi)}},
      {"max_attempts", file.header.params.max_attempts}};
  root["samples"] = ordered_json::array();
  for (const UicSample& s : file.samples) {
    ordered_json views = ordered_json::array();
    for (const AnnotatedView& v : s.gt_views) {
      views.push_back({{"box", detail::boxed(v.box)}, {"score", round9(v.score)}});
    }
    root["samples"].push_back(
        {{"image_id", s.image_id},
         {"init_view",
          {round9(s.init_view.x0()), round9(s.init_view.y0()),
           round9(s.init_view.x1()), round9(s.init_view.y1())}},
         {"gt_views", std::move(views)}});
  }
  root["skipped"] = ordered_json::array();
  for (const SkippedImage& s : file.skipped) {
    root["skipped"].push_back({{"image_id", s.image_id}, {"reason", s.reason}});
  }
  return root;
}

/// Acc table key, e.g. "5/10@0.85".
inline std::string acc_key_string(const AccKey& key) {
  std::ostringstream os;
  os << key.k << "/" << key.n << "@" << format9(key.eps);
  return os.str();
}

struct ReportInputs {
  std::string annotations_path;
  std::string annotations_digest;
  std::string predictions_path;
  std::string predictions_digest;
};

inline ordered_json report_to_json(const MetricsReport& report,
                                   const MetricsConfig& cfg,
                                   const ReportInputs& inputs,
                                   const std::optional<std::string>& stamp) {
  ordered_json root;
  root["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
  root["config"] = {{"k", cfg.k_values},
                    {"n", cfg.n_values},
                    {"thresholds", ordered_json::array()}};
  for (double t : cfg.thresholds) root["config"]["thresholds"].push_back(round9(t));
  root["inputs"] = {{"annotations",
                     {{"path", inputs.annotations_path},
                      {"fnv1a64", inputs.annotations_digest}}},
                    {"predictions",
                     {{"path", inputs.predictions_path},
                      {"fnv1a64", inputs.predictions_digest}}}};
  ordered_json acc = ordered_json::object();
  for (const auto& [key, value] : report.acc) {
    acc[acc_key_string(key)] = round9(value);
  }
  root["acc"] = std::move(acc);
  root["mean_iou"] = round9(report.mean_iou);
  root["mean_disp"] = round9(report.mean_disp);
  root["image_count"] = report.image_count;
  if (stamp) root["timestamp"] = *stamp;
  return root;
}

struct MatchImageResult {
  std::string id;
  MatchAssignment assignment;
  LossBreakdown loss;
};

inline ordered_json match_results_to_json(
    const std::vector<MatchImageResult>& results, const LossWeights& w,
    std::size_t n) {
  ordered_json root;
  root["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
  root["config"] = {{"lambda_iou", round9(w.lambda_iou)},
                    {"lambda_focal", round9(w.lambda_focal)},
                    {"beta", round9(w.beta)},
                    {"n", n}};
  root["images"] = ordered_json::array();
  for (const MatchImageResult& r : results) {
    root["images"].push_back(
        {{"id", r.id},
         {"sigma", r.assignment.sigma},
         {"total_cost", round9(r.assignment.total_cost)},
         {"loss",
          {{"reg", round9(r.loss.reg)},
           {"giou", round9(r.loss.giou)},
           {"focal", round9(r.loss.focal)},
           {"total", round9(r.loss.total)}}}});
  }
  return root;
}

inline std::string dump_json(const ordered_json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Validators: re-check every schema invariant against the raw JSON document,
// collecting all violations instead of stopping at the first.
// ---------------------------------------------------------------------------

inline FileKind detect_kind(const json& root) {
  if (!root.is_object()) return FileKind::kUnknown;
  if (root.contains("generator") && root.contains("samples")) return FileKind::kUic;
  if (root.contains("acc") && root.contains("mean_iou")) return FileKind::kReport;
  if (root.contains("images") && root.at("images").is_array()) {
    for (const json& img : root.at("images")) {
      if (!img.is_object()) return FileKind::kUnknown;
      if (img.contains("sigma")) return FileKind::kMatch;
      if (img.contains("views") && img.at("views").is_array()) {
        for (const json& v : img.at("views")) {
          if (v.is_object() && v.contains("confidence")) {
            return FileKind::kPredictions;
          }
          if (v.is_object() && v.contains("score")) {
            return FileKind::kAnnotations;
          }
        }
      }
    }
    // Images with no views at all: tell annotations from predictions by the
    // required width/height fields.
    for (const json& img : root.at("images")) {
      if (img.contains("width")) return FileKind::kAnnotations;
    }
    return FileKind::kPredictions;
  }
  return FileKind::kUnknown;
}

inline std::vector<std::string> validate_annotations_json(const json& root) {
  std::vector<std::string> out;
  try {
    parse_annotation_file(root, "annotations");
  } catch (const SchemaError& e) {
    out.push_back(e.what());
  }
  return out;
}

inline std::vector<std::string> validate_predictions_json(const json& root) {
  std::vector<std::string> out;
  try {
    parse_prediction_file(root, "predictions");
  } catch (const SchemaError& e) {
    out.push_back(e.what());
  }
  return out;
}

/// UIC files additionally re-check, per sample: the init view strictly inside
/// the unit square, the unbounded property (at least one ground-truth view
/// crossing the unit square in init coordinates), and the top-quality view's
/// visible fraction inside the header bounds (recomputed from corners, with
/// 1e-9 slack for the coordinate change).
inline std::vector<std::string> validate_uic_json(const json& root) {
  std::vector<std::string> out;
  UicFile file;
  try {
    file = parse_uic_file(root, "uic");
  } catch (const SchemaError& e) {
    out.push_back(e.what());
    return out;
  }
  try {
    unic::detail::check_gen_params(file.header.params);
  } catch (const DomainError& e) {
    out.push_back(std::string("uic: generator: ") + e.what());
  }
  const CornerBox unit(0.0, 0.0, 1.0, 1.0);
  for (std::size_t i = 0; i < file.samples.size(); ++i) {
    const UicSample& s = file.samples[i];
    const std::string ctx = "uic: samples[" + std::to_string(i) + "] ('" +
                            s.image_id + "')";
    if (!unic::detail::strictly_inside_unit(s.init_view)) {
      out.push_back(ctx + ": init view must lie strictly inside the full frame");
    }
    bool unbounded = false;
    for (const AnnotatedView& v : s.gt_views) {
      if (!contains(unit, to_corners(v.box))) {
        unbounded = true;
        break;
      }
    }
    if (!unbounded) {
      out.push_back(ctx + ": unbounded property violated, every ground-truth "
                          "view lies inside the init frame");
    }
    if (!s.gt_views.empty()) {
      const std::size_t top = unic::detail::top_quality_index(s.gt_views);
      const double frac = unic::detail::visible_fraction(
          to_corners(s.gt_views[top].box), unit);
      if (frac < file.header.params.visible_lo - 1e-9 ||
          frac > file.header.params.visible_hi + 1e-9) {
        std::ostringstream os;
        os << ctx << ": top-quality view visible fraction " << frac
           << " outside [" << file.header.params.visible_lo << ", "
           << file.header.params.visible_hi << "]";
        out.push_back(os.str());
      }
    }
  }
  return out;
}

inline std::vector<std::string> validate_report_json(const json& root) {
  std::vector<std::string> out;
  if (!root.contains("acc") || !root.at("acc").is_object()) {
    out.push_back("report: missing 'acc' table");
  } else {
    for (const auto& [key, value] : root.at("acc").items()) {
      if (!value.is_number() || value.get<double>() < 0.0 ||
          value.get<double>() > 1.0) {
        out.push_back("report: acc['" + key + "'] outside [0, 1]");
      }
    }
  }
  for (const char* key : {"mean_iou", "mean_disp"}) {
    if (!root.contains(key) || !root.at(key).is_number()) {
      out.push_back(std::string("report: missing numeric '") + key + "'");
    }
  }
  if (root.contains("mean_iou") && root.at("mean_iou").is_number()) {
    const double v = root.at("mean_iou").get<double>();
    if (v < 0.0 || v > 1.0) out.push_back("report: mean_iou outside [0, 1]");
  }
  if (!root.contains("image_count") || !root.at("image_count").is_number_integer() ||
      root.at("image_count").get<long long>() < 1) {
    out.push_back("report: image_count must be a positive integer");
  }
  return out;
}

inline std::vector<std::string> validate_match_json(const json& root) {
  std::vector<std::string> out;
  if (!root.contains("images") || !root.at("images").is_array()) {
    out.push_back("match: missing 'images' array");
    return out;
  }
  const json& images = root.at("images");
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string ctx = "match: images[" + std::to_string(i) + "]";
    const json& img = images[i];
    if (!img.contains("sigma") || !img.at("sigma").is_array()) {
      out.push_back(ctx + ": missing 'sigma' array");
      continue;
    }
    const json& sigma = img.at("sigma");
    std::set<long long> seen;
    bool ok = true;
    for (const json& v : sigma) {
      if (!v.is_number_integer()) {
        ok = false;
        break;
      }
      const long long idx = v.get<long long>();
      if (idx < 0 || idx >= static_cast<long long>(sigma.size()) ||
          !seen.insert(idx).second) {
        ok = false;
        break;
      }
    }
    if (!ok) out.push_back(ctx + ": 'sigma' is not a permutation of 0..N-1");
    if (img.contains("loss") && img.at("loss").is_object()) {
      const json& loss = img.at("loss");
      const bool have_all = loss.contains("reg") && loss.contains("giou") &&
                            loss.contains("focal") && loss.contains("total");
      if (have_all) {
        // Identity check only; weights come from the config echo.
        const double li = root.contains("config")
                              ? root.at("config").value("lambda_iou", 0.0)
                              : 0.0;
        const double lf = root.contains("config")
                              ? root.at("config").value("lambda_focal", 0.0)
                              : 0.0;
        const double recombined = loss.at("reg").get<double>() +
                                  li * loss.at("giou").get<double>() +
                                  lf * loss.at("focal").get<double>();
        if (std::abs(recombined - loss.at("total").get<double>()) > 1e-6) {
          out.push_back(ctx + ": loss total does not recombine from its terms");
        }
      } else {
        out.push_back(ctx + ": loss must list reg, giou, focal and total");
      }
    }
  }
  return out;
}

}  // namespace unic::io
