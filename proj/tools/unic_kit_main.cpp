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

#include <cstdlib>
#include <ctime>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "unic/datagen.hpp"
#include "unic/io.hpp"
#include "unic/metrics.hpp"
#include "unic/rng.hpp"
#include "unic/set_match.hpp"
#include "unic/tinynet.hpp"
#include "unic/version.hpp"

namespace {

// Exit codes: 0 success, 2 schema/input, 3 unknown reference, 4 evaluation or
// solver precondition, 5 generation failure.
constexpr int kExitSchema = 2;
constexpr int kExitReference = 3;
constexpr int kExitEvaluation = 4;
constexpr int kExitGeneration = 5;

std::size_t threads_from_env() {
  const char* env = std::getenv("UNIC_KIT_THREADS");
  if (env == nullptr || *env == '\0') return 0;
  const long v = std::strtol(env, nullptr, 10);
  return v > 0 ? static_cast<std::size_t>(v) : 1;
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else {
    unic::io::write_text_file(out_path, text);
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

struct EvalArgs {
  std::string annotations;
  std::string predictions;
  std::vector<std::size_t> k{1, 5};
  std::vector<std::size_t> n{5, 10};
  std::vector<double> thresholds{0.85, 0.90};
  std::string out;
  bool stamp = false;
};

int run_eval(const EvalArgs& args) {
  const std::string ann_text = unic::io::read_text_file(args.annotations);
  const std::string pred_text = unic::io::read_text_file(args.predictions);
  const unic::io::AnnotationFile ann = unic::io::parse_annotation_file(
      unic::io::parse_json_text(ann_text, args.annotations), args.annotations);
  const unic::io::PredictionFile pred = unic::io::parse_prediction_file(
      unic::io::parse_json_text(pred_text, args.predictions), args.predictions);

  unic::AnnotationSet ann_set;
  for (const auto& img : ann.images) ann_set[img.id] = img.views;
  unic::PredictionSet pred_set;
  for (const auto& img : pred.images) pred_set[img.id] = img.views;

  unic::MetricsConfig cfg;
  cfg.k_values = args.k;
  cfg.n_values = args.n;
  cfg.thresholds = args.thresholds;
  const unic::MetricsReport report =
      unic::evaluate(ann_set, pred_set, cfg, threads_from_env());

  unic::io::ReportInputs inputs;
  inputs.annotations_path = args.annotations;
  inputs.annotations_digest = unic::io::fnv1a64_hex(ann_text);
  inputs.predictions_path = args.predictions;
  inputs.predictions_digest = unic::io::fnv1a64_hex(pred_text);
  const std::optional<std::string> stamp =
      args.stamp ? std::optional<std::string>(utc_timestamp()) : std::nullopt;
  emit(unic::io::dump_json(unic::io::report_to_json(report, cfg, inputs, stamp)),
       args.out);
  return 0;
}

struct GenUicArgs {
  std::string annotations;
  std::uint64_t seed = 0;
  std::vector<double> scale_range{0.5, 0.8};
  std::vector<double> visible_frac{0.4, 0.9};
  int max_attempts = 1000;
  std::string out;
};

int run_gen_uic(const GenUicArgs& args) {
  if (args.scale_range.size() != 2 || args.visible_frac.size() != 2) {
    throw unic::DomainError("--scale-range and --visible-frac take lo,hi pairs");
  }
  const unic::io::AnnotationFile ann =
      unic::io::load_annotation_file(args.annotations);

  unic::GenParams params;
  params.scale_min = args.scale_range[0];
  params.scale_max = args.scale_range[1];
  params.visible_lo = args.visible_frac[0];
  params.visible_hi = args.visible_frac[1];
  params.max_attempts = args.max_attempts;

  // In-frame source views are a file invariant, not a per-image sampling
  // failure; report violations as schema problems up front.
  for (const auto& img : ann.images) {
    for (const unic::AnnotatedView& v : img.views) {
      const unic::CornerBox c = unic::to_corners(v.box);
      if (c.x0() < 0.0 || c.y0() < 0.0 || c.x1() > 1.0 || c.y1() > 1.0) {
        throw unic::SchemaError("image '" + img.id +
                                "' has a view outside the full frame");
      }
    }
  }

  unic::io::UicFile out_file;
  out_file.header.seed = args.seed;
  out_file.header.params = params;
  for (const auto& img : ann.images) {
    unic::FullViewAnnotation full;
    full.image_id = img.id;
    full.width = img.width;
    full.height = img.height;
    full.views = img.views;
    try {
      out_file.samples.push_back(unic::generate_sample(
          full, params, unic::derive_seed(args.seed, img.id)));
    } catch (const unic::GenerationError& e) {
      out_file.skipped.push_back({img.id, e.what()});
    }
  }
  if (out_file.samples.empty()) {
    throw unic::GenerationError(
        "no samples could be generated from " +
        std::to_string(ann.images.size()) + " images");
  }
  emit(unic::io::dump_json(unic::io::uic_to_json(out_file)), args.out);
  return 0;
}

struct MatchArgs {
  std::string gt;
  std::string pred;
  double lambda_iou = 2.0;
  double lambda_focal = 2.0;
  double beta = 2.0;
  std::size_t n = 0;  // 0: use each image's prediction count
  std::string out;
};

int run_match(const MatchArgs& args) {
  const unic::io::AnnotationFile gt = unic::io::load_annotation_file(args.gt);
  const unic::io::PredictionFile pred = unic::io::load_prediction_file(args.pred);

  std::map<std::string, const std::vector<unic::AnnotatedView>*> gt_by_id;
  for (const auto& img : gt.images) gt_by_id[img.id] = &img.views;

  unic::LossWeights weights;
  weights.lambda_iou = args.lambda_iou;
  weights.lambda_focal = args.lambda_focal;
  weights.beta = args.beta;

  std::vector<unic::io::MatchImageResult> results;
  std::size_t n_echo = args.n;
  for (const auto& img : pred.images) {
    const auto it = gt_by_id.find(img.id);
    if (it == gt_by_id.end()) {
      throw unic::ReferenceError("prediction image '" + img.id +
                                 "' not present in ground truth");
    }
    const std::size_t n_eff = args.n > 0 ? args.n : img.views.size();
    if (n_echo == 0) n_echo = n_eff;
    if (img.views.size() != n_eff) {
      std::ostringstream os;
      os << "image '" << img.id << "' has " << img.views.size()
         << " predictions but N = " << n_eff;
      throw unic::EvaluationError(os.str());
    }
    const std::vector<unic::PaddedGtSlot> slots =
        unic::pad_ground_truth(*it->second, n_eff);
    unic::io::MatchImageResult r;
    r.id = img.id;
    r.assignment = unic::optimal_assignment(img.views, slots, weights);
    r.loss = unic::composite_loss(img.views, slots, r.assignment, weights);
    results.push_back(std::move(r));
  }
  emit(unic::io::dump_json(
           unic::io::match_results_to_json(results, weights, n_echo)),
       args.out);
  return 0;
}

struct DemoForwardArgs {
  std::size_t height = 256;
  std::size_t width = 384;
  std::uint64_t seed = 0;
  std::string features;
  std::size_t queries = 16;
  std::size_t pad_tokens = 12;
  std::size_t heads = 8;
  std::size_t d_model = 256;
  std::size_t ffn_dim = 1024;
  std::size_t encoder_layers = 6;
  std::size_t fem_layers = 2;
  std::size_t decoder_layers = 2;
  std::string image_id = "demo";
  std::string out;
};

int run_demo_forward(const DemoForwardArgs& args) {
  unic::net::NetConfig cfg;
  cfg.queries = args.queries;
  cfg.pad_tokens = args.pad_tokens;
  cfg.heads = args.heads;
  cfg.d_model = args.d_model;
  cfg.ffn_dim = args.ffn_dim;
  cfg.encoder_layers = args.encoder_layers;
  cfg.fem_layers = args.fem_layers;
  cfg.decoder_layers = args.decoder_layers;

  unic::net::FeatureGrid grid;
  if (!args.features.empty()) {
    grid = unic::net::read_feature_grid(args.features);
    if (grid.channels != cfg.channels) {
      std::ostringstream os;
      os << "feature file has " << grid.channels << " channels, expected "
         << cfg.channels;
      throw unic::DomainError(os.str());
    }
    if (grid.height * 32 != args.height || grid.width * 32 != args.width) {
      std::ostringstream os;
      os << "feature grid " << grid.height << "x" << grid.width
         << " does not match --height/--width " << args.height << "x"
         << args.width << " (expected H0/32 x W0/32)";
      throw unic::DomainError(os.str());
    }
  } else {
    grid = unic::net::synth_features(args.height, args.width,
                                     unic::derive_seed(args.seed, "features"),
                                     cfg.channels);
  }

  const unic::net::ModelWeights weights =
      unic::net::ModelWeights::seeded(cfg, unic::derive_seed(args.seed, "weights"));
  const std::vector<unic::PredictedView> views =
      unic::net::run_pipeline(weights, grid);

  unic::io::PredictionFile out_file;
  out_file.images.push_back({args.image_id, views});
  emit(unic::io::dump_json(unic::io::prediction_to_json(out_file)), args.out);
  return 0;
}

struct ValidateArgs {
  std::string path;
  std::string kind = "auto";
};

int run_validate(const ValidateArgs& args) {
  const std::string text = unic::io::read_text_file(args.path);
  const unic::io::json root = unic::io::parse_json_text(text, args.path);

  unic::io::FileKind kind = unic::io::FileKind::kUnknown;
  if (args.kind == "auto") {
    kind = unic::io::detect_kind(root);
  } else if (args.kind == "annotations") {
    kind = unic::io::FileKind::kAnnotations;
  } else if (args.kind == "predictions") {
    kind = unic::io::FileKind::kPredictions;
  } else if (args.kind == "uic") {
    kind = unic::io::FileKind::kUic;
  } else if (args.kind == "report") {
    kind = unic::io::FileKind::kReport;
  } else if (args.kind == "match") {
    kind = unic::io::FileKind::kMatch;
  } else {
    throw unic::DomainError("unknown --kind '" + args.kind + "'");
  }

  std::vector<std::string> violations;
  const char* kind_name = "unknown";
  switch (kind) {
    case unic::io::FileKind::kAnnotations:
      violations = unic::io::validate_annotations_json(root);
      kind_name = "annotations";
      break;
    case unic::io::FileKind::kPredictions:
      violations = unic::io::validate_predictions_json(root);
      kind_name = "predictions";
      break;
    case unic::io::FileKind::kUic:
      violations = unic::io::validate_uic_json(root);
      kind_name = "uic";
      break;
    case unic::io::FileKind::kReport:
      violations = unic::io::validate_report_json(root);
      kind_name = "report";
      break;
    case unic::io::FileKind::kMatch:
      violations = unic::io::validate_match_json(root);
      kind_name = "match";
      break;
    case unic::io::FileKind::kUnknown:
      throw unic::SchemaError(args.path + ": unrecognized file kind");
  }

  if (!violations.empty()) {
    for (const std::string& v : violations) std::cerr << v << "\n";
    std::ostringstream os;
    os << args.path << ": " << violations.size() << " violation(s) in "
       << kind_name << " file";
    throw unic::SchemaError(os.str());
  }
  std::cout << args.path << ": valid " << kind_name << " file\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unbounded image composition toolkit"};
  app.set_version_flag("--version",
                       std::string(unic::kToolName) + " " + unic::kToolVersion);
  app.require_subcommand(1);

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand(
      "eval", "evaluate predictions against annotations (Acc_{K/N}, IoU, Disp)");
  eval->add_option("--annotations", eval_args.annotations, "annotation JSON")
      ->required();
  eval->add_option("--predictions", eval_args.predictions, "prediction JSON")
      ->required();
  eval->add_option("--k", eval_args.k, "K values")->delimiter(',');
  eval->add_option("--n", eval_args.n, "N values")->delimiter(',');
  eval->add_option("--thresholds", eval_args.thresholds, "IoU thresholds")
      ->delimiter(',');
  eval->add_option("--out", eval_args.out, "report path (default stdout)");
  eval->add_flag("--stamp", eval_args.stamp, "embed a timestamp in the report");

  GenUicArgs gen_args;
  CLI::App* gen = app.add_subcommand(
      "gen-uic", "synthesize unbounded-composition samples from annotations");
  gen->add_option("--annotations", gen_args.annotations, "annotation JSON")
      ->required();
  gen->add_option("--seed", gen_args.seed, "master seed");
  gen->add_option("--scale-range", gen_args.scale_range, "init view scale lo,hi")
      ->delimiter(',');
  gen->add_option("--visible-frac", gen_args.visible_frac,
                  "top view visible-area fraction lo,hi")
      ->delimiter(',');
  gen->add_option("--max-attempts", gen_args.max_attempts,
                  "rejection sampling budget per image");
  gen->add_option("--out", gen_args.out, "sample file path")->required();

  MatchArgs match_args;
  CLI::App* match = app.add_subcommand(
      "match", "optimal prediction/ground-truth assignment and composite loss");
  match->add_option("--gt", match_args.gt, "ground-truth annotation JSON")
      ->required();
  match->add_option("--pred", match_args.pred, "prediction JSON")->required();
  match->add_option("--lambda-iou", match_args.lambda_iou, "GIoU weight");
  match->add_option("--lambda-focal", match_args.lambda_focal, "focal weight");
  match->add_option("--beta", match_args.beta, "focal exponent");
  match->add_option("--n", match_args.n,
                    "padded set size (default: per-image prediction count)");
  match->add_option("--out", match_args.out, "match file path (default stdout)");

  DemoForwardArgs demo_args;
  CLI::App* demo = app.add_subcommand(
      "demo-forward", "run the deterministic forward stack, emit predictions");
  demo->add_option("--height", demo_args.height, "input height, multiple of 32");
  demo->add_option("--width", demo_args.width, "input width, multiple of 32");
  demo->add_option("--seed", demo_args.seed, "seed for weights and features");
  demo->add_option("--features", demo_args.features,
                   "feature grid file (default: synthesized)");
  demo->add_option("--queries", demo_args.queries, "number of predicted views");
  demo->add_option("--pad-tokens", demo_args.pad_tokens,
                   "extrapolated token count M");
  demo->add_option("--heads", demo_args.heads, "attention heads");
  demo->add_option("--d-model", demo_args.d_model, "token width");
  demo->add_option("--ffn-dim", demo_args.ffn_dim, "feed-forward width");
  demo->add_option("--encoder-layers", demo_args.encoder_layers, "encoder depth");
  demo->add_option("--fem-layers", demo_args.fem_layers, "extrapolation depth");
  demo->add_option("--decoder-layers", demo_args.decoder_layers, "decoder depth");
  demo->add_option("--image-id", demo_args.image_id, "id for the emitted image");
  demo->add_option("--out", demo_args.out, "prediction path (default stdout)");

  ValidateArgs val_args;
  CLI::App* val = app.add_subcommand(
      "validate", "re-check a file against its schema and invariants");
  val->add_option("file", val_args.path, "file to validate")->required();
  val->add_option("--kind", val_args.kind,
                  "annotations|predictions|uic|report|match|auto");

  CLI11_PARSE(app, argc, argv);

  try {
    if (eval->parsed()) return run_eval(eval_args);
    if (gen->parsed()) return run_gen_uic(gen_args);
    if (match->parsed()) return run_match(match_args);
    if (demo->parsed()) return run_demo_forward(demo_args);
    if (val->parsed()) return run_validate(val_args);
  } catch (const unic::SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const unic::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const unic::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const unic::ReferenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitReference;
  } catch (const unic::GenerationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitGeneration;
  } catch (const unic::EvaluationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEvaluation;
  } catch (const unic::ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEvaluation;
  } catch (const unic::CapacityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEvaluation;
  } catch (const unic::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEvaluation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
