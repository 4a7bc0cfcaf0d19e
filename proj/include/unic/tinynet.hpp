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

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "unic/error.hpp"
#include "unic/rng.hpp"
#include "unic/views.hpp"

// Forward-only, desk-scale replica of the encoder / feature-extrapolation /
// decoder stack. Everything is deterministic given (config, seed); there is
// no training path.
namespace unic::net {

/// Token matrix, one row per token.
using TokenSequence = Eigen::MatrixXd;

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kMinBoxSize = 1e-12;

struct NetConfig {
  std::size_t channels = 2048;
  std::size_t d_model = 256;
  std::size_t heads = 8;
  std::size_t ffn_dim = 1024;
  std::size_t encoder_layers = 6;
  std::size_t fem_layers = 2;
  std::size_t decoder_layers = 2;
  std::size_t pad_tokens = 12;  // M, length of the extrapolated sequence
  std::size_t queries = 16;     // N, number of predicted views
};

/// Backbone feature map, stored channels x positions with position index
/// h * W + w (row-major over the spatial grid).
struct FeatureGrid {
  Eigen::MatrixXd data;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
};

/// Optional capture of attention internals for inspection: each record holds
/// the stacked per-head attention rows of one call plus the key/value length
/// it attended over.
struct AttnRecord {
  std::string site;
  Eigen::MatrixXd rows;  // (heads * L_q) x L_k, each row a distribution
  std::size_t kv_len = 0;
};

struct AttnTrace {
  std::vector<AttnRecord> records;
};

struct LinearWeights {
  Eigen::MatrixXd w;  // out x in
  Eigen::VectorXd b;  // out

  TokenSequence apply(const TokenSequence& x) const {
    if (x.cols() != w.cols()) {
      std::ostringstream os;
      os << "linear layer expects " << w.cols() << " inputs, got " << x.cols();
      throw ShapeError(os.str());
    }
    TokenSequence y = x * w.transpose();
    y.rowwise() += b.transpose();
    return y;
  }
};

struct LayerNormWeights {
  Eigen::VectorXd gamma;
  Eigen::VectorXd beta;
};

struct MhaWeights {
  LinearWeights query, key, value, out;
};

struct EncoderBlockWeights {
  MhaWeights self_attn;
  LayerNormWeights ln_attn;
  LinearWeights ffn_expand, ffn_project;
  LayerNormWeights ln_ffn;
};

/// Block with self-attention followed by cross-attention, shared by the
/// feature extrapolation stack and the box decoder.
struct CrossBlockWeights {
  MhaWeights self_attn;
  LayerNormWeights ln_self;
  MhaWeights cross_attn;
  LayerNormWeights ln_cross;
  LinearWeights ffn_expand, ffn_project;
  LayerNormWeights ln_ffn;
};

namespace detail {

inline Eigen::MatrixXd gaussian(std::size_t rows, std::size_t cols,
                                double stddev, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = stddev * rng.normal();
  return m;
}

inline LinearWeights seeded_linear(std::size_t out, std::size_t in, Rng& rng) {
  LinearWeights l;
  l.w = gaussian(out, in, 1.0 / std::sqrt(static_cast<double>(in)), rng);
  l.b = Eigen::VectorXd::Zero(out);
  return l;
}

inline LayerNormWeights default_layer_norm(std::size_t d) {
  return {Eigen::VectorXd::Ones(d), Eigen::VectorXd::Zero(d)};
}

inline MhaWeights seeded_mha(std::size_t d, Rng& rng) {
  return {seeded_linear(d, d, rng), seeded_linear(d, d, rng),
          seeded_linear(d, d, rng), seeded_linear(d, d, rng)};
}

inline EncoderBlockWeights seeded_encoder_block(const NetConfig& cfg,
                                                Rng& rng) {
  EncoderBlockWeights b;
  b.self_attn = seeded_mha(cfg.d_model, rng);
  b.ln_attn = default_layer_norm(cfg.d_model);
  b.ffn_expand = seeded_linear(cfg.ffn_dim, cfg.d_model, rng);
  b.ffn_project = seeded_linear(cfg.d_model, cfg.ffn_dim, rng);
  b.ln_ffn = default_layer_norm(cfg.d_model);
  return b;
}

inline CrossBlockWeights seeded_cross_block(const NetConfig& cfg, Rng& rng) {
  CrossBlockWeights b;
  b.self_attn = seeded_mha(cfg.d_model, rng);
  b.ln_self = default_layer_norm(cfg.d_model);
  b.cross_attn = seeded_mha(cfg.d_model, rng);
  b.ln_cross = default_layer_norm(cfg.d_model);
  b.ffn_expand = seeded_linear(cfg.ffn_dim, cfg.d_model, rng);
  b.ffn_project = seeded_linear(cfg.d_model, cfg.ffn_dim, rng);
  b.ln_ffn = default_layer_norm(cfg.d_model);
  return b;
}

inline void check_finite(const Eigen::MatrixXd& m, const char* site) {
  if (!m.allFinite()) {
    throw NumericError(std::string("non-finite values after ") + site);
  }
}

}  // namespace detail

struct ModelWeights {
  NetConfig cfg;
  LinearWeights reduce;  // 1x1 channel reduction, channels -> d_model
  std::vector<EncoderBlockWeights> encoder;
  Eigen::MatrixXd query_m;  // M x d, learnable start of the padded sequence
  std::vector<CrossBlockWeights> fem;
  Eigen::MatrixXd anchors;  // N x d, learnable decoder anchors
  std::vector<CrossBlockWeights> decoder;
  LinearWeights box_head;   // d -> (cx, cy, w, h) pre-activation
  LinearWeights conf_head;  // d -> 1 pre-sigmoid

  static ModelWeights seeded(const NetConfig& cfg, std::uint64_t seed) {
    if (cfg.d_model == 0 || cfg.heads == 0 || cfg.d_model % cfg.heads != 0) {
      std::ostringstream os;
      os << "d_model " << cfg.d_model << " not divisible by " << cfg.heads
         << " heads";
      throw ConfigError(os.str());
    }
    if (cfg.pad_tokens == 0 || cfg.queries == 0 || cfg.channels == 0) {
      throw ConfigError("pad_tokens, queries and channels must be positive");
    }
    Rng rng(seed);
    ModelWeights w;
    w.cfg = cfg;
    w.reduce = detail::seeded_linear(cfg.d_model, cfg.channels, rng);
    for (std::size_t i = 0; i < cfg.encoder_layers; ++i) {
      w.encoder.push_back(detail::seeded_encoder_block(cfg, rng));
    }
    w.query_m = detail::gaussian(cfg.pad_tokens, cfg.d_model, 1.0, rng);
    for (std::size_t i = 0; i < cfg.fem_layers; ++i) {
      w.fem.push_back(detail::seeded_cross_block(cfg, rng));
    }
    w.anchors = detail::gaussian(cfg.queries, cfg.d_model, 1.0, rng);
    for (std::size_t i = 0; i < cfg.decoder_layers; ++i) {
      w.decoder.push_back(detail::seeded_cross_block(cfg, rng));
    }
    w.box_head = detail::seeded_linear(4, cfg.d_model, rng);
    w.conf_head = detail::seeded_linear(1, cfg.d_model, rng);
    return w;
  }
};

inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline TokenSequence layer_norm(const TokenSequence& x,
                                const LayerNormWeights& w) {
  if (x.cols() != w.gamma.size()) {
    throw ShapeError("layer norm width mismatch");
  }
  TokenSequence y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    y.row(r) = (((x.row(r).array() - mean) / std::sqrt(var + kLayerNormEps)) *
                    w.gamma.transpose().array() +
                w.beta.transpose().array())
                   .matrix();
  }
  return y;
}

namespace detail {

/// Scaled dot-product multi-head attention with separate query/key/value
/// inputs. Rows of every head's attention matrix are softmax distributions.
inline TokenSequence mha_qkv(const TokenSequence& q_in,
                             const TokenSequence& k_in,
                             const TokenSequence& v_in, const MhaWeights& w,
                             std::size_t heads, AttnTrace* trace,
                             const char* site) {
  const Eigen::Index d = q_in.cols();
  if (heads == 0 || d % static_cast<Eigen::Index>(heads) != 0) {
    std::ostringstream os;
    os << "token width " << d << " not divisible by " << heads << " heads";
    throw ConfigError(os.str());
  }
  if (k_in.cols() != d || v_in.cols() != d || k_in.rows() != v_in.rows()) {
    throw ShapeError("attention key/value shapes do not match the query");
  }
  const TokenSequence q = w.query.apply(q_in);
  const TokenSequence k = w.key.apply(k_in);
  const TokenSequence v = w.value.apply(v_in);

  const Eigen::Index dh = d / static_cast<Eigen::Index>(heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  TokenSequence concat(q.rows(), d);
  AttnRecord record;
  if (trace != nullptr) {
    record.site = site;
    record.kv_len = static_cast<std::size_t>(k.rows());
    record.rows.resize(static_cast<Eigen::Index>(heads) * q.rows(), k.rows());
  }
  for (std::size_t h = 0; h < heads; ++h) {
    const Eigen::Index off = static_cast<Eigen::Index>(h) * dh;
    Eigen::MatrixXd scores =
        q.middleCols(off, dh) * k.middleCols(off, dh).transpose() * scale;
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
      const double m = scores.row(r).maxCoeff();
      Eigen::ArrayXd e = (scores.row(r).array() - m).exp();
      scores.row(r) = (e / e.sum()).matrix();
    }
    if (trace != nullptr) {
      record.rows.middleRows(static_cast<Eigen::Index>(h) * q.rows(),
                             q.rows()) = scores;
    }
    concat.middleCols(off, dh) = scores * v.middleCols(off, dh);
  }
  if (trace != nullptr) trace->records.push_back(std::move(record));
  return w.out.apply(concat);
}

inline TokenSequence ffn(const TokenSequence& x, const LinearWeights& expand,
                         const LinearWeights& project) {
  TokenSequence h = expand.apply(x);
  h = h.array().max(0.0).matrix();  // ReLU
  return project.apply(h);
}

/// Self-attention + cross-attention + FFN block in post-norm arrangement.
inline TokenSequence cross_block(const TokenSequence& x,
                                 const TokenSequence& kv,
                                 const CrossBlockWeights& w, std::size_t heads,
                                 AttnTrace* trace, const char* self_site,
                                 const char* cross_site) {
  const TokenSequence s = layer_norm(
      x + mha_qkv(x, x, x, w.self_attn, heads, trace, self_site), w.ln_self);
  const TokenSequence c = layer_norm(
      s + mha_qkv(s, kv, kv, w.cross_attn, heads, trace, cross_site),
      w.ln_cross);
  return layer_norm(c + ffn(c, w.ffn_expand, w.ffn_project), w.ln_ffn);
}

inline TokenSequence vstack(const TokenSequence& a, const TokenSequence& b) {
  if (a.cols() != b.cols()) throw ShapeError("cannot stack token sequences");
  TokenSequence out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

}  // namespace detail

/// Standard multi-head attention where key and value come from the same
/// sequence. Output has the query's shape.
inline TokenSequence mha_forward(const TokenSequence& q,
                                 const TokenSequence& kv, std::size_t heads,
                                 const MhaWeights& w,
                                 AttnTrace* trace = nullptr) {
  return detail::mha_qkv(q, kv, kv, w, heads, trace, "mha");
}

/// Seeded stand-in for the backbone: a standard-normal feature grid with
/// H = h0/32, W = w0/32 at the configured channel count.
inline FeatureGrid synth_features(std::size_t h0, std::size_t w0,
                                  std::uint64_t seed,
                                  std::size_t channels = 2048) {
  if (h0 == 0 || w0 == 0 || h0 % 32 != 0 || w0 % 32 != 0) {
    std::ostringstream os;
    os << "image dims " << h0 << "x" << w0 << " must be positive multiples of 32";
    throw DomainError(os.str());
  }
  FeatureGrid g;
  g.channels = channels;
  g.height = h0 / 32;
  g.width = w0 / 32;
  Rng rng(seed);
  g.data = detail::gaussian(channels, g.height * g.width, 1.0, rng);
  return g;
}

/// Per-position linear map from backbone channels down to d_model, flattening
/// the H x W grid into HW tokens in row-major position order.
inline TokenSequence channel_reduce(const FeatureGrid& grid,
                                    const LinearWeights& reduce) {
  if (static_cast<Eigen::Index>(grid.channels) != reduce.w.cols() ||
      grid.data.rows() != reduce.w.cols()) {
    std::ostringstream os;
    os << "feature grid has " << grid.channels << " channels, reduction expects "
       << reduce.w.cols();
    throw ShapeError(os.str());
  }
  TokenSequence tokens = (reduce.w * grid.data).transpose();
  tokens.rowwise() += reduce.b.transpose();
  return tokens;
}

/// Fixed 2D sine/cosine positional embeddings: first half of the channels
/// encodes the row index, second half the column index.
inline TokenSequence sine_position_embeddings(std::size_t height,
                                              std::size_t width,
                                              std::size_t d_model) {
  if (d_model % 2 != 0) {
    throw ConfigError("positional embeddings need an even d_model");
  }
  const std::size_t half = d_model / 2;
  TokenSequence pos(height * width, d_model);
  for (std::size_t h = 0; h < height; ++h) {
    for (std::size_t w = 0; w < width; ++w) {
      const Eigen::Index row = static_cast<Eigen::Index>(h * width + w);
      for (std::size_t t = 0; t < half; ++t) {
        const double freq =
            std::pow(10000.0, 2.0 * static_cast<double>(t / 2) /
                                  static_cast<double>(half));
        const double y = static_cast<double>(h) / freq;
        const double x = static_cast<double>(w) / freq;
        pos(row, static_cast<Eigen::Index>(t)) =
            (t % 2 == 0) ? std::sin(y) : std::cos(y);
        pos(row, static_cast<Eigen::Index>(half + t)) =
            (t % 2 == 0) ? std::sin(x) : std::cos(x);
      }
    }
  }
  return pos;
}

/// Six (by default) standard transformer blocks. Positional embeddings, when
/// given, enter the attention query and key only, as in detection
/// transformers; values and residuals carry the raw tokens.
inline TokenSequence encoder_forward(const TokenSequence& z,
                                     const TokenSequence* pos,
                                     const ModelWeights& weights,
                                     AttnTrace* trace = nullptr) {
  if (z.cols() != static_cast<Eigen::Index>(weights.cfg.d_model)) {
    throw ShapeError("encoder input width differs from d_model");
  }
  if (pos != nullptr && (pos->rows() != z.rows() || pos->cols() != z.cols())) {
    throw ShapeError("positional embedding shape differs from the input");
  }
  TokenSequence x = z;
  for (const EncoderBlockWeights& blk : weights.encoder) {
    const TokenSequence qk = pos != nullptr ? TokenSequence(x + *pos) : x;
    const TokenSequence attn = detail::mha_qkv(
        qk, qk, x, blk.self_attn, weights.cfg.heads, trace, "encoder.self");
    x = layer_norm(x + attn, blk.ln_attn);
    x = layer_norm(x + detail::ffn(x, blk.ffn_expand, blk.ffn_project),
                   blk.ln_ffn);
  }
  detail::check_finite(x, "encoder");
  return x;
}

/// Feature extrapolation: starting from the learnable query m, each layer
/// self-attends over the padded embeddings and then cross-attends over the
/// concatenation of the visible tokens and that self-attention output, so
/// the key/value length is HW + M. Later layers take the previous layer's
/// output as input. Returns the M x d padded feature tokens.
inline TokenSequence fem_forward(const TokenSequence& z_vis,
                                 const ModelWeights& weights,
                                 AttnTrace* trace = nullptr) {
  if (z_vis.cols() != static_cast<Eigen::Index>(weights.cfg.d_model)) {
    throw ShapeError("visible tokens width differs from d_model");
  }
  TokenSequence x = weights.query_m;
  for (const CrossBlockWeights& blk : weights.fem) {
    const TokenSequence s = layer_norm(
        x + detail::mha_qkv(x, x, x, blk.self_attn, weights.cfg.heads, trace,
                            "fem.self"),
        blk.ln_self);
    const TokenSequence kv = detail::vstack(z_vis, s);
    const TokenSequence c = layer_norm(
        s + detail::mha_qkv(s, kv, kv, blk.cross_attn, weights.cfg.heads,
                            trace, "fem.cross"),
        blk.ln_cross);
    x = layer_norm(c + detail::ffn(c, blk.ffn_expand, blk.ffn_project),
                   blk.ln_ffn);
  }
  detail::check_finite(x, "feature extrapolation");
  return x;
}

/// Decodes the learnable anchors against the memory formed by concatenating
/// visible and padded tokens, then applies the two heads: linear centers,
/// softplus sizes, sigmoid confidence. Centers are unconstrained so views
/// may leave the init frame.
inline std::vector<PredictedView> decoder_forward(const TokenSequence& z_vis,
                                                  const TokenSequence& z_pad,
                                                  const ModelWeights& weights,
                                                  AttnTrace* trace = nullptr) {
  const TokenSequence memory = detail::vstack(z_vis, z_pad);
  TokenSequence x = weights.anchors;
  for (const CrossBlockWeights& blk : weights.decoder) {
    x = detail::cross_block(x, memory, blk, weights.cfg.heads, trace,
                            "decoder.self", "decoder.cross");
  }
  detail::check_finite(x, "decoder");

  const TokenSequence box_raw = weights.box_head.apply(x);
  const TokenSequence conf_raw = weights.conf_head.apply(x);
  std::vector<PredictedView> views;
  views.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const CompBox box(box_raw(i, 0), box_raw(i, 1),
                      std::max(softplus(box_raw(i, 2)), kMinBoxSize),
                      std::max(softplus(box_raw(i, 3)), kMinBoxSize));
    views.emplace_back(box, sigmoid(conf_raw(i, 0)));
  }
  return views;
}

/// Whole forward pass: reduce channels, encode with positional embeddings,
/// extrapolate padded tokens, decode N views.
inline std::vector<PredictedView> run_pipeline(const ModelWeights& weights,
                                               const FeatureGrid& grid,
                                               bool use_positions = true,
                                               AttnTrace* trace = nullptr) {
  const TokenSequence tokens = channel_reduce(grid, weights.reduce);
  std::vector<PredictedView> out;
  if (use_positions) {
    const TokenSequence pos = sine_position_embeddings(
        grid.height, grid.width, weights.cfg.d_model);
    const TokenSequence enc = encoder_forward(tokens, &pos, weights, trace);
    out = decoder_forward(enc, fem_forward(enc, weights, trace), weights, trace);
  } else {
    const TokenSequence enc = encoder_forward(tokens, nullptr, weights, trace);
    out = decoder_forward(enc, fem_forward(enc, weights, trace), weights, trace);
  }
  return out;
}

/// Feature-grid file: one ASCII header line "C H W\n" followed by C*H*W
/// little-endian 32-bit floats, channel-major with row-major spatial order.
inline void write_feature_grid(const std::string& path,
                               const FeatureGrid& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << grid.channels << " " << grid.height << " " << grid.width << "\n";
  const std::size_t positions = grid.height * grid.width;
  for (std::size_t c = 0; c < grid.channels; ++c) {
    for (std::size_t p = 0; p < positions; ++p) {
      float v = static_cast<float>(
          grid.data(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(p)));
      std::uint32_t bits;
      std::memcpy(&bits, &v, sizeof(bits));
      if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap32(bits);
      }
      out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
    }
  }
  if (!out) throw Error("failed writing feature grid to '" + path + "'");
}

inline FeatureGrid read_feature_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open feature file '" + path + "'");
  std::string header;
  if (!std::getline(in, header)) {
    throw SchemaError("feature file '" + path + "' missing header line");
  }
  std::istringstream hs(header);
  long long c = 0, h = 0, w = 0;
  if (!(hs >> c >> h >> w) || c <= 0 || h <= 0 || w <= 0) {
    throw SchemaError("feature file '" + path +
                      "' header must be 'C H W' with positive integers");
  }
  FeatureGrid grid;
  grid.channels = static_cast<std::size_t>(c);
  grid.height = static_cast<std::size_t>(h);
  grid.width = static_cast<std::size_t>(w);
  grid.data.resize(c, h * w);
  const std::size_t positions = grid.height * grid.width;
  for (std::size_t ch = 0; ch < grid.channels; ++ch) {
    for (std::size_t p = 0; p < positions; ++p) {
      std::uint32_t bits;
      if (!in.read(reinterpret_cast<char*>(&bits), sizeof(bits))) {
        throw SchemaError("feature file '" + path + "' payload too short");
      }
      if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap32(bits);
      }
      float v;
      std::memcpy(&v, &bits, sizeof(v));
      grid.data(static_cast<Eigen::Index>(ch), static_cast<Eigen::Index>(p)) =
          static_cast<double>(v);
    }
  }
  return grid;
}

}  // namespace unic::net
