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

#include "unic/tinynet.hpp"

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "unic/io.hpp"
#include "unic/rng.hpp"

using unic::net::AttnTrace;
using unic::net::FeatureGrid;
using unic::net::ModelWeights;
using unic::net::NetConfig;
using unic::net::TokenSequence;

namespace {

/// Small configuration so forward passes stay cheap in the unit suite; the
/// acceptance run exercises the desk-scale default dims.
NetConfig small_config() {
  NetConfig cfg;
  cfg.channels = 64;
  cfg.d_model = 32;
  cfg.heads = 4;
  cfg.ffn_dim = 64;
  cfg.encoder_layers = 2;
  cfg.fem_layers = 2;
  cfg.decoder_layers = 2;
  cfg.pad_tokens = 5;
  cfg.queries = 7;
  return cfg;
}

}  // namespace

TEST_CASE("synth_features") {
  SECTION("desk-scale dims follow the /32 rule") {
    const FeatureGrid g = unic::net::synth_features(256, 384, 7);
    CHECK(g.channels == 2048);
    CHECK(g.height == 8);
    CHECK(g.width == 12);
    CHECK(g.data.rows() == 2048);
    CHECK(g.data.cols() == 96);
  }

  SECTION("same seed reproduces, different seeds differ almost everywhere") {
    const FeatureGrid a = unic::net::synth_features(64, 64, 7, 64);
    const FeatureGrid b = unic::net::synth_features(64, 64, 7, 64);
    CHECK(a.data == b.data);

    const FeatureGrid c = unic::net::synth_features(64, 64, 8, 64);
    Eigen::Index differing = 0;
    for (Eigen::Index i = 0; i < a.data.rows(); ++i) {
      for (Eigen::Index j = 0; j < a.data.cols(); ++j) {
        if (a.data(i, j) != c.data(i, j)) ++differing;
      }
    }
    CHECK(differing >= (a.data.size() * 99) / 100);
  }

  SECTION("dims must divide 32") {
    CHECK_THROWS_AS(unic::net::synth_features(100, 384, 7), unic::DomainError);
    CHECK_THROWS_AS(unic::net::synth_features(0, 32, 7), unic::DomainError);
  }
}

TEST_CASE("channel_reduce") {
  SECTION("single position equals the plain linear map") {
    const NetConfig cfg = small_config();
    unic::Rng rng(3);
    unic::net::LinearWeights reduce =
        unic::net::detail::seeded_linear(cfg.d_model, cfg.channels, rng);
    FeatureGrid g;
    g.channels = cfg.channels;
    g.height = 1;
    g.width = 1;
    g.data = unic::net::detail::gaussian(cfg.channels, 1, 1.0, rng);
    const TokenSequence tokens = unic::net::channel_reduce(g, reduce);
    REQUIRE(tokens.rows() == 1);
    REQUIRE(tokens.cols() == static_cast<Eigen::Index>(cfg.d_model));
    const Eigen::VectorXd direct = reduce.w * g.data.col(0) + reduce.b;
    CHECK((tokens.row(0).transpose() - direct).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("identity weights on matched dims flatten only") {
    FeatureGrid g;
    g.channels = 8;
    g.height = 2;
    g.width = 3;
    unic::Rng rng(4);
    g.data = unic::net::detail::gaussian(8, 6, 1.0, rng);
    unic::net::LinearWeights identity;
    identity.w = Eigen::MatrixXd::Identity(8, 8);
    identity.b = Eigen::VectorXd::Zero(8);
    const TokenSequence tokens = unic::net::channel_reduce(g, identity);
    REQUIRE(tokens.rows() == 6);
    // Token h*W + w carries the feature column of that position.
    for (int p = 0; p < 6; ++p) {
      CHECK(tokens.row(p).transpose() == g.data.col(p));
    }
  }

  SECTION("seeded 2048-channel grid lands at 24 x 256") {
    const FeatureGrid g = unic::net::synth_features(128, 192, 7);  // 4 x 6
    const ModelWeights w = ModelWeights::seeded(NetConfig{}, 1);
    const TokenSequence tokens = unic::net::channel_reduce(g, w.reduce);
    CHECK(tokens.rows() == 24);
    CHECK(tokens.cols() == 256);
  }

  SECTION("channel mismatch is a shape error") {
    const NetConfig cfg = small_config();
    const ModelWeights w = ModelWeights::seeded(cfg, 1);
    const FeatureGrid g = unic::net::synth_features(32, 32, 7, cfg.channels * 2);
    CHECK_THROWS_AS(unic::net::channel_reduce(g, w.reduce), unic::ShapeError);
  }
}

TEST_CASE("multi-head attention") {
  const NetConfig cfg = small_config();
  unic::Rng rng(5);
  const unic::net::MhaWeights w = unic::net::detail::seeded_mha(cfg.d_model, rng);

  SECTION("single token attends to itself with weight one") {
    const TokenSequence q = unic::net::detail::gaussian(1, cfg.d_model, 1.0, rng);
    const TokenSequence out = unic::net::mha_forward(q, q, cfg.heads, w);
    const TokenSequence expected = w.out.apply(w.value.apply(q));
    CHECK((out - expected).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("attention rows are probability distributions") {
    const TokenSequence q = unic::net::detail::gaussian(10, cfg.d_model, 1.0, rng);
    const TokenSequence kv = unic::net::detail::gaussian(24, cfg.d_model, 1.0, rng);
    AttnTrace trace;
    const TokenSequence out = unic::net::mha_forward(q, kv, cfg.heads, w, &trace);
    CHECK(out.rows() == 10);
    CHECK(out.cols() == static_cast<Eigen::Index>(cfg.d_model));
    REQUIRE(trace.records.size() == 1);
    CHECK(trace.records[0].kv_len == 24);
    const Eigen::MatrixXd& rows = trace.records[0].rows;
    REQUIRE(rows.rows() == static_cast<Eigen::Index>(cfg.heads) * 10);
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
      REQUIRE(rows.row(r).sum() == Catch::Approx(1.0).margin(1e-6));
      REQUIRE(rows.row(r).minCoeff() >= 0.0);
    }
  }

  SECTION("head count must divide the token width") {
    const TokenSequence q = unic::net::detail::gaussian(4, cfg.d_model, 1.0, rng);
    CHECK_THROWS_AS(unic::net::mha_forward(q, q, 5, w), unic::ConfigError);
  }
}

TEST_CASE("encoder") {
  const NetConfig cfg = small_config();
  const ModelWeights w = ModelWeights::seeded(cfg, 11);
  unic::Rng rng(6);

  SECTION("permutation equivariance without positional embeddings") {
    const TokenSequence z = unic::net::detail::gaussian(12, cfg.d_model, 1.0, rng);
    const TokenSequence out = unic::net::encoder_forward(z, nullptr, w);

    std::mt19937 perm_rng(99);
    for (int t = 0; t < 10; ++t) {
      std::vector<int> perm(12);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), perm_rng);
      TokenSequence pz(12, cfg.d_model);
      for (int i = 0; i < 12; ++i) pz.row(i) = z.row(perm[i]);
      const TokenSequence pout = unic::net::encoder_forward(pz, nullptr, w);
      double worst = 0.0;
      for (int i = 0; i < 12; ++i) {
        worst = std::max(worst,
                         (pout.row(i) - out.row(perm[i])).cwiseAbs().maxCoeff());
      }
      REQUIRE(worst < 1e-6);
    }
  }

  SECTION("zero input stays zero through the default zero-bias weights") {
    const TokenSequence z = TokenSequence::Zero(6, cfg.d_model);
    const TokenSequence out = unic::net::encoder_forward(z, nullptr, w);
    CHECK(out.cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("deterministic and shape preserving with positions") {
    const TokenSequence z = unic::net::detail::gaussian(24, cfg.d_model, 1.0, rng);
    const TokenSequence pos =
        unic::net::sine_position_embeddings(4, 6, cfg.d_model);
    const TokenSequence a = unic::net::encoder_forward(z, &pos, w);
    const TokenSequence b = unic::net::encoder_forward(z, &pos, w);
    CHECK(a == b);
    CHECK(a.rows() == 24);
    CHECK(a.cols() == static_cast<Eigen::Index>(cfg.d_model));
  }

  SECTION("positional embedding shape mismatch") {
    const TokenSequence z = unic::net::detail::gaussian(24, cfg.d_model, 1.0, rng);
    const TokenSequence pos =
        unic::net::sine_position_embeddings(4, 5, cfg.d_model);
    CHECK_THROWS_AS(unic::net::encoder_forward(z, &pos, w), unic::ShapeError);
  }
}

TEST_CASE("feature extrapolation") {
  NetConfig cfg = small_config();
  unic::Rng rng(7);

  SECTION("cross attention memory is the visible tokens plus the queries") {
    cfg.pad_tokens = 1;
    cfg.fem_layers = 1;
    const ModelWeights w = ModelWeights::seeded(cfg, 21);
    const TokenSequence z_vis =
        unic::net::detail::gaussian(9, cfg.d_model, 1.0, rng);
    AttnTrace trace;
    const TokenSequence z_pad = unic::net::fem_forward(z_vis, w, &trace);
    CHECK(z_pad.rows() == 1);
    bool saw_cross = false;
    for (const auto& rec : trace.records) {
      if (rec.site == "fem.cross") {
        saw_cross = true;
        CHECK(rec.kv_len == 9 + 1);
      }
    }
    CHECK(saw_cross);
  }

  SECTION("output length is query-determined, independent of HW") {
    const ModelWeights w = ModelWeights::seeded(cfg, 22);
    for (int hw : {4, 9, 25}) {
      const TokenSequence z_vis =
          unic::net::detail::gaussian(hw, cfg.d_model, 1.0, rng);
      const TokenSequence z_pad = unic::net::fem_forward(z_vis, w);
      REQUIRE(z_pad.rows() == static_cast<Eigen::Index>(cfg.pad_tokens));
      REQUIRE(z_pad.cols() == static_cast<Eigen::Index>(cfg.d_model));
    }
  }

  SECTION("deterministic per seed") {
    cfg.pad_tokens = 12;
    cfg.fem_layers = 2;
    const ModelWeights w = ModelWeights::seeded(cfg, 23);
    const TokenSequence z_vis =
        unic::net::detail::gaussian(24, cfg.d_model, 1.0, rng);
    CHECK(unic::net::fem_forward(z_vis, w) == unic::net::fem_forward(z_vis, w));
  }
}

TEST_CASE("decoder") {
  const NetConfig cfg = small_config();
  const ModelWeights w = ModelWeights::seeded(cfg, 31);
  unic::Rng rng(8);
  const TokenSequence z_vis = unic::net::detail::gaussian(16, cfg.d_model, 1.0, rng);
  const TokenSequence z_pad = unic::net::fem_forward(z_vis, w);

  SECTION("heads produce valid views for arbitrary weights") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const ModelWeights wr = ModelWeights::seeded(cfg, seed);
      const auto views = unic::net::decoder_forward(z_vis, z_pad, wr);
      REQUIRE(views.size() == cfg.queries);
      for (const unic::PredictedView& v : views) {
        REQUIRE(v.confidence >= 0.0);
        REQUIRE(v.confidence <= 1.0);
        REQUIRE(v.box.w() > 0.0);
        REQUIRE(v.box.h() > 0.0);
      }
    }
  }

  SECTION("memory length equals visible plus padded tokens") {
    AttnTrace trace;
    unic::net::decoder_forward(z_vis, z_pad, w, &trace);
    bool saw_cross = false;
    for (const auto& rec : trace.records) {
      if (rec.site == "decoder.cross") {
        saw_cross = true;
        CHECK(rec.kv_len == 16 + cfg.pad_tokens);
      }
    }
    CHECK(saw_cross);
  }
}

TEST_CASE("full pipeline") {
  const NetConfig cfg = small_config();
  const ModelWeights w = ModelWeights::seeded(cfg, 41);

  SECTION("deterministic end to end") {
    const FeatureGrid g = unic::net::synth_features(64, 96, 5, cfg.channels);
    const auto a = unic::net::run_pipeline(w, g);
    const auto b = unic::net::run_pipeline(w, g);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      REQUIRE(a[i].box == b[i].box);
      REQUIRE(a[i].confidence == b[i].confidence);
    }
  }

  SECTION("numeric stability sweep at |x| <= 10") {
    FeatureGrid g = unic::net::synth_features(64, 96, 6, cfg.channels);
    g.data = (g.data.array().min(1.0).max(-1.0) * 10.0).matrix();
    const auto views = unic::net::run_pipeline(w, g);
    REQUIRE(views.size() == cfg.queries);
    for (const unic::PredictedView& v : views) {
      REQUIRE(std::isfinite(v.box.cx()));
      REQUIRE(std::isfinite(v.box.cy()));
      REQUIRE(std::isfinite(v.box.w()));
      REQUIRE(std::isfinite(v.box.h()));
    }
  }
}

TEST_CASE("feature grid files") {
  const std::filesystem::path dir = "scratch/tinynet_io";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "grid.bin").string();

  SECTION("round trip at float precision") {
    FeatureGrid g = unic::net::synth_features(64, 96, 9, 32);
    // Snap to float so the round trip compares exactly.
    for (Eigen::Index i = 0; i < g.data.rows(); ++i) {
      for (Eigen::Index j = 0; j < g.data.cols(); ++j) {
        g.data(i, j) = static_cast<double>(static_cast<float>(g.data(i, j)));
      }
    }
    unic::net::write_feature_grid(path, g);
    const FeatureGrid r = unic::net::read_feature_grid(path);
    CHECK(r.channels == g.channels);
    CHECK(r.height == g.height);
    CHECK(r.width == g.width);
    CHECK(r.data == g.data);
  }

  SECTION("header and payload errors") {
    unic::io::write_text_file(path, "not a header\n");
    CHECK_THROWS_AS(unic::net::read_feature_grid(path), unic::SchemaError);
    unic::io::write_text_file(path, "4 2 2\n\x00\x01");
    CHECK_THROWS_AS(unic::net::read_feature_grid(path), unic::SchemaError);
  }
}
