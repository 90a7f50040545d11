/*
 * Copyright 2026 GeoFuse Contributors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cmath>

#include "doctest.h"
#include "geofuse/encoder.hpp"
#include "geofuse/losses.hpp"
#include "geofuse/model.hpp"
#include "geofuse/scene.hpp"

using namespace geofuse;

namespace {

EncoderConfig tiny_config() {
  EncoderConfig cfg;
  cfg.image_size = 32;
  cfg.patch_size = 16;
  cfg.d_model = 8;
  cfg.depth = 1;
  cfg.heads = 2;
  cfg.ff_mult = 2;
  return cfg;
}

std::vector<Parameter*> block_params(AttnBlockParams& p) {
  return {&p.w_q, &p.b_q, &p.w_k,  &p.b_k,  &p.w_v,  &p.b_v,  &p.w_o,  &p.b_o,
          &p.ff_w1, &p.ff_b1, &p.ff_w2, &p.ff_b2, &p.ln1_gamma, &p.ln1_beta,
          &p.ln2_gamma, &p.ln2_beta};
}

}  // namespace

TEST_SUITE("encoder") {

TEST_CASE("config validation and token count") {
  EncoderConfig cfg = tiny_config();
  CHECK(cfg.tokens() == 4);
  CHECK(cfg.patch_dim() == 768);
  cfg.image_size = 96;
  cfg.patch_size = 16;
  CHECK(cfg.tokens() == 36);
  cfg.patch_size = 20;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("zero image with zero bias gives tokens equal to positional embeddings") {
  Rng rng(71);
  EncoderParams enc("enc", tiny_config(), rng);
  enc.patch_b.tensor.mutable_values().assign(8, 0.0);
  Image black(32, 32, 0.0);
  Tensor tokens = patch_embed(black, enc);
  CHECK(tokens.values() == enc.pos_embed.tensor.values());
}

TEST_CASE("size mismatch raises data error") {
  Rng rng(72);
  EncoderParams enc("enc", tiny_config(), rng);
  Image wrong(64, 64, 0.5);
  CHECK_THROWS_AS(patch_embed(wrong, enc), DataError);
}

TEST_CASE("locality: differing patch k differs only in token k before attention") {
  Rng rng(73);
  EncoderParams enc("enc", tiny_config(), rng);
  Image a(32, 32, 0.3);
  Image b = a;
  // Patch index 3 is the bottom-right 16x16 block.
  b.at(20, 20, 1) = 0.9;
  Tensor ta = patch_embed(a, enc);
  Tensor tb = patch_embed(b, enc);
  for (std::size_t tok = 0; tok < 4; ++tok) {
    double diff = 0.0;
    for (std::size_t j = 0; j < 8; ++j) diff += std::fabs(ta.at(tok, j) - tb.at(tok, j));
    if (tok == 3)
      CHECK(diff > 0.0);
    else
      CHECK(diff == 0.0);
  }
}

TEST_CASE("depth 0 returns the patch embedding; pooled is the token mean") {
  Rng rng(74);
  EncoderConfig cfg = tiny_config();
  cfg.depth = 0;
  EncoderParams enc("enc", cfg, rng);
  const SceneSpec scene = generate_scene(1, 5);
  const Image img = render_satellite(scene, 32);
  Encoded e = encode_image(img, enc);
  Tensor embedded = patch_embed(img, enc);
  CHECK(e.tokens.values() == embedded.values());
  for (std::size_t j = 0; j < 8; ++j) {
    double mean = 0.0;
    for (std::size_t tok = 0; tok < 4; ++tok) mean += e.tokens.at(tok, j);
    mean /= 4.0;
    CHECK(e.pooled.values()[j] == doctest::Approx(mean).epsilon(1e-15));
  }
}

TEST_CASE("feature norm is 1 through the head") {
  Rng rng(75);
  EncoderParams enc("enc", tiny_config(), rng);
  ClassifierHead head("head", 8, 3, rng);
  const SceneSpec scene = generate_scene(2, 5);
  Encoded e = encode_image(render_satellite(scene, 32), enc);
  Tensor f = head.feature(e.pooled);
  double nsq = 0.0;
  for (double v : f.values()) nsq += v * v;
  CHECK(std::fabs(std::sqrt(nsq) - 1.0) <= 1e-10);
}

TEST_CASE("encoder is deterministic given parameters and input") {
  Rng rng(76);
  EncoderParams enc("enc", tiny_config(), rng);
  const Image img = render_satellite(generate_scene(3, 5), 32);
  Encoded a = encode_image(img, enc);
  Encoded b = encode_image(img, enc);
  CHECK(a.tokens.values() == b.tokens.values());
  CHECK(a.pooled.values() == b.pooled.values());
}

TEST_CASE("gradient check through a depth-1 encoder at D=8") {
  Rng rng(77);
  EncoderParams enc("enc", tiny_config(), rng);
  const Image img = render_satellite(generate_scene(4, 5), 32);
  ParameterStore store;
  enc.register_into(store);
  Rng prng(78);
  Tensor probe = Tensor::uniform({8}, prng, 0.5, 1.5);
  auto forward = [&]() {
    Encoded e = encode_image(img, enc);
    return dot(e.pooled, probe);
  };
  store.zero_grads();
  GradMap ad = backward(forward(), store);
  std::vector<Parameter*> plist{&enc.patch_w, &enc.patch_b, &enc.pos_embed};
  for (Parameter* p : block_params(enc.blocks[0])) plist.push_back(p);
  GradMap fd = finite_diff_grad([&]() { return forward().item(); }, plist);
  double worst = 0.0;
  for (Parameter* p : plist) {
    const auto& gv = ad.at(p->name);
    const auto& fv = fd.at(p->name);
    for (std::size_t i = 0; i < gv.size(); ++i) worst = std::max(worst, rel_err(gv[i], fv[i]));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("shared-weight contract: one encoder serves satellite and roadmap") {
  ModelConfig cfg;
  cfg.encoder = tiny_config();
  cfg.fusion_token_heads = 2;
  cfg.fusion_channel_heads = 2;
  cfg.fusion_ff_mult = 2;
  cfg.num_classes = 3;
  GeoFuseModel model(cfg, 99);
  const SceneSpec scene = generate_scene(0, 9);
  const Image sat = render_satellite(scene, 32);
  const Image road = render_roadmap(scene, 32);

  NoGradGuard guard;
  auto sat_before = model.encode_view(sat).pooled.values();
  auto road_before = model.encode_view(road).pooled.values();
  // Mutating the single encoder parameter set is observable from both views.
  Parameter* pw = model.params().find("encoder.patch_w");
  REQUIRE(pw != nullptr);
  for (auto& v : pw->tensor.mutable_values()) v += 0.01;
  auto sat_after = model.encode_view(sat).pooled.values();
  auto road_after = model.encode_view(road).pooled.values();
  CHECK(sat_before != sat_after);
  CHECK(road_before != road_after);
}

TEST_CASE("caption encoder: determinism, distinctness, unit norm") {
  Rng rng(79);
  TextEncoderParams text("text", 3, 8, rng);
  Tensor a = encode_caption({WeatherCondition::kFog, 1}, text);
  Tensor b = encode_caption({WeatherCondition::kFog, 1}, text);
  CHECK(a.values() == b.values());

  // Pairwise distinct embeddings across all (condition, template) pairs.
  std::vector<std::vector<double>> seen;
  for (WeatherCondition c : all_weather_conditions()) {
    for (std::size_t t = 0; t < 3; ++t) {
      Tensor e = encode_caption({c, t}, text);
      double nsq = 0.0;
      for (double v : e.values()) nsq += v * v;
      CHECK(std::fabs(std::sqrt(nsq) - 1.0) <= 1e-10);
      for (const auto& other : seen) CHECK(e.values() != other);
      seen.push_back(e.values());
    }
  }

  CHECK_THROWS_AS(encode_caption({WeatherCondition::kFog, 7}, text), DataError);
}

}  // TEST_SUITE
