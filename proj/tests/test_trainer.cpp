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
#include <fstream>
#include <filesystem>

#include "doctest.h"
#include "geofuse/dataset.hpp"
#include "geofuse/model.hpp"
#include "geofuse/trainer.hpp"

using namespace geofuse;
namespace fs = std::filesystem;

namespace {

// A small shared dataset for trainer tests, generated once.
const fs::path& small_dataset() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "geofuse_trainer_ds";
    fs::remove_all(d);
    SynthConfig cfg;
    cfg.classes = 4;
    cfg.views_per_class = 2;
    cfg.image_size = 32;
    cfg.seed = 21;
    generate_synthetic_dataset(cfg, d);
    return d;
  }();
  return dir;
}

ModelConfig small_model_config() {
  ModelConfig cfg;
  cfg.encoder.image_size = 32;
  cfg.encoder.patch_size = 16;
  cfg.encoder.d_model = 16;
  cfg.encoder.depth = 1;
  cfg.encoder.heads = 2;
  cfg.encoder.ff_mult = 2;
  cfg.fusion_token_heads = 2;
  cfg.fusion_channel_heads = 2;
  cfg.fusion_ff_mult = 2;
  cfg.num_classes = 4;
  return cfg;
}

TrainConfig small_train_config() {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.lr = 0.002;
  cfg.milestones = {2};
  cfg.decay_factors = {0.1};
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("train config validation and schedule") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  // Desk-scale milestones keep the reference schedule's ratios.
  CHECK(std::fabs(17.0 / 30.0 - 120.0 / 210.0) <= 0.02);
  CHECK(std::fabs(26.0 / 30.0 - 180.0 / 210.0) <= 0.01);
  CHECK(cfg.lr_at_epoch(1) == doctest::Approx(cfg.lr));
  CHECK(cfg.lr_at_epoch(16) == doctest::Approx(cfg.lr));
  CHECK(cfg.lr_at_epoch(17) == doctest::Approx(0.1 * cfg.lr));
  CHECK(cfg.lr_at_epoch(26) == doctest::Approx(0.01 * cfg.lr));
  CHECK(cfg.lr_at_epoch(30) == doctest::Approx(0.01 * cfg.lr));

  TrainConfig bad = cfg;
  bad.milestones = {20, 10};
  bad.decay_factors = {0.1, 0.1};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.decay_factors = {1.5, 0.1};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("sgd_step: plain descent, zero gradient, momentum recurrence") {
  Parameter p("p", Tensor::scalar(1.0, true));
  ParameterStore store;
  store.add(&p);
  SgdState state;

  // Momentum 0, weight decay 0: one plain step.
  GradMap g{{"p", {0.5}}};
  sgd_step(store, g, state, 0.1, 0.0, 0.0);
  CHECK(p.tensor.values()[0] == doctest::Approx(0.95).epsilon(1e-15));

  // Zero gradient, no decay: parameters unchanged.
  SgdState s2;
  GradMap gz{{"p", {0.0}}};
  const double before = p.tensor.values()[0];
  sgd_step(store, gz, s2, 0.1, 0.9, 0.0);
  CHECK(p.tensor.values()[0] == before);

  // Two steps on f = theta^2/2 from theta = 1 (grad = theta), lr 0.1,
  // momentum 0.9, recomputed by a scalar oracle.
  p.tensor.mutable_values()[0] = 1.0;
  SgdState s3;
  double theta = 1.0, v = 0.0;
  for (int i = 0; i < 2; ++i) {
    GradMap gi{{"p", {p.tensor.values()[0]}}};
    sgd_step(store, gi, s3, 0.1, 0.9, 0.0);
    v = 0.9 * v + theta;
    theta -= 0.1 * v;
  }
  CHECK(p.tensor.values()[0] == doctest::Approx(theta).epsilon(1e-15));

  // Missing or mis-shaped gradients are contract errors.
  CHECK_THROWS_AS(sgd_step(store, GradMap{}, state, 0.1, 0.9, 0.0), ConfigError);
  GradMap bad{{"p", {1.0, 2.0}}};
  CHECK_THROWS_AS(sgd_step(store, bad, state, 0.1, 0.9, 0.0), ShapeError);
}

TEST_CASE("lr = 0 leaves parameters bitwise unchanged") {
  const DatasetIndex data = load_dataset(small_dataset());
  GeoFuseModel model(small_model_config(), 5);
  std::vector<std::vector<double>> before;
  for (Parameter* p : model.params().all()) before.push_back(p->tensor.values());

  TrainConfig cfg = small_train_config();
  cfg.epochs = 1;
  cfg.lr = 0.0;
  ImageCache cache(data.root);
  train(model, data, cfg, cache);

  std::size_t i = 0;
  for (Parameter* p : model.params().all()) CHECK(p->tensor.values() == before[i++]);
}

TEST_CASE("same seed gives identical loss trajectories") {
  const DatasetIndex data = load_dataset(small_dataset());
  auto run = [&]() {
    GeoFuseModel model(small_model_config(), 5);
    ImageCache cache(data.root);
    return train(model, data, small_train_config(), cache);
  };
  const TrainResult a = run();
  const TrainResult b = run();
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].l_total == b.log[i].l_total);
    CHECK(a.log[i].l_ce == b.log[i].l_ce);
    CHECK(a.log[i].l_cc == b.log[i].l_cc);
    CHECK(a.log[i].l_it == b.log[i].l_it);
  }
}

TEST_CASE("logged components combine into the total within 1e-12") {
  const DatasetIndex data = load_dataset(small_dataset());
  GeoFuseModel model(small_model_config(), 5);
  ImageCache cache(data.root);
  TrainConfig cfg = small_train_config();
  const TrainResult result = train(model, data, cfg, cache);
  REQUIRE(!result.log.empty());
  for (const auto& row : result.log) {
    CHECK(std::fabs(row.l_total - (row.l_it + row.l_ce + cfg.lambda * row.l_cc)) <= 1e-12);
    CHECK(std::isfinite(row.l_total));
  }
}

TEST_CASE("training reduces the loss on a small run") {
  const DatasetIndex data = load_dataset(small_dataset());
  GeoFuseModel model(small_model_config(), 5);
  ImageCache cache(data.root);
  TrainConfig cfg = small_train_config();
  cfg.epochs = 12;
  cfg.milestones = {9};
  cfg.decay_factors = {0.1};
  cfg.it_enabled = false;
  const TrainResult result = train(model, data, cfg, cache);
  const std::size_t steps_per_epoch = result.log.size() / cfg.epochs;
  double first_epoch = 0, last_epoch = 0;
  for (std::size_t i = 0; i < steps_per_epoch; ++i) {
    first_epoch += result.log[i].l_total;
    last_epoch += result.log[result.log.size() - steps_per_epoch + i].l_total;
  }
  CHECK(last_epoch < first_epoch);
}

TEST_CASE("anchor refresh: idempotent, matches a direct build, moves after a step") {
  const DatasetIndex data = load_dataset(small_dataset());
  GeoFuseModel model(small_model_config(), 5);
  ImageCache cache(data.root);

  const AnchorSet a = refresh_anchors(model, data.train, cache);
  const AnchorSet b = refresh_anchors(model, data.train, cache);
  CHECK(a.sat.values() == b.sat.values());
  CHECK(a.fused.values() == b.fused.values());

  const AnchorSet direct = model.build_anchors(
      data.train, [&cache](const std::string& p) -> const Image& { return cache.get(p); });
  CHECK(a.sat.values() == direct.sat.values());
  CHECK(a.fused.values() == direct.fused.values());

  TrainConfig cfg = small_train_config();
  cfg.epochs = 1;
  train(model, data, cfg, cache);
  const AnchorSet after = refresh_anchors(model, data.train, cache);
  CHECK(a.fused.values() != after.fused.values());
}

TEST_CASE("token-only ablation freezes the channel gate at zero") {
  const DatasetIndex data = load_dataset(small_dataset());
  GeoFuseModel model(small_model_config(), 5);
  ImageCache cache(data.root);
  TrainConfig cfg = small_train_config();
  cfg.ablation = Ablation::kTokenOnly;
  const TrainResult result = train(model, data, cfg, cache);
  CHECK(model.fusion().gate_w3.tensor.values()[0] == 0.0);
  CHECK(cfg.effective_lambda() == 0.0);
  for (const auto& row : result.log) CHECK(row.l_cc == 0.0);
  // The other gates still train.
  CHECK(model.fusion().gate_w1.tensor.values()[0] != 0.1);
}

TEST_CASE("blank modality replaces roadmap input with white rasters") {
  ModelConfig mc = small_model_config();
  mc.modality = Modality::kBlank;
  GeoFuseModel model(mc, 5);
  Image road(32, 32, 0.2);
  const Image input = model.roadmap_input(road);
  for (double v : input.px) CHECK(v == 1.0);

  ModelConfig mc2 = small_model_config();
  GeoFuseModel passthrough(mc2, 5);
  CHECK(passthrough.roadmap_input(road).px == road.px);
}

TEST_CASE("checkpoint round-trips every parameter exactly") {
  const fs::path path = fs::temp_directory_path() / "geofuse_ckpt_test.bin";
  GeoFuseModel model(small_model_config(), 5);
  std::vector<std::vector<double>> before;
  for (Parameter* p : model.params().all()) before.push_back(p->tensor.values());
  save_checkpoint(path, model.params());

  GeoFuseModel other(small_model_config(), 6);  // different init
  load_checkpoint(path, other.params());
  std::size_t i = 0;
  for (Parameter* p : other.params().all()) CHECK(p->tensor.values() == before[i++]);

  // Shape mismatch is rejected naming the tensor.
  ModelConfig wider = small_model_config();
  wider.encoder.d_model = 32;
  GeoFuseModel mismatched(wider, 7);
  CHECK_THROWS_AS(load_checkpoint(path, mismatched.params()), DataError);
  fs::remove(path);
}

TEST_CASE("loss log writer emits one row per step") {
  const fs::path path = fs::temp_directory_path() / "geofuse_loss_log_test.csv";
  std::vector<LossRow> rows{{1, 0, 0.5, 1.5, 2.5, 2.25, 0.05}, {1, 1, 0.4, 1.4, 2.4, 2.04, 0.05}};
  write_loss_log(path, rows);
  std::ifstream in(path);
  std::string header, l1, l2;
  std::getline(in, header);
  std::getline(in, l1);
  std::getline(in, l2);
  CHECK(header == "epoch,step,L_IT,L_CE,L_CC,L_total,lr");
  CHECK(l1 == "1,0,0.5,1.5,2.5,2.25,0.05");
  CHECK(l2 == "1,1,0.4,1.4,2.4,2.04,0.05");
  fs::remove(path);
}

}  // TEST_SUITE
