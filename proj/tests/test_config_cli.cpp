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

#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "geofuse/commands.hpp"
#include "geofuse/config.hpp"
#include "geofuse/gradcheck.hpp"

using namespace geofuse;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("geofuse_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE("config_cli") {

TEST_CASE("defaults follow the reference hyper-parameters") {
  Config cfg;
  CHECK(cfg.get_size("train.batch_size") == 16);
  CHECK(cfg.get_double("train.momentum") == doctest::Approx(0.9));
  CHECK(cfg.get_double("train.weight_decay") == doctest::Approx(0.0005));
  CHECK(cfg.get_double("loss.lambda") == doctest::Approx(0.10));
  CHECK(cfg.get_double("loss.tau") == doctest::Approx(0.07));
  CHECK(cfg.get_size("encoder.image_size") == 96);
  CHECK(cfg.get_size("encoder.patch_size") == 16);
  CHECK((cfg.get_size_list("train.milestones") == std::vector<std::size_t>{17, 26}));
}

TEST_CASE("unknown keys and malformed values are rejected") {
  Config cfg;
  CHECK_THROWS_AS(cfg.set("train.nope", "1"), ConfigError);
  CHECK_THROWS_AS(cfg.set("train.lr", "fast"), ConfigError);
  CHECK_THROWS_AS(cfg.set("loss.it_enabled", "maybe"), ConfigError);
  CHECK_THROWS_AS(cfg.merge_overrides({"no_equals_sign"}), ConfigError);
  CHECK_NOTHROW(cfg.merge_overrides({"train.lr=0.01", "encoder.depth=1"}));
  CHECK(cfg.get_double("train.lr") == doctest::Approx(0.01));
}

TEST_CASE("config files parse with comments and blank lines") {
  const fs::path file = fs::temp_directory_path() / "geofuse_cfg_test.txt";
  std::ofstream(file) << "# comment\n\ntrain.lr = 0.25\nencoder.d_model=32\n";
  Config cfg;
  cfg.merge_file(file);
  CHECK(cfg.get_double("train.lr") == doctest::Approx(0.25));
  CHECK(cfg.get_size("encoder.d_model") == 32);
  std::ofstream(file) << "not a pair\n";
  Config cfg2;
  CHECK_THROWS_AS(cfg2.merge_file(file), ConfigError);
  fs::remove(file);
}

TEST_CASE("echo is sorted, complete, and round-trips") {
  Config cfg;
  cfg.set("train.lr", "0.125");
  const std::string echo = cfg.echo();
  CHECK(echo.find("train.lr=0.125") != std::string::npos);
  // Re-parsing the echo reproduces the config.
  const fs::path file = fs::temp_directory_path() / "geofuse_echo_test.txt";
  std::ofstream(file) << echo;
  Config cfg2;
  cfg2.merge_file(file);
  CHECK(cfg2.echo() == echo);
  fs::remove(file);
}

TEST_CASE("typed accessors build the module configs") {
  Config cfg;
  cfg.merge_overrides({"encoder.image_size=32", "encoder.d_model=16", "encoder.depth=1",
                       "encoder.heads=2", "encoder.ff_mult=2", "fusion.token_heads=2",
                       "fusion.channel_heads=2", "fusion.ff_mult=2"});
  const ModelConfig mc = cfg.model_config(7);
  CHECK(mc.num_classes == 7);
  CHECK(mc.encoder.tokens() == 4);
  CHECK(mc.fusion_config().n_tokens == 4);
  const TrainConfig tc = cfg.train_config();
  CHECK(tc.epochs == 30);
  const EvalConfig ec = cfg.eval_config();
  CHECK(ec.directions.size() == 2);

  cfg.set("eval.directions", "d2s");
  CHECK(cfg.eval_config().directions.size() == 1);
  CHECK(cfg.eval_config().directions[0] == Direction::kDroneToSatellite);
  cfg.set("eval.directions", "sideways");
  CHECK_THROWS_AS(cfg.eval_config(), ConfigError);
}

TEST_CASE("cmd_synth_gen: counts, determinism, argument errors") {
  const fs::path out = fresh_dir("synth");
  SynthGenArgs args;
  args.classes = 4;
  args.views_per_class = 2;
  args.size = 32;
  args.seed = 3;
  args.out = out.string();
  CHECK(cmd_synth_gen(args) == kExitOk);

  std::size_t sat = 0, road = 0, train_drone = 0;
  for (const auto& e : fs::recursive_directory_iterator(out)) {
    if (!e.is_regular_file() || e.path().extension() != ".png") continue;
    const std::string s = e.path().generic_string();
    if (s.find("train/satellite") != std::string::npos) ++sat;
    if (s.find("train/roadmap") != std::string::npos) ++road;
    if (s.find("train/drone") != std::string::npos) ++train_drone;
  }
  CHECK(sat == 4);
  CHECK(road == 4);
  CHECK(train_drone == 8);

  // Refuses to overwrite without force.
  CHECK(cmd_synth_gen(args) == kExitValidation);
  args.force = true;
  CHECK(cmd_synth_gen(args) == kExitOk);

  SynthGenArgs zero = args;
  zero.classes = 0;
  CHECK(cmd_synth_gen(zero) == kExitValidation);
  fs::remove_all(out);
}

TEST_CASE("cmd_train + cmd_eval end to end on a tiny run") {
  const fs::path data = fresh_dir("traindata");
  SynthGenArgs gen;
  gen.classes = 3;
  gen.views_per_class = 1;
  gen.size = 32;
  gen.seed = 9;
  gen.out = data.string();
  REQUIRE(cmd_synth_gen(gen) == kExitOk);

  const fs::path out = fresh_dir("trainout");
  TrainArgs train_args;
  train_args.data_dir = data.string();
  train_args.out_dir = out.string();
  train_args.overrides = {"train.epochs=1",      "train.batch_size=3", "encoder.image_size=32",
                          "encoder.d_model=16",  "encoder.depth=1",    "encoder.heads=2",
                          "encoder.ff_mult=2",   "fusion.token_heads=2",
                          "fusion.channel_heads=2", "fusion.ff_mult=2"};
  CHECK(cmd_train(train_args) == kExitOk);
  CHECK(fs::exists(out / "checkpoint.bin"));
  CHECK(fs::exists(out / "loss_log.csv"));
  CHECK(fs::exists(out / "report.json"));
  CHECK(fs::exists(out / "report.csv"));
  CHECK(fs::exists(out / "config.txt"));

  // Eval on the produced checkpoint reproduces the train-run report bytes.
  const fs::path eval_out = fresh_dir("evalout");
  EvalArgs eval_args;
  eval_args.data_dir = data.string();
  eval_args.checkpoint = (out / "checkpoint.bin").string();
  eval_args.out_dir = eval_out.string();
  eval_args.overrides = train_args.overrides;
  CHECK(cmd_eval(eval_args) == kExitOk);
  CHECK(slurp(eval_out / "report.json") == slurp(out / "report.json"));
  CHECK(slurp(eval_out / "report.csv") == slurp(out / "report.csv"));

  // Single-direction eval emits one direction only.
  const fs::path d2s_out = fresh_dir("eval_d2s");
  eval_args.out_dir = d2s_out.string();
  eval_args.directions = "d2s";
  CHECK(cmd_eval(eval_args) == kExitOk);
  const std::string csv = slurp(d2s_out / "report.csv");
  CHECK(csv.find("drone_to_satellite") != std::string::npos);
  CHECK(csv.find("satellite_to_drone") == std::string::npos);

  // The token-only flag freezes the channel gate and zeroes lambda.
  const fs::path ablate_out = fresh_dir("ablate");
  TrainArgs ablate_args = train_args;
  ablate_args.out_dir = ablate_out.string();
  ablate_args.ablate = "token-only";
  CHECK(cmd_train(ablate_args) == kExitOk);
  const std::string echoed = slurp(ablate_out / "config.txt");
  CHECK(echoed.find("train.ablation=token-only") != std::string::npos);

  for (const fs::path& p : {data, out, eval_out, d2s_out, ablate_out}) fs::remove_all(p);
}

TEST_CASE("cmd_gradcheck exit codes and scoping") {
  GradcheckArgs ok;
  ok.scope = "fusion";
  ok.tol = 1e-4;
  CHECK(cmd_gradcheck(ok) == kExitOk);

  GradcheckArgs impossible;
  impossible.scope = "fusion";
  impossible.tol = 0.0;
  CHECK(cmd_gradcheck(impossible) == kExitNumerical);

  GradcheckArgs bad;
  bad.scope = "everything";
  CHECK(cmd_gradcheck(bad) == kExitValidation);

  // Scoping runs only the requested checks.
  const auto fusion_only = run_gradcheck("fusion");
  for (const auto& r : fusion_only) {
    const bool is_fusion = r.name.find("fuse") != std::string::npos ||
                           r.name.find("refine") != std::string::npos;
    CHECK(is_fusion);
  }
}

}  // TEST_SUITE
