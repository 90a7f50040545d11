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

#include "CLI11.hpp"
#include "geofuse/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"geofuse: gated satellite-roadmap fusion for weather-robust "
               "drone geo-localization, at desk scale"};
  app.require_subcommand(1);

  geofuse::SynthGenArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synth-gen", "generate a synthetic benchmark");
  synth_cmd->add_option("--classes", synth.classes, "number of location classes");
  synth_cmd->add_option("--views-per-class", synth.views_per_class,
                        "drone views per class, per split");
  synth_cmd->add_option("--size", synth.size, "raster size in pixels");
  synth_cmd->add_option("--seed", synth.seed, "generator seed");
  synth_cmd->add_option("--out", synth.out, "output directory")->required();
  synth_cmd->add_flag("--force", synth.force, "overwrite a non-empty output directory");

  geofuse::TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model on a dataset");
  train_cmd->add_option("--data", train.data_dir, "dataset root")->required();
  train_cmd->add_option("--out", train.out_dir, "output directory")->required();
  train_cmd->add_option("--config", train.config_file, "key=value config file");
  train_cmd->add_option("--set", train.overrides, "config override key=value");
  train_cmd->add_option("--ablate", train.ablate, "full | token-only | no-cc");
  train_cmd->add_option("--modality", train.modality, "roadmap | blank");

  geofuse::EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--data", eval.data_dir, "dataset root")->required();
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--out", eval.out_dir, "output directory")->required();
  eval_cmd->add_option("--config", eval.config_file, "key=value config file");
  eval_cmd->add_option("--set", eval.overrides, "config override key=value");
  eval_cmd->add_option("--directions", eval.directions, "both | d2s | s2d");

  geofuse::GradcheckArgs gradcheck;
  CLI::App* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  grad_cmd->add_option("--scope", gradcheck.scope,
                       "all | tensor | attention | fusion | losses | encoder | pipeline");
  grad_cmd->add_option("--tol", gradcheck.tol, "max relative error tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : geofuse::kExitValidation;
  }

  if (synth_cmd->parsed()) return geofuse::cmd_synth_gen(synth);
  if (train_cmd->parsed()) return geofuse::cmd_train(train);
  if (eval_cmd->parsed()) return geofuse::cmd_eval(eval);
  if (grad_cmd->parsed()) return geofuse::cmd_gradcheck(gradcheck);
  return geofuse::kExitValidation;
}
