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

#include "geofuse/commands.hpp"

#include <cstdio>
#include <filesystem>

#include "geofuse/config.hpp"
#include "geofuse/dataset.hpp"
#include "geofuse/gradcheck.hpp"
#include "geofuse/model.hpp"
#include "geofuse/retrieval.hpp"
#include "geofuse/trainer.hpp"

namespace geofuse {

namespace fs = std::filesystem;

namespace {

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  }
}

Config resolve_config(const std::string& config_file,
                      const std::vector<std::string>& overrides) {
  Config cfg;
  if (!config_file.empty()) cfg.merge_file(config_file);
  cfg.merge_overrides(overrides);
  return cfg;
}

void echo_config(const Config& cfg, const fs::path& out_dir) {
  std::fputs("resolved config:\n", stdout);
  std::fputs(cfg.echo().c_str(), stdout);
  cfg.write_echo(out_dir / "config.txt");
}

}  // namespace

int cmd_synth_gen(const SynthGenArgs& args) {
  return run_guarded([&]() {
    if (args.classes == 0) throw ConfigError("synth-gen: --classes must be >= 1");
    if (args.views_per_class == 0)
      throw ConfigError("synth-gen: --views-per-class must be >= 1");
    if (args.out.empty()) throw ConfigError("synth-gen: --out is required");
    SynthConfig cfg;
    cfg.classes = args.classes;
    cfg.views_per_class = args.views_per_class;
    cfg.image_size = args.size;
    cfg.seed = args.seed;
    cfg.force = args.force;
    const auto manifest = generate_synthetic_dataset(cfg, args.out);
    std::printf("generated %zu classes x %zu drone views per split into %s (%zu files)\n",
                args.classes, args.views_per_class, args.out.c_str(), manifest.size());
    std::printf("resolved config:\nsynth.classes=%zu\nsynth.views_per_class=%zu\n"
                "synth.size=%zu\nsynth.seed=%llu\n",
                args.classes, args.views_per_class, args.size,
                static_cast<unsigned long long>(args.seed));
    return kExitOk;
  });
}

int cmd_train(const TrainArgs& args) {
  return run_guarded([&]() {
    if (args.data_dir.empty()) throw ConfigError("train: --data is required");
    if (args.out_dir.empty()) throw ConfigError("train: --out is required");
    Config cfg = resolve_config(args.config_file, args.overrides);
    if (!args.ablate.empty()) cfg.set("train.ablation", args.ablate);
    if (!args.modality.empty()) cfg.set("model.modality", args.modality);

    const DatasetIndex data = load_dataset(args.data_dir);
    fs::create_directories(args.out_dir);
    echo_config(cfg, args.out_dir);

    const TrainConfig train_cfg = cfg.train_config();
    GeoFuseModel model(cfg.model_config(data.train.classes.size()), train_cfg.seed);
    ImageCache cache(data.root);

    const TrainResult result = train(model, data, train_cfg, cache);
    write_loss_log(fs::path(args.out_dir) / "loss_log.csv", result.log);
    save_checkpoint(fs::path(args.out_dir) / "checkpoint.bin", model.params());

    const auto reports = evaluate_conditions(
        model, data, cfg.eval_config(),
        [&cache](const std::string& p) -> const Image& { return cache.get(p); });
    write_reports_json(fs::path(args.out_dir) / "report.json", reports);
    write_reports_csv(fs::path(args.out_dir) / "report.csv", reports);
    std::fputs(format_report_table(reports).c_str(), stdout);
    std::printf("train: wrote checkpoint.bin, loss_log.csv, report.{json,csv} to %s\n",
                args.out_dir.c_str());
    return kExitOk;
  });
}

int cmd_eval(const EvalArgs& args) {
  return run_guarded([&]() {
    if (args.data_dir.empty()) throw ConfigError("eval: --data is required");
    if (args.checkpoint.empty()) throw ConfigError("eval: --checkpoint is required");
    if (args.out_dir.empty()) throw ConfigError("eval: --out is required");
    Config cfg = resolve_config(args.config_file, args.overrides);
    if (!args.directions.empty()) cfg.set("eval.directions", args.directions);

    const DatasetIndex data = load_dataset(args.data_dir);
    fs::create_directories(args.out_dir);
    echo_config(cfg, args.out_dir);

    GeoFuseModel model(cfg.model_config(data.train.classes.size()),
                       cfg.train_config().seed);
    load_checkpoint(args.checkpoint, model.params());
    ImageCache cache(data.root);

    const auto reports = evaluate_conditions(
        model, data, cfg.eval_config(),
        [&cache](const std::string& p) -> const Image& { return cache.get(p); });
    write_reports_json(fs::path(args.out_dir) / "report.json", reports);
    write_reports_csv(fs::path(args.out_dir) / "report.csv", reports);
    std::fputs(format_report_table(reports).c_str(), stdout);
    return kExitOk;
  });
}

int cmd_gradcheck(const GradcheckArgs& args) {
  return run_guarded([&]() {
    std::printf("resolved config:\ngradcheck.scope=%s\ngradcheck.tol=%g\n",
                args.scope.c_str(), args.tol);
    const auto results = run_gradcheck(args.scope);
    bool ok = true;
    for (const auto& r : results) {
      const bool pass = r.max_rel_err <= args.tol;
      ok = ok && pass;
      std::printf("%-28s max_rel_err=%.3e coords=%zu %s\n", r.name.c_str(), r.max_rel_err,
                  r.coords, pass ? "OK" : "FAIL");
    }
    if (!ok) {
      std::fprintf(stderr, "gradcheck: tolerance %g violated\n", args.tol);
      return kExitNumerical;
    }
    return kExitOk;
  });
}

}  // namespace geofuse
