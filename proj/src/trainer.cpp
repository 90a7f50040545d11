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

#include "geofuse/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace geofuse {

AnchorRefresh parse_anchor_refresh(const std::string& name) {
  if (name == "epoch") return AnchorRefresh::kEveryEpoch;
  if (name == "static") return AnchorRefresh::kStatic;
  throw ConfigError(concat("unknown anchor refresh policy '", name,
                           "' (expected epoch or static)"));
}

const std::string& anchor_refresh_name(AnchorRefresh r) {
  static const std::string kEpoch = "epoch", kStatic = "static";
  return r == AnchorRefresh::kEveryEpoch ? kEpoch : kStatic;
}

Ablation parse_ablation(const std::string& name) {
  if (name == "full") return Ablation::kFull;
  if (name == "token-only") return Ablation::kTokenOnly;
  if (name == "no-cc") return Ablation::kNoCc;
  throw ConfigError(concat("unknown ablation '", name,
                           "' (expected full, token-only, or no-cc)"));
}

const std::string& ablation_name(Ablation a) {
  static const std::string kFull = "full", kTokenOnly = "token-only", kNoCc = "no-cc";
  switch (a) {
    case Ablation::kFull: return kFull;
    case Ablation::kTokenOnly: return kTokenOnly;
    default: return kNoCc;
  }
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
  if (lr < 0) throw ConfigError("TrainConfig: lr must be >= 0");
  if (lambda < 0) throw ConfigError("TrainConfig: lambda must be >= 0");
  if (tau <= 0) throw ConfigError("TrainConfig: tau must be > 0");
  if (weather_severity < 0 || weather_severity > 1)
    throw ConfigError("TrainConfig: weather_severity outside [0, 1]");
  if (milestones.size() != decay_factors.size())
    throw ConfigError("TrainConfig: milestones and decay_factors differ in length");
  for (std::size_t i = 1; i < milestones.size(); ++i)
    if (milestones[i] <= milestones[i - 1])
      throw ConfigError("TrainConfig: milestones must be strictly increasing");
  for (double f : decay_factors)
    if (f <= 0 || f > 1) throw ConfigError("TrainConfig: decay factors must be in (0, 1]");
}

double TrainConfig::effective_lambda() const {
  return ablation == Ablation::kFull ? lambda : 0.0;
}

double TrainConfig::lr_at_epoch(std::size_t epoch) const {
  double out = lr;
  for (std::size_t i = 0; i < milestones.size(); ++i)
    if (epoch >= milestones[i]) out *= decay_factors[i];
  return out;
}

void sgd_step(ParameterStore& params, const GradMap& grads, SgdState& state, double lr,
              double momentum, double weight_decay, const std::set<std::string>& frozen) {
  for (Parameter* p : params.all()) {
    auto it = grads.find(p->name);
    if (it == grads.end())
      throw ConfigError(concat("sgd_step: no gradient for parameter '", p->name, "'"));
    if (it->second.size() != p->tensor.size())
      throw ShapeError(concat("sgd_step: gradient size ", it->second.size(),
                              " vs parameter '", p->name, "' size ", p->tensor.size()));
    if (frozen.count(p->name)) continue;
    auto& v = state.velocity[p->name];
    if (v.size() != p->tensor.size()) v.assign(p->tensor.size(), 0.0);
    auto& theta = p->tensor.mutable_values();
    const auto& g = it->second;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      v[i] = momentum * v[i] + (g[i] + weight_decay * theta[i]);
      theta[i] -= lr * v[i];
    }
  }
}

const Image& ImageCache::get(const std::string& rel_path) {
  auto it = cache_.find(rel_path);
  if (it != cache_.end()) return it->second;
  Image img = load_png((root_ / rel_path).string());
  return cache_.emplace(rel_path, std::move(img)).first->second;
}

AnchorSet refresh_anchors(const GeoFuseModel& model, const SplitIndex& split,
                          ImageCache& cache) {
  return model.build_anchors(split, [&cache](const std::string& p) -> const Image& {
    return cache.get(p);
  });
}

namespace {

struct TrainItem {
  std::size_t class_index = 0;  // dense index into the split's class list
  std::size_t drone_index = 0;
};

struct ItemDraw {
  WeatherCondition condition = WeatherCondition::kNormal;
  std::uint64_t weather_seed = 0;
  std::uint64_t augment_seed = 0;
  std::size_t template_id = 0;
};

std::string fmt_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

TrainResult train(GeoFuseModel& model, const DatasetIndex& data, const TrainConfig& cfg,
                  ImageCache& cache) {
  cfg.validate();
  const SplitIndex& split = data.train;
  if (split.classes.size() != model.config().num_classes)
    throw ConfigError(concat("train: dataset has ", split.classes.size(),
                             " classes, model expects ", model.config().num_classes));

  std::vector<TrainItem> items;
  for (std::size_t c = 0; c < split.classes.size(); ++c)
    for (std::size_t d = 0; d < split.classes[c].drone.size(); ++d) items.push_back({c, d});
  if (items.empty()) throw DataError("train: no drone images in the train split");

  std::set<std::string> frozen;
  if (cfg.ablation == Ablation::kTokenOnly) {
    model.fusion().gate_w3.tensor.mutable_values()[0] = 0.0;
    frozen.insert(model.fusion().gate_w3.name);
  }
  const double lambda_eff = cfg.effective_lambda();
  const bool use_cc = lambda_eff > 0.0;

  AnchorSet anchors;
  if (use_cc) anchors = refresh_anchors(model, split, cache);

  SgdState sgd;
  TrainResult result;
  const auto& conditions = all_weather_conditions();

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (use_cc && cfg.anchor_refresh == AnchorRefresh::kEveryEpoch && epoch > 1)
      anchors = refresh_anchors(model, split, cache);
    const double lr = cfg.lr_at_epoch(epoch);

    std::vector<std::size_t> order(items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(cfg.seed, 0xE0, epoch));
    shuffle_rng.shuffle(order);

    // Per-item draws from one stream, consumed in shuffled order.
    Rng draw_rng(derive_seed(cfg.seed, 0xAE, epoch));
    std::vector<ItemDraw> draws(order.size());
    for (auto& d : draws) {
      d.condition = conditions[draw_rng.index(kNumWeatherConditions)];
      d.weather_seed = draw_rng.next_u64();
      d.augment_seed = draw_rng.next_u64();
      d.template_id = draw_rng.index(model.config().text_templates);
    }

    const std::size_t steps = (order.size() + cfg.batch_size - 1) / cfg.batch_size;
    for (std::size_t step = 0; step < steps; ++step) {
      const std::size_t begin = step * cfg.batch_size;
      const std::size_t end = std::min(begin + cfg.batch_size, order.size());

      std::vector<Tensor> drone_rows, sat_rows, fused_rows, text_rows;
      std::vector<std::size_t> dense_labels;
      std::vector<int> class_ids;
      for (std::size_t k = begin; k < end; ++k) {
        const TrainItem& item = items[order[k]];
        const ItemDraw& draw = draws[k];
        const ClassEntry& entry = split.classes[item.class_index];

        const Image drone_img = apply_weather(cache.get(entry.drone[item.drone_index]),
                                              draw.condition, cfg.weather_severity,
                                              draw.weather_seed);
        Encoded enc_d = model.encode_view(drone_img);

        auto [sat_img, road_img] = synchronized_augment(
            cache.get(entry.satellite[0]), model.roadmap_input(cache.get(entry.roadmap[0])),
            draw.augment_seed);
        Encoded enc_s = model.encode_view(sat_img);
        Encoded enc_r = model.encode_view(road_img);

        Tensor fused;
        if (cfg.ablation == Ablation::kTokenOnly) {
          Tensor f1 = token_cross_fuse(enc_s.tokens, enc_r.tokens, model.fusion());
          Tensor f2 = token_self_refine(f1, model.fusion());
          fused = pool_fused(transpose(f2));
        } else {
          fused = model.fused_raw(enc_s.tokens, enc_r.tokens);
        }

        drone_rows.push_back(enc_d.pooled);
        sat_rows.push_back(enc_s.pooled);
        fused_rows.push_back(fused);
        dense_labels.push_back(item.class_index);
        class_ids.push_back(entry.class_id);
        if (cfg.it_enabled)
          text_rows.push_back(
              model.caption_embedding({draw.condition, draw.template_id}));
      }

      Tensor drone_pooled = stack_rows(drone_rows);
      Tensor sat_pooled = stack_rows(sat_rows);
      Tensor fused_pooled = stack_rows(fused_rows);

      Tensor l_ce = instance_ce_loss(drone_pooled, sat_pooled, fused_pooled, dense_labels,
                                     model.head());

      Tensor l_cc = Tensor::scalar(0.0);
      Tensor drone_feats;
      if (use_cc || cfg.it_enabled) {
        drone_feats = cfg.normalize_features
                          ? model.feature_rows(drone_pooled)
                          : model.head().bottleneck(drone_pooled);
      }
      if (use_cc) {
        SimilarityMatrices sims = similarity_to_anchors(drone_feats, anchors, cfg.tau);
        PositiveMask mask = positive_mask(class_ids, anchors.class_labels);
        l_cc = class_contrastive_loss(sims, mask, cfg.clamp_lo).total;
      }

      Tensor l_it = Tensor::scalar(0.0);
      if (cfg.it_enabled) {
        Tensor text_feats = stack_rows(text_rows);
        l_it = image_text_losses(drone_feats, text_feats, model.match_head(), cfg.tau).total;
      }

      Tensor l_total = total_loss(l_it, l_ce, l_cc, lambda_eff);

      LossRow row{epoch, step, l_it.item(), l_ce.item(), l_cc.item(), l_total.item(), lr};
      if (!std::isfinite(row.l_total)) {
        std::ostringstream diag;
        diag << "train: non-finite loss at epoch " << epoch << " step " << step
             << " (L_IT=" << row.l_it << ", L_CE=" << row.l_ce << ", L_CC=" << row.l_cc
             << "; batch classes:";
        for (int id : class_ids) diag << ' ' << id;
        diag << ")";
        throw NumericalError(diag.str());
      }

      model.params().zero_grads();
      GradMap grads = backward(l_total, model.params());
      sgd_step(model.params(), grads, sgd, lr, cfg.momentum, cfg.weight_decay, frozen);
      model.params().zero_grads();
      result.log.push_back(row);
    }
  }
  return result;
}

void write_loss_log(const std::filesystem::path& path, const std::vector<LossRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError(concat("write_loss_log: cannot open '", path.string(), "'"));
  out << "epoch,step,L_IT,L_CE,L_CC,L_total,lr\n";
  for (const auto& r : rows) {
    out << r.epoch << ',' << r.step << ',' << fmt_double(r.l_it) << ',' << fmt_double(r.l_ce)
        << ',' << fmt_double(r.l_cc) << ',' << fmt_double(r.l_total) << ','
        << fmt_double(r.lr) << '\n';
  }
}

}  // namespace geofuse
