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

#include "geofuse/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace geofuse {

namespace {

enum class ValueType { kString, kDouble, kSize, kU64, kBool, kSizeList, kDoubleList };

struct SchemaEntry {
  const char* key;
  ValueType type;
  const char* default_value;
};

// The full configuration surface. Section prefixes group by owning module.
const SchemaEntry kSchema[] = {
    {"encoder.image_size", ValueType::kSize, "96"},
    {"encoder.patch_size", ValueType::kSize, "16"},
    {"encoder.d_model", ValueType::kSize, "64"},
    {"encoder.depth", ValueType::kSize, "2"},
    {"encoder.heads", ValueType::kSize, "4"},
    {"encoder.ff_mult", ValueType::kSize, "4"},
    {"encoder.pre_norm", ValueType::kBool, "false"},
    {"fusion.token_heads", ValueType::kSize, "4"},
    {"fusion.channel_heads", ValueType::kSize, "4"},
    {"fusion.ff_mult", ValueType::kSize, "4"},
    {"fusion.gate_init", ValueType::kDouble, "0.1"},
    {"text.templates", ValueType::kSize, "3"},
    {"model.modality", ValueType::kString, "roadmap"},
    {"loss.lambda", ValueType::kDouble, "0.1"},
    {"loss.tau", ValueType::kDouble, "0.07"},
    {"loss.clamp_min", ValueType::kDouble, "1e-8"},
    {"loss.it_enabled", ValueType::kBool, "true"},
    {"loss.normalize_features", ValueType::kBool, "true"},
    {"train.epochs", ValueType::kSize, "30"},
    {"train.batch_size", ValueType::kSize, "16"},
    {"train.lr", ValueType::kDouble, "0.002"},
    {"train.momentum", ValueType::kDouble, "0.9"},
    {"train.weight_decay", ValueType::kDouble, "0.0005"},
    {"train.milestones", ValueType::kSizeList, "17,26"},
    {"train.decay_factors", ValueType::kDoubleList, "0.1,0.1"},
    {"train.weather_severity", ValueType::kDouble, "0.7"},
    {"train.anchor_refresh", ValueType::kString, "epoch"},
    {"train.ablation", ValueType::kString, "full"},
    {"train.seed", ValueType::kU64, "42"},
    {"eval.severity", ValueType::kDouble, "0.7"},
    {"eval.seed", ValueType::kU64, "1234"},
    {"eval.directions", ValueType::kString, "both"},
};

const SchemaEntry* find_schema(const std::string& key) {
  for (const auto& entry : kSchema)
    if (key == entry.key) return &entry;
  return nullptr;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (...) {
    throw ConfigError(concat("config: '", key, "' expects a number, got '", v, "'"));
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    std::uint64_t out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (...) {
    throw ConfigError(concat("config: '", key, "' expects an unsigned integer, got '", v, "'"));
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(concat("config: '", key, "' expects true/false, got '", v, "'"));
}

std::vector<std::string> split_commas(const std::string& v) {
  std::vector<std::string> parts;
  std::istringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ',')) parts.push_back(trim(part));
  return parts;
}

void validate_typed(const SchemaEntry& entry, const std::string& value) {
  switch (entry.type) {
    case ValueType::kString:
      break;
    case ValueType::kDouble:
      parse_double(entry.key, value);
      break;
    case ValueType::kSize:
    case ValueType::kU64:
      parse_u64(entry.key, value);
      break;
    case ValueType::kBool:
      parse_bool(entry.key, value);
      break;
    case ValueType::kSizeList:
      for (const auto& p : split_commas(value)) parse_u64(entry.key, p);
      break;
    case ValueType::kDoubleList:
      for (const auto& p : split_commas(value)) parse_double(entry.key, p);
      break;
  }
}

}  // namespace

Config::Config() {
  for (const auto& entry : kSchema) values_[entry.key] = entry.default_value;
}

void Config::set(const std::string& key, const std::string& value) {
  const SchemaEntry* entry = find_schema(key);
  if (!entry) throw ConfigError(concat("config: unknown key '", key, "'"));
  validate_typed(*entry, value);
  values_[key] = value;
}

void Config::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(concat("config: cannot open '", path.string(), "'"));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(concat("config: '", path.string(), "' line ", lineno,
                               " is not key=value"));
    set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

void Config::merge_overrides(const std::vector<std::string>& overrides) {
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos)
      throw ConfigError(concat("config: override '", o, "' is not key=value"));
    set(trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
  }
}

const std::string& Config::get_str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(concat("config: unknown key '", key, "'"));
  return it->second;
}

double Config::get_double(const std::string& key) const {
  return parse_double(key, get_str(key));
}

std::size_t Config::get_size(const std::string& key) const {
  return static_cast<std::size_t>(parse_u64(key, get_str(key)));
}

std::uint64_t Config::get_u64(const std::string& key) const {
  return parse_u64(key, get_str(key));
}

bool Config::get_bool(const std::string& key) const { return parse_bool(key, get_str(key)); }

std::vector<std::size_t> Config::get_size_list(const std::string& key) const {
  std::vector<std::size_t> out;
  for (const auto& p : split_commas(get_str(key)))
    out.push_back(static_cast<std::size_t>(parse_u64(key, p)));
  return out;
}

std::vector<double> Config::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& p : split_commas(get_str(key))) out.push_back(parse_double(key, p));
  return out;
}

std::string Config::echo() const {
  std::ostringstream os;
  for (const auto& [k, v] : values_) os << k << '=' << v << '\n';
  return os.str();
}

void Config::write_echo(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError(concat("config: cannot write echo to '", path.string(), "'"));
  out << echo();
}

ModelConfig Config::model_config(std::size_t num_classes) const {
  ModelConfig cfg;
  cfg.encoder.image_size = get_size("encoder.image_size");
  cfg.encoder.patch_size = get_size("encoder.patch_size");
  cfg.encoder.d_model = get_size("encoder.d_model");
  cfg.encoder.depth = get_size("encoder.depth");
  cfg.encoder.heads = get_size("encoder.heads");
  cfg.encoder.ff_mult = get_size("encoder.ff_mult");
  cfg.encoder.pre_norm = get_bool("encoder.pre_norm");
  cfg.fusion_token_heads = get_size("fusion.token_heads");
  cfg.fusion_channel_heads = get_size("fusion.channel_heads");
  cfg.fusion_ff_mult = get_size("fusion.ff_mult");
  cfg.gate_init = get_double("fusion.gate_init");
  cfg.num_classes = num_classes;
  cfg.text_templates = get_size("text.templates");
  cfg.modality = parse_modality(get_str("model.modality"));
  return cfg;
}

TrainConfig Config::train_config() const {
  TrainConfig cfg;
  cfg.epochs = get_size("train.epochs");
  cfg.batch_size = get_size("train.batch_size");
  cfg.lr = get_double("train.lr");
  cfg.momentum = get_double("train.momentum");
  cfg.weight_decay = get_double("train.weight_decay");
  cfg.milestones = get_size_list("train.milestones");
  cfg.decay_factors = get_double_list("train.decay_factors");
  cfg.lambda = get_double("loss.lambda");
  cfg.tau = get_double("loss.tau");
  cfg.clamp_lo = get_double("loss.clamp_min");
  cfg.it_enabled = get_bool("loss.it_enabled");
  cfg.normalize_features = get_bool("loss.normalize_features");
  cfg.weather_severity = get_double("train.weather_severity");
  cfg.anchor_refresh = parse_anchor_refresh(get_str("train.anchor_refresh"));
  cfg.ablation = parse_ablation(get_str("train.ablation"));
  cfg.seed = get_u64("train.seed");
  cfg.validate();
  return cfg;
}

EvalConfig Config::eval_config() const {
  EvalConfig cfg;
  cfg.severity = get_double("eval.severity");
  cfg.seed = get_u64("eval.seed");
  const std::string dirs = get_str("eval.directions");
  if (dirs == "both")
    cfg.directions = {Direction::kDroneToSatellite, Direction::kSatelliteToDrone};
  else if (dirs == "d2s")
    cfg.directions = {Direction::kDroneToSatellite};
  else if (dirs == "s2d")
    cfg.directions = {Direction::kSatelliteToDrone};
  else
    throw ConfigError(concat("config: eval.directions must be both/d2s/s2d, got '", dirs, "'"));
  return cfg;
}

}  // namespace geofuse
