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

#ifndef GEOFUSE_CONFIG_HPP_
#define GEOFUSE_CONFIG_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "geofuse/model.hpp"
#include "geofuse/retrieval.hpp"
#include "geofuse/trainer.hpp"

namespace geofuse {

// Flat key=value configuration with section prefixes (train.lr=0.05).
// Unknown keys are rejected; values are type-checked against the schema.
class Config {
 public:
  Config();  // schema defaults

  void set(const std::string& key, const std::string& value);
  void merge_file(const std::filesystem::path& path);
  // "key=value" strings, e.g. from command-line overrides.
  void merge_overrides(const std::vector<std::string>& overrides);

  const std::string& get_str(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::size_t> get_size_list(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;

  // Fully-resolved sorted key=value lines for reproducibility echoes.
  std::string echo() const;
  void write_echo(const std::filesystem::path& path) const;

  ModelConfig model_config(std::size_t num_classes) const;
  TrainConfig train_config() const;
  EvalConfig eval_config() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace geofuse

#endif  // GEOFUSE_CONFIG_HPP_
