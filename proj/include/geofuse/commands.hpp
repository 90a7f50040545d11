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

#ifndef GEOFUSE_COMMANDS_HPP_
#define GEOFUSE_COMMANDS_HPP_

#include <string>
#include <vector>

namespace geofuse {

// Exit codes: 0 success, 1 validation error, 2 numerical failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitNumerical = 2;

struct SynthGenArgs {
  std::size_t classes = 32;
  std::size_t views_per_class = 8;
  std::size_t size = 96;
  std::uint64_t seed = 42;
  std::string out;
  bool force = false;
};

struct TrainArgs {
  std::string data_dir;
  std::string out_dir;
  std::string config_file;                 // optional key=value file
  std::vector<std::string> overrides;      // key=value pairs
  std::string ablate;                      // full | token-only | no-cc
  std::string modality;                    // roadmap | blank
};

struct EvalArgs {
  std::string data_dir;
  std::string checkpoint;
  std::string out_dir;
  std::string config_file;
  std::vector<std::string> overrides;
  std::string directions;  // both | d2s | s2d
};

struct GradcheckArgs {
  std::string scope = "all";
  double tol = 1e-4;
};

int cmd_synth_gen(const SynthGenArgs& args);
int cmd_train(const TrainArgs& args);
int cmd_eval(const EvalArgs& args);
int cmd_gradcheck(const GradcheckArgs& args);

}  // namespace geofuse

#endif  // GEOFUSE_COMMANDS_HPP_
