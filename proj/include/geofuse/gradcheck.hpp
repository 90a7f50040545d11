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

#ifndef GEOFUSE_GRADCHECK_HPP_
#define GEOFUSE_GRADCHECK_HPP_

#include <string>
#include <vector>

namespace geofuse {

struct CheckResult {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t coords = 0;  // coordinates compared
};

// Central finite-difference verification of reverse-mode gradients.
// Scopes: all | tensor | attention | fusion | losses | encoder | pipeline.
// "pipeline" is the whole fusion-and-objective stack at (N=4, D=8, H=2).
std::vector<CheckResult> run_gradcheck(const std::string& scope);

}  // namespace geofuse

#endif  // GEOFUSE_GRADCHECK_HPP_
