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

#ifndef GEOFUSE_COMMON_HPP_
#define GEOFUSE_COMMON_HPP_

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace geofuse {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor/sequence dimension mismatches. Messages name both shapes.
struct ShapeError : Error {
  using Error::Error;
};

// Invalid configuration values (bad hyper-parameters, unknown keys, ...).
struct ConfigError : Error {
  using Error::Error;
};

// Dataset or label problems (missing files, unknown labels, ...).
struct DataError : Error {
  using Error::Error;
};

// Non-finite losses and other numerical failures.
struct NumericalError : Error {
  using Error::Error;
};

namespace detail {
inline void concat_into(std::ostringstream&) {}
template <typename T, typename... Rest>
void concat_into(std::ostringstream& os, const T& head, const Rest&... rest) {
  os << head;
  concat_into(os, rest...);
}
}  // namespace detail

// Builds a message string from heterogeneous pieces.
template <typename... Args>
std::string concat(const Args&... args) {
  std::ostringstream os;
  detail::concat_into(os, args...);
  return os.str();
}

inline std::string shape_str(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

}  // namespace geofuse

#endif  // GEOFUSE_COMMON_HPP_
