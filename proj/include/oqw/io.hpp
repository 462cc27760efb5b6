// Copyright 2026 The oqw-hitting Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oqw/common.hpp"

namespace oqw {

/// Shortest form that round-trips through strtod (17 significant digits).
inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void header(const std::vector<std::string>& cols) { row(cols); }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  void numbers(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_double(v));
    row(cells);
  }

 private:
  std::ostream& out_;
};

/// Parameters and provenance written next to every output file.
struct RunManifest {
  std::string command;
  nlohmann::json parameters = nlohmann::json::object();
  std::string graph_fingerprint;
  std::string version = kVersion;
  double wall_seconds = 0.0;

  nlohmann::json to_json() const {
    return {{"command", command},
            {"parameters", parameters},
            {"graph_fingerprint", graph_fingerprint},
            {"version", version},
            {"wall_seconds", wall_seconds}};
  }
};

inline std::string manifest_path(const std::string& output) { return output + ".manifest.json"; }

inline void write_manifest(const std::string& output, const RunManifest& m) {
  std::ofstream f(manifest_path(output));
  if (!f) throw std::ios_base::failure("cannot write manifest for '" + output + "'");
  f << m.to_json().dump(2) << '\n';
}

}  // namespace oqw
