// Copyright 2026 The edgetrack Authors.
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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgetrack/error.hpp"
#include "edgetrack/format.hpp"
#include "edgetrack/harness/config.hpp"

namespace edgetrack::harness {

inline constexpr const char* kVersion = "1.0.0";

inline std::string cell(double v) { return format_real(v); }
inline std::string cell(int v) { return std::to_string(v); }
inline std::string cell(long v) { return std::to_string(v); }
inline std::string cell(std::uint64_t v) { return std::to_string(v); }
inline std::string cell(bool v) { return v ? "1" : "0"; }
inline std::string cell(const std::string& v) { return v; }
inline std::string cell(const char* v) { return v; }

// Comma-separated, one header row, '.' decimals. Fields never contain
// commas (names are generated), so no quoting is done.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
      : out_(path), columns_(header.size()) {
    if (!out_) throw Error(ErrorKind::kIo, "cannot write '" + path.string() + "'");
    write(header);
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw Error(ErrorKind::kIo, "row width does not match header");
    write(cells);
  }

 private:
  void write(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  std::ofstream out_;
  std::size_t columns_;
};

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

// Resolved config plus everything needed to repeat the run.
inline nlohmann::json manifest(const ExperimentConfig& cfg, const std::string& command, std::uint64_t seed,
                               nlohmann::json extra = nlohmann::json::object()) {
  nlohmann::json m;
  m["version"] = kVersion;
  m["command"] = command;
  m["seed"] = seed;
  m["config_hash"] = config_hash(cfg);
  m["config"] = to_json(cfg);
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  return m;
}

}  // namespace edgetrack::harness
