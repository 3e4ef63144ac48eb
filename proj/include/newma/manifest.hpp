#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace newma {

inline constexpr const char* kToolName = "newma";
inline constexpr const char* kToolVersion = "0.1.0";

// Snapshot of everything that determines a run: subcommand, full config with
// seeds, and input/output paths. The hash covers exactly that content, so
// identical manifests imply byte-identical traces and reports; the wall-clock
// field is recorded in the file but never hashed.
struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;

  std::string hash() const;
  nlohmann::json to_json() const;  // includes hash and created_at
  void write(const std::string& path) const;
};

}  // namespace newma
