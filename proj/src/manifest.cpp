#include "newma/manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>

#include "newma/errors.hpp"
#include "newma/sha256.hpp"

namespace newma {

namespace {

nlohmann::json hashed_content(const RunManifest& m) {
  nlohmann::json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["command"] = m.command;
  j["config"] = m.config;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  return j;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string RunManifest::hash() const { return sha256_hex(hashed_content(*this).dump()); }

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j = hashed_content(*this);
  j["manifest_hash"] = hash();
  j["created_at"] = utc_timestamp();
  return j;
}

void RunManifest::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << to_json().dump(2) << "\n";
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace newma
