#include "glmkit/manifest.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace glmkit {

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path + " for hashing");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  std::ostringstream hex;
  hex << std::hex << fnv1a(buffer.str());
  return hex.str();
}

std::string manifest_to_json_string(const RunManifest& manifest) {
  nlohmann::json doc;
  doc["command"] = manifest.command;
  doc["config"] = manifest.config_json.empty()
                      ? nlohmann::json(nullptr)
                      : nlohmann::json::parse(manifest.config_json);
  doc["seeds"] = manifest.seeds;
  doc["input_hashes"] = nlohmann::json::object();
  for (const auto& [path, hash] : manifest.input_hashes) doc["input_hashes"][path] = hash;
  doc["outputs"] = manifest.outputs;
  doc["wall_clock_seconds"] = manifest.wall_clock_seconds;
  return doc.dump(2);
}

void save_manifest(const std::string& path, const RunManifest& manifest) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest to " + path);
  out << manifest_to_json_string(manifest) << "\n";
}

int thread_cap() {
  if (const char* env = std::getenv("GLMKIT_THREADS")) {
    char* end = nullptr;
    long parsed = std::strtol(env, &end, 10);
    if (end && *end == '\0' && parsed > 0) return static_cast<int>(parsed);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace glmkit
