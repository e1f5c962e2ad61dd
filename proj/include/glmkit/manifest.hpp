#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace glmkit {

// Record of one command invocation: what ran, with what effective config and
// seeds, over which inputs (content-hashed), producing which outputs. A rerun
// whose manifest matches an earlier one (minus wall-clock) reproduced the run.
struct RunManifest {
  std::string command;                 // e.g. "build-dataset"
  std::string config_json;             // effective merged config, JSON text
  std::vector<std::uint64_t> seeds;
  std::vector<std::pair<std::string, std::string>> input_hashes;  // path -> hex hash
  std::vector<std::string> outputs;
  double wall_clock_seconds = 0.0;
};

// FNV-1a over a byte string; stable across platforms, good enough to detect
// input drift between runs (not cryptographic).
std::uint64_t fnv1a(const std::string& bytes);

// Hash a file's contents; throws std::runtime_error if it cannot be read.
std::string hash_file(const std::string& path);

std::string manifest_to_json_string(const RunManifest& manifest);
void save_manifest(const std::string& path, const RunManifest& manifest);

// Parallelism cap: GLMKIT_THREADS if set to a positive integer, otherwise
// the hardware concurrency (at least 1).
int thread_cap();

}  // namespace glmkit
