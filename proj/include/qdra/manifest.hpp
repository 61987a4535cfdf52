#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qdra/errors.hpp"

namespace qdra {

inline constexpr const char* kToolVersion = "qdra 0.1.0";

// FNV-1a 64 over the raw bytes of a file, as a hex string.
inline std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path + " for digest");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream out;
  out << "fnv1a64:" << std::hex << std::setfill('0') << std::setw(16) << h;
  return out.str();
}

// Re-run record written next to each subcommand's primary output:
// effective config, seed, input digests and the tool version.
inline void write_manifest(const std::string& primary_output, const std::string& subcommand,
                           const nlohmann::json& config, std::uint64_t seed,
                           const std::vector<std::string>& inputs,
                           const std::vector<std::string>& outputs) {
  nlohmann::json j;
  j["tool"] = kToolVersion;
  j["subcommand"] = subcommand;
  j["seed"] = seed;
  j["config"] = config;
  j["inputs"] = nlohmann::json::object();
  for (const auto& path : inputs) j["inputs"][path] = file_digest(path);
  j["outputs"] = outputs;
  std::string path = primary_output + ".manifest.json";
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  out << j.dump(1) << "\n";
}

}  // namespace qdra
