#pragma once

// Run manifests: everything needed to reproduce a CLI invocation.

#include <chrono>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

#include "e3dnas/arch_json.hpp"

namespace e3d::cli {

inline constexpr const char* kToolName = "e3dnas";
inline constexpr const char* kToolVersion = "1.0.0";

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

struct FileDigest {
  std::string path;
  std::string sha256;
};

struct RunManifest {
  std::string subcommand;
  Json config = Json::object();
  std::uint64_t seed = 0;
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;
  double wall_clock_seconds = 0.0;

  // The embedded form leaves out wall-clock time and output digests so that
  // machine-readable output stays byte-identical across repeated runs.
  Json to_json(bool embedded) const {
    Json j;
    j["tool"] = kToolName;
    j["version"] = kToolVersion;
    j["subcommand"] = subcommand;
    j["seed"] = seed;
    j["config"] = config;
    const auto digests = [](const std::vector<FileDigest>& files) {
      Json arr = Json::array();
      for (const auto& f : files) arr.push_back({{"path", f.path}, {"sha256", f.sha256}});
      return arr;
    };
    j["inputs"] = digests(inputs);
    if (!embedded) {
      j["outputs"] = digests(outputs);
      j["wall_clock_seconds"] = wall_clock_seconds;
    }
    return j;
  }
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace e3d::cli
