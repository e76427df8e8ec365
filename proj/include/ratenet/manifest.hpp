#pragma once

// Run manifest: every command that writes artifacts also writes a
// run-manifest.json next to them, recording the resolved configuration,
// the seed, and an FNV-1a 64-bit checksum of each artifact's bytes. Two
// runs are byte-identical iff their manifests agree.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "ratenet/config.hpp"

namespace ratenet {

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string fnv1a64_hex(std::string_view bytes) {
  static const char* digits = "0123456789abcdef";
  std::uint64_t h = fnv1a64(bytes);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

class ManifestWriter {
 public:
  ManifestWriter(std::string command, const ExperimentConfig& cfg)
      : command_(std::move(command)), config_(config_json(cfg)),
        seed_(cfg.seed), out_dir_(cfg.out_dir) {}

  // Record an artifact written as `name` under the run's output directory.
  void add_artifact(const std::string& name, std::string_view bytes) {
    artifacts_.push_back({{"file", name},
                          {"bytes", bytes.size()},
                          {"fnv1a64", fnv1a64_hex(bytes)}});
  }

  void write() const {
    nlohmann::json j{{"command", command_},
                     {"seed", seed_},
                     {"config", config_},
                     {"artifacts", artifacts_}};
    const std::filesystem::path path =
        std::filesystem::path(out_dir_) / "run-manifest.json";
    std::ofstream out(path, std::ios::binary);
    if (!out)
      throw std::runtime_error("manifest: cannot open " + path.string());
    out << j.dump(2) << '\n';
    if (!out)
      throw std::runtime_error("manifest: write failed on " + path.string());
  }

 private:
  std::string command_;
  nlohmann::json config_;
  std::uint64_t seed_ = 0;
  std::string out_dir_;
  std::vector<nlohmann::json> artifacts_;
};

// Write a CSV payload into out_dir and record it in the manifest.
inline void emit_artifact(ManifestWriter& manifest, const std::string& out_dir,
                          const std::string& name, const std::string& bytes) {
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path path = std::filesystem::path(out_dir) / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed on " + path.string());
  manifest.add_artifact(name, bytes);
}

}  // namespace ratenet
