#include "output.hpp"

#include <cstdlib>
#include <ctime>
#include <fstream>

#include <openssl/evp.h>

#include "cutoff/error.hpp"
#include "cutoff/parallel.hpp"
#include "cutoff/rng.hpp"

#ifndef CUTOFF_LAB_VERSION
#define CUTOFF_LAB_VERSION "unknown"
#endif

namespace cutoff::cli {

void OutputSet::add(const std::string& name, std::string content) {
  if (name.empty() || name.find('/') != std::string::npos || name.find('\\') != std::string::npos ||
      name == "." || name == ".." || name == "manifest.json") {
    throw InvalidArgument("invalid output file name '" + name + "'");
  }
  for (const auto& f : files_) {
    if (f.first == name) throw InvalidArgument("duplicate output file '" + name + "'");
  }
  files_.emplace_back(name, std::move(content));
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

std::filesystem::path output_directory(const RunConfig& cfg) {
  if (cfg.is_set("run", "output")) return cfg.text("run", "output");
  const char* root = std::getenv(kOutputRootVariable);
  const std::filesystem::path base = root && *root ? root : "cutoff-lab-out";
  return base / cfg.command();
}

nlohmann::ordered_json manifest_skeleton(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["tool"] = "cutoff-lab";
  j["version"] = CUTOFF_LAB_VERSION;
  j["command"] = cfg.command();
  j["rng"] = std::string(kRngId);
  j["threads"] = max_threads();
  nlohmann::ordered_json c = nlohmann::ordered_json::object();
  for (const auto& [section, keys] : cfg.resolved()) {
    for (const auto& [key, value] : keys) c[section][key] = value;
  }
  j["config"] = c;
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  j["started_utc"] = stamp;
  return j;
}

namespace {

void write_file(const std::filesystem::path& target, const std::string& content) {
  auto tmp = target;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

}  // namespace

nlohmann::ordered_json commit(const std::filesystem::path& dir, const OutputSet& outputs,
                              nlohmann::ordered_json manifest) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json digests = nlohmann::ordered_json::object();
  for (const auto& [name, content] : outputs.files()) {
    write_file(dir / name, content);
    digests[name] = {{"sha256", sha256_hex(content)}, {"bytes", content.size()}};
  }
  manifest["outputs"] = digests;
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

}  // namespace cutoff::cli
