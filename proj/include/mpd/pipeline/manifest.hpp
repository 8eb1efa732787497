#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpd/core/error.hpp"
#include "mpd/core/hash.hpp"

namespace mpd::pipeline {

// A stage failed; the message starts with the stage key.
struct StageError : Error {
  StageError(const std::string& stage, const std::string& what) : Error("stage " + stage + " failed: " + what), stage(stage) {}
  std::string stage;
};

struct StageRecord {
  std::string config_hash;
  std::map<std::string, std::string> inputs;   // path -> sha256
  std::map<std::string, std::string> outputs;  // path relative to the output root -> sha256
  std::string status;                          // "ok" or "failed"
  double wall_seconds = 0.0;

  nlohmann::json to_json() const {
    return {{"config_hash", config_hash}, {"inputs", inputs}, {"outputs", outputs}, {"status", status},
            {"wall_seconds", wall_seconds}};
  }
  static StageRecord from_json(const nlohmann::json& j) {
    StageRecord r;
    r.config_hash = j.value("config_hash", "");
    r.inputs = j.value("inputs", std::map<std::string, std::string>{});
    r.outputs = j.value("outputs", std::map<std::string, std::string>{});
    r.status = j.value("status", "");
    r.wall_seconds = j.value("wall_seconds", 0.0);
    return r;
  }
};

enum class StageOutcome { Ran, Cached };

// Record of every stage run under one output root, kept in manifest.json. A stage
// is a cache hit when its config hash and input hashes match the record and
// every recorded output still exists with the recorded hash.
class Manifest {
 public:
  explicit Manifest(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
    const auto file = root_ / "manifest.json";
    if (!std::filesystem::exists(file)) return;
    try {
      const auto j = nlohmann::json::parse(read_file(file));
      run_id_ = j.value("run_id", "");
      const auto stages = j.value("stages", nlohmann::json::object());
      for (const auto& [k, v] : stages.items()) stages_[k] = StageRecord::from_json(v);
    } catch (const nlohmann::json::exception&) {
      stages_.clear();  // unreadable manifest: everything reruns
    }
  }

  const std::filesystem::path& root() const { return root_; }
  void set_run_id(std::string id) {
    std::lock_guard lock(mutex_);
    run_id_ = std::move(id);
  }

  bool fresh(const std::string& key, const std::string& config_hash,
             const std::map<std::string, std::string>& inputs) const {
    std::lock_guard lock(mutex_);
    const auto it = stages_.find(key);
    if (it == stages_.end()) return false;
    const auto& r = it->second;
    if (r.status != "ok" || r.config_hash != config_hash || r.inputs != inputs || r.outputs.empty()) return false;
    for (const auto& [rel, hash] : r.outputs) {
      const auto p = root_ / rel;
      if (!std::filesystem::exists(p) || sha256_file(p) != hash) return false;
    }
    return true;
  }

  void record(const std::string& key, StageRecord r) {
    std::lock_guard lock(mutex_);
    stages_[key] = std::move(r);
    save_locked();
  }

  std::map<std::string, StageRecord> stages() const {
    std::lock_guard lock(mutex_);
    return stages_;
  }

  std::string relative(const std::filesystem::path& p) const {
    return std::filesystem::relative(p, root_).generic_string();
  }

 private:
  void save_locked() const {
    nlohmann::json j;
    j["run_id"] = run_id_;
    j["stages"] = nlohmann::json::object();
    for (const auto& [k, r] : stages_) j["stages"][k] = r.to_json();
    const auto tmp = root_ / "manifest.json.tmp";
    std::ofstream(tmp) << j.dump(2) << "\n";
    std::filesystem::rename(tmp, root_ / "manifest.json");
  }

  std::filesystem::path root_;
  std::string run_id_;
  std::map<std::string, StageRecord> stages_;
  mutable std::mutex mutex_;
};

inline std::map<std::string, std::string> hash_inputs(const std::vector<std::filesystem::path>& inputs) {
  std::map<std::string, std::string> out;
  for (const auto& p : inputs) {
    if (!std::filesystem::exists(p)) throw DomainError("missing stage input " + p.string());
    out[p.generic_string()] = sha256_file(p);
  }
  return out;
}

// Runs `produce` unless the manifest holds a fresh record for `key`. `produce`
// returns the files it wrote; they are hashed and recorded.
inline StageOutcome run_stage(Manifest& manifest, const std::string& key, const std::string& config_hash,
                              const std::vector<std::filesystem::path>& inputs, bool force,
                              const std::function<std::vector<std::filesystem::path>()>& produce) {
  std::map<std::string, std::string> in;
  try {
    in = hash_inputs(inputs);
  } catch (const std::exception& e) {
    throw StageError(key, e.what());
  }
  if (!force && manifest.fresh(key, config_hash, in)) return StageOutcome::Cached;
  const auto start = std::chrono::steady_clock::now();
  StageRecord r;
  r.config_hash = config_hash;
  r.inputs = in;
  try {
    for (const auto& p : produce()) r.outputs[manifest.relative(p)] = sha256_file(p);
  } catch (const std::exception& e) {
    r.status = "failed";
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest.record(key, r);
    throw StageError(key, e.what());
  }
  r.status = "ok";
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  manifest.record(key, std::move(r));
  return StageOutcome::Ran;
}

}  // namespace mpd::pipeline
