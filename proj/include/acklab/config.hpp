#pragma once

// Flat "key = value" configuration files and experiment manifests.
//
//   # comment
//   model.family = flair-stack
//   optimizer.lr = 0.1
//
// A manifest adds sections: "[global]" keys apply to every run, each
// "[run NAME]" section defines one run and may override any key.

#include "acklab/char_lm.hpp"
#include "acklab/embeddings.hpp"
#include "acklab/tagger.hpp"
#include "acklab/tars.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace acklab {

class Config {
 public:
  Config() = default;

  // Throws DataError for malformed lines and unknown keys.
  static Config parse(const std::string& text, const std::string& origin = "config");
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key, const std::string& fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Relative paths resolve against base_dir() (the file's directory).
  std::string get_path(const std::string& key, const std::string& fallback = "") const;

  const std::map<std::string, std::string>& values() const { return values_; }
  const std::filesystem::path& base_dir() const { return base_; }
  void set_base_dir(std::filesystem::path p) { base_ = std::move(p); }

  // Values of `other` override ours.
  Config merged(const Config& other) const;

 private:
  std::map<std::string, std::string> values_;
  std::filesystem::path base_;
};

// Every recognised key with a one-line description.
const std::map<std::string, std::string>& known_config_keys();

ModelFamily config_family(const Config& c);
TaggerConfig tagger_config(const Config& c);
TarsConfig tars_config(const Config& c);
// Family defaults (CRF or fine-tuning) with optimizer.* overrides.
OptimizerConfig optimizer_config(const Config& c, ModelFamily family);
CharLmConfig char_lm_config(const Config& c);
StaticFitConfig static_fit_config(const Config& c);
// Default verbalization unless tars.verbalization_path is set.
Verbalization verbalization_config(const Config& c);

struct ManifestRun {
  std::string name;
  Config config;  // global keys merged with the run's own
};

struct Manifest {
  Config global;
  std::vector<ManifestRun> runs;
};

// Throws DataError for duplicate run names, keys outside a section, or a
// manifest without runs.
Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir = {});
Manifest load_manifest(const std::string& path);

}  // namespace acklab
