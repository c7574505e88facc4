#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "patchscope/augment.hpp"
#include "patchscope/classifier.hpp"
#include "patchscope/dataset.hpp"
#include "patchscope/parallel.hpp"
#include "patchscope/pipeline.hpp"

namespace patchscope {

/// Everything cmd_run and cmd_train need. The split seed is not stored; it
/// is derived from master_seed.
struct ExperimentConfig {
  std::filesystem::path manifest;
  std::vector<StrategyConfig> strategies = StrategyConfig::table_strategies();
  TrainConfig train;
  AugmentSpec augment;
  SplitSpec split;
  FeatureGrid layout;
  std::filesystem::path output_dir = "out";
  int workers = default_workers(1);
  std::uint64_t master_seed = 0;

  /// Throws std::invalid_argument on an empty strategy list or invalid fields.
  void validate() const;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_json(const ExperimentConfig& cfg);

/// Reads a JSON config. Relative paths inside are taken relative to the
/// working directory. Throws std::runtime_error when the file or the
/// manifest it names does not exist.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Subcommand entry points. `args` excludes the program and subcommand names.
int cmd_synth(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_eval(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_train(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Dispatches on args[0] (synth, run, eval, train).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace patchscope
