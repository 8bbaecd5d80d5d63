#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ridgelab/probe.hpp"
#include "ridgelab/toymodel.hpp"
#include "ridgelab/training.hpp"

// Experiment configuration: a sectioned key/value text file ("[section]",
// "key = value"). Every key has a default; unknown sections or keys are errors.
namespace ridgelab::config {

// Default output root comes from this variable when the config leaves it unset.
inline constexpr const char* kOutputRootEnv = "RIDGELAB_OUTPUT_ROOT";

struct DataConfig {
  std::uint64_t seed = 0;  // split i uses seed + i, in the order of split_names()
  int k_id = 13;
  std::vector<int> k_ood = data::default_ood_moduli();
  int k_beta_ood = 17;
  int noise_range = data::kDefaultNoiseRange;
  std::size_t train_size = 10000;
  std::size_t val_size = 2000;
  std::size_t test_id_size = 1000;
  std::size_t test_ood_size = 1000;
  std::size_t beta_size = 2000;
};

struct SweepConfig {
  std::vector<int> depths{2, 4, 6, 8, 10};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 42};
};

struct ExperimentConfig {
  DataConfig data;
  model::ModelConfig model;  // model.seed is replaced by each training seed
  train::TrainConfig train;  // train.seed likewise
  train::TrainConfig beta = train::default_beta_config();
  probe::ProbeConfig probe;  // probe.seeds are also the training seeds
  SweepConfig sweep;
  std::filesystem::path output_dir;  // empty: $RIDGELAB_OUTPUT_ROOT/run, else ./runs/default

  void validate() const;
  std::filesystem::path resolved_output_dir() const;
};

// The six dataset splits, in seed order.
const std::vector<std::string>& split_names();
data::SplitSpec split_spec(const DataConfig& d, const std::string& name);

ExperimentConfig defaults();
// Applies "key = value" lines to `base`. Throws ParseError naming the file
// and key for unknown keys or malformed values.
ExperimentConfig load(const std::filesystem::path& path, ExperimentConfig base = defaults());
// Applies one "section.key" = value override.
void set(ExperimentConfig& cfg, const std::string& dotted_key, const std::string& value);
// All settable keys as "section.key", in a fixed order.
std::vector<std::string> keys();
// Canonical text form (every key, fixed order); load(dump(c)) == c.
std::string dump(const ExperimentConfig& cfg);

// Small helpers shared with the CLI: "1,2,5-7" style integer lists.
std::vector<int> parse_int_list(const std::string& s);
std::vector<std::uint64_t> parse_seed_list(const std::string& s);

}  // namespace ridgelab::config
