#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ridgelab/config.hpp"

// Experiment orchestration: dataset generation, base training per seed,
// probing, beta training, depth sweep, plot-data emission and the run manifest.
// Every stage reads its inputs from and writes its outputs to one run directory.
namespace ridgelab::report {

inline constexpr const char* kArtifactVersion = "1.0.0";

// Layout of a run directory.
struct RunPaths {
  std::filesystem::path root;

  std::filesystem::path data(const std::string& split) const;
  std::filesystem::path checkpoint(int depth, std::uint64_t seed, int epoch) const;
  std::filesystem::path train_metrics(int depth, std::uint64_t seed) const;
  std::filesystem::path probe_dir() const;
  std::filesystem::path beta_dir() const;
  std::filesystem::path sweep_dir() const;
  std::filesystem::path figures_dir() const;
  std::filesystem::path manifest() const;
  std::filesystem::path config_snapshot() const;
};

// A failed stage; the partial manifest has been written when this is thrown.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Progress messages ("stage: detail"); may be empty.
using Logger = std::function<void(const std::string&)>;

void gen_data(const config::ExperimentConfig& cfg, const Logger& log = {});

// Trains one model of `depth` blocks for `seed`; writes its metrics CSV and the
// checkpoints of `checkpoint_epochs` (all epochs when empty).
void train_one(const config::ExperimentConfig& cfg, int depth, std::uint64_t seed,
               const std::vector<int>& checkpoint_epochs = {}, const Logger& log = {});
// Base training of the configured depth for every probe seed.
void train_all(const config::ExperimentConfig& cfg, const Logger& log = {});
void run_probe(const config::ExperimentConfig& cfg, const Logger& log = {});
void run_beta(const config::ExperimentConfig& cfg, const Logger& log = {});
void run_sweep(const config::ExperimentConfig& cfg, const Logger& log = {});

// Long-format plot data derived from the stage CSVs; a missing input raises
// an error naming the file.
void emit_figures(const std::filesystem::path& run_dir);

// Summary of the ridge-shape checks that decides the negative-replication flag.
struct RidgeAnalysis {
  int main_depth = 0;
  int main_seeds_with_interior_ridge = 0;  // per-seed ridge layer in [1, depth - 1]
  int shallow_depth = 0;                // smallest swept depth, 0 if none
  int shallow_seeds_non_decreasing = 0;
  int n_seeds = 0;
  std::vector<int> depths_with_ridge;   // sweep depths whose mean curve has an interior peak
  bool primary_pattern = false;
  bool negative_replication = false;
};
RidgeAnalysis analyze_ridge(const std::filesystem::path& run_dir, const config::ExperimentConfig& cfg);

// Hex SHA-256 of every file under the run directory except the manifest,
// keyed by relative path.
nlohmann::ordered_json checksums(const std::filesystem::path& run_dir);

// Writes manifest.json: config snapshot, version, seeds, completed stages,
// checksums and the ridge analysis (when the sweep and probe outputs exist).
nlohmann::ordered_json write_manifest(const config::ExperimentConfig& cfg,
                                      const std::vector<std::string>& completed,
                                      const std::optional<std::string>& failed_stage = {},
                                      const std::string& error = {});

// gen-data -> train -> probe -> beta-train -> depth-sweep -> report.
nlohmann::ordered_json run_pipeline(const config::ExperimentConfig& cfg, const Logger& log = {});

}  // namespace ridgelab::report
