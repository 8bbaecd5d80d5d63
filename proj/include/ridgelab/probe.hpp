#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ridgelab/infoestim.hpp"
#include "ridgelab/synthdata.hpp"
#include "ridgelab/toymodel.hpp"

// Layer-wise information probing of trained checkpoints: predictive
// information I(Z_l; Y) and incremental gain I(dZ_l; Y) per epoch, layer and
// seed, with cross-seed aggregation.
namespace ridgelab::probe {

struct ProbeConfig {
  int n_subsample = 100;
  double bandwidth = info::kDefaultBandwidth;
  std::string eval_split = "test_id";
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 42};
  std::vector<int> epochs_to_probe;  // empty: every available epoch
  int permutations = 100;

  void validate() const;
};

enum class Metric { predictive, incremental };
std::string to_string(Metric m);
Metric metric_from_string(const std::string& s);

// n distinct indices in [0, n_available), sorted, fully determined by
// (seed, split name). Throws ContractViolation if n > n_available.
std::vector<std::size_t> subsample_indices(std::size_t n_available, std::size_t n,
                                           std::uint64_t seed, const std::string& split);

struct Extraction {
  std::vector<std::size_t> indices;
  std::vector<info::SampleMatrix> z;   // layers 0..L, unit rows
  std::vector<info::SampleMatrix> dz;  // dz[l - 1] for layers 1..L, unit or zero rows
  info::SampleMatrix y;                // label embeddings, unit rows
  std::vector<Matrix> raw_hidden;      // before normalization
  std::vector<Matrix> raw_deltas;
};

// Pass 1: last-token states and deltas of the selected samples. Pass 2: the
// label embedding of each sample's target.
Extraction extract(const model::ModelState& state, const data::TokenizedSplit& split,
                   const std::vector<std::size_t>& indices);
// Uses subsample_indices(split size, n_subsample, seed, eval_split).
Extraction extract(const model::ModelState& state, const data::TokenizedSplit& split,
                   const ProbeConfig& config, std::uint64_t seed);

struct LayerInformation {
  std::vector<double> predictive;   // index = layer 0..L
  std::vector<double> incremental;  // index = layer - 1, layers 1..L
};
// Reported (clamped) MI values; errors are rethrown with the layer attached.
LayerInformation layer_information(const Extraction& x, double bandwidth);

struct ProbeValue {
  int epoch;
  int layer;
  Metric metric;
  std::uint64_t seed;
  double value;
};
struct ProbeSummary {
  int epoch;
  int layer;
  Metric metric;
  double mean;
  double std;  // sample standard deviation; 0 for a single seed
  int n_seeds;
};

struct ProbeReport {
  std::vector<ProbeValue> values;
  std::vector<ProbeSummary> summary;
  std::map<int, int> ridge_layer;        // epoch -> argmax of mean predictive MI
  std::map<int, int> incremental_peak;   // epoch -> argmax of mean incremental MI
};

// Mean and sample std per (epoch, layer, metric), then the per-epoch argmax
// layers. Ties go to the smaller layer.
ProbeReport aggregate(std::vector<ProbeValue> values);

// Argmax layer of one seed's curve at one epoch (ties to the smaller layer);
// -1 if there are no matching values.
int peak_layer(const std::vector<ProbeValue>& values, int epoch, Metric metric,
               std::uint64_t seed);

// Provides the checkpoint of one training seed at one epoch.
using CheckpointSource = std::function<model::ModelState(std::uint64_t seed, int epoch)>;

// Both metrics over config.seeds x epochs. Every seed uses its own model and
// its own subsample; both metrics share the subsample.
ProbeReport probe_curves(const CheckpointSource& source, const std::vector<int>& epochs,
                         const data::TokenizedSplit& split, const ProbeConfig& config);
ProbeReport predictive_curve(const CheckpointSource& source, const std::vector<int>& epochs,
                             const data::TokenizedSplit& split, const ProbeConfig& config);
ProbeReport incremental_curve(const CheckpointSource& source, const std::vector<int>& epochs,
                              const data::TokenizedSplit& split, const ProbeConfig& config);

struct LayerRow {
  int layer;
  double i_zy;
  double acc_all;
  double acc_id;
  double acc_ood;
};
// One row per layer 0..L: early-exit accuracy on the ID and OOD splits and
// the layer's predictive MI on the probe subsample of `id`.
std::vector<LayerRow> layer_accuracy_table(const model::ModelState& state,
                                           const data::TokenizedSplit& id,
                                           const data::TokenizedSplit& ood,
                                           const ProbeConfig& config, std::uint64_t seed);
// Row-wise mean of several tables of equal depth.
std::vector<LayerRow> average_rows(const std::vector<std::vector<LayerRow>>& tables);

struct PermutationResult {
  double observed;
  std::vector<double> null;  // MI under each random relabeling
  double p_value;            // (1 + #{null >= observed}) / (1 + permutations)
  double q95;                // 95th percentile of the null
};
// One-sided permutation test of I(z; y) against random relabelings of y.
PermutationResult permutation_test(const info::SampleMatrix& z, const info::SampleMatrix& y,
                                   int permutations, std::uint64_t seed, double bandwidth);
// Shuffles y against z once, then runs the permutation test on the shuffled pair.
PermutationResult shuffled_label_control(const info::SampleMatrix& z, const info::SampleMatrix& y,
                                         int permutations, std::uint64_t seed, double bandwidth);

struct AttentionRow {
  int layer;  // 1..L
  int head;
  double signal_mass;
};
// Mass of the last query on signal positions, per layer and head, over the
// probe subsample.
std::vector<AttentionRow> attention_table(const model::ModelState& state,
                                          const data::TokenizedSplit& split,
                                          const std::vector<std::size_t>& indices);

// CSV writers. Column names are stable:
//   values:    epoch,layer,metric,seed,value
//   summary:   epoch,layer,metric,mean,std
//   layers:    layer,i_zy,acc_all,acc_id,acc_ood
//   attention: layer,head,signal_mass
void write_values_csv(const std::filesystem::path& path, const std::vector<ProbeValue>& values);
void write_summary_csv(const std::filesystem::path& path, const std::vector<ProbeSummary>& summary);
void write_layer_table_csv(const std::filesystem::path& path, const std::vector<LayerRow>& rows);
void write_attention_csv(const std::filesystem::path& path, const std::vector<AttentionRow>& rows);
std::vector<ProbeValue> read_values_csv(const std::filesystem::path& path);

}  // namespace ridgelab::probe
