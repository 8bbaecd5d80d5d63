#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ridgelab/synthdata.hpp"
#include "ridgelab/toymodel.hpp"

namespace ridgelab::train {

enum class Optimizer { plain_sgd, adamw };
enum class Mode { full, beta_only };

std::string to_string(Optimizer o);
Optimizer optimizer_from_string(const std::string& s);

struct TrainConfig {
  // 1e-3 leaves some seeds of the L=8 default on a long plateau; 5e-4 gets
  // every tried seed to 100% ID accuracy by epoch 5.
  double learning_rate = 5e-4;
  int batch_size = 32;
  int epochs = 8;
  double weight_decay = 0.01;
  Optimizer optimizer = Optimizer::adamw;
  std::uint64_t seed = 0;
  Mode mode = Mode::full;

  void validate() const;
};

// Defaults for beta-only training at toy scale.
TrainConfig default_beta_config();

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;  // exact match of argmax next token vs target
  std::size_t count = 0;
};

// Loss/accuracy of the exit at `layer` (the final head when layer < 0).
Evaluation evaluate(const model::ModelState& state, const data::TokenizedSplit& split,
                    int layer = -1);

// Early-exit evaluation at every layer 0..L from one forward pass.
std::vector<Evaluation> evaluate_layers(const model::ModelState& state,
                                        const data::TokenizedSplit& split);

struct EvalSplits {
  data::TokenizedSplit val;       // in-distribution
  data::TokenizedSplit test_id;   // in-distribution
  data::TokenizedSplit test_ood;  // shifted moduli
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double test_loss = 0.0;  // over test_id and test_ood together
  double acc_all = 0.0;
  double acc_id = 0.0;
  double acc_ood = 0.0;
  std::string checkpoint;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;  // epoch 0 is the initialization
  std::vector<double> step_losses;
};

// Called after every epoch (including epoch 0, before any update). Returns
// the checkpoint reference to store in the record (may be empty).
using EpochHook = std::function<std::string(int epoch, const model::ModelState&)>;

// Next-token training with cross-entropy at the final position only. Batches
// follow an epoch-wise shuffle keyed by (seed, epoch). Throws NumericalError
// with the step index if the loss becomes non-finite. In beta_only mode the
// non-beta weights are frozen and verified unchanged by hash.
TrainResult train(model::ModelState& state, const data::TokenizedSplit& train_split,
                  const EvalSplits& eval, const TrainConfig& config, const EpochHook& hook = {});

struct BetaResult {
  std::vector<double> beta;
  Evaluation before;
  Evaluation after;
  std::string weights_hash_before;
  std::string weights_hash_after;
  std::vector<double> step_losses;
};

// Residual-scaling probe: resets beta to 1, freezes every other weight and
// trains beta alone on `split`, projecting beta to >= 0 after each step.
// Throws ContractViolation if any frozen weight changes.
BetaResult train_beta(model::ModelState& state, const data::TokenizedSplit& split,
                      const TrainConfig& config);

// Mean final-position cross-entropy of one batch.
double batch_loss(const model::ModelState& state, std::span<const data::TokenSequence> inputs,
                  std::span<const int> targets);

}  // namespace ridgelab::train
