#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ridgelab/numerics/tape.hpp"
#include "ridgelab/synthdata.hpp"

namespace ridgelab::model {

struct ModelConfig {
  int n_layers = 8;
  int d_model = 64;
  int n_heads = 4;
  int ff_mult = 4;
  int vocab_size = data::kVocabSize;
  int max_seq_len = 32;
  std::uint64_t seed = 0;
  // When false the blocks add their update unscaled and beta is ignored.
  bool residual_scaling = true;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct BlockParams {
  Matrix ln1_gain, ln1_shift;
  Matrix w_qkv, b_qkv;
  Matrix w_out, b_out;
  Matrix ln2_gain, ln2_shift;
  Matrix w_ff1, b_ff1;
  Matrix w_ff2, b_ff2;
};

struct ModelState {
  ModelConfig config;
  Matrix token_embedding;     // vocab x d; doubles as the output head
  Matrix position_embedding;  // max_seq_len x d
  std::vector<BlockParams> blocks;
  Matrix final_gain, final_shift;
  std::vector<double> beta;   // one per block, >= 0

  // Seeded initialization: normal(0, 0.02) weights and embeddings, output
  // projections scaled by 1/sqrt(2L), zero biases, unit gains, beta = 1.
  static ModelState initialize(const ModelConfig& config);

  // Every parameter except beta, in a fixed order.
  std::vector<std::pair<std::string, Matrix*>> named_weights();
  std::vector<std::pair<std::string, const Matrix*>> named_weights() const;
  std::size_t parameter_count() const;
};

// SHA-256 (hex) over the bytes of every non-beta parameter.
std::string weights_hash(const ModelState& state);

// All parameters flattened to matrices; beta appended as L 1x1 matrices when requested.
std::vector<Matrix> flatten(const ModelState& state, bool include_beta);
void unflatten(ModelState& state, std::span<const Matrix> params, bool include_beta);

enum class Trainable { none, all, beta_only };

// Tape handles mirroring ModelState.
struct ModelVars {
  struct Block {
    ad::Var ln1_gain, ln1_shift, w_qkv, b_qkv, w_out, b_out;
    ad::Var ln2_gain, ln2_shift, w_ff1, b_ff1, w_ff2, b_ff2;
  };
  ad::Var token_embedding, position_embedding;
  std::vector<Block> blocks;
  ad::Var final_gain, final_shift;
  std::vector<ad::Var> beta;  // 1x1 each
};

// Registers the state's tensors on `tape` (by reference; `state` must outlive the tape).
ModelVars bind(ad::Tape& tape, const ModelState& state, Trainable trainable);
// Binds an explicit flattened parameter list (layout of flatten(state, true)).
ModelVars bind_flat(const ModelConfig& config, std::span<const ad::Var> params);

struct Capture {
  bool hidden = false;
  bool attention = false;
};

struct ForwardTrace {
  // Last-token residual stream per layer: hidden[0] is the embedding stream,
  // hidden[l] the output of block l. Each is n_seq x d.
  std::vector<Matrix> hidden;
  // deltas[l - 1] = hidden[l] - hidden[l - 1].
  std::vector<Matrix> deltas;
  // attention[l - 1][seq * n_heads + head] is the T x T map of block l.
  std::vector<std::vector<Matrix>> attention;
  Matrix logits;  // n_seq x vocab, final position
  int seq_len = 0;
};

// Builds the forward graph for equal-length sequences and returns the
// final-position logits node. Fills `trace` according to `capture`.
ad::Var forward_graph(const ModelVars& vars, const ModelConfig& config,
                      std::span<const data::TokenSequence> inputs, const Capture& capture = {},
                      ForwardTrace* trace = nullptr);

// Inference-only forward pass.
ForwardTrace forward(const ModelState& state, std::span<const data::TokenSequence> inputs,
                     const Capture& capture = {});

// Token-embedding row of `token` (no positional component).
RowVector embed_label(const ModelState& state, int token);

// Final normalization and shared head applied to hidden[layer].
Matrix early_exit_logits(const ForwardTrace& trace, const ModelState& state, int layer);

struct AttentionSummary {
  // mass[l - 1][h]: mean over sequences of the last query's attention on signal positions.
  std::vector<std::vector<double>> per_head;
  std::vector<double> per_layer;  // mean over heads
};
AttentionSummary attention_summary(const ForwardTrace& trace, int n_heads,
                                   std::span<const int> signal_positions);

struct TokenProbability {
  int token;
  double probability;
};
struct DecodedDelta {
  std::vector<TokenProbability> top;     // most probable first
  std::vector<TokenProbability> bottom;  // least probable first
};
// Final-normalizes `delta`, projects it through the shared head and softmaxes.
// A zero delta normalizes to zero, so it decodes to softmax(final_shift * E^T),
// which is uniform while final_shift is zero.
DecodedDelta decode_delta(const ModelState& state, const RowVector& delta, int top_k);

// First `keep_layers` blocks (and their beta).
ModelState truncate(const ModelState& state, int keep_layers);

// Versioned binary checkpoint; see README for the layout.
void save_checkpoint(const std::filesystem::path& path, const ModelState& state,
                     const nlohmann::json& meta = nlohmann::json::object());
ModelState load_checkpoint(const std::filesystem::path& path, nlohmann::json* meta = nullptr);

nlohmann::json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j);

}  // namespace ridgelab::model
