#include "ridgelab/training.hpp"

#include <cmath>
#include <numeric>

#include "ridgelab/errors.hpp"
#include "ridgelab/numerics/kernels.hpp"
#include "ridgelab/numerics/ops.hpp"

namespace ridgelab::train {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr std::size_t kEvalChunk = 512;

std::vector<ad::Var> flat_weights(const model::ModelVars& v) {
  std::vector<ad::Var> out{v.token_embedding, v.position_embedding};
  for (const auto& b : v.blocks) {
    out.insert(out.end(), {b.ln1_gain, b.ln1_shift, b.w_qkv, b.b_qkv, b.w_out, b.b_out,
                           b.ln2_gain, b.ln2_shift, b.w_ff1, b.b_ff1, b.w_ff2, b.b_ff2});
  }
  out.push_back(v.final_gain);
  out.push_back(v.final_shift);
  return out;
}

// Biases and normalization parameters are exempt from weight decay.
bool decays(const std::string& name) {
  const auto leaf = name.substr(name.rfind('.') + 1);
  return !(leaf.starts_with("b_") || leaf.ends_with("_gain") || leaf.ends_with("_shift") ||
           leaf == "final_gain" || leaf == "final_shift");
}

class Stepper {
 public:
  Stepper(const TrainConfig& config, std::size_t n_params)
      : config_(config), m_(n_params), v_(n_params) {}

  void update(std::size_t slot, Matrix& param, const Matrix& grad, bool decay) {
    const double lr = config_.learning_rate;
    if (decay && config_.weight_decay > 0.0) param *= 1.0 - lr * config_.weight_decay;
    if (config_.optimizer == Optimizer::plain_sgd) {
      param -= lr * grad;
      return;
    }
    Matrix& m = m_[slot];
    Matrix& v = v_[slot];
    if (m.size() == 0) {
      m = Matrix::Zero(grad.rows(), grad.cols());
      v = Matrix::Zero(grad.rows(), grad.cols());
    }
    m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * grad;
    v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(kAdamBeta1, step_);
    const double c2 = 1.0 - std::pow(kAdamBeta2, step_);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + kAdamEps);
  }

  void next_step() { ++step_; }

 private:
  TrainConfig config_;
  std::vector<Matrix> m_, v_;
  int step_ = 1;
};

int argmax_row(const Matrix& m, Eigen::Index r) {
  Eigen::Index best = 0;
  m.row(r).maxCoeff(&best);
  return static_cast<int>(best);
}

void fill_eval(EpochRecord& rec, const model::ModelState& state, const EvalSplits& eval) {
  if (!eval.val.inputs.empty()) {
    const Evaluation v = evaluate(state, eval.val);
    rec.val_loss = v.loss;
    rec.val_acc = v.accuracy;
  }
  const Evaluation id = evaluate(state, eval.test_id);
  const Evaluation ood = evaluate(state, eval.test_ood);
  rec.acc_id = id.accuracy;
  rec.acc_ood = ood.accuracy;
  const double n = static_cast<double>(id.count + ood.count);
  if (n > 0) {
    rec.acc_all = (id.accuracy * id.count + ood.accuracy * ood.count) / n;
    rec.test_loss = (id.loss * id.count + ood.loss * ood.count) / n;
  }
}

}  // namespace

std::string to_string(Optimizer o) { return o == Optimizer::adamw ? "adamw" : "sgd"; }

Optimizer optimizer_from_string(const std::string& s) {
  if (s == "adamw" || s == "adam-with-decoupled-decay") return Optimizer::adamw;
  if (s == "sgd" || s == "plain-sgd") return Optimizer::plain_sgd;
  throw ContractViolation("unknown optimizer '" + s + "'");
}

void TrainConfig::validate() const {
  RIDGELAB_REQUIRE(learning_rate >= 0.0 && std::isfinite(learning_rate),
                   "TrainConfig: learning_rate must be finite and non-negative");
  RIDGELAB_REQUIRE(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
  RIDGELAB_REQUIRE(epochs >= 0, "TrainConfig: epochs must be >= 0");
  RIDGELAB_REQUIRE(weight_decay >= 0.0, "TrainConfig: weight_decay must be >= 0");
}

TrainConfig default_beta_config() {
  TrainConfig c;
  c.learning_rate = 5e-3;
  c.batch_size = 32;
  c.epochs = 3;
  c.weight_decay = 0.01;
  c.mode = Mode::beta_only;
  return c;
}

namespace {

// Adds cross-entropy and exact-match counts of `logits` against targets[offset..].
void score(const Matrix& logits, const std::vector<int>& targets, std::size_t offset, double& loss,
           std::size_t& correct) {
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const int y = targets[offset + static_cast<std::size_t>(r)];
    const double mx = logits.row(r).maxCoeff();
    loss += mx + std::log((logits.row(r).array() - mx).exp().sum()) - logits(r, y);
    if (argmax_row(logits, r) == y) ++correct;
  }
}

// Runs chunked forward passes; `visit` gets (trace, offset of the chunk).
template <class F>
void for_chunks(const model::ModelState& state, const data::TokenizedSplit& split, bool hidden,
                F&& visit) {
  const std::size_t n = split.inputs.size();
  for (std::size_t start = 0; start < n; start += kEvalChunk) {
    const std::size_t end = std::min(n, start + kEvalChunk);
    const std::span<const data::TokenSequence> inputs(split.inputs.data() + start, end - start);
    visit(model::forward(state, inputs, {.hidden = hidden}), start);
  }
}

}  // namespace

Evaluation evaluate(const model::ModelState& state, const data::TokenizedSplit& split, int layer) {
  Evaluation out;
  out.count = split.inputs.size();
  if (out.count == 0) return out;
  double loss = 0.0;
  std::size_t correct = 0;
  for_chunks(state, split, layer >= 0, [&](const model::ForwardTrace& trace, std::size_t offset) {
    score(layer >= 0 ? model::early_exit_logits(trace, state, layer) : trace.logits, split.targets,
          offset, loss, correct);
  });
  out.loss = loss / static_cast<double>(out.count);
  out.accuracy = static_cast<double>(correct) / static_cast<double>(out.count);
  return out;
}

std::vector<Evaluation> evaluate_layers(const model::ModelState& state,
                                        const data::TokenizedSplit& split) {
  const std::size_t layers = static_cast<std::size_t>(state.config.n_layers) + 1;
  std::vector<double> loss(layers, 0.0);
  std::vector<std::size_t> correct(layers, 0);
  for_chunks(state, split, true, [&](const model::ForwardTrace& trace, std::size_t offset) {
    for (std::size_t l = 0; l < layers; ++l) {
      score(model::early_exit_logits(trace, state, static_cast<int>(l)), split.targets, offset,
            loss[l], correct[l]);
    }
  });
  std::vector<Evaluation> out(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    out[l].count = split.inputs.size();
    if (out[l].count == 0) continue;
    out[l].loss = loss[l] / static_cast<double>(out[l].count);
    out[l].accuracy = static_cast<double>(correct[l]) / static_cast<double>(out[l].count);
  }
  return out;
}

double batch_loss(const model::ModelState& state, std::span<const data::TokenSequence> inputs,
                  std::span<const int> targets) {
  ad::Tape tape(false);
  const auto vars = model::bind(tape, state, model::Trainable::none);
  const ad::Var logits = model::forward_graph(vars, state.config, inputs);
  return ad::cross_entropy(logits, targets).value()(0, 0);
}

TrainResult train(model::ModelState& state, const data::TokenizedSplit& train_split,
                  const EvalSplits& eval, const TrainConfig& config, const EpochHook& hook) {
  config.validate();
  const std::size_t n = train_split.inputs.size();
  RIDGELAB_REQUIRE(n > 0, "train: empty training split");
  RIDGELAB_REQUIRE(train_split.targets.size() == n, "train: inputs/targets length mismatch");

  const bool beta_only = config.mode == Mode::beta_only;
  const std::string frozen_hash = beta_only ? model::weights_hash(state) : std::string();
  auto weights = state.named_weights();
  std::vector<bool> decay;
  for (const auto& [name, m] : weights) decay.push_back(decays(name));
  Stepper stepper(config, weights.size() + state.beta.size());

  TrainResult result;
  {
    EpochRecord rec;
    const Evaluation tr = evaluate(state, train_split);
    rec.train_loss = tr.loss;
    rec.train_acc = tr.accuracy;
    fill_eval(rec, state, eval);
    if (hook) rec.checkpoint = hook(0, state);
    result.epochs.push_back(rec);
  }

  std::vector<std::size_t> order(n);
  std::vector<data::TokenSequence> batch_inputs;
  std::vector<int> batch_targets;
  std::size_t step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    data::SplitMix64 rng(data::stream_seed(config.seed, 0x5348554646ULL + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform(i)]);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(config.batch_size));
      batch_inputs.clear();
      batch_targets.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch_inputs.push_back(train_split.inputs[order[i]]);
        batch_targets.push_back(train_split.targets[order[i]]);
      }

      ad::Tape tape(true);
      const auto vars =
          model::bind(tape, state, beta_only ? model::Trainable::beta_only : model::Trainable::all);
      const ad::Var logits = model::forward_graph(vars, state.config, batch_inputs);
      const ad::Var loss = ad::cross_entropy(logits, batch_targets);
      const double loss_value = loss.value()(0, 0);
      if (!std::isfinite(loss_value)) {
        throw NumericalError("train: non-finite loss at step " + std::to_string(step) +
                             " (epoch " + std::to_string(epoch) + ")");
      }
      tape.backward(loss);

      for (Eigen::Index r = 0; r < logits.value().rows(); ++r) {
        if (argmax_row(logits.value(), r) == batch_targets[static_cast<std::size_t>(r)]) ++correct;
      }
      loss_sum += loss_value * static_cast<double>(end - start);
      result.step_losses.push_back(loss_value);

      if (!beta_only) {
        const auto wvars = flat_weights(vars);
        for (std::size_t p = 0; p < weights.size(); ++p) {
          stepper.update(p, *weights[p].second, wvars[p].grad(), decay[p]);
        }
      }
      if (state.config.residual_scaling) {
        for (std::size_t l = 0; l < state.beta.size(); ++l) {
          Matrix b = Matrix::Constant(1, 1, state.beta[l]);
          stepper.update(weights.size() + l, b, vars.beta[l].grad(), true);
          state.beta[l] = std::max(0.0, b(0, 0));
        }
      }
      stepper.next_step();
      ++step;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(n);
    fill_eval(rec, state, eval);
    if (hook) rec.checkpoint = hook(epoch, state);
    result.epochs.push_back(rec);
  }

  if (beta_only && model::weights_hash(state) != frozen_hash) {
    throw ContractViolation("train: frozen weights changed during beta-only training");
  }
  return result;
}

BetaResult train_beta(model::ModelState& state, const data::TokenizedSplit& split,
                      const TrainConfig& config) {
  RIDGELAB_REQUIRE(config.mode == Mode::beta_only, "train_beta: config must be beta_only");
  RIDGELAB_REQUIRE(state.config.residual_scaling, "train_beta: model has residual scaling disabled");
  std::fill(state.beta.begin(), state.beta.end(), 1.0);

  BetaResult out;
  out.weights_hash_before = model::weights_hash(state);
  out.before = evaluate(state, split);
  TrainResult tr = train(state, split, EvalSplits{}, config);
  out.after = evaluate(state, split);
  out.weights_hash_after = model::weights_hash(state);
  if (out.weights_hash_after != out.weights_hash_before) {
    throw ContractViolation("train_beta: frozen weights changed");
  }
  out.beta = state.beta;
  out.step_losses = std::move(tr.step_losses);
  return out;
}

}  // namespace ridgelab::train
