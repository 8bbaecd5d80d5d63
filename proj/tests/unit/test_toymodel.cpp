#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ridgelab/errors.hpp"
#include "ridgelab/numerics/grad_check.hpp"
#include "ridgelab/numerics/kernels.hpp"
#include "ridgelab/numerics/ops.hpp"
#include "ridgelab/toymodel.hpp"
#include "support/oracles.hpp"

using namespace ridgelab;
using namespace ridgelab::model;

namespace {

ModelConfig small_config(int layers = 2, int d = 16) {
  ModelConfig c;
  c.n_layers = layers;
  c.d_model = d;
  c.n_heads = 2;
  c.seed = 7;
  return c;
}

std::vector<data::TokenSequence> batch(std::size_t n, std::uint64_t seed) {
  const auto samples = data::generate_split({"t", {13}, n, seed});
  return data::tokenize_all(samples).inputs;
}

// Pushes the weights away from the init scale so layers do visible work.
void perturb(ModelState& s, double scale, std::uint64_t seed) {
  testing::Rng rng(seed);
  for (auto& [name, m] : s.named_weights()) *m += scale * rng.normal_matrix(m->rows(), m->cols());
}

}  // namespace

TEST_CASE("config validation") {
  ModelConfig c = small_config();
  c.n_heads = 3;
  CHECK_THROWS_AS(c.validate(), ContractViolation);
  c = small_config();
  c.n_layers = 0;
  CHECK_THROWS_AS(c.validate(), ContractViolation);
  CHECK_NOTHROW(small_config().validate());
}

TEST_CASE("initialization is seeded and deterministic") {
  const auto a = ModelState::initialize(small_config());
  const auto b = ModelState::initialize(small_config());
  CHECK(weights_hash(a) == weights_hash(b));
  auto other = small_config();
  other.seed = 8;
  CHECK(weights_hash(ModelState::initialize(other)) != weights_hash(a));
  for (double beta : a.beta) CHECK(beta == 1.0);
  CHECK(a.final_gain.isOnes());
  CHECK(a.final_shift.isZero());
  const double sd = std::sqrt(a.token_embedding.squaredNorm() / static_cast<double>(a.token_embedding.size()));
  CHECK(sd == doctest::Approx(0.02).epsilon(0.1));
}

TEST_CASE("unit beta matches the unscaled model bit for bit") {
  auto on = ModelState::initialize(small_config());
  perturb(on, 0.3, 1);
  auto off = on;
  off.config.residual_scaling = false;
  const auto inputs = batch(8, 3);
  CHECK(forward(on, inputs).logits == forward(off, inputs).logits);
}

TEST_CASE("zero beta bypasses every block") {
  auto s = ModelState::initialize(small_config(3));
  perturb(s, 0.3, 2);
  std::fill(s.beta.begin(), s.beta.end(), 0.0);
  const auto inputs = batch(5, 4);
  const auto trace = forward(s, inputs, {.hidden = true});
  const Matrix expected =
      kernels::layer_normalize(trace.hidden[0], s.final_gain, s.final_shift) * s.token_embedding.transpose();
  CHECK((trace.logits - expected).cwiseAbs().maxCoeff() < 1e-12);
  for (const auto& d : trace.deltas) CHECK(d.isZero());
}

TEST_CASE("trace deltas and hidden states") {
  auto s = ModelState::initialize(small_config(3));
  perturb(s, 0.2, 3);
  const auto inputs = batch(6, 5);
  const auto trace = forward(s, inputs, {.hidden = true, .attention = true});
  REQUIRE(trace.hidden.size() == 4);
  REQUIRE(trace.deltas.size() == 3);
  for (std::size_t l = 1; l < trace.hidden.size(); ++l) {
    CHECK((trace.deltas[l - 1] + trace.hidden[l - 1] - trace.hidden[l]).cwiseAbs().maxCoeff() < 1e-12);
  }
  // layer 0 is the embedding stream at the last position
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const RowVector z0 = s.token_embedding.row(inputs[i].back()) + s.position_embedding.row(17);
    CHECK((trace.hidden[0].row(static_cast<Eigen::Index>(i)) - z0).cwiseAbs().maxCoeff() == 0.0);
  }
  REQUIRE(trace.attention.size() == 3);
  for (const auto& layer : trace.attention) {
    REQUIRE(layer.size() == inputs.size() * 2);
    for (const auto& p : layer) {
      for (Eigen::Index i = 0; i < p.rows(); ++i) {
        CHECK(std::abs(p.row(i).sum() - 1.0) < 1e-9);
        for (Eigen::Index j = i + 1; j < p.cols(); ++j) CHECK(p(i, j) == 0.0);
      }
    }
  }
  const auto bare = forward(s, inputs);
  CHECK(bare.hidden.empty());
  CHECK(bare.attention.empty());
  CHECK(bare.logits == trace.logits);
}

TEST_CASE("causality: later tokens never change earlier states") {
  auto s = ModelState::initialize(small_config(2));
  perturb(s, 0.3, 4);
  auto inputs = batch(1, 6);
  auto prefix = [&](const data::TokenSequence& seq, int len) {
    return std::vector<data::TokenSequence>{data::TokenSequence(seq.begin(), seq.begin() + len)};
  };
  auto changed = inputs[0];
  changed[10] = (changed[10] + 7) % data::kVocabSize;
  for (int len = 1; len <= 10; ++len) {
    const auto a = forward(s, prefix(inputs[0], len), {.hidden = true});
    const auto b = forward(s, prefix(changed, len), {.hidden = true});
    for (std::size_t l = 0; l < a.hidden.size(); ++l) CHECK(a.hidden[l] == b.hidden[l]);
  }
  const auto a = forward(s, prefix(inputs[0], 11), {.hidden = true});
  const auto b = forward(s, prefix(changed, 11), {.hidden = true});
  CHECK(a.hidden.back() != b.hidden.back());
}

TEST_CASE("input bounds") {
  const auto s = ModelState::initialize(small_config());
  CHECK_THROWS_AS(forward(s, std::vector<data::TokenSequence>{{0, 125}}), ContractViolation);
  CHECK_THROWS_AS(forward(s, std::vector<data::TokenSequence>{{0, -1}}), ContractViolation);
  CHECK_THROWS_AS(forward(s, std::vector<data::TokenSequence>{data::TokenSequence(33, 0)}), ContractViolation);
  CHECK_THROWS_AS(forward(s, std::vector<data::TokenSequence>{{0, 1}, {0}}), ContractViolation);
  CHECK_NOTHROW(forward(s, std::vector<data::TokenSequence>{data::TokenSequence(32, 0)}));
}

TEST_CASE("the embedding table is the output head") {
  auto s = ModelState::initialize(small_config());
  perturb(s, 0.2, 5);
  const auto inputs = batch(3, 7);  // K = 13, so SIG_24 never occurs in the inputs
  const int r = data::signal_token(24);
  const auto before = forward(s, inputs);
  s.token_embedding.row(r) *= 3.0;
  const auto after = forward(s, inputs);
  for (Eigen::Index c = 0; c < before.logits.cols(); ++c) {
    if (c == r) {
      CHECK(after.logits.col(c) != before.logits.col(c));
    } else {
      CHECK(after.logits.col(c) == before.logits.col(c));
    }
  }
  auto seq = inputs[0];
  seq.back() = r;
  const auto p = forward(s, std::vector<data::TokenSequence>{seq}, {.hidden = true});
  CHECK(p.hidden[0].row(0) == s.token_embedding.row(r) + s.position_embedding.row(17));
}

TEST_CASE("hidden state is affine in each beta") {
  auto s = ModelState::initialize(small_config(3));
  perturb(s, 0.3, 6);
  const auto inputs = batch(4, 9);
  auto z_at = [&](double b) {
    s.beta[1] = b;
    return forward(s, inputs, {.hidden = true}).hidden[2];
  };
  const Matrix z0 = z_at(0.0), z1 = z_at(1.0), z2 = z_at(2.5);
  CHECK((z2 - (z0 + 2.5 * (z1 - z0))).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("early exit") {
  auto s = ModelState::initialize(small_config(3));
  const auto inputs = batch(16, 10);
  const auto trace = forward(s, inputs, {.hidden = true});
  CHECK((early_exit_logits(trace, s, 3) - trace.logits).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(early_exit_logits(trace, s, 4), ContractViolation);
  CHECK_THROWS_AS(early_exit_logits(trace, s, -1), ContractViolation);
  // untrained: the spread of logits is small, so softmax is near uniform
  for (int l = 0; l <= 3; ++l) {
    const Matrix p = kernels::row_softmax(early_exit_logits(trace, s, l));
    CHECK(p.maxCoeff() < 2.0 / data::kVocabSize);
    CHECK(p.minCoeff() > 0.5 / data::kVocabSize);
  }
}

TEST_CASE("label embedding") {
  const auto s = ModelState::initialize(small_config());
  const int sig4 = data::signal_token(4);
  CHECK(embed_label(s, sig4) == s.token_embedding.row(4));
  CHECK(embed_label(s, sig4) == embed_label(s, 4));
  CHECK_THROWS_AS(embed_label(s, 125), ContractViolation);
}

TEST_CASE("attention summary") {
  ForwardTrace t;
  t.seq_len = 4;
  const std::vector<int> signal{0, 2};
  CHECK_THROWS_AS(attention_summary(t, 1, signal), ContractViolation);

  Matrix uniform = Matrix::Zero(4, 4);
  for (int i = 0; i < 4; ++i) uniform.row(i).head(i + 1).setConstant(1.0 / (i + 1));
  Matrix onehot = Matrix::Zero(4, 4);
  for (int i = 0; i < 4; ++i) onehot(i, 0) = 1.0;
  t.attention = {{uniform, uniform}, {onehot, uniform}};
  const auto sum = attention_summary(t, 2, signal);
  REQUIRE(sum.per_layer.size() == 2);
  CHECK(sum.per_layer[0] == doctest::Approx(0.5));
  CHECK(sum.per_head[1][0] == doctest::Approx(1.0));
  CHECK(sum.per_head[1][1] == doctest::Approx(0.5));
  CHECK(sum.per_layer[1] == doctest::Approx(0.75));
}

TEST_CASE("decode delta") {
  auto s = ModelState::initialize(small_config());
  const auto zero = decode_delta(s, RowVector::Zero(16), 3);
  for (const auto& tp : zero.top) CHECK(tp.probability == doctest::Approx(1.0 / 125).epsilon(1e-12));
  const auto all = decode_delta(s, RowVector::Ones(16) * 0.1 + s.token_embedding.row(9), 125);
  double total = 0.0;
  for (const auto& tp : all.top) total += tp.probability;
  CHECK(std::abs(total - 1.0) < 1e-9);
  CHECK(all.top.front().probability >= all.top.back().probability);
  CHECK(all.bottom.front().token == all.top.back().token);
  CHECK_THROWS_AS(decode_delta(s, RowVector::Zero(15), 3), ContractViolation);
}

TEST_CASE("truncate") {
  auto s = ModelState::initialize(small_config(3));
  perturb(s, 0.2, 11);
  const auto inputs = batch(4, 12);
  const auto full = truncate(s, 3);
  CHECK(forward(full, inputs).logits == forward(s, inputs).logits);
  const auto one = truncate(s, 1);
  const auto trace = forward(one, inputs, {.hidden = true});
  CHECK(trace.deltas.size() == 1);
  CHECK(trace.hidden[1] == forward(s, inputs, {.hidden = true}).hidden[1]);
  CHECK_THROWS_AS(truncate(s, 0), ContractViolation);
  CHECK_THROWS_AS(truncate(s, 4), ContractViolation);
}

TEST_CASE("checkpoint round trip") {
  auto s = ModelState::initialize(small_config(2));
  perturb(s, 0.1, 13);
  s.beta = {0.75, 1.25};
  const auto dir = std::filesystem::temp_directory_path() / "ridgelab_unit";
  std::filesystem::create_directories(dir);
  const auto path = dir / "ckpt.bin";
  save_checkpoint(path, s, {{"epoch", 3}});
  nlohmann::json meta;
  const auto back = load_checkpoint(path, &meta);
  CHECK(back.config == s.config);
  CHECK(weights_hash(back) == weights_hash(s));
  CHECK(back.beta == s.beta);
  CHECK(meta.at("epoch") == 3);
  const auto inputs = batch(3, 14);
  CHECK(forward(back, inputs).logits == forward(s, inputs).logits);

  {
    std::ofstream out(path, std::ios::binary);
    out << "garbage";
  }
  CHECK_THROWS_AS(load_checkpoint(path), ParseError);
}

TEST_CASE("model gradients match finite differences") {
  auto s = ModelState::initialize(small_config(2, 16));
  perturb(s, 0.1, 15);
  s.beta = {0.9, 1.1};
  const auto samples = data::tokenize_all(data::generate_split({"t", {13}, 4, 16}));
  const ModelConfig cfg = s.config;
  auto loss = [&](ad::Tape&, std::span<const ad::Var> p) {
    const auto vars = bind_flat(cfg, p);
    return ad::cross_entropy(forward_graph(vars, cfg, samples.inputs), samples.targets);
  };
  SUBCASE("all parameters") { CHECK(ad::grad_check(loss, flatten(s, true), 1e-4) < 1e-4); }
  SUBCASE("beta only") {
    const auto all = flatten(s, true);
    const std::size_t n_weights = all.size() - 2;
    auto beta_loss = [&](ad::Tape& tape, std::span<const ad::Var> b) {
      std::vector<ad::Var> p;
      for (std::size_t i = 0; i < n_weights; ++i) p.push_back(tape.constant(all[i]));
      p.insert(p.end(), b.begin(), b.end());
      return loss(tape, p);
    };
    CHECK(ad::grad_check(beta_loss, {all[n_weights], all[n_weights + 1]}, 1e-4) < 1e-4);
  }
}
