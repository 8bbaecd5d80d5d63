#include <doctest.h>

#include <cmath>
#include <limits>

#include "ridgelab/errors.hpp"
#include "ridgelab/training.hpp"

using namespace ridgelab;
using namespace ridgelab::train;

namespace {

model::ModelConfig tiny_model(int layers = 2) {
  model::ModelConfig c;
  c.n_layers = layers;
  c.d_model = 16;
  c.n_heads = 2;
  c.seed = 3;
  return c;
}

data::TokenizedSplit split(std::size_t n, std::uint64_t seed, std::vector<int> ks = {13}) {
  return data::tokenize_all(data::generate_split({"t", std::move(ks), n, seed}));
}

TrainConfig quick(int epochs, double lr = 1e-3) {
  TrainConfig c;
  c.epochs = epochs;
  c.learning_rate = lr;
  c.batch_size = 16;
  return c;
}

}  // namespace

TEST_CASE("config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ContractViolation);
  c = TrainConfig{};
  c.learning_rate = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(c.validate(), ContractViolation);
  CHECK(optimizer_from_string("adamw") == Optimizer::adamw);
  CHECK(optimizer_from_string("plain-sgd") == Optimizer::plain_sgd);
  CHECK_THROWS_AS(optimizer_from_string("lion"), ContractViolation);
}

TEST_CASE("zero learning rate leaves every parameter unchanged") {
  for (Optimizer opt : {Optimizer::adamw, Optimizer::plain_sgd}) {
    auto s = model::ModelState::initialize(tiny_model());
    const auto hash = model::weights_hash(s);
    auto cfg = quick(1, 0.0);
    cfg.optimizer = opt;
    train::train(s, split(48, 1), {}, cfg);
    CHECK(model::weights_hash(s) == hash);
    for (double b : s.beta) CHECK(b == 1.0);
  }
}

TEST_CASE("training is deterministic per seed") {
  const auto data = split(64, 2);
  const EvalSplits eval{split(32, 3), split(32, 4), split(32, 5, data::default_ood_moduli())};
  auto run = [&](std::uint64_t seed) {
    auto s = model::ModelState::initialize(tiny_model());
    auto cfg = quick(2);
    cfg.seed = seed;
    auto r = train::train(s, data, eval, cfg);
    return std::make_pair(r, model::weights_hash(s));
  };
  const auto [a, ha] = run(0);
  const auto [b, hb] = run(0);
  const auto [c, hc] = run(1);
  CHECK(ha == hb);
  CHECK(ha != hc);
  CHECK(a.step_losses == b.step_losses);
  REQUIRE(a.epochs.size() == 3);
  for (std::size_t e = 0; e < a.epochs.size(); ++e) {
    CHECK(a.epochs[e].epoch == static_cast<int>(e));
    CHECK(a.epochs[e].train_loss == b.epochs[e].train_loss);
    CHECK(a.epochs[e].val_loss == b.epochs[e].val_loss);
    CHECK(a.epochs[e].acc_all == b.epochs[e].acc_all);
    CHECK(a.epochs[e].acc_all ==
          doctest::Approx((a.epochs[e].acc_id + a.epochs[e].acc_ood) / 2.0));
  }
}

TEST_CASE("epoch hook sees every epoch") {
  auto s = model::ModelState::initialize(tiny_model());
  std::vector<int> seen;
  const auto r = train::train(s, split(32, 6), {}, quick(3), [&](int e, const model::ModelState&) {
    seen.push_back(e);
    return "ckpt" + std::to_string(e);
  });
  CHECK(seen == std::vector<int>{0, 1, 2, 3});
  CHECK(r.epochs.back().checkpoint == "ckpt3");
}

TEST_CASE("one step moves the label embedding") {
  auto s = model::ModelState::initialize(tiny_model());
  const RowVector before = model::embed_label(s, data::signal_token(4));
  auto cfg = quick(1);
  cfg.batch_size = 64;
  train::train(s, split(64, 7), {}, cfg);
  CHECK(model::embed_label(s, data::signal_token(4)) != before);
}

TEST_CASE("non-finite loss aborts with the step index") {
  auto s = model::ModelState::initialize(tiny_model());
  s.blocks[0].w_ff2(0, 0) = std::numeric_limits<double>::infinity();
  try {
    train::train(s, split(32, 8), {}, quick(1));
    FAIL("expected a numerical error");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("step 0") != std::string::npos);
  }
}

TEST_CASE("beta-only training") {
  auto s = model::ModelState::initialize(tiny_model(3));
  train::train(s, split(64, 9), {}, quick(2, 3e-3));
  const auto data = split(64, 10, {17});

  SUBCASE("zero steps keep beta at one and metrics unchanged") {
    auto cfg = default_beta_config();
    cfg.epochs = 0;
    const auto r = train_beta(s, data, cfg);
    for (double b : r.beta) CHECK(b == 1.0);
    CHECK(r.before.loss == r.after.loss);
    CHECK(r.before.accuracy == r.after.accuracy);
  }
  SUBCASE("only beta moves") {
    const auto hash = model::weights_hash(s);
    s.beta = {0.3, 0.3, 0.3};  // train_beta resets to one
    auto cfg = default_beta_config();
    cfg.learning_rate = 0.05;
    const auto r = train_beta(s, data, cfg);
    CHECK(r.weights_hash_before == hash);
    CHECK(r.weights_hash_after == hash);
    CHECK(model::weights_hash(s) == hash);
    bool moved = false;
    for (double b : r.beta) {
      CHECK(b >= 0.0);
      moved = moved || b != 1.0;
    }
    CHECK(moved);
    CHECK(r.beta == s.beta);
  }
  SUBCASE("projection keeps beta non-negative") {
    auto cfg = default_beta_config();
    cfg.learning_rate = 5.0;
    cfg.optimizer = Optimizer::plain_sgd;
    const auto r = train_beta(s, data, cfg);
    for (double b : r.beta) CHECK(b >= 0.0);
  }
  SUBCASE("requires beta-only mode") {
    CHECK_THROWS_AS(train_beta(s, data, quick(1)), ContractViolation);
  }
}

TEST_CASE("tiny overfit: 64 samples, four layers") {
  model::ModelConfig mc;
  mc.n_layers = 4;
  auto s = model::ModelState::initialize(mc);
  const auto data = split(64, 11);
  TrainConfig cfg;
  cfg.epochs = 60;  // reaches 100% near epoch 20; the allowed budget is 200
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 32;
  const auto r = train::train(s, data, {}, cfg);
  int reached = -1;
  for (const auto& e : r.epochs) {
    if (e.train_acc == 1.0) {
      reached = e.epoch;
      break;
    }
  }
  MESSAGE("first epoch at 100% train accuracy: " << reached);
  CHECK(reached > 0);
  CHECK(evaluate(s, data).accuracy == 1.0);
  // window-5 smoothed loss at the end is below the initial loss
  const auto& sl = r.step_losses;
  double tail = 0.0;
  for (std::size_t i = sl.size() - 5; i < sl.size(); ++i) tail += sl[i] / 5.0;
  CHECK(tail < r.epochs.front().train_loss);
}
