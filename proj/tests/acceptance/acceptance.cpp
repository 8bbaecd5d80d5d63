// Acceptance harness: one PASS/FAIL line per criterion.
//
//   ridgelab_acceptance [--strict] <ridgelab-cli> [work-dir]
//
// Criteria 5-9 run the default experiment (L=8, five seeds) through the
// pipeline stages in <work-dir>/default; criterion 10 runs the CLI's run-all
// twice on a small config. The lines also go to <work-dir>/report.txt.
//
// A FAIL line is a measured outcome, not a harness error: the exit status is 0
// once every criterion has been evaluated, unless --strict is given. A criterion
// that throws is a harness error and always gives a nonzero status.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ridgelab/config.hpp"
#include "ridgelab/csv.hpp"
#include "ridgelab/infoestim.hpp"
#include "ridgelab/numerics/grad_check.hpp"
#include "ridgelab/numerics/ops.hpp"
#include "ridgelab/probe.hpp"
#include "ridgelab/report.hpp"
#include "ridgelab/runtime.hpp"
#include "ridgelab/hashing.hpp"
#include "support/oracles.hpp"

using namespace ridgelab;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;
int harness_errors = 0;  // exceptions: the criterion could not be evaluated
std::ofstream report_file;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report_line(int n, const Outcome& o) {
  if (!o.pass) ++failures;
  std::ostringstream line;
  line << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail;
  std::cout << line.str() << std::endl;
  report_file << line.str() << std::endl;
}

void run_criterion(int n, const std::function<Outcome()>& body) {
  try {
    report_line(n, body());
  } catch (const std::exception& e) {
    ++harness_errors;
    report_line(n, {false, std::string("error: ") + e.what()});
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

int majority(std::size_t n) { return static_cast<int>(std::ceil(0.6 * static_cast<double>(n))); }

info::SampleMatrix rows(Matrix m) { return info::SampleMatrix(std::move(m)); }

// ---------------------------------------------------------------- 1
Outcome estimator_exactness() {
  const auto t0 = Clock::now();
  Outcome o;
  const double bw = 1.0;

  // Samples are unit rows throughout.
  Matrix same(7, 3);
  same.rowwise() = RowVector{{0.6, 0.0, -0.8}};
  const double h_same = info::entropy(info::gram(rows(same), bw));

  // Two orthogonal unit vectors: Gram [[1, e^-1], [e^-1, 1]] / 2, eigenvalues (1 +- e^-1) / 2.
  Matrix ortho = Matrix::Zero(2, 2);
  ortho(0, 0) = 1.0;
  ortho(1, 1) = 1.0;
  const double lp = (1.0 + std::exp(-1.0)) / 2.0, lm = (1.0 - std::exp(-1.0)) / 2.0;
  const double closed = -lp * std::log(lp) - lm * std::log(lm);
  const double h_ortho = info::entropy(info::gram(rows(ortho), bw));

  testing::Rng rng(11);
  const Matrix u = info::SampleMatrix::normalized(rng.normal_matrix(20, 5)).rows();
  Matrix c(20, 4);
  c.rowwise() = RowVector{{0.5, 0.5, 0.5, 0.5}};
  const double mi_const = info::mutual_information(rows(u), rows(c), bw);

  // Unit rows are at most 2 apart, so separation comes from the bandwidth:
  // orthonormal points at sigma = sqrt(2)/10 have the kernel of points 10 apart at sigma = 1.
  const int n_far = 16;
  const double h_far = info::entropy(info::gram(rows(Matrix::Identity(n_far, n_far)), std::sqrt(2.0) / 10.0));

  const double secs = seconds_since(t0);
  o.pass = std::abs(h_same) <= 1e-9 && std::abs(h_ortho - closed) <= 1e-6 && std::abs(mi_const) <= 1e-9 &&
           h_far >= 0.999 * std::log(double(n_far)) && secs < 1.0;
  o.detail = "H(identical)=" + fmt(h_same) + " H(orthogonal)=" + std::to_string(h_ortho) + " (closed form " +
             std::to_string(closed) + ") MI(const)=" + fmt(mi_const) + " H(far)/log N=" +
             fmt(h_far / std::log(double(n_far))) + " time=" + fmt(secs) + "s";
  return o;
}

// ---------------------------------------------------------------- 2
Outcome estimator_properties() {
  const auto t0 = Clock::now();
  testing::Rng rng(2024);
  const double bw = 1.0;
  double worst_bound = 0.0, worst_sub = 0.0, worst_perm = 0.0, worst_iso = 0.0;
  int violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + rng.below(49);
    const int d = 1 + rng.below(16);
    const Matrix a = info::SampleMatrix::normalized(rng.normal_matrix(n, d)).rows();
    // Half the trials pair a with a noisy copy of itself so dependence varies.
    Matrix b = rng.normal_matrix(n, d);
    if (trial % 2 == 0) b = a + 0.3 * b;
    b = info::SampleMatrix::normalized(b).rows();

    const auto ga = info::gram(rows(a), bw), gb = info::gram(rows(b), bw);
    const double ha = info::entropy(ga), hb = info::entropy(gb), hab = info::joint_entropy(ga, gb);
    const double logn = std::log(double(n));
    if (ha < 0 || ha > logn + 1e-8) ++violations;
    worst_bound = std::max({worst_bound, -ha, ha - logn});
    worst_sub = std::max(worst_sub, hab - ha - hb);
    if (hab > ha + hb + 1e-6) ++violations;

    const auto perm = rng.permutation(n);
    Matrix pa(n, d), pb(n, d);
    for (int i = 0; i < n; ++i) {
      pa.row(i) = a.row(perm[static_cast<std::size_t>(i)]);
      pb.row(i) = b.row(perm[static_cast<std::size_t>(i)]);
    }
    const auto gpa = info::gram(rows(pa), bw), gpb = info::gram(rows(pb), bw);
    const double dperm = std::max(std::abs(info::entropy(gpa) - ha), std::abs(info::joint_entropy(gpa, gpb) - hab));
    worst_perm = std::max(worst_perm, dperm);
    if (dperm > 1e-9) ++violations;

    const Matrix ia = a * rng.orthogonal(d);
    const double diso = std::abs(info::entropy(info::gram(rows(ia), bw)) - ha);
    worst_iso = std::max(worst_iso, diso);
    if (diso > 1e-9) ++violations;
  }
  const double secs = seconds_since(t0);
  return {violations == 0 && secs < 30.0,
          "1000 trials, violations=" + std::to_string(violations) + " worst bound excess=" + fmt(worst_bound) +
              " worst subadditivity excess=" + fmt(worst_sub) + " worst permutation diff=" + fmt(worst_perm) +
              " worst isometry diff=" + fmt(worst_iso) + " time=" + fmt(secs) + "s"};
}

// ---------------------------------------------------------------- 3
Outcome dataset_fidelity() {
  const auto t0 = Clock::now();
  data::SplitMix64 rng(0);
  const auto ex = data::generate_sample(5, 1, 2, 100, rng);
  const std::vector<int> expected{1, 3, 0, 2, 4, 1, 3, 0, 2};
  bool example_ok = ex.target() == 4;
  for (int t = 0; t < data::kElementsPerInput; ++t) example_ok &= ex.signal(t) == expected[static_cast<std::size_t>(t)];

  const auto cfg = config::defaults();
  const auto spec = config::split_spec(cfg.data, "train");
  const auto a = data::generate_split(spec);
  const auto b = data::generate_split(spec);
  int bad = 0;
  bool identical = a.size() == b.size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& s = a[i];
    bool ok = s.k == 13 && s.s0 >= 0 && s.s0 < s.k && s.diff >= 1 && s.diff < s.k;
    const auto [ids, target] = data::tokenize(s);
    ok &= ids.size() == 18;
    for (int t = 0; ok && t < data::kElementsPerInput; ++t) {
      const int sig = (s.s0 + t * s.diff) % s.k;
      ok &= s.noise[t] >= 0 && s.noise[t] < cfg.data.noise_range;
      ok &= ids[static_cast<std::size_t>(2 * t)] == sig;
      ok &= ids[static_cast<std::size_t>(2 * t + 1)] == data::kMaxModulus + s.noise[t];
    }
    ok &= target == (s.s0 + 9 * s.diff) % s.k;
    if (!ok) ++bad;
    if (i < b.size()) identical &= data::serialize_line(s) == data::serialize_line(b[i]);
  }
  const double secs = seconds_since(t0);
  return {example_ok && a.size() == 10000 && bad == 0 && identical && secs < 10.0,
          std::string("worked example ") + (example_ok ? "ok" : "WRONG") + ", scanned " + std::to_string(a.size()) +
              " train samples, invariant violations=" + std::to_string(bad) +
              ", regeneration " + (identical ? "bit-identical" : "DIFFERS") + " time=" + fmt(secs) + "s"};
}

// ---------------------------------------------------------------- 4
Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  model::ModelConfig mc;
  mc.n_layers = 2;
  mc.d_model = 16;
  mc.n_heads = 2;
  mc.seed = 4;
  auto s = model::ModelState::initialize(mc);
  testing::Rng rng(44);
  for (auto& [name, m] : s.named_weights()) *m += 0.1 * rng.normal_matrix(m->rows(), m->cols());
  s.beta = {0.8, 1.2};
  const auto batch = data::tokenize_all(data::generate_split({"g", {13}, 4, 9}));
  auto loss = [&](ad::Tape&, std::span<const ad::Var> p) {
    return ad::cross_entropy(model::forward_graph(model::bind_flat(mc, p), mc, batch.inputs), batch.targets);
  };
  const auto all = model::flatten(s, true);
  const double full = ad::grad_check(loss, all, 1e-4);

  const std::size_t n_weights = all.size() - 2;
  auto beta_loss = [&](ad::Tape& tape, std::span<const ad::Var> b) {
    std::vector<ad::Var> p;
    for (std::size_t i = 0; i < n_weights; ++i) p.push_back(tape.constant(all[i]));
    p.insert(p.end(), b.begin(), b.end());
    return loss(tape, p);
  };
  const double beta = ad::grad_check(beta_loss, {all[n_weights], all[n_weights + 1]}, 1e-4);
  const double secs = seconds_since(t0);
  return {full < 1e-4 && beta < 1e-4 && secs < 120.0,
          "max rel err full=" + fmt(full) + " beta-only=" + fmt(beta) + " time=" + fmt(secs) + "s"};
}

// ---------------------------------------------------------------- 5-9
struct DefaultRun {
  config::ExperimentConfig cfg;
  report::RunPaths paths;
  double train_seconds = 0.0;
  std::string setup_error;
};

std::vector<double> final_curve(const csv::Table& values, int depth, std::uint64_t seed) {
  std::map<int, double> by_layer;
  for (std::size_t r = 0; r < values.rows.size(); ++r) {
    if (values.at(r, "metric") != "predictive" || values.int_at(r, "depth") != depth ||
        static_cast<std::uint64_t>(values.int_at(r, "seed")) != seed)
      continue;
    by_layer[static_cast<int>(values.int_at(r, "layer"))] = values.real_at(r, "value");
  }
  std::vector<double> out;
  for (const auto& [l, v] : by_layer) out.push_back(v);
  return out;
}

Outcome training_sanity(const DefaultRun& run) {
  const auto& cfg = run.cfg;
  int reached = 0;
  std::string accs;
  for (std::uint64_t seed : cfg.probe.seeds) {
    const auto m = csv::read(run.paths.train_metrics(cfg.model.n_layers, seed));
    double acc = std::nan("");
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
      if (m.at(r, "split") == "test" && m.int_at(r, "epoch") == cfg.train.epochs) acc = m.real_at(r, "acc_id");
    }
    if (acc >= 0.95) ++reached;
    accs += (accs.empty() ? "" : ",") + fmt(acc);
  }
  const double minutes = run.train_seconds / 60.0;
  return {reached >= 4 && minutes < 30.0,
          "L=" + std::to_string(cfg.model.n_layers) + " final-epoch ID accuracy per seed [" + accs + "], " +
              std::to_string(reached) + "/" + std::to_string(cfg.probe.seeds.size()) + " >= 0.95 after " +
              std::to_string(cfg.train.epochs) + " epochs, training time " + fmt(minutes) + " min"};
}

Outcome ridge_shape(DefaultRun& run, bool& fell_back) {
  auto& cfg = run.cfg;
  const int L = cfg.model.n_layers;
  const auto ridge = csv::read(run.paths.probe_dir() / "ridge_per_seed.csv");
  int final_epoch = 0;
  for (std::size_t r = 0; r < ridge.rows.size(); ++r) final_epoch = std::max<int>(final_epoch, ridge.int_at(r, "epoch"));
  int interior = 0;
  std::string main_ridges;
  for (std::size_t r = 0; r < ridge.rows.size(); ++r) {
    if (ridge.int_at(r, "epoch") != final_epoch) continue;
    const auto l = ridge.int_at(r, "ridge_layer");
    main_ridges += (main_ridges.empty() ? "" : ",") + std::to_string(l);
    if (l > 0 && l < L) ++interior;
  }
  const auto sweep = csv::read(run.paths.sweep_dir() / "values.csv");
  int monotone = 0;
  for (std::uint64_t seed : cfg.sweep.seeds) {
    const auto c = final_curve(sweep, 2, seed);
    if (!c.empty() && std::is_sorted(c.begin(), c.end())) ++monotone;
  }
  const bool primary = interior >= majority(cfg.probe.seeds.size()) && monotone >= majority(cfg.sweep.seeds.size());
  std::string detail = "L=" + std::to_string(L) + " per-seed ridge layers [" + main_ridges + "] interior on " +
                       std::to_string(interior) + "/" + std::to_string(cfg.probe.seeds.size()) +
                       "; L=2 non-decreasing on " + std::to_string(monotone) + "/" +
                       std::to_string(cfg.sweep.seeds.size());
  if (primary) return {true, detail + "; primary pattern holds"};

  // Fallback: full depth sweep, then the manifest flag.
  fell_back = true;
  cfg.sweep.depths = {2, 4, 6, 8, 10};
  report::run_sweep(cfg);
  const auto analysis = report::analyze_ridge(run.paths.root, cfg);
  std::string depths;
  for (int d : analysis.depths_with_ridge) depths += (depths.empty() ? "" : ",") + std::to_string(d);
  detail += "; primary pattern absent, depth sweep ridges at depths [" + depths + "]";
  if (!analysis.depths_with_ridge.empty()) return {true, detail};
  return {false, detail + "; run flagged as negative replication"};
}

Outcome beta_direction(const DefaultRun& run) {
  const auto& cfg = run.cfg;
  const int L = cfg.model.n_layers;
  const auto betas = csv::read(run.paths.beta_dir() / "beta.csv");
  const auto metrics = csv::read(run.paths.beta_dir() / "metrics.csv");
  std::map<std::pair<std::uint64_t, std::string>, double> last_beta;
  for (std::size_t r = 0; r < betas.rows.size(); ++r) {
    if (betas.int_at(r, "layer") == L)
      last_beta[{static_cast<std::uint64_t>(betas.int_at(r, "seed")), betas.at(r, "split")}] = betas.real_at(r, "beta");
  }
  int loss_ok = 0, lower = 0, hash_ok = 0, runs = 0;
  std::string detail_beta;
  for (std::size_t r = 0; r < metrics.rows.size(); ++r) {
    ++runs;
    if (metrics.at(r, "frozen_hash_invariant") == "true") ++hash_ok;
    if (metrics.at(r, "split") != "beta_ood") continue;
    const auto seed = static_cast<std::uint64_t>(metrics.int_at(r, "seed"));
    if (metrics.real_at(r, "loss_after") <= metrics.real_at(r, "loss_before")) ++loss_ok;
    const double ood = last_beta.at({seed, "beta_ood"}), id = last_beta.at({seed, "beta_id"});
    if (ood < id) ++lower;
    detail_beta += (detail_beta.empty() ? "" : " ") + fmt(ood) + "/" + fmt(id);
  }
  const int need = majority(cfg.probe.seeds.size());
  return {loss_ok >= need && lower >= need && hash_ok == runs,
          "OOD loss not increased on " + std::to_string(loss_ok) + "/5, final-layer beta OOD<ID on " +
              std::to_string(lower) + "/5 [ood/id: " + detail_beta + "], frozen hash invariant " +
              std::to_string(hash_ok) + "/" + std::to_string(runs)};
}

model::ModelState final_state(const DefaultRun& run, std::uint64_t seed) {
  return model::load_checkpoint(run.paths.checkpoint(run.cfg.model.n_layers, seed, run.cfg.train.epochs));
}

Outcome probe_soundness(const DefaultRun& run) {
  const auto& cfg = run.cfg;
  const auto null = csv::read(run.paths.probe_dir() / "permutation_null.csv");
  int within = 0;
  std::string ps;
  for (std::size_t r = 0; r < null.rows.size(); ++r) {
    if (null.real_at(r, "shuffled_mi") <= null.real_at(r, "null_q95")) ++within;
    ps += (ps.empty() ? "" : ",") + fmt(null.real_at(r, "p_value"));
  }
  const auto split = data::tokenize_all(data::deserialize(run.paths.data(cfg.probe.eval_split)));
  double worst = 0.0;
  for (std::uint64_t seed : cfg.probe.seeds) {
    const auto state = final_state(run, seed);
    auto x = probe::extract(state, split, cfg.probe, seed);
    Matrix y = x.y.rows();
    y.rowwise() = RowVector(y.row(0));
    const auto constant = info::SampleMatrix(y);
    for (const auto& z : x.z) worst = std::max(worst, std::abs(info::mutual_information(z, constant, cfg.probe.bandwidth)));
  }
  return {within >= 4 && worst <= 1e-6,
          "shuffled-label MI inside the null 95% band on " + std::to_string(within) + "/" +
              std::to_string(null.rows.size()) + " seeds (p=" + ps + "), max |constant-label MI|=" + fmt(worst)};
}

Outcome incremental_consistency(const DefaultRun& run) {
  const auto& cfg = run.cfg;
  const int L = cfg.model.n_layers;
  const auto split = data::tokenize_all(data::deserialize(run.paths.data(cfg.probe.eval_split)));
  double worst = 0.0;
  for (std::uint64_t seed : cfg.probe.seeds) {
    const auto base = final_state(run, seed);
    for (int l = 1; l <= L; ++l) {
      auto s = base;
      s.beta[static_cast<std::size_t>(l - 1)] = 0.0;
      const auto x = probe::extract(s, split, cfg.probe, seed);
      const auto info = probe::layer_information(x, cfg.probe.bandwidth);
      worst = std::max(worst, std::abs(info.incremental[static_cast<std::size_t>(l - 1)]));
    }
  }
  const auto ridge = csv::read(run.paths.probe_dir() / "ridge_per_seed.csv");
  int final_epoch = 0;
  for (std::size_t r = 0; r < ridge.rows.size(); ++r) final_epoch = std::max<int>(final_epoch, ridge.int_at(r, "epoch"));
  int at_or_below = 0;
  std::string pairs;
  for (std::size_t r = 0; r < ridge.rows.size(); ++r) {
    if (ridge.int_at(r, "epoch") != final_epoch) continue;
    const auto inc = ridge.int_at(r, "incremental_peak"), pred = ridge.int_at(r, "ridge_layer");
    if (inc <= pred) ++at_or_below;
    pairs += (pairs.empty() ? "" : " ") + std::to_string(inc) + "/" + std::to_string(pred);
  }
  return {worst <= 1e-6 && at_or_below >= majority(cfg.probe.seeds.size()),
          "max |I(dZ;Y)| with beta_l=0: " + fmt(worst) + "; incremental peak <= ridge on " +
              std::to_string(at_or_below) + "/5 [incremental/ridge: " + pairs + "]"};
}

// ---------------------------------------------------------------- 10
std::map<std::string, std::string> csv_checksums(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
    out[fs::relative(e.path(), dir).generic_string()] = sha256_file(e.path());
  }
  return out;
}

Outcome end_to_end_determinism(const fs::path& cli, const fs::path& work) {
  const fs::path dir = work / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "small.ini") << "[data]\ntrain_size = 512\nval_size = 64\ntest_id_size = 128\n"
                                      "test_ood_size = 64\nbeta_size = 64\n\n[model]\nn_layers = 3\n"
                                      "d_model = 16\nn_heads = 2\n\n[train]\nepochs = 3\n\n[beta]\nepochs = 2\n\n"
                                      "[probe]\nn_subsample = 60\nseeds = 0,1\npermutations = 20\n\n"
                                      "[sweep]\ndepths = 1,3\nseeds = 0,1\n";
  for (const char* run : {"a", "b"}) {
    const std::string cmd = "\"" + cli.string() + "\" run-all -c \"" + (dir / "small.ini").string() +
                            "\" --output.dir \"" + (dir / run).string() + "\" > \"" + (dir / run).string() +
                            ".log\" 2>&1";
    if (std::system(cmd.c_str()) != 0) return {false, std::string("run-all failed, see ") + (dir / run).string() + ".log"};
  }
  const auto a = csv_checksums(dir / "a"), b = csv_checksums(dir / "b");
  return {!a.empty() && a == b, std::to_string(a.size()) + " CSV files, checksums " + (a == b ? "identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  const bool strict = !args.empty() && args.front() == "--strict";
  if (strict) args.erase(args.begin());
  if (args.empty()) {
    std::cerr << "usage: ridgelab_acceptance [--strict] <ridgelab-cli> [work-dir]\n";
    return 2;
  }
  tune_allocator();
  const fs::path cli = args[0];
  const fs::path work = args.size() > 1 ? fs::path(args[1]) : fs::path("acceptance_work");
  fs::create_directories(work);
  report_file.open(work / "report.txt", std::ios::trunc);

  run_criterion(1, estimator_exactness);
  run_criterion(2, estimator_properties);
  run_criterion(3, dataset_fidelity);
  run_criterion(4, gradient_correctness);

  DefaultRun run;
  run.cfg = config::defaults();
  run.cfg.output_dir = work / "default";
  run.cfg.sweep.depths = {2, run.cfg.model.n_layers};
  run.paths = report::RunPaths{run.cfg.output_dir};
  const auto log = [](const std::string& m) { std::cerr << "  [" << m << "]" << std::endl; };
  std::vector<std::string> stages;
  try {
    fs::remove_all(run.cfg.output_dir);
    report::gen_data(run.cfg, log);
    stages.push_back("gen-data");
    const auto t0 = Clock::now();
    report::train_all(run.cfg, log);
    run.train_seconds = seconds_since(t0);
    stages.push_back("train");
    report::run_probe(run.cfg, log);
    stages.push_back("probe");
    report::run_beta(run.cfg, log);
    stages.push_back("beta-train");
    report::run_sweep(run.cfg, log);
    stages.push_back("depth-sweep");
  } catch (const std::exception& e) {
    run.setup_error = e.what();
  }

  auto staged = [&](int n, const std::function<Outcome()>& body) {
    if (!run.setup_error.empty()) {
      ++harness_errors;
      report_line(n, {false, "default run failed: " + run.setup_error});
      return;
    }
    run_criterion(n, body);
  };
  staged(5, [&] { return training_sanity(run); });
  bool fell_back = false;
  staged(6, [&] { return ridge_shape(run, fell_back); });
  staged(7, [&] { return beta_direction(run); });
  staged(8, [&] { return probe_soundness(run); });
  staged(9, [&] { return incremental_consistency(run); });
  if (run.setup_error.empty()) {
    try {
      report::emit_figures(run.paths.root);
      stages.push_back("report");
      report::write_manifest(run.cfg, stages);
    } catch (const std::exception& e) {
      std::cerr << "manifest: " << e.what() << std::endl;
    }
  }
  run_criterion(10, [&] { return end_to_end_determinism(cli, work); });

  const std::string summary = "acceptance: " + std::to_string(10 - failures) + "/10 criteria passed";
  std::cout << summary << std::endl;
  report_file << summary << std::endl;
  if (harness_errors > 0) return 1;
  return strict && failures > 0 ? 1 : 0;
}
