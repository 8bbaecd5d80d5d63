#include "ridgelab/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "ridgelab/csv.hpp"
#include "ridgelab/errors.hpp"
#include "ridgelab/hashing.hpp"
#include "ridgelab/probe.hpp"
#include "ridgelab/synthdata.hpp"

namespace ridgelab::report {

namespace fs = std::filesystem;
using config::ExperimentConfig;

namespace {

void note(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

RunPaths paths_of(const ExperimentConfig& cfg) { return RunPaths{cfg.resolved_output_dir()}; }

data::TokenizedSplit load_split(const ExperimentConfig& cfg, const std::string& name) {
  return data::tokenize_all(data::deserialize(paths_of(cfg).data(name), cfg.data.noise_range));
}

// Identifies the data, model and training settings a checkpoint came from.
std::string fingerprint(const ExperimentConfig& cfg, int depth, std::uint64_t seed) {
  std::string text;
  const std::string dumped = config::dump(cfg);
  std::string section;
  std::size_t start = 0;
  while (start < dumped.size()) {
    const auto end = dumped.find('\n', start);
    const std::string line = dumped.substr(start, end - start);
    start = end == std::string::npos ? dumped.size() : end + 1;
    if (!line.empty() && line.front() == '[') section = line;
    if (section == "[data]" || section == "[model]" || section == "[train]") text += line + "\n";
  }
  text += "depth=" + std::to_string(depth) + "\nseed=" + std::to_string(seed) + "\n";
  Sha256 h;
  h.update(text);
  return h.hex_digest();
}

model::ModelState load_trained(const ExperimentConfig& cfg, int depth, std::uint64_t seed,
                               int epoch) {
  return model::load_checkpoint(paths_of(cfg).checkpoint(depth, seed, epoch));
}

bool has_trained(const ExperimentConfig& cfg, int depth, std::uint64_t seed, int epoch) {
  const fs::path p = paths_of(cfg).checkpoint(depth, seed, epoch);
  if (!fs::exists(p) || !fs::exists(paths_of(cfg).train_metrics(depth, seed))) return false;
  nlohmann::json meta;
  try {
    model::load_checkpoint(p, &meta);
  } catch (const std::exception&) {
    return false;
  }
  return meta.value("fingerprint", "") == fingerprint(cfg, depth, seed);
}

std::vector<int> probe_epochs(const ExperimentConfig& cfg) {
  if (!cfg.probe.epochs_to_probe.empty()) {
    std::set<int> s(cfg.probe.epochs_to_probe.begin(), cfg.probe.epochs_to_probe.end());
    return {s.begin(), s.end()};
  }
  std::vector<int> all;
  for (int e = 0; e <= cfg.train.epochs; ++e) all.push_back(e);
  return all;
}

std::string opt_real(double v) { return csv::real(v); }

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};
MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd m;
  if (xs.empty()) return {std::nan(""), std::nan("")};
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return m;
}

// A ridge is a peak strictly inside the stack: above the embedding layer and
// below the last block.
bool interior(int layer, int depth) { return layer > 0 && layer < depth; }

int required_majority(std::size_t n_seeds) {
  // 3 of 5, scaled to other seed counts
  return static_cast<int>(std::ceil(0.6 * static_cast<double>(n_seeds)));
}

}  // namespace

fs::path RunPaths::data(const std::string& split) const { return root / "data" / (split + ".jsonl"); }
fs::path RunPaths::checkpoint(int depth, std::uint64_t seed, int epoch) const {
  return root / "checkpoints" / ("L" + std::to_string(depth)) / ("seed" + std::to_string(seed)) /
         ("epoch" + std::to_string(epoch) + ".ckpt");
}
fs::path RunPaths::train_metrics(int depth, std::uint64_t seed) const {
  return root / "metrics" / ("train_L" + std::to_string(depth) + "_seed" + std::to_string(seed) + ".csv");
}
fs::path RunPaths::probe_dir() const { return root / "probe"; }
fs::path RunPaths::beta_dir() const { return root / "beta"; }
fs::path RunPaths::sweep_dir() const { return root / "sweep"; }
fs::path RunPaths::figures_dir() const { return root / "figures"; }
fs::path RunPaths::manifest() const { return root / "manifest.json"; }
fs::path RunPaths::config_snapshot() const { return root / "config.ini"; }

void gen_data(const ExperimentConfig& cfg, const Logger& log) {
  cfg.validate();
  const RunPaths p = paths_of(cfg);
  fs::create_directories(p.root / "data");
  for (const auto& name : config::split_names()) {
    const auto spec = config::split_spec(cfg.data, name);
    data::serialize(data::generate_split(spec), p.data(name));
    note(log, "gen-data: " + name + " (" + std::to_string(spec.size) + " samples)");
  }
}

void train_one(const ExperimentConfig& cfg, int depth, std::uint64_t seed,
               const std::vector<int>& checkpoint_epochs, const Logger& log) {
  cfg.validate();
  const RunPaths p = paths_of(cfg);
  model::ModelConfig mc = cfg.model;
  mc.n_layers = depth;
  mc.seed = seed;
  train::TrainConfig tc = cfg.train;
  tc.seed = seed;

  const auto train_split = load_split(cfg, "train");
  const train::EvalSplits eval{load_split(cfg, "val"), load_split(cfg, "test_id"),
                               load_split(cfg, "test_ood")};
  const std::string fp = fingerprint(cfg, depth, seed);
  fs::create_directories(p.checkpoint(depth, seed, 0).parent_path());
  fs::create_directories(p.train_metrics(depth, seed).parent_path());

  model::ModelState state = model::ModelState::initialize(mc);
  const auto hook = [&](int epoch, const model::ModelState& s) -> std::string {
    const bool keep = checkpoint_epochs.empty() ||
                      std::find(checkpoint_epochs.begin(), checkpoint_epochs.end(), epoch) !=
                          checkpoint_epochs.end();
    if (!keep) return "";
    const fs::path ck = p.checkpoint(depth, seed, epoch);
    model::save_checkpoint(ck, s, {{"epoch", epoch}, {"seed", seed}, {"depth", depth}, {"fingerprint", fp}});
    note(log, "train: L=" + std::to_string(depth) + " seed=" + std::to_string(seed) + " epoch " +
                  std::to_string(epoch) + " saved");
    return fs::relative(ck, p.root).generic_string();
  };
  const train::TrainResult result = train::train(state, train_split, eval, tc, hook);

  csv::Table t{{"epoch", "split", "loss", "acc_all", "acc_id", "acc_ood"}, {}, {}};
  for (const auto& r : result.epochs) {
    const std::string e = std::to_string(r.epoch);
    t.rows.push_back({e, "train", opt_real(r.train_loss), opt_real(r.train_acc), opt_real(r.train_acc), ""});
    t.rows.push_back({e, "val", opt_real(r.val_loss), opt_real(r.val_acc), opt_real(r.val_acc), ""});
    t.rows.push_back({e, "test", opt_real(r.test_loss), opt_real(r.acc_all), opt_real(r.acc_id),
                      opt_real(r.acc_ood)});
  }
  csv::write(p.train_metrics(depth, seed), t);
  const auto& last = result.epochs.back();
  note(log, "train: L=" + std::to_string(depth) + " seed=" + std::to_string(seed) +
                " done, acc_id=" + csv::real(last.acc_id) + " acc_ood=" + csv::real(last.acc_ood));
}

void train_all(const ExperimentConfig& cfg, const Logger& log) {
  for (std::uint64_t seed : cfg.probe.seeds) train_one(cfg, cfg.model.n_layers, seed, {}, log);
}

void run_probe(const ExperimentConfig& cfg, const Logger& log) {
  cfg.validate();
  const RunPaths p = paths_of(cfg);
  const int depth = cfg.model.n_layers;
  const auto epochs = probe_epochs(cfg);
  const int final_epoch = epochs.back();
  const auto split = load_split(cfg, cfg.probe.eval_split);
  fs::create_directories(p.probe_dir());

  const auto source = [&](std::uint64_t seed, int epoch) {
    return load_trained(cfg, depth, seed, epoch);
  };
  const probe::ProbeReport rep = probe::probe_curves(source, epochs, split, cfg.probe);
  probe::write_values_csv(p.probe_dir() / "values.csv", rep.values);
  probe::write_summary_csv(p.probe_dir() / "summary.csv", rep.summary);
  {
    csv::Table t{{"epoch", "ridge_layer", "incremental_peak"}, {}, {}};
    for (const auto& [epoch, layer] : rep.ridge_layer) {
      t.rows.push_back({std::to_string(epoch), std::to_string(layer),
                        std::to_string(rep.incremental_peak.at(epoch))});
    }
    csv::write(p.probe_dir() / "ridge.csv", t);
    csv::Table per_seed{{"epoch", "seed", "ridge_layer", "incremental_peak"}, {}, {}};
    for (int epoch : epochs) {
      for (std::uint64_t seed : cfg.probe.seeds) {
        per_seed.rows.push_back(
            {std::to_string(epoch), std::to_string(seed),
             std::to_string(probe::peak_layer(rep.values, epoch, probe::Metric::predictive, seed)),
             std::to_string(probe::peak_layer(rep.values, epoch, probe::Metric::incremental, seed))});
      }
    }
    csv::write(p.probe_dir() / "ridge_per_seed.csv", per_seed);
  }
  note(log, "probe: curves for " + std::to_string(epochs.size()) + " epochs, final ridge layer " +
                std::to_string(rep.ridge_layer.at(final_epoch)));

  const auto test_id = load_split(cfg, "test_id");
  const auto test_ood = load_split(cfg, "test_ood");
  probe::ProbeConfig table_cfg = cfg.probe;
  table_cfg.eval_split = "test_id";
  std::vector<std::vector<probe::LayerRow>> tables;
  std::map<std::pair<int, int>, std::vector<double>> attention;
  csv::Table null{{"seed", "layer", "shuffled_mi", "null_q95", "p_value"}, {}, {}};
  const int ridge = rep.ridge_layer.at(final_epoch);
  for (std::uint64_t seed : cfg.probe.seeds) {
    const model::ModelState state = source(seed, final_epoch);
    tables.push_back(probe::layer_accuracy_table(state, test_id, test_ood, table_cfg, seed));
    const auto indices = probe::subsample_indices(split.inputs.size(),
                                                  static_cast<std::size_t>(cfg.probe.n_subsample),
                                                  seed, cfg.probe.eval_split);
    for (const auto& row : probe::attention_table(state, split, indices)) {
      attention[{row.layer, row.head}].push_back(row.signal_mass);
    }
    const auto x = probe::extract(state, split, indices);
    const auto perm = probe::shuffled_label_control(x.z[static_cast<std::size_t>(ridge)], x.y,
                                                    cfg.probe.permutations, seed, cfg.probe.bandwidth);
    null.rows.push_back({std::to_string(seed), std::to_string(ridge), csv::real(perm.observed),
                         csv::real(perm.q95), csv::real(perm.p_value)});
  }
  probe::write_layer_table_csv(p.probe_dir() / "layer_table.csv", probe::average_rows(tables));
  std::vector<probe::AttentionRow> att;
  for (const auto& [key, xs] : attention) att.push_back({key.first, key.second, mean_std(xs).mean});
  probe::write_attention_csv(p.probe_dir() / "attention.csv", att);
  csv::write(p.probe_dir() / "permutation_null.csv", null);
  note(log, "probe: layer table, attention summary and permutation null written");
}

void run_beta(const ExperimentConfig& cfg, const Logger& log) {
  cfg.validate();
  const RunPaths p = paths_of(cfg);
  fs::create_directories(p.beta_dir());
  const int depth = cfg.model.n_layers;
  const int final_epoch = cfg.train.epochs;
  csv::Table betas{{"seed", "split", "layer", "beta"}, {}, {}};
  csv::Table metrics{{"seed", "split", "loss_before", "loss_after", "acc_before", "acc_after",
                      "frozen_hash_invariant"},
                     {},
                     {}};
  const std::map<std::string, data::TokenizedSplit> splits{{"beta_id", load_split(cfg, "beta_id")},
                                                           {"beta_ood", load_split(cfg, "beta_ood")}};
  for (std::uint64_t seed : cfg.probe.seeds) {
    for (const auto& [name, split] : splits) {
      model::ModelState state = load_trained(cfg, depth, seed, final_epoch);
      train::TrainConfig bc = cfg.beta;
      bc.seed = seed;
      const train::BetaResult r = train::train_beta(state, split, bc);
      for (std::size_t l = 0; l < r.beta.size(); ++l) {
        betas.rows.push_back({std::to_string(seed), name, std::to_string(l + 1), csv::real(r.beta[l])});
      }
      metrics.rows.push_back({std::to_string(seed), name, csv::real(r.before.loss), csv::real(r.after.loss),
                              csv::real(r.before.accuracy), csv::real(r.after.accuracy),
                              r.weights_hash_before == r.weights_hash_after ? "true" : "false"});
      note(log, "beta-train: seed=" + std::to_string(seed) + " " + name + " loss " +
                    csv::real(r.before.loss) + " -> " + csv::real(r.after.loss));
    }
  }
  csv::write(p.beta_dir() / "beta.csv", betas);
  csv::write(p.beta_dir() / "metrics.csv", metrics);
}

void run_sweep(const ExperimentConfig& cfg, const Logger& log) {
  cfg.validate();
  const RunPaths p = paths_of(cfg);
  fs::create_directories(p.sweep_dir());
  const int final_epoch = cfg.train.epochs;
  const auto split = load_split(cfg, cfg.probe.eval_split);
  const auto test_id = load_split(cfg, "test_id");
  const auto test_ood = load_split(cfg, "test_ood");

  std::vector<probe::ProbeValue> all;  // epoch field holds the depth
  csv::Table values{{"depth", "seed", "layer", "metric", "value"}, {}, {}};
  csv::Table acc{{"depth", "seed", "acc_id", "acc_ood"}, {}, {}};
  for (int depth : cfg.sweep.depths) {
    for (std::uint64_t seed : cfg.sweep.seeds) {
      if (has_trained(cfg, depth, seed, final_epoch)) {
        note(log, "depth-sweep: reusing L=" + std::to_string(depth) + " seed=" + std::to_string(seed));
      } else {
        train_one(cfg, depth, seed, {final_epoch}, log);
      }
      const model::ModelState state = load_trained(cfg, depth, seed, final_epoch);
      const auto x = probe::extract(state, split, cfg.probe, seed);
      const auto li = probe::layer_information(x, cfg.probe.bandwidth);
      for (std::size_t l = 0; l < li.predictive.size(); ++l) {
        all.push_back({depth, static_cast<int>(l), probe::Metric::predictive, seed, li.predictive[l]});
      }
      for (std::size_t l = 0; l < li.incremental.size(); ++l) {
        all.push_back({depth, static_cast<int>(l + 1), probe::Metric::incremental, seed, li.incremental[l]});
      }
      acc.rows.push_back({std::to_string(depth), std::to_string(seed),
                          csv::real(train::evaluate(state, test_id).accuracy),
                          csv::real(train::evaluate(state, test_ood).accuracy)});
    }
  }
  for (const auto& v : all) {
    values.rows.push_back({std::to_string(v.epoch), std::to_string(v.seed), std::to_string(v.layer),
                           probe::to_string(v.metric), csv::real(v.value)});
  }
  const auto agg = probe::aggregate(all);
  csv::Table summary{{"depth", "layer", "metric", "mean", "std"}, {}, {}};
  for (const auto& s : agg.summary) {
    summary.rows.push_back({std::to_string(s.epoch), std::to_string(s.layer), probe::to_string(s.metric),
                            csv::real(s.mean), csv::real(s.std)});
  }
  csv::Table ridge{{"depth", "ridge_layer", "interior"}, {}, {}};
  for (const auto& [depth, layer] : agg.ridge_layer) {
    ridge.rows.push_back({std::to_string(depth), std::to_string(layer), interior(layer, depth) ? "true" : "false"});
  }
  csv::write(p.sweep_dir() / "values.csv", values);
  csv::write(p.sweep_dir() / "summary.csv", summary);
  csv::write(p.sweep_dir() / "ridge.csv", ridge);
  csv::write(p.sweep_dir() / "accuracy.csv", acc);
  note(log, "depth-sweep: " + std::to_string(cfg.sweep.depths.size()) + " depths probed");
}

void emit_figures(const fs::path& run_dir) {
  const RunPaths p{run_dir};
  const csv::Table summary = csv::read(p.probe_dir() / "summary.csv");
  const csv::Table betas = csv::read(p.beta_dir() / "beta.csv");
  const csv::Table sweep = csv::read(p.sweep_dir() / "summary.csv");
  fs::create_directories(p.figures_dir());

  // MI curves: every (epoch, layer) for both metrics; layer 0 has no
  // incremental value and keeps empty cells so the grid stays rectangular.
  std::map<std::tuple<int, std::string, int>, std::pair<double, double>> cell;
  std::set<int> epochs, layers;
  for (std::size_t r = 0; r < summary.rows.size(); ++r) {
    const int e = static_cast<int>(summary.int_at(r, "epoch"));
    const int l = static_cast<int>(summary.int_at(r, "layer"));
    epochs.insert(e);
    layers.insert(l);
    cell[{e, summary.at(r, "metric"), l}] = {summary.real_at(r, "mean"), summary.real_at(r, "std")};
  }
  csv::Table curves{{"epoch", "layer", "metric", "mean", "std", "band_lo", "band_hi"}, {}, {}};
  for (int e : epochs) {
    for (const std::string metric : {"predictive", "incremental"}) {
      for (int l : layers) {
        const auto it = cell.find({e, metric, l});
        if (it == cell.end()) {
          curves.rows.push_back({std::to_string(e), std::to_string(l), metric, "", "", "", ""});
          continue;
        }
        const auto [m, s] = it->second;
        curves.rows.push_back({std::to_string(e), std::to_string(l), metric, csv::real(m), csv::real(s),
                               csv::real(m - 2.0 * s), csv::real(m + 2.0 * s)});
      }
    }
  }
  csv::write(p.figures_dir() / "mi_curves.csv", curves);

  csv::Table gain{{"layer", "mean", "std"}, {}, {}};
  const int last = *epochs.rbegin();
  for (int l : layers) {
    const auto it = cell.find({last, "incremental", l});
    if (it != cell.end()) {
      gain.rows.push_back({std::to_string(l), csv::real(it->second.first), csv::real(it->second.second)});
    }
  }
  csv::write(p.figures_dir() / "incremental_gain.csv", gain);

  std::map<std::pair<std::string, int>, std::vector<double>> beta_cells;
  for (std::size_t r = 0; r < betas.rows.size(); ++r) {
    const std::string series = betas.at(r, "split") == "beta_id" ? "ID" : "OOD";
    beta_cells[{series, static_cast<int>(betas.int_at(r, "layer"))}].push_back(betas.real_at(r, "beta"));
  }
  csv::Table beta_fig{{"series", "layer", "mean", "std"}, {}, {}};
  for (const auto& [key, xs] : beta_cells) {
    const auto ms = mean_std(xs);
    beta_fig.rows.push_back({key.first, std::to_string(key.second), csv::real(ms.mean), csv::real(ms.std)});
  }
  csv::write(p.figures_dir() / "beta_layers.csv", beta_fig);

  csv::Table depth{{"depth", "layer", "mean", "std"}, {}, {}};
  for (std::size_t r = 0; r < sweep.rows.size(); ++r) {
    if (sweep.at(r, "metric") != "predictive") continue;
    depth.rows.push_back({sweep.at(r, "depth"), sweep.at(r, "layer"), sweep.at(r, "mean"), sweep.at(r, "std")});
  }
  csv::write(p.figures_dir() / "depth_panel.csv", depth);
}

RidgeAnalysis analyze_ridge(const fs::path& run_dir, const ExperimentConfig& cfg) {
  const RunPaths p{run_dir};
  RidgeAnalysis a;
  a.main_depth = cfg.model.n_layers;
  a.n_seeds = static_cast<int>(cfg.probe.seeds.size());
  const auto values = probe::read_values_csv(p.probe_dir() / "values.csv");
  int final_epoch = 0;
  for (const auto& v : values) final_epoch = std::max(final_epoch, v.epoch);
  for (std::uint64_t seed : cfg.probe.seeds) {
    const int peak = probe::peak_layer(values, final_epoch, probe::Metric::predictive, seed);
    if (interior(peak, a.main_depth)) ++a.main_seeds_with_interior_ridge;
  }

  const csv::Table sweep = csv::read(p.sweep_dir() / "values.csv");
  std::map<std::pair<int, std::uint64_t>, std::map<int, double>> curves;
  for (std::size_t r = 0; r < sweep.rows.size(); ++r) {
    if (sweep.at(r, "metric") != "predictive") continue;
    curves[{static_cast<int>(sweep.int_at(r, "depth")), static_cast<std::uint64_t>(sweep.int_at(r, "seed"))}]
          [static_cast<int>(sweep.int_at(r, "layer"))] = sweep.real_at(r, "value");
  }
  if (!cfg.sweep.depths.empty()) {
    a.shallow_depth = *std::min_element(cfg.sweep.depths.begin(), cfg.sweep.depths.end());
    for (std::uint64_t seed : cfg.sweep.seeds) {
      const auto it = curves.find({a.shallow_depth, seed});
      if (it == curves.end()) continue;
      bool monotone = true;
      double prev = -1.0;
      for (const auto& [layer, v] : it->second) {
        if (v < prev) monotone = false;
        prev = v;
      }
      if (monotone) ++a.shallow_seeds_non_decreasing;
    }
  }
  const csv::Table ridge = csv::read(p.sweep_dir() / "ridge.csv");
  for (std::size_t r = 0; r < ridge.rows.size(); ++r) {
    if (ridge.at(r, "interior") == "true") a.depths_with_ridge.push_back(static_cast<int>(ridge.int_at(r, "depth")));
  }
  a.primary_pattern =
      a.main_seeds_with_interior_ridge >= required_majority(cfg.probe.seeds.size()) &&
      a.shallow_seeds_non_decreasing >= required_majority(cfg.sweep.seeds.size());
  a.negative_replication = !a.primary_pattern && a.depths_with_ridge.empty();
  return a;
}

nlohmann::ordered_json checksums(const fs::path& run_dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(run_dir)) {
    if (entry.is_regular_file() && entry.path().filename() != "manifest.json") files.push_back(entry.path());
  }
  std::vector<std::pair<std::string, fs::path>> named;
  for (const auto& f : files) named.emplace_back(fs::relative(f, run_dir).generic_string(), f);
  std::sort(named.begin(), named.end());
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (const auto& [rel, f] : named) out[rel] = sha256_file(f);
  return out;
}

nlohmann::ordered_json write_manifest(const ExperimentConfig& cfg, const std::vector<std::string>& completed,
                                      const std::optional<std::string>& failed_stage,
                                      const std::string& error) {
  const RunPaths p = paths_of(cfg);
  fs::create_directories(p.root);
  nlohmann::ordered_json m;
  m["artifact_version"] = kArtifactVersion;
  m["config"] = config::dump(cfg);
  m["seeds"] = cfg.probe.seeds;
  m["sweep_seeds"] = cfg.sweep.seeds;
  m["stages_completed"] = completed;
  m["status"] = failed_stage ? "failed" : "complete";
  if (failed_stage) {
    m["failed_stage"] = *failed_stage;
    m["error"] = error;
  }
  const bool have_ridge_inputs = fs::exists(p.probe_dir() / "values.csv") &&
                                 fs::exists(p.sweep_dir() / "values.csv") &&
                                 fs::exists(p.sweep_dir() / "ridge.csv");
  if (have_ridge_inputs) {
    const RidgeAnalysis a = analyze_ridge(p.root, cfg);
    m["ridge_analysis"] = {{"main_depth", a.main_depth},
                           {"main_seeds_with_interior_ridge", a.main_seeds_with_interior_ridge},
                           {"shallow_depth", a.shallow_depth},
                           {"shallow_seeds_non_decreasing", a.shallow_seeds_non_decreasing},
                           {"n_seeds", a.n_seeds},
                           {"depths_with_ridge", a.depths_with_ridge},
                           {"primary_pattern", a.primary_pattern}};
    m["negative_replication"] = a.negative_replication;
  }
  m["checksums"] = checksums(p.root);
  std::ofstream out(p.manifest(), std::ios::trunc);
  out << m.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write " + p.manifest().string());
  return m;
}

nlohmann::ordered_json run_pipeline(const ExperimentConfig& cfg, const Logger& log) {
  cfg.validate();
  const RunPaths p = paths_of(cfg);
  fs::create_directories(p.root);
  {
    std::ofstream snap(p.config_snapshot(), std::ios::trunc);
    snap << config::dump(cfg);
  }
  const std::vector<std::pair<std::string, std::function<void()>>> stages{
      {"gen-data", [&] { gen_data(cfg, log); }},
      {"train", [&] { train_all(cfg, log); }},
      {"probe", [&] { run_probe(cfg, log); }},
      {"beta-train", [&] { run_beta(cfg, log); }},
      {"depth-sweep", [&] { run_sweep(cfg, log); }},
      {"report", [&] { emit_figures(p.root); }},
  };
  std::vector<std::string> done;
  for (const auto& [name, stage] : stages) {
    try {
      stage();
    } catch (const std::exception& e) {
      write_manifest(cfg, done, name, e.what());
      throw StageError(name, e.what());
    }
    done.push_back(name);
  }
  return write_manifest(cfg, done);
}

}  // namespace ridgelab::report
