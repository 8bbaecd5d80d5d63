#include "ridgelab/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "ridgelab/csv.hpp"
#include "ridgelab/errors.hpp"
#include "ridgelab/training.hpp"

namespace ridgelab::probe {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<int> random_permutation(std::size_t n, data::SplitMix64& rng) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform(i)]);
  return perm;
}

// Re-raises estimator failures with a location prefix, keeping the type.
template <class F>
auto with_context(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const NumericalError& e) {
    throw NumericalError(where + ": " + e.what());
  } catch (const ContractViolation& e) {
    throw ContractViolation(where + ": " + e.what());
  }
}

int argmax_layer(const std::vector<std::pair<int, double>>& layer_values) {
  int best = -1;
  double best_v = 0.0;
  for (const auto& [layer, v] : layer_values) {
    if (best < 0 || v > best_v || (v == best_v && layer < best)) {
      best = layer;
      best_v = v;
    }
  }
  return best;
}

}  // namespace

void ProbeConfig::validate() const {
  RIDGELAB_REQUIRE(n_subsample >= 1, "ProbeConfig: n_subsample must be >= 1");
  RIDGELAB_REQUIRE(bandwidth > 0.0 && std::isfinite(bandwidth),
                   "ProbeConfig: bandwidth must be positive");
  RIDGELAB_REQUIRE(!seeds.empty(), "ProbeConfig: at least one seed is required");
  RIDGELAB_REQUIRE(permutations >= 1, "ProbeConfig: permutations must be >= 1");
}

std::string to_string(Metric m) { return m == Metric::predictive ? "predictive" : "incremental"; }

Metric metric_from_string(const std::string& s) {
  if (s == "predictive") return Metric::predictive;
  if (s == "incremental") return Metric::incremental;
  throw ParseError("unknown metric '" + s + "'");
}

std::vector<std::size_t> subsample_indices(std::size_t n_available, std::size_t n,
                                           std::uint64_t seed, const std::string& split) {
  if (n > n_available) {
    throw ContractViolation("subsample: requested " + std::to_string(n) + " samples but split '" +
                            split + "' has " + std::to_string(n_available));
  }
  data::SplitMix64 rng(data::stream_seed(seed, fnv1a(split)));
  std::vector<std::size_t> pool(n_available);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < n; ++i) std::swap(pool[i], pool[i + rng.uniform(n_available - i)]);
  pool.resize(n);
  std::sort(pool.begin(), pool.end());
  return pool;
}

Extraction extract(const model::ModelState& state, const data::TokenizedSplit& split,
                   const std::vector<std::size_t>& indices) {
  RIDGELAB_REQUIRE(!indices.empty(), "extract: no samples selected");
  std::vector<data::TokenSequence> inputs;
  Matrix labels(static_cast<Eigen::Index>(indices.size()), state.config.d_model);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    RIDGELAB_REQUIRE(indices[i] < split.inputs.size(), "extract: index outside the split");
    inputs.push_back(split.inputs[indices[i]]);
    labels.row(static_cast<Eigen::Index>(i)) = model::embed_label(state, split.targets[indices[i]]);
  }
  auto trace = model::forward(state, inputs, {.hidden = true});

  Extraction x{indices, {}, {}, info::SampleMatrix::normalized(labels), {}, {}};
  for (const auto& h : trace.hidden) x.z.push_back(info::SampleMatrix::normalized(h));
  for (const auto& d : trace.deltas) x.dz.push_back(info::SampleMatrix::normalized(d));
  x.raw_hidden = std::move(trace.hidden);
  x.raw_deltas = std::move(trace.deltas);
  return x;
}

Extraction extract(const model::ModelState& state, const data::TokenizedSplit& split,
                   const ProbeConfig& config, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(config.n_subsample);
  return extract(state, split, subsample_indices(split.inputs.size(), n, seed, config.eval_split));
}

LayerInformation layer_information(const Extraction& x, double bandwidth) {
  const info::GramMatrix gy = info::gram(x.y, bandwidth);
  LayerInformation out;
  for (std::size_t l = 0; l < x.z.size(); ++l) {
    out.predictive.push_back(with_context("layer " + std::to_string(l), [&] {
      return info::reported_mi(info::mutual_information(info::gram(x.z[l], bandwidth), gy));
    }));
  }
  for (std::size_t l = 0; l < x.dz.size(); ++l) {
    out.incremental.push_back(with_context("delta of layer " + std::to_string(l + 1), [&] {
      return info::reported_mi(info::mutual_information(info::gram(x.dz[l], bandwidth), gy));
    }));
  }
  return out;
}

ProbeReport aggregate(std::vector<ProbeValue> values) {
  ProbeReport r;
  std::map<std::tuple<int, int, int>, std::vector<double>> cells;  // (epoch, metric, layer)
  for (const auto& v : values) {
    cells[{v.epoch, static_cast<int>(v.metric), v.layer}].push_back(v.value);
  }
  std::map<std::pair<int, int>, std::vector<std::pair<int, double>>> curves;
  for (const auto& [key, xs] : cells) {
    const auto [epoch, metric, layer] = key;
    const double n = static_cast<double>(xs.size());
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double sd = xs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    r.summary.push_back({epoch, layer, static_cast<Metric>(metric), mean, sd,
                         static_cast<int>(xs.size())});
    curves[{epoch, metric}].push_back({layer, mean});
  }
  for (const auto& [key, curve] : curves) {
    const auto [epoch, metric] = key;
    auto& target = static_cast<Metric>(metric) == Metric::predictive ? r.ridge_layer : r.incremental_peak;
    target[epoch] = argmax_layer(curve);
  }
  r.values = std::move(values);
  return r;
}

int peak_layer(const std::vector<ProbeValue>& values, int epoch, Metric metric,
               std::uint64_t seed) {
  std::vector<std::pair<int, double>> curve;
  for (const auto& v : values) {
    if (v.epoch == epoch && v.metric == metric && v.seed == seed) curve.push_back({v.layer, v.value});
  }
  return argmax_layer(curve);
}

ProbeReport probe_curves(const CheckpointSource& source, const std::vector<int>& epochs,
                         const data::TokenizedSplit& split, const ProbeConfig& config) {
  config.validate();
  RIDGELAB_REQUIRE(!epochs.empty(), "probe: at least one checkpoint epoch is required");
  std::vector<ProbeValue> values;
  for (std::uint64_t seed : config.seeds) {
    const auto indices = subsample_indices(split.inputs.size(),
                                           static_cast<std::size_t>(config.n_subsample), seed,
                                           config.eval_split);
    for (int epoch : epochs) {
      const model::ModelState state = source(seed, epoch);
      const auto where = "epoch " + std::to_string(epoch) + ", seed " + std::to_string(seed);
      const LayerInformation li =
          with_context(where, [&] { return layer_information(extract(state, split, indices), config.bandwidth); });
      for (std::size_t l = 0; l < li.predictive.size(); ++l) {
        values.push_back({epoch, static_cast<int>(l), Metric::predictive, seed, li.predictive[l]});
      }
      for (std::size_t l = 0; l < li.incremental.size(); ++l) {
        values.push_back({epoch, static_cast<int>(l + 1), Metric::incremental, seed, li.incremental[l]});
      }
    }
  }
  return aggregate(std::move(values));
}

namespace {
ProbeReport only(ProbeReport full, Metric metric) {
  std::vector<ProbeValue> kept;
  for (const auto& v : full.values) {
    if (v.metric == metric) kept.push_back(v);
  }
  return aggregate(std::move(kept));
}
}  // namespace

ProbeReport predictive_curve(const CheckpointSource& source, const std::vector<int>& epochs,
                             const data::TokenizedSplit& split, const ProbeConfig& config) {
  return only(probe_curves(source, epochs, split, config), Metric::predictive);
}

ProbeReport incremental_curve(const CheckpointSource& source, const std::vector<int>& epochs,
                              const data::TokenizedSplit& split, const ProbeConfig& config) {
  return only(probe_curves(source, epochs, split, config), Metric::incremental);
}

std::vector<LayerRow> layer_accuracy_table(const model::ModelState& state,
                                           const data::TokenizedSplit& id,
                                           const data::TokenizedSplit& ood,
                                           const ProbeConfig& config, std::uint64_t seed) {
  config.validate();
  const auto info = layer_information(extract(state, id, config, seed), config.bandwidth);
  const auto acc_id = train::evaluate_layers(state, id);
  const auto acc_ood = train::evaluate_layers(state, ood);
  std::vector<LayerRow> rows;
  for (std::size_t l = 0; l < info.predictive.size(); ++l) {
    const double n = static_cast<double>(acc_id[l].count + acc_ood[l].count);
    const double all =
        (acc_id[l].accuracy * static_cast<double>(acc_id[l].count) +
         acc_ood[l].accuracy * static_cast<double>(acc_ood[l].count)) / n;
    rows.push_back({static_cast<int>(l), info.predictive[l], all, acc_id[l].accuracy,
                    acc_ood[l].accuracy});
  }
  return rows;
}

std::vector<LayerRow> average_rows(const std::vector<std::vector<LayerRow>>& tables) {
  RIDGELAB_REQUIRE(!tables.empty(), "average_rows: no tables");
  std::vector<LayerRow> out = tables.front();
  for (auto& r : out) r = {r.layer, 0.0, 0.0, 0.0, 0.0};
  for (const auto& t : tables) {
    RIDGELAB_REQUIRE(t.size() == out.size(), "average_rows: tables differ in depth");
    for (std::size_t l = 0; l < t.size(); ++l) {
      out[l].i_zy += t[l].i_zy;
      out[l].acc_all += t[l].acc_all;
      out[l].acc_id += t[l].acc_id;
      out[l].acc_ood += t[l].acc_ood;
    }
  }
  const double n = static_cast<double>(tables.size());
  for (auto& r : out) {
    r.i_zy /= n;
    r.acc_all /= n;
    r.acc_id /= n;
    r.acc_ood /= n;
  }
  return out;
}

PermutationResult permutation_test(const info::SampleMatrix& z, const info::SampleMatrix& y,
                                   int permutations, std::uint64_t seed, double bandwidth) {
  RIDGELAB_REQUIRE(permutations >= 1, "permutation_test: permutations must be >= 1");
  RIDGELAB_REQUIRE(z.n_samples() == y.n_samples(), "permutation_test: sample counts differ");
  const info::GramMatrix gz = info::gram(z, bandwidth);
  const info::GramMatrix gy = info::gram(y, bandwidth);
  PermutationResult r;
  r.observed = info::mutual_information(gz, gy);
  data::SplitMix64 rng(data::stream_seed(seed, 0x7065726d));
  int at_least = 0;
  for (int p = 0; p < permutations; ++p) {
    const auto perm = random_permutation(static_cast<std::size_t>(y.n_samples()), rng);
    const double v = info::mutual_information(gz, gy.permuted(perm));
    r.null.push_back(v);
    if (v >= r.observed) ++at_least;
  }
  r.p_value = (1.0 + at_least) / (1.0 + permutations);
  std::vector<double> sorted = r.null;
  std::sort(sorted.begin(), sorted.end());
  const auto k = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(sorted.size())));
  r.q95 = sorted[std::max<std::size_t>(k, 1) - 1];
  return r;
}

PermutationResult shuffled_label_control(const info::SampleMatrix& z, const info::SampleMatrix& y,
                                         int permutations, std::uint64_t seed, double bandwidth) {
  data::SplitMix64 rng(data::stream_seed(seed, 0x73687566));
  const auto perm = random_permutation(static_cast<std::size_t>(y.n_samples()), rng);
  return permutation_test(z, y.permuted(perm), permutations, seed, bandwidth);
}

std::vector<AttentionRow> attention_table(const model::ModelState& state,
                                          const data::TokenizedSplit& split,
                                          const std::vector<std::size_t>& indices) {
  std::vector<data::TokenSequence> inputs;
  for (std::size_t i : indices) {
    RIDGELAB_REQUIRE(i < split.inputs.size(), "attention_table: index outside the split");
    inputs.push_back(split.inputs[i]);
  }
  const auto trace = model::forward(state, inputs, {.attention = true});
  const auto positions = data::signal_positions();
  const auto summary = model::attention_summary(trace, state.config.n_heads, positions);
  std::vector<AttentionRow> rows;
  for (std::size_t l = 0; l < summary.per_head.size(); ++l) {
    for (std::size_t h = 0; h < summary.per_head[l].size(); ++h) {
      rows.push_back({static_cast<int>(l + 1), static_cast<int>(h), summary.per_head[l][h]});
    }
  }
  return rows;
}

void write_values_csv(const std::filesystem::path& path, const std::vector<ProbeValue>& values) {
  csv::Table t{{"epoch", "layer", "metric", "seed", "value"}, {}, {}};
  for (const auto& v : values) {
    t.rows.push_back({std::to_string(v.epoch), std::to_string(v.layer), to_string(v.metric),
                      std::to_string(v.seed), csv::real(v.value)});
  }
  csv::write(path, t);
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<ProbeSummary>& summary) {
  csv::Table t{{"epoch", "layer", "metric", "mean", "std"}, {}, {}};
  for (const auto& s : summary) {
    t.rows.push_back({std::to_string(s.epoch), std::to_string(s.layer), to_string(s.metric),
                      csv::real(s.mean), csv::real(s.std)});
  }
  csv::write(path, t);
}

void write_layer_table_csv(const std::filesystem::path& path, const std::vector<LayerRow>& rows) {
  csv::Table t{{"layer", "i_zy", "acc_all", "acc_id", "acc_ood"}, {}, {}};
  for (const auto& r : rows) {
    t.rows.push_back({std::to_string(r.layer), csv::real(r.i_zy), csv::real(r.acc_all),
                      csv::real(r.acc_id), csv::real(r.acc_ood)});
  }
  csv::write(path, t);
}

void write_attention_csv(const std::filesystem::path& path, const std::vector<AttentionRow>& rows) {
  csv::Table t{{"layer", "head", "signal_mass"}, {}, {}};
  for (const auto& r : rows) {
    t.rows.push_back({std::to_string(r.layer), std::to_string(r.head), csv::real(r.signal_mass)});
  }
  csv::write(path, t);
}

std::vector<ProbeValue> read_values_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read(path);
  std::vector<ProbeValue> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    out.push_back({static_cast<int>(t.int_at(r, "epoch")), static_cast<int>(t.int_at(r, "layer")),
                   metric_from_string(t.at(r, "metric")),
                   static_cast<std::uint64_t>(t.int_at(r, "seed")), t.real_at(r, "value")});
  }
  return out;
}

}  // namespace ridgelab::probe
