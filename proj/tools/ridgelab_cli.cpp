// Command-line entry point: one subcommand per pipeline stage plus run-all.
#include <CLI11.hpp>

#include <iostream>
#include <map>

#include "ridgelab/config.hpp"
#include "ridgelab/errors.hpp"
#include "ridgelab/report.hpp"
#include "ridgelab/runtime.hpp"
#include "ridgelab/synthdata.hpp"

using namespace ridgelab;

namespace {

struct Common {
  std::string config_file;
  std::map<std::string, std::string> overrides;
};

// --config plus one flag per config key ("--train.epochs 8").
void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("-c,--config", common.config_file, "experiment config file")->check(CLI::ExistingFile);
  for (const auto& key : config::keys()) {
    cmd->add_option_function<std::string>(
           "--" + key, [&common, key](const std::string& v) { common.overrides[key] = v; },
           "override " + key)
        ->group("Config overrides");
  }
}

config::ExperimentConfig resolve(const Common& common) {
  config::ExperimentConfig cfg =
      common.config_file.empty() ? config::defaults() : config::load(common.config_file);
  for (const auto& [key, value] : common.overrides) config::set(cfg, key, value);
  cfg.validate();
  return cfg;
}

void log_line(const std::string& msg) { std::cerr << msg << std::endl; }

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"ridgelab: layer-wise information probing of a toy transformer"};
  app.require_subcommand(1);

  Common gen_common, train_common, beta_common, sweep_common, probe_common, report_common, all_common;

  auto* gen = app.add_subcommand("gen-data", "generate dataset splits as JSON lines");
  add_common(gen, gen_common);
  std::string split_name, k_list, out_path;
  std::size_t size = 0;
  std::uint64_t seed = 0;
  int noise_range = 0;
  auto* split_opt = gen->add_option("--split", split_name, "split name (all configured splits if omitted)");
  auto* k_opt = gen->add_option("--k", k_list, "moduli, e.g. 13 or 5-12,14-25");
  auto* size_opt = gen->add_option("--size", size, "number of samples");
  auto* seed_opt = gen->add_option("--seed", seed, "generation seed");
  auto* noise_opt = gen->add_option("--noise-range", noise_range, "noise values are drawn from [0, range)");
  gen->add_option("--out", out_path, "output file (single split) or run directory");

  auto* tr = app.add_subcommand("train", "base training for every configured seed");
  add_common(tr, train_common);
  std::vector<std::uint64_t> only_seeds;
  int depth = 0;
  tr->add_option("--only-seed", only_seeds, "train just these seeds");
  tr->add_option("--depth", depth, "number of blocks (defaults to model.n_layers)");

  auto* beta = app.add_subcommand("beta-train", "beta-only training on the ID and OOD beta splits");
  add_common(beta, beta_common);
  auto* sweep = app.add_subcommand("depth-sweep", "train and probe each sweep depth");
  add_common(sweep, sweep_common);
  auto* pr = app.add_subcommand("probe", "information curves, layer table, attention and null tests");
  add_common(pr, probe_common);
  auto* rep = app.add_subcommand("report", "plot-data CSVs and the run manifest");
  add_common(rep, report_common);
  auto* all = app.add_subcommand("run-all", "the full pipeline");
  add_common(all, all_common);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      auto cfg = resolve(gen_common);
      const bool custom = !split_opt->empty() || !k_opt->empty() || !size_opt->empty() ||
                          !seed_opt->empty() || !noise_opt->empty();
      if (!custom) {
        if (!out_path.empty()) cfg.output_dir = out_path;
        report::gen_data(cfg, log_line);
        return 0;
      }
      const auto& names = config::split_names();
      const bool known = std::find(names.begin(), names.end(), split_name) != names.end();
      data::SplitSpec spec = known ? config::split_spec(cfg.data, split_name)
                                   : data::SplitSpec{split_name.empty() ? "custom" : split_name,
                                                     {cfg.data.k_id}, cfg.data.train_size, cfg.data.seed,
                                                     cfg.data.noise_range};
      if (!k_opt->empty()) spec.k_values = config::parse_int_list(k_list);
      if (!size_opt->empty()) spec.size = size;
      if (!seed_opt->empty()) spec.seed = seed;
      if (!noise_opt->empty()) spec.noise_range = noise_range;
      const std::filesystem::path out =
          out_path.empty() ? report::RunPaths{cfg.resolved_output_dir()}.data(spec.name) : std::filesystem::path(out_path);
      if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
      data::serialize(data::generate_split(spec), out);
      log_line("gen-data: " + std::to_string(spec.size) + " samples -> " + out.string());
    } else if (tr->parsed()) {
      const auto cfg = resolve(train_common);
      const int d = depth > 0 ? depth : cfg.model.n_layers;
      for (std::uint64_t s : only_seeds.empty() ? cfg.probe.seeds : only_seeds) {
        report::train_one(cfg, d, s, {}, log_line);
      }
    } else if (beta->parsed()) {
      report::run_beta(resolve(beta_common), log_line);
    } else if (sweep->parsed()) {
      report::run_sweep(resolve(sweep_common), log_line);
    } else if (pr->parsed()) {
      report::run_probe(resolve(probe_common), log_line);
    } else if (rep->parsed()) {
      const auto cfg = resolve(report_common);
      report::emit_figures(cfg.resolved_output_dir());
      const auto m = report::write_manifest(cfg, {"report"});
      std::cout << report::RunPaths{cfg.resolved_output_dir()}.manifest().string() << "\n";
      if (m.contains("negative_replication")) {
        std::cout << "negative_replication: " << (m["negative_replication"].get<bool>() ? "true" : "false")
                  << "\n";
      }
    } else if (all->parsed()) {
      const auto cfg = resolve(all_common);
      const auto m = report::run_pipeline(cfg, log_line);
      std::cout << report::RunPaths{cfg.resolved_output_dir()}.manifest().string() << "\n";
      if (m.contains("negative_replication")) {
        std::cout << "negative_replication: " << (m["negative_replication"].get<bool>() ? "true" : "false")
                  << "\n";
      }
    }
  } catch (const report::StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
