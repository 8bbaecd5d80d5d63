#include "ridgelab/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <sstream>

#include "ridgelab/errors.hpp"

namespace ridgelab::config {

namespace {

struct Key {
  std::string name;  // section.key
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_integer(const std::string& raw) {
  const std::string s = trim(raw);
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) {
    throw ParseError("'" + raw + "' is not a valid integer");
  }
  return v;
}

double parse_real(const std::string& raw) {
  const std::string s = trim(raw);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ParseError("'" + raw + "' is not a valid number");
}

bool parse_bool(const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ParseError("'" + raw + "' is not a boolean");
}

std::string real_text(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + std::to_string(xs[i]);
  return out;
}

// Builds a key from an accessor returning a reference to the field.
template <class T, class Access>
Key field_key(std::string name, Access access) {
  Key k;
  k.name = std::move(name);
  k.get = [access](const ExperimentConfig& c) {
    const T& v = access(const_cast<ExperimentConfig&>(c));
    if constexpr (std::is_same_v<T, double>) {
      return real_text(v);
    } else if constexpr (std::is_same_v<T, bool>) {
      return std::string(v ? "true" : "false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      return v;
    } else if constexpr (std::is_same_v<T, std::vector<int>> ||
                         std::is_same_v<T, std::vector<std::uint64_t>>) {
      return join(v);
    } else {
      return std::to_string(v);
    }
  };
  k.set = [access](ExperimentConfig& c, const std::string& s) {
    T& v = access(c);
    if constexpr (std::is_same_v<T, double>) {
      v = parse_real(s);
    } else if constexpr (std::is_same_v<T, bool>) {
      v = parse_bool(s);
    } else if constexpr (std::is_same_v<T, std::string>) {
      v = trim(s);
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
      v = parse_int_list(s);
    } else if constexpr (std::is_same_v<T, std::vector<std::uint64_t>>) {
      v = parse_seed_list(s);
    } else {
      v = parse_integer<T>(s);
    }
  };
  return k;
}

void add_train_keys(std::vector<Key>& keys, const std::string& section,
                    train::TrainConfig ExperimentConfig::*member) {
  keys.push_back(field_key<double>(section + ".learning_rate",
                                   [member](ExperimentConfig& c) -> double& { return (c.*member).learning_rate; }));
  keys.push_back(field_key<int>(section + ".batch_size",
                                [member](ExperimentConfig& c) -> int& { return (c.*member).batch_size; }));
  keys.push_back(field_key<int>(section + ".epochs",
                                [member](ExperimentConfig& c) -> int& { return (c.*member).epochs; }));
  keys.push_back(field_key<double>(section + ".weight_decay",
                                   [member](ExperimentConfig& c) -> double& { return (c.*member).weight_decay; }));
  Key opt;
  opt.name = section + ".optimizer";
  opt.get = [member](const ExperimentConfig& c) { return train::to_string((c.*member).optimizer); };
  opt.set = [member](ExperimentConfig& c, const std::string& s) {
    try {
      (c.*member).optimizer = train::optimizer_from_string(trim(s));
    } catch (const ContractViolation& e) {
      throw ParseError(e.what());
    }
  };
  keys.push_back(opt);
}

const std::vector<Key>& key_table() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    using C = ExperimentConfig;
    k.push_back(field_key<std::uint64_t>("data.seed", [](C& c) -> std::uint64_t& { return c.data.seed; }));
    k.push_back(field_key<int>("data.k_id", [](C& c) -> int& { return c.data.k_id; }));
    k.push_back(field_key<std::vector<int>>("data.k_ood", [](C& c) -> std::vector<int>& { return c.data.k_ood; }));
    k.push_back(field_key<int>("data.k_beta_ood", [](C& c) -> int& { return c.data.k_beta_ood; }));
    k.push_back(field_key<int>("data.noise_range", [](C& c) -> int& { return c.data.noise_range; }));
    k.push_back(field_key<std::size_t>("data.train_size", [](C& c) -> std::size_t& { return c.data.train_size; }));
    k.push_back(field_key<std::size_t>("data.val_size", [](C& c) -> std::size_t& { return c.data.val_size; }));
    k.push_back(field_key<std::size_t>("data.test_id_size", [](C& c) -> std::size_t& { return c.data.test_id_size; }));
    k.push_back(field_key<std::size_t>("data.test_ood_size", [](C& c) -> std::size_t& { return c.data.test_ood_size; }));
    k.push_back(field_key<std::size_t>("data.beta_size", [](C& c) -> std::size_t& { return c.data.beta_size; }));

    k.push_back(field_key<int>("model.n_layers", [](C& c) -> int& { return c.model.n_layers; }));
    k.push_back(field_key<int>("model.d_model", [](C& c) -> int& { return c.model.d_model; }));
    k.push_back(field_key<int>("model.n_heads", [](C& c) -> int& { return c.model.n_heads; }));
    k.push_back(field_key<int>("model.ff_mult", [](C& c) -> int& { return c.model.ff_mult; }));
    k.push_back(field_key<int>("model.max_seq_len", [](C& c) -> int& { return c.model.max_seq_len; }));
    k.push_back(field_key<bool>("model.residual_scaling", [](C& c) -> bool& { return c.model.residual_scaling; }));

    add_train_keys(k, "train", &C::train);
    add_train_keys(k, "beta", &C::beta);

    k.push_back(field_key<int>("probe.n_subsample", [](C& c) -> int& { return c.probe.n_subsample; }));
    k.push_back(field_key<double>("probe.bandwidth", [](C& c) -> double& { return c.probe.bandwidth; }));
    k.push_back(field_key<std::string>("probe.eval_split", [](C& c) -> std::string& { return c.probe.eval_split; }));
    k.push_back(field_key<std::vector<std::uint64_t>>("probe.seeds", [](C& c) -> std::vector<std::uint64_t>& { return c.probe.seeds; }));
    k.push_back(field_key<std::vector<int>>("probe.epochs", [](C& c) -> std::vector<int>& { return c.probe.epochs_to_probe; }));
    k.push_back(field_key<int>("probe.permutations", [](C& c) -> int& { return c.probe.permutations; }));

    k.push_back(field_key<std::vector<int>>("sweep.depths", [](C& c) -> std::vector<int>& { return c.sweep.depths; }));
    k.push_back(field_key<std::vector<std::uint64_t>>("sweep.seeds", [](C& c) -> std::vector<std::uint64_t>& { return c.sweep.seeds; }));

    Key out;
    out.name = "output.dir";
    out.get = [](const C& c) { return c.output_dir.string(); };
    out.set = [](C& c, const std::string& s) { c.output_dir = trim(s); };
    k.push_back(out);
    return k;
  }();
  return table;
}

const Key& find_key(const std::string& name) {
  for (const auto& k : key_table()) {
    if (k.name == name) return k;
  }
  throw ParseError("unknown config key '" + name + "'");
}

}  // namespace

std::vector<int> parse_int_list(const std::string& raw) {
  std::vector<int> out;
  const std::string s = trim(raw);
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    const auto dash = item.find('-', 1);
    if (dash != std::string::npos) {
      const int lo = parse_integer<int>(item.substr(0, dash));
      const int hi = parse_integer<int>(item.substr(dash + 1));
      if (hi < lo) throw ParseError("empty range '" + item + "'");
      for (int v = lo; v <= hi; ++v) out.push_back(v);
    } else {
      out.push_back(parse_integer<int>(item));
    }
  }
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& raw) {
  std::vector<std::uint64_t> out;
  const std::string s = trim(raw);
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_integer<std::uint64_t>(item));
  return out;
}

const std::vector<std::string>& split_names() {
  static const std::vector<std::string> names{"train", "val", "test_id", "test_ood", "beta_id", "beta_ood"};
  return names;
}

data::SplitSpec split_spec(const DataConfig& d, const std::string& name) {
  const auto& names = split_names();
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ContractViolation("unknown split '" + name + "'");
  const std::uint64_t seed = d.seed + static_cast<std::uint64_t>(it - names.begin());
  if (name == "train") return {name, {d.k_id}, d.train_size, seed, d.noise_range};
  if (name == "val") return {name, {d.k_id}, d.val_size, seed, d.noise_range};
  if (name == "test_id") return {name, {d.k_id}, d.test_id_size, seed, d.noise_range};
  if (name == "test_ood") return {name, d.k_ood, d.test_ood_size, seed, d.noise_range};
  if (name == "beta_id") return {name, {d.k_id}, d.beta_size, seed, d.noise_range};
  return {name, {d.k_beta_ood}, d.beta_size, seed, d.noise_range};
}

void ExperimentConfig::validate() const {
  auto check_k = [](int k) {
    RIDGELAB_REQUIRE(k >= 2 && k <= data::kMaxModulus, "config: moduli must lie in [2, 25]");
  };
  check_k(data.k_id);
  check_k(data.k_beta_ood);
  RIDGELAB_REQUIRE(!data.k_ood.empty(), "config: data.k_ood is empty");
  for (int k : data.k_ood) check_k(k);
  RIDGELAB_REQUIRE(data.noise_range >= 1 && data.noise_range <= data::kDefaultNoiseRange,
                   "config: data.noise_range must lie in [1, 100] (vocabulary size)");
  RIDGELAB_REQUIRE(data.train_size >= 1 && data.test_id_size >= 1 && data.test_ood_size >= 1 &&
                       data.beta_size >= 1,
                   "config: split sizes must be positive");
  model.validate();
  train.validate();
  beta.validate();
  RIDGELAB_REQUIRE(train.mode == train::Mode::full, "config: base training must update all weights");
  RIDGELAB_REQUIRE(beta.mode == train::Mode::beta_only, "config: beta training must be beta-only");
  probe.validate();
  RIDGELAB_REQUIRE(probe.eval_split == "test_id" || probe.eval_split == "val" ||
                       probe.eval_split == "test_ood",
                   "config: probe.eval_split must be test_id, val or test_ood");
  for (int e : probe.epochs_to_probe) {
    RIDGELAB_REQUIRE(e >= 0 && e <= train.epochs, "config: probe.epochs outside [0, train.epochs]");
  }
  for (int d : sweep.depths) RIDGELAB_REQUIRE(d >= 1, "config: sweep depths must be >= 1");
}

std::filesystem::path ExperimentConfig::resolved_output_dir() const {
  if (!output_dir.empty()) return output_dir;
  if (const char* root = std::getenv(kOutputRootEnv); root != nullptr && *root != '\0') {
    return std::filesystem::path(root) / "run";
  }
  return std::filesystem::path("runs") / "default";
}

ExperimentConfig defaults() { return ExperimentConfig{}; }

void set(ExperimentConfig& cfg, const std::string& dotted_key, const std::string& value) {
  const Key& k = find_key(dotted_key);
  try {
    k.set(cfg, value);
  } catch (const ParseError& e) {
    throw ParseError(dotted_key + ": " + e.what());
  }
}

ExperimentConfig load(const std::filesystem::path& path, ExperimentConfig base) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ParseError(path.string() + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ParseError(path.string() + ": key '" + section + "' outside any section");
    }
    for (const auto& [key, value] : body) {
      try {
        set(base, section + "." + key, value.data());
      } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
      }
    }
  }
  return base;
}

std::vector<std::string> keys() {
  std::vector<std::string> out;
  for (const auto& k : key_table()) out.push_back(k.name);
  return out;
}

std::string dump(const ExperimentConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& k : key_table()) {
    const auto dot = k.name.find('.');
    const std::string sec = k.name.substr(0, dot);
    if (sec != section) {
      out += (section.empty() ? "" : "\n") + ("[" + sec + "]\n");
      section = sec;
    }
    out += k.name.substr(dot + 1) + " = " + k.get(cfg) + "\n";
  }
  return out;
}

}  // namespace ridgelab::config
