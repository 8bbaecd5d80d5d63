#include "ridgelab/toymodel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "ridgelab/errors.hpp"
#include "ridgelab/hashing.hpp"
#include "ridgelab/numerics/kernels.hpp"
#include "ridgelab/numerics/ops.hpp"

namespace ridgelab::model {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'R', 'I', 'D', 'G', 'E', 'C', 'K', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr double kInitStd = 0.02;

// Box-Muller over SplitMix64 so initialization does not depend on the
// standard library's distribution implementation.
class NormalSource {
 public:
  explicit NormalSource(std::uint64_t seed) : rng_(seed) {}
  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = rng_.uniform01();
    while (u1 <= 0.0) u1 = rng_.uniform01();
    const double u2 = rng_.uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

 private:
  data::SplitMix64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

Matrix normal(NormalSource& src, Eigen::Index rows, Eigen::Index cols, double std) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std * src.next();
  return m;
}

template <typename Self, typename Out>
void collect_weights(Self& s, Out& out) {
  out.emplace_back("token_embedding", &s.token_embedding);
  out.emplace_back("position_embedding", &s.position_embedding);
  for (std::size_t l = 0; l < s.blocks.size(); ++l) {
    auto& b = s.blocks[l];
    const std::string p = "blocks." + std::to_string(l) + ".";
    out.emplace_back(p + "ln1_gain", &b.ln1_gain);
    out.emplace_back(p + "ln1_shift", &b.ln1_shift);
    out.emplace_back(p + "w_qkv", &b.w_qkv);
    out.emplace_back(p + "b_qkv", &b.b_qkv);
    out.emplace_back(p + "w_out", &b.w_out);
    out.emplace_back(p + "b_out", &b.b_out);
    out.emplace_back(p + "ln2_gain", &b.ln2_gain);
    out.emplace_back(p + "ln2_shift", &b.ln2_shift);
    out.emplace_back(p + "w_ff1", &b.w_ff1);
    out.emplace_back(p + "b_ff1", &b.b_ff1);
    out.emplace_back(p + "w_ff2", &b.w_ff2);
    out.emplace_back(p + "b_ff2", &b.b_ff2);
  }
  out.emplace_back("final_gain", &s.final_gain);
  out.emplace_back("final_shift", &s.final_shift);
}

ModelState shell(const ModelConfig& config) {
  config.validate();
  const Eigen::Index d = config.d_model;
  const Eigen::Index ff = static_cast<Eigen::Index>(config.ff_mult) * d;
  ModelState s;
  s.config = config;
  s.token_embedding = Matrix::Zero(config.vocab_size, d);
  s.position_embedding = Matrix::Zero(config.max_seq_len, d);
  s.blocks.resize(static_cast<std::size_t>(config.n_layers));
  for (auto& b : s.blocks) {
    b.ln1_gain = Matrix::Ones(1, d);
    b.ln1_shift = Matrix::Zero(1, d);
    b.w_qkv = Matrix::Zero(d, 3 * d);
    b.b_qkv = Matrix::Zero(1, 3 * d);
    b.w_out = Matrix::Zero(d, d);
    b.b_out = Matrix::Zero(1, d);
    b.ln2_gain = Matrix::Ones(1, d);
    b.ln2_shift = Matrix::Zero(1, d);
    b.w_ff1 = Matrix::Zero(d, ff);
    b.b_ff1 = Matrix::Zero(1, ff);
    b.w_ff2 = Matrix::Zero(ff, d);
    b.b_ff2 = Matrix::Zero(1, d);
  }
  s.final_gain = Matrix::Ones(1, d);
  s.final_shift = Matrix::Zero(1, d);
  s.beta.assign(static_cast<std::size_t>(config.n_layers), 1.0);
  return s;
}

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

}  // namespace

void ModelConfig::validate() const {
  RIDGELAB_REQUIRE(n_layers >= 1, "ModelConfig: n_layers must be >= 1");
  RIDGELAB_REQUIRE(d_model >= 1 && n_heads >= 1, "ModelConfig: d_model and n_heads must be >= 1");
  RIDGELAB_REQUIRE(d_model % n_heads == 0, "ModelConfig: d_model must be divisible by n_heads");
  RIDGELAB_REQUIRE(ff_mult >= 1, "ModelConfig: ff_mult must be >= 1");
  RIDGELAB_REQUIRE(vocab_size >= 1 && max_seq_len >= 1,
                   "ModelConfig: vocab_size and max_seq_len must be >= 1");
}

ModelState ModelState::initialize(const ModelConfig& config) {
  ModelState s = shell(config);
  NormalSource src(data::stream_seed(config.seed, 0x6d6f64656cULL));
  const Eigen::Index d = config.d_model;
  const double proj_std = kInitStd / std::sqrt(2.0 * config.n_layers);
  s.token_embedding = normal(src, config.vocab_size, d, kInitStd);
  s.position_embedding = normal(src, config.max_seq_len, d, kInitStd);
  for (auto& b : s.blocks) {
    b.w_qkv = normal(src, b.w_qkv.rows(), b.w_qkv.cols(), kInitStd);
    b.w_out = normal(src, b.w_out.rows(), b.w_out.cols(), proj_std);
    b.w_ff1 = normal(src, b.w_ff1.rows(), b.w_ff1.cols(), kInitStd);
    b.w_ff2 = normal(src, b.w_ff2.rows(), b.w_ff2.cols(), proj_std);
  }
  return s;
}

std::vector<std::pair<std::string, Matrix*>> ModelState::named_weights() {
  std::vector<std::pair<std::string, Matrix*>> out;
  collect_weights(*this, out);
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> ModelState::named_weights() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  collect_weights(*this, out);
  return out;
}

std::size_t ModelState::parameter_count() const {
  std::size_t n = beta.size();
  for (const auto& [name, m] : named_weights()) n += static_cast<std::size_t>(m->size());
  return n;
}

std::string weights_hash(const ModelState& state) {
  Sha256 h;
  for (const auto& [name, m] : state.named_weights()) {
    h.update(name);
    h.update(m->data(), static_cast<std::size_t>(m->size()) * sizeof(double));
  }
  return h.hex_digest();
}

std::vector<Matrix> flatten(const ModelState& state, bool include_beta) {
  std::vector<Matrix> out;
  for (const auto& [name, m] : state.named_weights()) out.push_back(*m);
  if (include_beta) {
    for (double b : state.beta) out.push_back(Matrix::Constant(1, 1, b));
  }
  return out;
}

void unflatten(ModelState& state, std::span<const Matrix> params, bool include_beta) {
  auto weights = state.named_weights();
  const std::size_t expected = weights.size() + (include_beta ? state.beta.size() : 0);
  RIDGELAB_REQUIRE(params.size() == expected, "unflatten: wrong parameter count");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    require_same_shape(*weights[i].second, params[i], "unflatten " + weights[i].first);
    *weights[i].second = params[i];
  }
  if (include_beta) {
    for (std::size_t l = 0; l < state.beta.size(); ++l) {
      state.beta[l] = params[weights.size() + l](0, 0);
    }
  }
}

ModelVars bind(ad::Tape& tape, const ModelState& state, Trainable trainable) {
  const bool weights_trainable = trainable == Trainable::all;
  const bool beta_trainable = trainable != Trainable::none;
  auto leaf = [&](const Matrix& m) {
    return weights_trainable ? tape.parameter_ref(m) : tape.constant_ref(m);
  };
  ModelVars v;
  v.token_embedding = leaf(state.token_embedding);
  v.position_embedding = leaf(state.position_embedding);
  for (const auto& b : state.blocks) {
    v.blocks.push_back({leaf(b.ln1_gain), leaf(b.ln1_shift), leaf(b.w_qkv), leaf(b.b_qkv),
                        leaf(b.w_out), leaf(b.b_out), leaf(b.ln2_gain), leaf(b.ln2_shift),
                        leaf(b.w_ff1), leaf(b.b_ff1), leaf(b.w_ff2), leaf(b.b_ff2)});
  }
  v.final_gain = leaf(state.final_gain);
  v.final_shift = leaf(state.final_shift);
  for (double b : state.beta) {
    Matrix m = Matrix::Constant(1, 1, b);
    v.beta.push_back(beta_trainable ? tape.parameter(std::move(m)) : tape.constant(std::move(m)));
  }
  return v;
}

ModelVars bind_flat(const ModelConfig& config, std::span<const ad::Var> params) {
  const std::size_t L = static_cast<std::size_t>(config.n_layers);
  RIDGELAB_REQUIRE(params.size() == 4 + 12 * L + L, "bind_flat: wrong parameter count");
  std::size_t i = 0;
  ModelVars v;
  v.token_embedding = params[i++];
  v.position_embedding = params[i++];
  for (std::size_t l = 0; l < L; ++l) {
    ModelVars::Block b;
    for (ad::Var* slot : {&b.ln1_gain, &b.ln1_shift, &b.w_qkv, &b.b_qkv, &b.w_out, &b.b_out,
                          &b.ln2_gain, &b.ln2_shift, &b.w_ff1, &b.b_ff1, &b.w_ff2, &b.b_ff2}) {
      *slot = params[i++];
    }
    v.blocks.push_back(b);
  }
  v.final_gain = params[i++];
  v.final_shift = params[i++];
  for (std::size_t l = 0; l < L; ++l) v.beta.push_back(params[i++]);
  return v;
}

ad::Var forward_graph(const ModelVars& vars, const ModelConfig& config,
                      std::span<const data::TokenSequence> inputs, const Capture& capture,
                      ForwardTrace* trace) {
  using namespace ad;
  RIDGELAB_REQUIRE(!inputs.empty(), "forward: empty batch");
  RIDGELAB_REQUIRE(vars.blocks.size() == static_cast<std::size_t>(config.n_layers),
                   "forward: variables do not match the config");
  const int T = static_cast<int>(inputs.front().size());
  RIDGELAB_REQUIRE(T >= 1 && T <= config.max_seq_len, "forward: sequence length out of range");

  std::vector<int> ids;
  std::vector<int> positions;
  std::vector<int> last_rows;
  ids.reserve(inputs.size() * static_cast<std::size_t>(T));
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    RIDGELAB_REQUIRE(static_cast<int>(inputs[s].size()) == T,
                     "forward: all sequences in a batch must share one length");
    for (int t = 0; t < T; ++t) {
      const int id = inputs[s][static_cast<std::size_t>(t)];
      if (id < 0 || id >= config.vocab_size) {
        throw ContractViolation("forward: token id " + std::to_string(id) + " outside vocabulary");
      }
      ids.push_back(id);
      positions.push_back(t);
    }
    last_rows.push_back(static_cast<int>(s) * T + T - 1);
  }

  if (trace != nullptr) {
    *trace = ForwardTrace{};
    trace->seq_len = T;
  }
  auto record_hidden = [&](const Var& x) {
    if (trace == nullptr || !capture.hidden) return;
    trace->hidden.push_back(kernels::gather_rows(x.value(), last_rows));
    if (trace->hidden.size() > 1) {
      const std::size_t l = trace->hidden.size() - 1;
      trace->deltas.push_back(trace->hidden[l] - trace->hidden[l - 1]);
    }
  };

  Var x = add(gather_rows(vars.token_embedding, ids), gather_rows(vars.position_embedding, positions));
  record_hidden(x);

  for (std::size_t l = 0; l < vars.blocks.size(); ++l) {
    const auto& b = vars.blocks[l];
    std::vector<Matrix>* probs = nullptr;
    if (trace != nullptr && capture.attention) probs = &trace->attention.emplace_back();

    const Var h1 = layer_normalize(x, b.ln1_gain, b.ln1_shift);
    const Var qkv = add_row(matmul(h1, b.w_qkv), b.b_qkv);
    const Var heads = causal_attention(qkv, config.n_heads, T, probs);
    const Var attn = add_row(matmul(heads, b.w_out), b.b_out);
    const Var h2 = layer_normalize(add(x, attn), b.ln2_gain, b.ln2_shift);
    const Var hidden = gelu(add_row(matmul(h2, b.w_ff1), b.b_ff1));
    const Var ff = add_row(matmul(hidden, b.w_ff2), b.b_ff2);
    const Var update = add(attn, ff);
    x = config.residual_scaling ? add(x, scale(update, vars.beta[l])) : add(x, update);
    record_hidden(x);
  }

  const Var last = gather_rows(x, last_rows);
  const Var normed = layer_normalize(last, vars.final_gain, vars.final_shift);
  const Var logits = matmul(normed, transpose(vars.token_embedding));
  if (trace != nullptr) trace->logits = logits.value();
  return logits;
}

ForwardTrace forward(const ModelState& state, std::span<const data::TokenSequence> inputs,
                     const Capture& capture) {
  ad::Tape tape(false);
  const ModelVars vars = bind(tape, state, Trainable::none);
  ForwardTrace trace;
  forward_graph(vars, state.config, inputs, capture, &trace);
  return trace;
}

RowVector embed_label(const ModelState& state, int token) {
  RIDGELAB_REQUIRE(token >= 0 && token < state.config.vocab_size, "embed_label: id out of range");
  return state.token_embedding.row(token);
}

Matrix early_exit_logits(const ForwardTrace& trace, const ModelState& state, int layer) {
  if (layer < 0 || layer >= static_cast<int>(trace.hidden.size())) {
    throw ContractViolation("early_exit_logits: layer " + std::to_string(layer) +
                            " outside the captured range");
  }
  const Matrix normed =
      kernels::layer_normalize(trace.hidden[static_cast<std::size_t>(layer)], state.final_gain,
                               state.final_shift);
  const Matrix head = state.token_embedding.transpose();
  return normed * head;
}

AttentionSummary attention_summary(const ForwardTrace& trace, int n_heads,
                                   std::span<const int> signal_positions) {
  RIDGELAB_REQUIRE(!trace.attention.empty(), "attention_summary: attention was not captured");
  RIDGELAB_REQUIRE(n_heads >= 1, "attention_summary: n_heads must be >= 1");
  AttentionSummary out;
  for (const auto& maps : trace.attention) {
    RIDGELAB_REQUIRE(maps.size() % static_cast<std::size_t>(n_heads) == 0,
                     "attention_summary: map count not a multiple of n_heads");
    const std::size_t n_seq = maps.size() / static_cast<std::size_t>(n_heads);
    std::vector<double> heads(static_cast<std::size_t>(n_heads), 0.0);
    for (std::size_t s = 0; s < n_seq; ++s) {
      for (int h = 0; h < n_heads; ++h) {
        const Matrix& p = maps[s * static_cast<std::size_t>(n_heads) + static_cast<std::size_t>(h)];
        const Eigen::Index q = p.rows() - 1;
        double mass = 0.0;
        for (int pos : signal_positions) {
          RIDGELAB_REQUIRE(pos >= 0 && pos < p.cols(), "attention_summary: position out of range");
          mass += p(q, pos);
        }
        heads[static_cast<std::size_t>(h)] += mass;
      }
    }
    for (double& m : heads) m /= static_cast<double>(n_seq);
    out.per_layer.push_back(std::accumulate(heads.begin(), heads.end(), 0.0) / n_heads);
    out.per_head.push_back(std::move(heads));
  }
  return out;
}

DecodedDelta decode_delta(const ModelState& state, const RowVector& delta, int top_k) {
  if (delta.size() != state.config.d_model) {
    throw ContractViolation("decode_delta: delta has dimension " + std::to_string(delta.size()) +
                            ", expected " + std::to_string(state.config.d_model));
  }
  RIDGELAB_REQUIRE(top_k >= 1, "decode_delta: top_k must be >= 1");
  const Matrix row = delta;
  const Matrix normed = kernels::layer_normalize(row, state.final_gain, state.final_shift);
  const Matrix head = state.token_embedding.transpose();
  const Matrix probs = kernels::row_softmax(normed * head);

  std::vector<int> order(static_cast<std::size_t>(probs.cols()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return probs(0, a) > probs(0, b); });
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(top_k), order.size());
  DecodedDelta out;
  for (std::size_t i = 0; i < k; ++i) out.top.push_back({order[i], probs(0, order[i])});
  for (std::size_t i = 0; i < k; ++i) {
    const int tok = order[order.size() - 1 - i];
    out.bottom.push_back({tok, probs(0, tok)});
  }
  return out;
}

ModelState truncate(const ModelState& state, int keep_layers) {
  if (keep_layers < 1 || keep_layers > state.config.n_layers) {
    throw ContractViolation("truncate: keep_layers " + std::to_string(keep_layers) +
                            " outside [1, " + std::to_string(state.config.n_layers) + "]");
  }
  ModelState out = state;
  out.config.n_layers = keep_layers;
  out.blocks.resize(static_cast<std::size_t>(keep_layers));
  out.beta.resize(static_cast<std::size_t>(keep_layers));
  return out;
}

nlohmann::json config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["n_layers"] = c.n_layers;
  j["d_model"] = c.d_model;
  j["n_heads"] = c.n_heads;
  j["ff_mult"] = c.ff_mult;
  j["vocab_size"] = c.vocab_size;
  j["max_seq_len"] = c.max_seq_len;
  j["seed"] = c.seed;
  j["residual_scaling"] = c.residual_scaling;
  return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.n_layers = j.at("n_layers").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.ff_mult = j.at("ff_mult").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.max_seq_len = j.at("max_seq_len").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.residual_scaling = j.at("residual_scaling").get<bool>();
  c.validate();
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const ModelState& state,
                     const nlohmann::json& meta) {
  nlohmann::ordered_json header;
  header["config"] = config_to_json(state.config);
  header["tensors"] = nlohmann::json::array();
  for (const auto& [name, m] : state.named_weights()) {
    header["tensors"].push_back({{"name", name}, {"rows", m->rows()}, {"cols", m->cols()}});
  }
  header["beta"] = state.beta.size();
  header["meta"] = meta;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kCheckpointVersion);
  write_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, m] : state.named_weights()) {
    out.write(reinterpret_cast<const char*>(m->data()),
              static_cast<std::streamsize>(m->size() * sizeof(double)));
  }
  out.write(reinterpret_cast<const char*>(state.beta.data()),
            static_cast<std::streamsize>(state.beta.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ModelState load_checkpoint(const std::filesystem::path& path, nlohmann::json* meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  auto fail = [&](const std::string& why) -> ParseError {
    return ParseError(path.string() + ": " + why);
  };
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw fail("not a checkpoint file");
  std::uint32_t version = 0;
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&header_len), 8);
  if (!in || version != kCheckpointVersion) throw fail("unsupported checkpoint version");
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw fail("truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw fail(std::string("bad header: ") + e.what());
  }
  ModelState s = shell(config_from_json(header.at("config")));
  auto weights = s.named_weights();
  const auto& tensors = header.at("tensors");
  if (tensors.size() != weights.size()) throw fail("tensor count mismatch");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    Matrix& m = *weights[i].second;
    if (tensors[i].at("name") != weights[i].first || tensors[i].at("rows") != m.rows() ||
        tensors[i].at("cols") != m.cols()) {
      throw fail("tensor layout mismatch at " + weights[i].first);
    }
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  }
  if (header.at("beta").get<std::size_t>() != s.beta.size()) throw fail("beta length mismatch");
  in.read(reinterpret_cast<char*>(s.beta.data()),
          static_cast<std::streamsize>(s.beta.size() * sizeof(double)));
  if (!in) throw fail("truncated payload");
  if (meta != nullptr) *meta = header.value("meta", nlohmann::json::object());
  return s;
}

}  // namespace ridgelab::model
