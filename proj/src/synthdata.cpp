#include "ridgelab/synthdata.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <regex>

#include "ridgelab/errors.hpp"

namespace ridgelab::data {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

void validate(int k, int s0, int diff, int noise_range) {
  RIDGELAB_REQUIRE(k >= 2, "sample: modulus k must be >= 2");
  RIDGELAB_REQUIRE(s0 >= 0 && s0 < k, "sample: s0 must lie in [0, k)");
  RIDGELAB_REQUIRE(diff >= 1 && diff < k, "sample: diff must lie in [1, k)");
  RIDGELAB_REQUIRE(noise_range >= 1, "sample: noise_range must be >= 1");
}

}  // namespace

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t SplitMix64::next() {
  state_ += kGolden;
  return mix64(state_);
}

std::uint64_t SplitMix64::uniform(std::uint64_t n) {
  RIDGELAB_REQUIRE(n > 0, "SplitMix64::uniform: empty range");
  return next() % n;
}

double SplitMix64::uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
  return mix64(seed ^ mix64(index));
}

int ArithSample::signal(int t) const {
  return static_cast<int>((static_cast<long long>(s0) + static_cast<long long>(t) * diff) % k);
}

std::vector<std::string> ArithSample::elements() const {
  std::vector<std::string> out;
  out.reserve(kElementsPerInput);
  for (int t = 0; t < kElementsPerInput; ++t) {
    out.push_back("S" + std::to_string(signal(t)) + "_N" + std::to_string(noise[t]));
  }
  return out;
}

ArithSample make_sample(int k, int s0, int diff, int noise_range,
                        const std::array<int, kElementsPerInput>& noise,
                        std::uint64_t seed_index) {
  validate(k, s0, diff, noise_range);
  for (int n : noise) {
    RIDGELAB_REQUIRE(n >= 0 && n < noise_range, "sample: noise outside [0, noise_range)");
  }
  return ArithSample{k, s0, diff, noise_range, noise, seed_index};
}

ArithSample generate_sample(int k, int s0, int diff, int noise_range, SplitMix64& rng) {
  validate(k, s0, diff, noise_range);
  std::array<int, kElementsPerInput> noise{};
  for (int& n : noise) n = static_cast<int>(rng.uniform(static_cast<std::uint64_t>(noise_range)));
  return ArithSample{k, s0, diff, noise_range, noise, 0};
}

std::vector<ArithSample> generate_split(const SplitSpec& spec) {
  RIDGELAB_REQUIRE(!spec.k_values.empty(), "generate_split: empty k_values");
  for (int k : spec.k_values) {
    RIDGELAB_REQUIRE(k >= 2, "generate_split: every modulus must be >= 2");
  }
  std::vector<ArithSample> out;
  out.reserve(spec.size);
  for (std::size_t i = 0; i < spec.size; ++i) {
    SplitMix64 rng(stream_seed(spec.seed, i));
    const int k = spec.k_values[rng.uniform(spec.k_values.size())];
    const int s0 = static_cast<int>(rng.uniform(static_cast<std::uint64_t>(k)));
    const int diff = 1 + static_cast<int>(rng.uniform(static_cast<std::uint64_t>(k - 1)));
    ArithSample s = generate_sample(k, s0, diff, spec.noise_range, rng);
    s.seed_index = i;
    out.push_back(s);
  }
  return out;
}

std::vector<int> default_ood_moduli() {
  std::vector<int> ks;
  for (int k = 5; k <= 25; ++k) {
    if (k != 13) ks.push_back(k);
  }
  return ks;
}

std::pair<TokenSequence, int> tokenize(const ArithSample& sample) {
  RIDGELAB_REQUIRE(sample.k <= kMaxModulus, "tokenize: modulus exceeds the signal vocabulary");
  TokenSequence ids;
  ids.reserve(kInputLength);
  for (int t = 0; t < kElementsPerInput; ++t) {
    const int n = sample.noise[t];
    RIDGELAB_REQUIRE(n >= 0 && n < kDefaultNoiseRange,
                     "tokenize: noise value outside the noise vocabulary");
    ids.push_back(signal_token(sample.signal(t)));
    ids.push_back(noise_token(n));
  }
  return {std::move(ids), signal_token(sample.target())};
}

std::string token_name(int id) {
  RIDGELAB_REQUIRE(id >= 0 && id < kVocabSize, "token_name: id out of range");
  if (is_signal_token(id)) return "SIG_" + std::to_string(id);
  return "NOI_" + std::to_string(id - kMaxModulus);
}

std::vector<std::string> detokenize(const TokenSequence& input) {
  RIDGELAB_REQUIRE(input.size() % 2 == 0, "detokenize: odd token count");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < input.size(); i += 2) {
    const int sig = input[i];
    const int noi = input[i + 1];
    RIDGELAB_REQUIRE(is_signal_token(sig), "detokenize: expected a signal token");
    RIDGELAB_REQUIRE(noi >= kMaxModulus && noi < kVocabSize, "detokenize: expected a noise token");
    out.push_back("S" + std::to_string(sig) + "_N" + std::to_string(noi - kMaxModulus));
  }
  return out;
}

std::vector<int> signal_positions() {
  std::vector<int> pos;
  for (int t = 0; t < kElementsPerInput; ++t) pos.push_back(2 * t);
  return pos;
}

std::string serialize_line(const ArithSample& sample) {
  nlohmann::ordered_json j;
  j["elements"] = sample.elements();
  j["target"] = sample.target();
  j["k"] = sample.k;
  j["s0"] = sample.s0;
  j["diff"] = sample.diff;
  j["seed_index"] = sample.seed_index;
  return j.dump();
}

void serialize(const std::vector<ArithSample>& samples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const ArithSample& s : samples) out << serialize_line(s) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<ArithSample> deserialize(const std::filesystem::path& path, int noise_range) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  static const std::regex element_re(R"(S(\d+)_N(\d+))");
  std::vector<ArithSample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fail = [&](const std::string& why) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + why);
    };
    if (line.empty()) fail("empty line");
    try {
      const auto j = nlohmann::json::parse(line);
      const auto elements = j.at("elements").get<std::vector<std::string>>();
      if (elements.size() != kElementsPerInput) fail("expected 9 elements");
      std::array<int, kElementsPerInput> noise{};
      std::array<int, kElementsPerInput> signals{};
      for (int t = 0; t < kElementsPerInput; ++t) {
        std::smatch m;
        if (!std::regex_match(elements[t], m, element_re)) fail("bad element '" + elements[t] + "'");
        signals[t] = std::stoi(m[1].str());
        noise[t] = std::stoi(m[2].str());
      }
      ArithSample s = make_sample(j.at("k").get<int>(), j.at("s0").get<int>(),
                                  j.at("diff").get<int>(), noise_range, noise,
                                  j.at("seed_index").get<std::uint64_t>());
      for (int t = 0; t < kElementsPerInput; ++t) {
        if (signals[t] != s.signal(t)) fail("element signal disagrees with (s0, diff, k)");
      }
      if (j.at("target").get<int>() != s.target()) fail("target disagrees with (s0, diff, k)");
      out.push_back(s);
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      fail(e.what());
    }
  }
  return out;
}

TokenizedSplit tokenize_all(const std::vector<ArithSample>& samples) {
  TokenizedSplit out;
  out.inputs.reserve(samples.size());
  for (const ArithSample& s : samples) {
    auto [ids, target] = tokenize(s);
    out.inputs.push_back(std::move(ids));
    out.targets.push_back(target);
    out.moduli.push_back(s.k);
  }
  return out;
}

}  // namespace ridgelab::data
