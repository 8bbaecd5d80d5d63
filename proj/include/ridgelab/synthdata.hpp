#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace ridgelab::data {

// SplitMix64 (Steele, Lea, Flood 2014). The only generator used for data.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  // Uniform integer in [0, n) by modular reduction (no rejection).
  std::uint64_t uniform(std::uint64_t n);
  // Uniform double in [0, 1) from the top 53 bits.
  double uniform01();

 private:
  std::uint64_t state_;
};

// The SplitMix64 output finalizer applied to one value.
std::uint64_t mix64(std::uint64_t x);
// Independent per-index generator state: mix64(seed ^ mix64(index)).
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index);

inline constexpr int kElementsPerInput = 9;
inline constexpr int kMaxModulus = 25;        // signals occupy SIG_0 .. SIG_24
inline constexpr int kDefaultNoiseRange = 100;  // noises occupy NOI_0 .. NOI_99
inline constexpr int kVocabSize = kMaxModulus + kDefaultNoiseRange;
inline constexpr int kInputLength = 2 * kElementsPerInput;

struct ArithSample {
  int k = 2;
  int s0 = 0;
  int diff = 1;
  int noise_range = kDefaultNoiseRange;
  std::array<int, kElementsPerInput> noise{};
  std::uint64_t seed_index = 0;

  // (s0 + t * diff) mod k; t = 9 is the target.
  int signal(int t) const;
  int target() const { return signal(kElementsPerInput); }
  // "S{signal}_N{noise}" for the nine input elements.
  std::vector<std::string> elements() const;
};

// Builds a sample with explicit noise values; validates every bound.
ArithSample make_sample(int k, int s0, int diff, int noise_range,
                        const std::array<int, kElementsPerInput>& noise,
                        std::uint64_t seed_index = 0);

// Draws the nine noise values from `rng`.
ArithSample generate_sample(int k, int s0, int diff, int noise_range, SplitMix64& rng);

struct SplitSpec {
  std::string name;
  std::vector<int> k_values;
  std::size_t size = 0;
  std::uint64_t seed = 0;
  int noise_range = kDefaultNoiseRange;
};

// Sample i uses SplitMix64(stream_seed(spec.seed, i)) and draws, in order:
// k (index into k_values), s0 in [0, k), diff in [1, k), then nine noises.
std::vector<ArithSample> generate_split(const SplitSpec& spec);

// {5, ..., 25} without 13.
std::vector<int> default_ood_moduli();

using TokenSequence = std::vector<int>;

inline constexpr int signal_token(int signal) { return signal; }
inline constexpr int noise_token(int noise) { return kMaxModulus + noise; }
inline constexpr bool is_signal_token(int id) { return id >= 0 && id < kMaxModulus; }

// [SIG(s_0), NOI(n_0), ..., SIG(s_8), NOI(n_8)] and SIG(target).
std::pair<TokenSequence, int> tokenize(const ArithSample& sample);
std::vector<std::string> detokenize(const TokenSequence& input);
std::string token_name(int id);
// Positions of signal tokens within a tokenized input.
std::vector<int> signal_positions();

// JSON-lines, one object per sample with keys in this order:
// elements, target, k, s0, diff, seed_index.
std::string serialize_line(const ArithSample& sample);
void serialize(const std::vector<ArithSample>& samples, const std::filesystem::path& path);
// Throws ParseError with the 1-based line number on malformed input.
std::vector<ArithSample> deserialize(const std::filesystem::path& path,
                                     int noise_range = kDefaultNoiseRange);

struct TokenizedSplit {
  std::vector<TokenSequence> inputs;
  std::vector<int> targets;
  std::vector<int> moduli;  // k of each sample, for ID/OOD tagging
};
TokenizedSplit tokenize_all(const std::vector<ArithSample>& samples);

}  // namespace ridgelab::data
