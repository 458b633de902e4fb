#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "revsum/tensor.hpp"

namespace revsum {

inline constexpr int kNumClasses = 5;

struct Example {
  std::vector<std::string> review;
  std::vector<std::string> summary;
  int rating = 0;  // 1..5
};

using Corpus = std::vector<Example>;

/// Lowercases ASCII, splits on whitespace and peels leading/trailing ASCII
/// punctuation off each chunk as single-character tokens.
std::vector<std::string> tokenize(std::string_view text);
std::string join_tokens(std::span<const std::string> tokens);

/// One JSON object per line: {"review": str, "summary": str, "rating": 1..5}.
/// Blank lines are skipped; problems raise DataError naming the line.
Corpus read_corpus(std::istream& in);
Corpus load_corpus(const std::filesystem::path& path);
void write_corpus(std::ostream& out, const Corpus& corpus);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocabulary();
  // Tokens seen at least `min_count` times, by descending frequency then
  // lexicographically.
  static Vocabulary build(const Corpus& corpus, std::size_t min_count = 2);
  // Rebuilds from an id-ordered token list (including the reserved ids).
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  int id(const std::string& token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::vector<int> encode(std::span<const std::string> tokens,
                          std::size_t max_tokens) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

inline constexpr std::size_t kMaxReviewTokens = 400;
inline constexpr std::size_t kMaxSummaryTokens = 30;

struct EncodedExample {
  std::vector<int> review;
  std::vector<int> summary;
  std::size_t label = 0;              // rating - 1
  std::vector<std::uint8_t> overlap;  // extractive labels over review tokens
};

EncodedExample encode_example(const Vocabulary& vocab, const Example& example,
                              std::size_t max_review = kMaxReviewTokens,
                              std::size_t max_summary = kMaxSummaryTokens);
std::vector<EncodedExample> encode_corpus(
    const Vocabulary& vocab, const Corpus& corpus,
    std::size_t max_review = kMaxReviewTokens,
    std::size_t max_summary = kMaxSummaryTokens);

struct EmbeddingTable {
  Tensor table;  // [V x e]
  std::size_t matched = 0;
  double match_rate() const;
};

// Every row ~ uniform(-0.1, 0.1), deterministic per seed.
EmbeddingTable random_embeddings(const Vocabulary& vocab, std::size_t dim,
                                 std::uint64_t seed);
/// Text format: "token v1 ... v_dim" per line. Matched vocabulary rows are
/// copied; the rest stay random. A line of the wrong width is a FormatError.
EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               const Vocabulary& vocab, std::size_t dim,
                               std::uint64_t seed);

struct LengthRange {
  std::size_t min = 1;
  std::size_t max = 1;
};

/// Parameters of the synthetic review/summary generator.
struct SyntheticSpec {
  std::array<std::vector<std::string>, kNumClasses> lexicon;
  std::vector<std::string> neutral;
  std::array<double, kNumClasses> priors{0.2, 0.2, 0.2, 0.2, 0.2};
  LengthRange review_length{20, 40};
  LengthRange summary_length{2, 6};
  std::size_t review_signal_tokens = 2;
  std::size_t summary_signal_tokens = 1;
  double conflict_rate = 0.3;  // probability the signal lands in one text only
  double noise_rate = 0.0;     // filler replaced by a random-class sentiment word
  std::uint64_t seed = 1;

  static SyntheticSpec defaults();
  void validate() const;
};

SyntheticSpec parse_synthetic_spec(std::string_view json_text);
std::string synthetic_spec_to_json(const SyntheticSpec& spec);

Corpus gen_synthetic(const SyntheticSpec& spec, std::size_t count);

}  // namespace revsum
