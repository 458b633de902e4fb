#include "revsum/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "revsum/attention.hpp"
#include "revsum/errors.hpp"
#include "revsum/random.hpp"

namespace revsum {

using nlohmann::json;

namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }
bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::string field_string(const json& record, const char* name,
                         std::size_t line) {
  auto it = record.find(name);
  if (it == record.end()) {
    throw DataError("line " + std::to_string(line) + ": missing field '" +
                    name + "'");
  }
  if (!it->is_string()) {
    throw DataError("line " + std::to_string(line) + ": field '" + name +
                    "' must be a string");
  }
  return it->get<std::string>();
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t end = i;
    while (end < text.size() && !is_space(static_cast<unsigned char>(text[end]))) ++end;
    if (end == i) break;
    std::string chunk(text.substr(i, end - i));
    for (auto& c : chunk) {
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    std::size_t lead = 0;
    while (lead < chunk.size() && is_punct(static_cast<unsigned char>(chunk[lead]))) ++lead;
    std::size_t tail = chunk.size();
    while (tail > lead && is_punct(static_cast<unsigned char>(chunk[tail - 1]))) --tail;
    for (std::size_t k = 0; k < lead; ++k) tokens.emplace_back(1, chunk[k]);
    if (tail > lead) tokens.push_back(chunk.substr(lead, tail - lead));
    for (std::size_t k = std::max(tail, lead); k < chunk.size(); ++k) {
      tokens.emplace_back(1, chunk[k]);
    }
    i = end;
  }
  return tokens;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

Corpus read_corpus(std::istream& in) {
  Corpus corpus;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (std::all_of(text.begin(), text.end(),
                    [](char c) { return is_space(static_cast<unsigned char>(c)); })) {
      continue;
    }
    json record;
    try {
      record = json::parse(text);
    } catch (const json::parse_error& e) {
      throw DataError("line " + std::to_string(line) + ": malformed record: " +
                      e.what());
    }
    if (!record.is_object()) {
      throw DataError("line " + std::to_string(line) + ": record is not an object");
    }
    Example example;
    example.review = tokenize(field_string(record, "review", line));
    example.summary = tokenize(field_string(record, "summary", line));
    auto rating = record.find("rating");
    if (rating == record.end()) {
      throw DataError("line " + std::to_string(line) + ": missing field 'rating'");
    }
    if (!rating->is_number_integer()) {
      throw DataError("line " + std::to_string(line) +
                      ": field 'rating' must be an integer");
    }
    const auto value = rating->get<long long>();
    if (value < 1 || value > kNumClasses) {
      throw DataError("line " + std::to_string(line) + ": rating " +
                      std::to_string(value) + " outside [1, 5]");
    }
    example.rating = static_cast<int>(value);
    if (example.review.empty()) {
      throw DataError("line " + std::to_string(line) + ": empty review");
    }
    corpus.push_back(std::move(example));
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_corpus(in);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& example : corpus) {
    json record = {{"review", join_tokens(example.review)},
                   {"summary", join_tokens(example.summary)},
                   {"rating", example.rating}};
    out << record.dump() << '\n';
  }
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  auto out = open_output(path);
  write_corpus(out, corpus);
}

Vocabulary::Vocabulary() : tokens_{"<pad>", "<unk>"}, index_{{"<pad>", kPad}, {"<unk>", kUnk}} {}

Vocabulary Vocabulary::build(const Corpus& corpus, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& example : corpus) {
    for (const auto& t : example.review) ++counts[t];
    for (const auto& t : example.summary) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [token, count] : counts) {
    if (count >= min_count) kept.emplace_back(token, count);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second > b.second;
  });
  std::vector<std::string> tokens{"<pad>", "<unk>"};
  for (auto& [token, count] : kept) tokens.push_back(token);
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2) {
    throw DataError("vocabulary must contain the reserved <pad> and <unk> ids");
  }
  Vocabulary vocab;
  vocab.tokens_ = std::move(tokens);
  vocab.index_.clear();
  for (std::size_t i = 0; i < vocab.tokens_.size(); ++i) {
    if (!vocab.index_.emplace(vocab.tokens_[i], static_cast<int>(i)).second) {
      throw DataError("duplicate vocabulary token '" + vocab.tokens_[i] + "'");
    }
  }
  return vocab;
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::encode(std::span<const std::string> tokens,
                                    std::size_t max_tokens) const {
  const std::size_t n = std::min(tokens.size(), max_tokens);
  std::vector<int> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = id(tokens[i]);
  return ids;
}

EncodedExample encode_example(const Vocabulary& vocab, const Example& example,
                              std::size_t max_review, std::size_t max_summary) {
  if (example.rating < 1 || example.rating > kNumClasses) {
    throw DataError("rating " + std::to_string(example.rating) +
                    " outside [1, 5]");
  }
  EncodedExample out;
  out.review = vocab.encode(example.review, max_review);
  out.summary = vocab.encode(example.summary, max_summary);
  out.label = static_cast<std::size_t>(example.rating - 1);
  const std::span<const std::string> review(example.review.data(),
                                            out.review.size());
  const std::span<const std::string> summary(example.summary.data(),
                                             out.summary.size());
  out.overlap = extract_overlap_labels(review, summary);
  return out;
}

std::vector<EncodedExample> encode_corpus(const Vocabulary& vocab,
                                          const Corpus& corpus,
                                          std::size_t max_review,
                                          std::size_t max_summary) {
  std::vector<EncodedExample> out;
  out.reserve(corpus.size());
  for (const auto& example : corpus) {
    out.push_back(encode_example(vocab, example, max_review, max_summary));
  }
  return out;
}

double EmbeddingTable::match_rate() const {
  const std::size_t rows = table.rank() == 2 ? table.dim(0) : 0;
  return rows == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(rows);
}

EmbeddingTable random_embeddings(const Vocabulary& vocab, std::size_t dim,
                                 std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> values(vocab.size() * dim);
  for (auto& v : values) v = uniform(rng, -0.1, 0.1);
  return {Tensor::matrix(vocab.size(), dim, std::move(values), true), 0};
}

EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               const Vocabulary& vocab, std::size_t dim,
                               std::uint64_t seed) {
  EmbeddingTable result = random_embeddings(vocab, dim, seed);
  auto in = open_input(path);
  auto values = result.table.mutable_values();
  std::vector<bool> seen(vocab.size(), false);
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    std::istringstream fields(text);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> vec;
    std::string number;
    while (fields >> number) {
      try {
        std::size_t used = 0;
        vec.push_back(std::stod(number, &used));
        if (used != number.size()) throw std::invalid_argument(number);
      } catch (const std::exception&) {
        throw FormatError("embedding line " + std::to_string(line) +
                          ": bad number '" + number + "'");
      }
    }
    if (vec.size() != dim) {
      throw FormatError("embedding line " + std::to_string(line) + ": width " +
                        std::to_string(vec.size()) + ", expected " +
                        std::to_string(dim));
    }
    const int id = vocab.id(token);
    if (id == Vocabulary::kUnk && token != vocab.token(Vocabulary::kUnk)) continue;
    const auto row = static_cast<std::size_t>(id);
    std::copy(vec.begin(), vec.end(), values.begin() + row * dim);
    if (!seen[row]) {
      seen[row] = true;
      ++result.matched;
    }
  }
  return result;
}

SyntheticSpec SyntheticSpec::defaults() {
  SyntheticSpec spec;
  spec.lexicon = {{
      {"awful", "terrible", "horrible", "useless", "worst", "garbage"},
      {"poor", "disappointing", "flimsy", "mediocre", "overpriced", "cheap"},
      {"okay", "average", "decent", "fine", "passable", "adequate"},
      {"good", "solid", "nice", "pleased", "sturdy", "recommended"},
      {"excellent", "amazing", "perfect", "fantastic", "wonderful", "superb"},
  }};
  spec.neutral = {
      "the",     "a",        "it",      "this",    "product", "box",
      "arrived", "came",     "with",    "and",     "for",     "my",
      "son",     "daughter", "kids",    "game",    "toy",     "set",
      "pieces",  "color",    "size",    "price",   "bought",  "ordered",
      "week",    "day",      "after",   "before",  "use",     "using",
      "played",  "play",     "battery", "batteries", "instructions", "package",
      "shipping", "store",   "gift",    "birthday", "christmas", "year",
      "old",     "new",      "one",     "two",     "three",   "time",
      "we",      "they",     "he",      "she",     "was",     "is",
      "has",     "have",     "on",      "in",      "of",      "to",
      "back",    "front",    "side",    "top",     "bottom",  "part",
      "parts",   "model",    "version", "brand",   "amazon",  "review",
  };
  return spec;
}

void SyntheticSpec::validate() const {
  for (std::size_t c = 0; c < lexicon.size(); ++c) {
    if (lexicon[c].empty()) {
      throw ConfigError("synthetic lexicon for class " + std::to_string(c + 1) +
                        " is empty");
    }
  }
  if (neutral.empty()) throw ConfigError("synthetic neutral vocabulary is empty");
  double total = 0.0;
  for (double p : priors) {
    if (p < 0.0) throw ConfigError("class priors must be non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("class priors must sum to 1");
  if (!(conflict_rate >= 0.0 && conflict_rate <= 1.0)) {
    throw ConfigError("conflict rate must lie in [0, 1]");
  }
  if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) {
    throw ConfigError("noise rate must lie in [0, 1]");
  }
  if (review_length.min == 0 || review_length.min > review_length.max ||
      summary_length.min == 0 || summary_length.min > summary_length.max) {
    throw ConfigError("length ranges must satisfy 1 <= min <= max");
  }
  if (review_signal_tokens == 0 || summary_signal_tokens == 0) {
    throw ConfigError("signal token counts must be positive");
  }
}

namespace {

std::array<double, kNumClasses> read_priors(const json& j) {
  std::array<double, kNumClasses> p{};
  if (!j.is_array() || j.size() != kNumClasses) {
    throw ConfigError("priors must be an array of 5 numbers");
  }
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = j[i].get<double>();
  return p;
}

LengthRange read_range(const json& j, const char* name) {
  if (!j.is_array() || j.size() != 2) {
    throw ConfigError(std::string(name) + " must be [min, max]");
  }
  return {j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

}  // namespace

SyntheticSpec parse_synthetic_spec(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("synthetic spec: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("synthetic spec must be an object");
  SyntheticSpec spec = SyntheticSpec::defaults();
  try {
    for (auto& [key, value] : j.items()) {
      if (key == "lexicon") {
        if (!value.is_array() || value.size() != kNumClasses) {
          throw ConfigError("lexicon must list 5 classes");
        }
        for (std::size_t c = 0; c < kNumClasses; ++c) {
          spec.lexicon[c] = value[c].get<std::vector<std::string>>();
        }
      } else if (key == "neutral") {
        spec.neutral = value.get<std::vector<std::string>>();
      } else if (key == "priors") {
        spec.priors = read_priors(value);
      } else if (key == "review_length") {
        spec.review_length = read_range(value, "review_length");
      } else if (key == "summary_length") {
        spec.summary_length = read_range(value, "summary_length");
      } else if (key == "review_signal_tokens") {
        spec.review_signal_tokens = value.get<std::size_t>();
      } else if (key == "summary_signal_tokens") {
        spec.summary_signal_tokens = value.get<std::size_t>();
      } else if (key == "conflict_rate") {
        spec.conflict_rate = value.get<double>();
      } else if (key == "noise_rate") {
        spec.noise_rate = value.get<double>();
      } else if (key == "seed") {
        spec.seed = value.get<std::uint64_t>();
      } else {
        throw ConfigError("synthetic spec: unknown key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synthetic spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::string synthetic_spec_to_json(const SyntheticSpec& spec) {
  json j;
  j["lexicon"] = spec.lexicon;
  j["neutral"] = spec.neutral;
  j["priors"] = spec.priors;
  j["review_length"] = {spec.review_length.min, spec.review_length.max};
  j["summary_length"] = {spec.summary_length.min, spec.summary_length.max};
  j["review_signal_tokens"] = spec.review_signal_tokens;
  j["summary_signal_tokens"] = spec.summary_signal_tokens;
  j["conflict_rate"] = spec.conflict_rate;
  j["noise_rate"] = spec.noise_rate;
  j["seed"] = spec.seed;
  return j.dump(2);
}

namespace {

template <typename T>
const T& pick(const std::vector<T>& items, Rng& rng) {
  return items[uniform_index(rng, items.size())];
}

// Filler text with `signal` gold-class words at distinct random positions.
std::vector<std::string> make_text(const SyntheticSpec& spec, LengthRange range,
                                   std::size_t signal, std::size_t gold,
                                   Rng& rng) {
  const std::size_t span = range.max - range.min + 1;
  std::size_t length = range.min + uniform_index(rng, span);
  length = std::max(length, signal);
  std::vector<std::string> tokens(length);
  for (auto& t : tokens) {
    if (spec.noise_rate > 0.0 && uniform01(rng) < spec.noise_rate) {
      t = pick(spec.lexicon[uniform_index(rng, kNumClasses)], rng);
    } else {
      t = pick(spec.neutral, rng);
    }
  }
  std::vector<std::size_t> positions(length);
  for (std::size_t i = 0; i < length; ++i) positions[i] = i;
  for (std::size_t i = 0; i < signal; ++i) {
    const std::size_t j = i + uniform_index(rng, length - i);
    std::swap(positions[i], positions[j]);
    tokens[positions[i]] = pick(spec.lexicon[gold], rng);
  }
  return tokens;
}

}  // namespace

Corpus gen_synthetic(const SyntheticSpec& spec, std::size_t count) {
  spec.validate();
  Rng rng(spec.seed);
  Corpus corpus;
  corpus.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    double u = uniform01(rng);
    std::size_t gold = kNumClasses - 1;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      if (u < spec.priors[c]) {
        gold = c;
        break;
      }
      u -= spec.priors[c];
    }
    bool review_signal = true;
    bool summary_signal = true;
    if (uniform01(rng) < spec.conflict_rate) {
      if (uniform01(rng) < 0.5) {
        summary_signal = false;
      } else {
        review_signal = false;
      }
    }
    Example example;
    example.rating = static_cast<int>(gold) + 1;
    example.review = make_text(spec, spec.review_length,
                               review_signal ? spec.review_signal_tokens : 0,
                               gold, rng);
    example.summary = make_text(spec, spec.summary_length,
                                summary_signal ? spec.summary_signal_tokens : 0,
                                gold, rng);
    corpus.push_back(std::move(example));
  }
  return corpus;
}

}  // namespace revsum
