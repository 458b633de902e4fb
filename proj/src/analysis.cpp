#include "revsum/analysis.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "revsum/errors.hpp"

namespace revsum {

using nlohmann::json;

namespace {

int read_rating(const json& record, const char* name, std::size_t line) {
  auto it = record.find(name);
  if (it == record.end() || !it->is_number_integer()) {
    throw DataError("line " + std::to_string(line) + ": field '" + name +
                    "' must be an integer");
  }
  const auto v = it->get<long long>();
  if (v < 1 || v > 5) {
    throw DataError("line " + std::to_string(line) + ": " + name + " " +
                    std::to_string(v) + " outside [1, 5]");
  }
  return static_cast<int>(v);
}

void tally(SetAccuracy& acc, bool correct) {
  ++acc.total;
  if (correct) ++acc.correct;
}

json set_json(const SetAccuracy& a) {
  return {{"correct", a.correct}, {"total", a.total}, {"accuracy", a.accuracy()}};
}

}  // namespace

std::vector<PredictionRecord> read_predictions(std::istream& in) {
  std::vector<PredictionRecord> records;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw DataError("line " + std::to_string(line) + ": " + e.what());
    }
    if (!j.is_object()) {
      throw DataError("line " + std::to_string(line) + ": record is not an object");
    }
    PredictionRecord r;
    auto id = j.find("id");
    if (id == j.end() || !id->is_number_integer()) {
      throw DataError("line " + std::to_string(line) + ": field 'id' must be an integer");
    }
    r.id = id->get<std::int64_t>();
    r.gold = read_rating(j, "gold", line);
    r.pred = read_rating(j, "pred", line);
    if (auto m = j.find("model"); m != j.end() && m->is_string()) {
      r.model = m->get<std::string>();
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_predictions(in);
}

void write_predictions(std::ostream& out,
                       std::span<const PredictionRecord> records) {
  for (const auto& r : records) {
    json j = {{"id", r.id}, {"gold", r.gold}, {"pred", r.pred}};
    if (!r.model.empty()) j["model"] = r.model;
    out << j.dump() << '\n';
  }
}

double SetDecomposition::conflicting_fraction() const {
  const std::size_t total = conflicting.size() + non_conflicting.size();
  return total == 0 ? 0.0
                    : static_cast<double>(conflicting.size()) / static_cast<double>(total);
}

SetDecomposition conflicting_set(std::span<const PredictionRecord> review_preds,
                                 std::span<const PredictionRecord> summary_preds) {
  if (review_preds.size() != summary_preds.size()) {
    throw DataError("prediction lists differ in length (" +
                    std::to_string(review_preds.size()) + " vs " +
                    std::to_string(summary_preds.size()) + ")");
  }
  SetDecomposition out;
  auto& review_acc = out.accuracies["review"];
  auto& summary_acc = out.accuracies["summary"];
  for (std::size_t i = 0; i < review_preds.size(); ++i) {
    const auto& r = review_preds[i];
    const auto& s = summary_preds[i];
    if (r.id != s.id) {
      throw DataError("example id mismatch at position " + std::to_string(i) +
                      ": " + std::to_string(r.id) + " vs " + std::to_string(s.id));
    }
    if (r.gold != s.gold) {
      throw DataError("gold label mismatch for example " + std::to_string(r.id));
    }
    const bool r_ok = r.pred == r.gold;
    const bool s_ok = s.pred == s.gold;
    tally(review_acc.overall, r_ok);
    tally(summary_acc.overall, s_ok);
    if (r.pred != s.pred) {
      out.conflicting.push_back(i);
      tally(review_acc.conflicting, r_ok);
      tally(summary_acc.conflicting, s_ok);
      if (r_ok || s_ok) {
        out.union_set.push_back(i);
        tally(review_acc.union_set, r_ok);
        tally(summary_acc.union_set, s_ok);
      }
    } else {
      out.non_conflicting.push_back(i);
      tally(review_acc.non_conflicting, r_ok);
      tally(summary_acc.non_conflicting, s_ok);
    }
  }
  return out;
}

std::vector<LengthBucket> length_buckets(std::span<const PredictionRecord> preds,
                                         std::span<const std::size_t> review_lengths,
                                         std::span<const std::size_t> edges) {
  if (preds.size() != review_lengths.size()) {
    throw DataError("length_buckets: " + std::to_string(preds.size()) +
                    " predictions but " + std::to_string(review_lengths.size()) +
                    " lengths");
  }
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (edges[i] <= edges[i - 1]) {
      throw ConfigError("length bucket edges must be strictly increasing");
    }
  }
  std::vector<LengthBucket> all(edges.size() + 1);
  for (std::size_t b = 0; b < all.size(); ++b) {
    all[b].lower = b == 0 ? 0 : edges[b - 1];
    if (b < edges.size()) all[b].upper = edges[b];
  }
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto b = static_cast<std::size_t>(
        std::upper_bound(edges.begin(), edges.end(), review_lengths[i]) - edges.begin());
    tally(all[b].accuracy, preds[i].pred == preds[i].gold);
  }
  std::vector<LengthBucket> out;
  for (auto& bucket : all) {
    if (bucket.accuracy.total > 0) out.push_back(bucket);
  }
  return out;
}

std::string analysis_report_json(const SetDecomposition& d,
                                 const BucketsByModel& buckets) {
  json j;
  const std::size_t total = d.conflicting.size() + d.non_conflicting.size();
  j["examples"] = total;
  j["conflicting"] = {{"count", d.conflicting.size()},
                      {"fraction", d.conflicting_fraction()},
                      {"indices", d.conflicting}};
  j["non_conflicting"] = {{"count", d.non_conflicting.size()}};
  j["union"] = {{"count", d.union_set.size()}, {"indices", d.union_set}};
  for (const auto& [name, acc] : d.accuracies) {
    json m = {{"overall", set_json(acc.overall)},
              {"conflicting", set_json(acc.conflicting)},
              {"non_conflicting", set_json(acc.non_conflicting)},
              {"union", set_json(acc.union_set)}};
    // Share of this model's correct predictions that fall in the union set.
    m["union_share_of_correct"] =
        acc.overall.correct == 0
            ? 0.0
            : static_cast<double>(acc.union_set.correct) /
                  static_cast<double>(acc.overall.correct);
    j["models"][name] = std::move(m);
  }
  json b = json::object();
  for (const auto& [name, list] : buckets) {
    json rows = json::array();
    for (const auto& bucket : list) {
      json entry = {{"lower", bucket.lower}, {"accuracy", set_json(bucket.accuracy)}};
      if (bucket.upper == std::numeric_limits<std::size_t>::max()) {
        entry["upper"] = nullptr;
      } else {
        entry["upper"] = bucket.upper;
      }
      rows.push_back(std::move(entry));
    }
    b[name] = std::move(rows);
  }
  j["length_buckets"] = std::move(b);
  return j.dump(2);
}

}  // namespace revsum
