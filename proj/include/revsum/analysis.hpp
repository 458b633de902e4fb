#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace revsum {

struct PredictionRecord {
  std::int64_t id = 0;
  int gold = 0;  // 1..5
  int pred = 0;  // 1..5
  std::string model;
};

// Line-delimited {"id", "gold", "pred"[, "model"]} records.
std::vector<PredictionRecord> read_predictions(std::istream& in);
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path);
void write_predictions(std::ostream& out,
                       std::span<const PredictionRecord> records);

struct SetAccuracy {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const {
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  }
};

struct ModelSetAccuracy {
  SetAccuracy overall;
  SetAccuracy conflicting;
  SetAccuracy non_conflicting;
  SetAccuracy union_set;
};

/// Split of a test set by whether a review-only and a summary-only model
/// agree. Indices refer to positions in the supplied record lists.
struct SetDecomposition {
  std::vector<std::size_t> conflicting;
  std::vector<std::size_t> non_conflicting;
  std::vector<std::size_t> union_set;  // conflicting and at least one correct
  std::map<std::string, ModelSetAccuracy> accuracies;  // "review", "summary"

  double conflicting_fraction() const;
};

// DataError when ids, gold labels or lengths differ between the lists.
SetDecomposition conflicting_set(std::span<const PredictionRecord> review_preds,
                                 std::span<const PredictionRecord> summary_preds);

struct LengthBucket {
  std::size_t lower = 0;
  std::size_t upper = std::numeric_limits<std::size_t>::max();  // exclusive
  SetAccuracy accuracy;
};

/// Half-open buckets [0, e0), [e0, e1), ..., [ek, inf) by review length.
/// Empty buckets are omitted. `review_lengths[i]` belongs to `preds[i]`.
std::vector<LengthBucket> length_buckets(std::span<const PredictionRecord> preds,
                                         std::span<const std::size_t> review_lengths,
                                         std::span<const std::size_t> edges);

inline const std::vector<std::size_t> kDefaultLengthEdges{50, 100, 150, 200, 300};

using BucketsByModel = std::map<std::string, std::vector<LengthBucket>>;

// JSON report of a decomposition plus per-model length buckets (may be empty).
std::string analysis_report_json(const SetDecomposition& decomposition,
                                 const BucketsByModel& buckets = {});

}  // namespace revsum
