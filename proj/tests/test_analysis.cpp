#include <gtest/gtest.h>

#include <sstream>

#include "json.hpp"
#include "revsum/analysis.hpp"
#include "revsum/errors.hpp"

namespace revsum {
namespace {

using Indices = std::vector<std::size_t>;

std::vector<PredictionRecord> records(const std::vector<int>& gold,
                                      const std::vector<int>& pred) {
  std::vector<PredictionRecord> out;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    out.push_back({static_cast<std::int64_t>(i), gold[i], pred[i], ""});
  }
  return out;
}

TEST(ConflictingSet, FractionOfDisagreements) {
  auto r = records({1, 2, 3}, {1, 2, 3});
  auto s = records({1, 2, 3}, {1, 3, 3});
  auto d = conflicting_set(r, s);
  EXPECT_DOUBLE_EQ(d.conflicting_fraction(), 1.0 / 3.0);
  EXPECT_EQ(d.conflicting, Indices{1});
  EXPECT_EQ(d.non_conflicting, (Indices{0, 2}));
}

TEST(ConflictingSet, UnionNeedsOneCorrectSide) {
  auto r = records({1, 2, 3}, {1, 5, 5});
  auto s = records({1, 2, 3}, {2, 2, 5});
  auto d = conflicting_set(r, s);
  EXPECT_EQ(d.conflicting, (Indices{0, 1}));
  EXPECT_EQ(d.union_set, (Indices{0, 1}));
  EXPECT_EQ(d.non_conflicting, Indices{2});
  const auto& review = d.accuracies.at("review");
  EXPECT_EQ(review.overall.correct, 1u);
  EXPECT_EQ(review.conflicting.correct, 1u);
  EXPECT_EQ(review.conflicting.total, 2u);
  EXPECT_EQ(review.non_conflicting.correct, 0u);
  EXPECT_EQ(d.accuracies.at("summary").union_set.correct, 1u);
}

TEST(ConflictingSet, ConflictingButBothWrongIsOutsideUnion) {
  auto d = conflicting_set(records({3, 3}, {1, 3}), records({3, 3}, {2, 3}));
  EXPECT_EQ(d.conflicting, Indices{0});
  EXPECT_TRUE(d.union_set.empty());
}

TEST(ConflictingSet, IdenticalListsNeverConflict) {
  auto r = records({1, 4, 5, 2}, {1, 3, 5, 5});
  auto d = conflicting_set(r, r);
  EXPECT_TRUE(d.conflicting.empty());
  EXPECT_TRUE(d.union_set.empty());
  EXPECT_EQ(d.conflicting_fraction(), 0.0);
  EXPECT_EQ(d.accuracies.at("review").overall.accuracy(), 0.5);
}

TEST(ConflictingSet, MismatchedListsAreDataErrors) {
  auto r = records({1, 2}, {1, 2});
  EXPECT_THROW(conflicting_set(r, records({1}, {1})), DataError);
  auto shifted = r;
  shifted[1].id = 7;
  EXPECT_THROW(conflicting_set(r, shifted), DataError);
  auto relabelled = r;
  relabelled[0].gold = 4;
  EXPECT_THROW(conflicting_set(r, relabelled), DataError);
}

TEST(LengthBuckets, NoEdgesIsOneBucket) {
  auto p = records({1, 2, 3}, {1, 2, 4});
  const std::vector<std::size_t> lengths{3, 500, 40};
  auto buckets = length_buckets(p, lengths, {});
  ASSERT_EQ(buckets.size(), 1u);
  EXPECT_EQ(buckets[0].accuracy.correct, 2u);
  EXPECT_EQ(buckets[0].accuracy.total, 3u);
}

TEST(LengthBuckets, HalfOpenEdges) {
  auto p = records({1, 2, 3}, {1, 1, 3});
  const std::vector<std::size_t> lengths{5, 50, 10};
  const std::vector<std::size_t> edges{10};
  auto buckets = length_buckets(p, lengths, edges);
  ASSERT_EQ(buckets.size(), 2u);
  EXPECT_EQ(buckets[0].lower, 0u);
  EXPECT_EQ(buckets[0].upper, 10u);
  EXPECT_EQ(buckets[0].accuracy.total, 1u);
  EXPECT_EQ(buckets[1].lower, 10u);
  EXPECT_EQ(buckets[1].accuracy.correct, 1u);
  EXPECT_EQ(buckets[1].accuracy.total, 2u);
}

TEST(LengthBuckets, EmptyBucketsOmittedAndCountsRecombine) {
  std::vector<int> gold, pred;
  std::vector<std::size_t> lengths;
  for (int i = 0; i < 40; ++i) {
    gold.push_back(1 + i % 5);
    pred.push_back(i % 3 == 0 ? 1 + i % 5 : 1 + (i + 1) % 5);
    lengths.push_back(static_cast<std::size_t>(i < 20 ? i : 200 + i));
  }
  auto p = records(gold, pred);
  auto buckets = length_buckets(p, lengths, kDefaultLengthEdges);
  ASSERT_EQ(buckets.size(), 2u);
  EXPECT_EQ(buckets[1].lower, 200u);
  EXPECT_EQ(buckets[1].upper, 300u);
  std::size_t correct = 0, total = 0;
  for (const auto& b : buckets) {
    correct += b.accuracy.correct;
    total += b.accuracy.total;
  }
  EXPECT_EQ(total, 40u);
  EXPECT_EQ(correct, 14u);
}

TEST(LengthBuckets, InvalidInputs) {
  auto p = records({1, 2}, {1, 2});
  const std::vector<std::size_t> lengths{1, 2};
  const std::vector<std::size_t> descending{10, 5};
  const std::vector<std::size_t> repeated{5, 5};
  EXPECT_THROW(length_buckets(p, lengths, descending), ConfigError);
  EXPECT_THROW(length_buckets(p, lengths, repeated), ConfigError);
  const std::vector<std::size_t> short_lengths{1};
  EXPECT_THROW(length_buckets(p, short_lengths, {}), DataError);
}

TEST(Predictions, RoundTripAndErrors) {
  auto p = records({1, 5}, {2, 5});
  p[1].model = "summary_only";
  std::stringstream buffer;
  write_predictions(buffer, p);
  auto back = read_predictions(buffer);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].pred, 2);
  EXPECT_EQ(back[1].model, "summary_only");
  std::istringstream bad(R"({"id": 0, "gold": 9, "pred": 1})");
  EXPECT_THROW(read_predictions(bad), DataError);
}

TEST(Report, JsonCarriesCountsAndBuckets) {
  auto r = records({1, 2, 3}, {1, 5, 5});
  auto s = records({1, 2, 3}, {2, 2, 5});
  auto d = conflicting_set(r, s);
  const std::vector<std::size_t> lengths{5, 50, 10};
  const std::vector<std::size_t> edges{10};
  BucketsByModel buckets{{"review", length_buckets(r, lengths, edges)}};
  auto j = nlohmann::json::parse(analysis_report_json(d, buckets));
  EXPECT_EQ(j["conflicting"]["count"], 2);
  EXPECT_EQ(j["union"]["count"], 2);
  EXPECT_EQ(j["non_conflicting"]["count"], 1);
  EXPECT_DOUBLE_EQ(j["models"]["review"]["union_share_of_correct"].get<double>(), 1.0);
  ASSERT_EQ(j["length_buckets"]["review"].size(), 2u);
  EXPECT_TRUE(j["length_buckets"]["review"][1]["upper"].is_null());
  EXPECT_TRUE(nlohmann::json::parse(analysis_report_json(d))["length_buckets"].empty());
}

}  // namespace
}  // namespace revsum
