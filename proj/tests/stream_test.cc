#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "odml/stream.hpp"

namespace odml {
namespace {

Sample sample(int label, Index index) {
  Vector f(2);
  f << static_cast<double>(index), static_cast<double>(label);
  return Sample{f, label, index};
}

Dataset toy_dataset(int rows, int classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Dataset ds;
  ds.name = "toy";
  ds.features.resize(rows, 3);
  for (int c = 0; c < classes; ++c) ds.class_names.push_back("c" + std::to_string(c));
  for (int i = 0; i < rows; ++i) {
    for (Index j = 0; j < 3; ++j) ds.features(i, j) = n(rng);
    ds.labels.push_back(i % classes);
  }
  return ds;
}

TEST(StreamState, FirstSampleYieldsNothing) {
  StreamState s(1);
  EXPECT_FALSE(s.push_sample(sample(0, 0)).has_value());
  EXPECT_EQ(s.pushes(), 1u);
}

TEST(StreamState, TracesAbaByHand) {
  StreamState s(1);
  EXPECT_FALSE(s.push_sample(sample(0, 0)));
  EXPECT_FALSE(s.push_sample(sample(1, 1)));
  const auto t = s.push_sample(sample(0, 2));
  ASSERT_TRUE(t.has_value());
  EXPECT_EQ(t->anchor.index, 2);
  EXPECT_EQ(t->positive.index, 0);
  EXPECT_EQ(t->negative.index, 1);
}

TEST(StreamState, SameClassOnlyYieldsNothing) {
  StreamState s(1);
  s.push_sample(sample(0, 0));
  EXPECT_FALSE(s.push_sample(sample(0, 1)).has_value());
}

TEST(StreamState, NegativeIsMostRecentOtherClass) {
  StreamState s(1);
  s.push_sample(sample(0, 0));
  s.push_sample(sample(2, 1));
  s.push_sample(sample(1, 2));
  const auto t = s.push_sample(sample(0, 3));
  ASSERT_TRUE(t);
  EXPECT_EQ(t->negative.index, 2);
  EXPECT_EQ(t->positive.index, 0);
}

TEST(StreamState, MemoryBoundedByClassCount) {
  StreamState s(1);
  for (int i = 0; i < 1000; ++i) s.push_sample(sample(i % 4, i));
  EXPECT_EQ(s.num_tracked_classes(), 4u);
  EXPECT_EQ(s.pushes(), 1000u);
}

TEST(StreamState, FourSamplesEveryOrderGivesOneToThreeTriplets) {
  std::vector<int> labels{0, 0, 1, 1};
  std::vector<int> order{0, 1, 2, 3};
  int min_count = 100;
  int max_count = -1;
  int orders = 0;
  do {
    StreamState s(1);
    int count = 0;
    for (int i : order) count += s.push_sample(sample(labels[static_cast<std::size_t>(i)], i)) ? 1 : 0;
    min_count = std::min(min_count, count);
    max_count = std::max(max_count, count);
    ++orders;
  } while (std::next_permutation(order.begin(), order.end()));
  EXPECT_EQ(orders, 24);
  EXPECT_GE(min_count, 1);
  EXPECT_LE(max_count, 3);
}

TEST(EpochStream, TwentyEpochsPushEverySampleTwentyTimes) {
  const Dataset ds = toy_dataset(17, 3, 2);
  StreamState s(5);
  std::size_t produced = 0;
  for (int e = 0; e < 20; ++e) {
    s.begin_epoch(e);
    for (Index row : epoch_order(ds.rows(), 5, e))
      produced += s.push_sample(Sample{ds.features.row(row).transpose(), ds.labels[static_cast<std::size_t>(row)], row})
                      ? 1
                      : 0;
  }
  EXPECT_EQ(s.pushes(), 20u * 17u);
  EXPECT_EQ(epoch_stream(ds, 20, 5).size(), produced);
}

TEST(EpochStream, EpochOrderIsAPermutation) {
  auto order = epoch_order(50, 9, 3);
  std::sort(order.begin(), order.end());
  for (Index i = 0; i < 50; ++i) EXPECT_EQ(order[static_cast<std::size_t>(i)], i);
  EXPECT_NE(epoch_order(50, 9, 3), epoch_order(50, 9, 4));
}

TEST(EpochStream, DeterministicForSeed) {
  const Dataset ds = toy_dataset(30, 2, 4);
  const auto a = epoch_stream(ds, 3, 42);
  const auto b = epoch_stream(ds, 3, 42);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].anchor.index, b[i].anchor.index);
    EXPECT_EQ(a[i].positive.index, b[i].positive.index);
    EXPECT_EQ(a[i].negative.index, b[i].negative.index);
  }
}

TEST(EpochStream, LabelInvariantHolds) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dataset ds = toy_dataset(40, 2 + static_cast<int>(seed % 4), seed);
    for (const Triplet& t : epoch_stream(ds, 2, seed)) {
      EXPECT_EQ(t.anchor.label, t.positive.label);
      EXPECT_NE(t.anchor.label, t.negative.label);
      EXPECT_EQ(ds.labels[static_cast<std::size_t>(t.positive.index)], t.positive.label);
      EXPECT_EQ(ds.labels[static_cast<std::size_t>(t.anchor.index)], t.anchor.label);
    }
  }
}

TEST(EpochStream, RejectsSingleClassAndBadEpochs) {
  Dataset ds = toy_dataset(10, 1, 1);
  EXPECT_THROW(epoch_stream(ds, 1, 0), SingleClassError);
  ds = toy_dataset(10, 2, 1);
  EXPECT_THROW(epoch_stream(ds, 0, 0), ConfigError);
}

TEST(DeriveSeed, DistinguishesInputs) {
  EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
  EXPECT_NE(derive_seed(0, 0, 0), derive_seed(1, 0, 0));
}

}  // namespace
}  // namespace odml
