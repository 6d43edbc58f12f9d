#include <gtest/gtest.h>

#include "rnnsynth/automl.hpp"
#include "rnnsynth/rng.hpp"

namespace rs = rnnsynth;

TEST(Rank, GlobalMinimumAndSpaceSize) {
  EXPECT_EQ(rs::rank_of({1, 1, 1, 1, 1}), 1u);
  EXPECT_EQ(rs::SearchOrder::kSpaceSize, 75497472u);
  EXPECT_EQ(rs::rank_of({128, 256, 3, 256, 3}), rs::SearchOrder::kSpaceSize);
}

TEST(Rank, DgDominatesEverything) {
  // larger n with minimal d_g ranks before minimal n with larger d_g
  EXPECT_LT(rs::rank_of({2, 1, 1, 1, 1}), rs::rank_of({1, 1, 1, 1, 2}));
  // d_f dominates n
  EXPECT_LT(rs::rank_of({128, 256, 1, 256, 1}), rs::rank_of({1, 1, 2, 1, 1}));
  // n dominates w_g, w_g dominates w_f
  EXPECT_LT(rs::rank_of({1, 1, 1, 256, 1}), rs::rank_of({2, 1, 1, 1, 1}));
  EXPECT_LT(rs::rank_of({1, 256, 1, 1, 1}), rs::rank_of({1, 1, 1, 2, 1}));
}

TEST(Rank, RoundTrip1000RandomTuples) {
  rs::Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    rs::Arch p{static_cast<int>(rng.uniform_int(1, 128)),
               static_cast<int>(rng.uniform_int(1, 256)),
               static_cast<int>(rng.uniform_int(1, 3)),
               static_cast<int>(rng.uniform_int(1, 256)),
               static_cast<int>(rng.uniform_int(1, 3))};
    EXPECT_EQ(rs::tuple_at(rs::rank_of(p)), p);
  }
  const auto r = rng.uniform_int(1, static_cast<long long>(rs::SearchOrder::kSpaceSize));
  EXPECT_EQ(rs::rank_of(rs::tuple_at(static_cast<std::uint64_t>(r))),
            static_cast<std::uint64_t>(r));
}

TEST(Rank, OutOfRangeThrows) {
  EXPECT_THROW(rs::rank_of({0, 1, 1, 1, 1}), rs::SearchError);
  EXPECT_THROW(rs::rank_of({1, 257, 1, 1, 1}), rs::SearchError);
  EXPECT_THROW(rs::tuple_at(0), rs::SearchError);
  EXPECT_THROW(rs::tuple_at(rs::SearchOrder::kSpaceSize + 1), rs::SearchError);
}

namespace {

rs::SearchResult run_with_threshold(std::uint64_t threshold) {
  return rs::search([&](const rs::Arch&, std::uint64_t rank) {
    rs::ProbeOutcome out;
    out.success = rank >= threshold;
    out.accuracies = {out.success ? 1.0 : 0.5};
    return out;
  });
}

}  // namespace

TEST(Search, MonotoneStubFindsExactThreshold) {
  rs::Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    // keep thresholds across both the below-start and above-start regimes
    const std::uint64_t threshold = static_cast<std::uint64_t>(
        rng.uniform_int(1, static_cast<long long>(rs::SearchOrder::kSpaceSize)));
    const auto res = run_with_threshold(threshold);
    ASSERT_TRUE(res.found) << threshold;
    EXPECT_EQ(res.best_rank, threshold);
  }
}

TEST(Search, NeverRepeatsARankAndMinimalityHolds) {
  const auto res = run_with_threshold(12345);
  std::set<std::uint64_t> seen;
  for (const auto& p : res.probes) {
    EXPECT_TRUE(seen.insert(p.rank).second) << "rank probed twice";
    if (p.rank < res.best_rank) EXPECT_FALSE(p.success);
  }
  EXPECT_EQ(res.best_rank, 12345u);
}

TEST(Search, ExhaustedWhenNothingSucceeds) {
  const auto res = rs::search([](const rs::Arch&, std::uint64_t) {
    return rs::ProbeOutcome{};
  });
  EXPECT_FALSE(res.found);
}

TEST(Search, SweepStartsAtStatedTuple) {
  std::vector<std::uint64_t> ranks;
  rs::search([&](const rs::Arch&, std::uint64_t rank) {
    ranks.push_back(rank);
    rs::ProbeOutcome out;
    out.success = true;  // immediate success; halving still probes downward
    return out;
  });
  ASSERT_FALSE(ranks.empty());
  EXPECT_EQ(ranks.front(), rs::rank_of({1, 1, 2, 1, 1}));
}

TEST(ReferenceArch, MatchesReportedRows) {
  EXPECT_EQ(rs::reference_arch(24), (rs::Arch{1, 1, 1, 1, 1}));   // Current_Number
  EXPECT_EQ(rs::reference_arch(18), (rs::Arch{2, 1, 1, 1, 1}));   // Sum_Last2
  EXPECT_EQ(rs::reference_arch(1), (rs::Arch{2, 1, 1, 4, 2}));    // Binary_Addition
  EXPECT_EQ(rs::reference_arch(58), (rs::Arch{81, 1, 1, 166, 2}));
}
