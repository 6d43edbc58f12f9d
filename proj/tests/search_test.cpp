// Real-training architecture search at a reduced budget. Slow by unit-test
// standards; exercises the sweep + halving against live probes.
#include <gtest/gtest.h>

#include "rnnsynth/automl.hpp"
#include "rnnsynth/pipeline.hpp"
#include "rnnsynth/train.hpp"

namespace rs = rnnsynth;

namespace {

rs::SearchResult real_search(const std::string& task_name, int steps, int batch,
                             int seeds) {
  const auto& task = rs::find_task(task_name);
  return rs::search([&](const rs::Arch& arch, std::uint64_t rank) {
    rs::ProbeOutcome out;
    for (int idx = 0; idx < seeds; ++idx) {
      rs::TrainConfig tc;
      tc.steps = steps;
      tc.batch = batch;
      tc.eval_every = 250;
      tc.eval_count = 16384;
      tc.eval_quick = 4096;
      tc.seed = rs::schedule_seed(0, task.id, 4, rank,
                                  static_cast<std::uint64_t>(idx));
      const auto tr = rs::train(arch, task, tc);
      out.accuracies.push_back(tr.test_accuracy);
      if (tr.test_accuracy == 1.0) {
        out.success = true;
        out.model = tr.model;
        break;
      }
    }
    return out;
  });
}

}  // namespace

TEST(RealSearch, CurrentNumberFindsTheMinimalArchitecture) {
  const auto res = real_search("Current_Number", 2000, 128, 2);
  ASSERT_TRUE(res.found);
  EXPECT_EQ(res.best_arch, (rs::Arch{1, 1, 1, 1, 1}));
  EXPECT_EQ(res.best_rank, 1u);
  // minimality invariant over the probe log
  for (const auto& probe : res.probes)
    if (probe.rank < res.best_rank) EXPECT_FALSE(probe.success);
}
