#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <numeric>

#include "rnnsynth/tasks.hpp"

namespace rs = rnnsynth;

TEST(ListTasks, SixtyTwoSpecs) {
  const auto& tasks = rs::list_tasks();
  ASSERT_EQ(tasks.size(), 62u);
  EXPECT_EQ(tasks[0].name, "Binary_Addition");
  EXPECT_EQ(tasks[0].num_inputs, 2);
  EXPECT_EQ(tasks[0].element_kind, rs::ElementKind::kBit);
  EXPECT_EQ(tasks[23].name, "Current_Number");
  EXPECT_EQ(tasks[23].num_inputs, 1);
  EXPECT_EQ(tasks[57].name, "Dithering");
  EXPECT_EQ(tasks[57].element_kind, rs::ElementKind::kInt);
  for (const auto& t : tasks) {
    EXPECT_EQ(t.seq_len, t.num_inputs == 2 ? 10 : 20);
    if (t.element_kind == rs::ElementKind::kBit) {
      for (const auto& r : t.element_range) {
        EXPECT_EQ(r.lo, 0);
        EXPECT_EQ(r.hi, 1);
      }
    }
  }
}

// 1000011 / 11 = 0010110 (67 / 3 = 22), MSB first.
TEST(Oracle, Div3WorkedExample) {
  rs::TaskSpec t = rs::find_task("Div_3");
  t.seq_len = 7;
  const std::vector<long long> in = {1, 0, 0, 0, 0, 1, 1};
  const std::vector<long long> expect = {0, 0, 1, 0, 1, 1, 0};
  EXPECT_EQ(rs::oracle_eval(t, {in}), expect);
}

TEST(Oracle, SumLast2Zeros) {
  const auto& t = rs::find_task("Sum_Last2");
  std::vector<long long> zeros(static_cast<std::size_t>(t.seq_len), 0);
  EXPECT_EQ(rs::oracle_eval(t, {zeros}), zeros);
}

// Independent hand-stepped simulation of the spring recurrence.
TEST(Oracle, NewtonSpringAgainstHandSteppedSim) {
  const auto& t = rs::find_task("Newton_Spring");
  rs::Rng rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<long long> in(static_cast<std::size_t>(t.seq_len));
    for (auto& v : in) v = rng.uniform_int(-3, 3);
    long long v = 0, x = 0;
    std::vector<long long> expect;
    for (long long u : in) {
      const long long force = u - x;
      v = v + force;
      x = x + v;
      expect.push_back(x);
    }
    EXPECT_EQ(rs::oracle_eval(t, {in}), expect);
  }
}

TEST(Oracle, ArityAndRangeErrors) {
  const auto& t = rs::find_task("Binary_Addition");
  std::vector<long long> bits(10, 0);
  EXPECT_THROW(rs::oracle_eval(t, {bits}), rs::TaskError);
  std::vector<long long> bad(10, 0);
  bad[3] = 2;
  EXPECT_THROW(rs::oracle_eval(t, {bits, bad}), rs::TaskError);
}

TEST(Oracle, LengthAndIntegrality1000RandomInputsPerTask) {
  rs::Rng rng(7);
  for (const auto& t : rs::list_tasks()) {
    for (int trial = 0; trial < 1000 / 62 + 3; ++trial) {
      std::vector<std::vector<long long>> in(
          static_cast<std::size_t>(t.num_inputs));
      for (int k = 0; k < t.num_inputs; ++k) {
        auto& lst = in[static_cast<std::size_t>(k)];
        lst.resize(static_cast<std::size_t>(t.seq_len));
        const auto& r = t.element_range[static_cast<std::size_t>(k)];
        for (auto& v : lst) v = rng.uniform_int(r.lo, r.hi);
      }
      const auto y = rs::oracle_eval(t, in);
      ASSERT_EQ(static_cast<int>(y.size()), t.seq_len) << t.name;
    }
  }
}

// Reconstruct the quotient integer from output bits: q*k <= value < q*k + k.
TEST(Oracle, DivKQuotientInvariant) {
  rs::Rng rng(21);
  for (const char* name : {"Div_3", "Div_5", "Div_7"}) {
    const auto& t = rs::find_task(name);
    const long long k = name[4] - '0';
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<long long> bits(static_cast<std::size_t>(t.seq_len));
      for (auto& b : bits) b = rng.uniform_int(0, 1);
      const auto out = rs::oracle_eval(t, {bits});
      long long value = 0, q = 0;
      for (int i = 0; i < t.seq_len; ++i) {
        value = value * 2 + bits[static_cast<std::size_t>(i)];
        q = q * 2 + out[static_cast<std::size_t>(i)];
      }
      EXPECT_LE(q * k, value);
      EXPECT_LT(value, q * k + k);
    }
  }
}

TEST(Oracle, DitheringCumulativeBrightnessInvariant) {
  const auto& t = rs::find_task("Dithering");
  rs::Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<long long> in(static_cast<std::size_t>(t.seq_len));
    for (auto& v : in) v = rng.uniform_int(0, 15);
    const auto out = rs::oracle_eval(t, {in});
    long long cin = 0, cout = 0;
    for (int i = 0; i < t.seq_len; ++i) {
      cin += in[static_cast<std::size_t>(i)];
      cout += out[static_cast<std::size_t>(i)];
      EXPECT_LE(std::llabs(cin - 15 * cout), 15);
    }
  }
}

TEST(GenerateDataset, XorShapesAndTargets) {
  const auto& t = rs::find_task("Bitwise_Xor");
  const auto ds = rs::generate_dataset(t, 256, 0);
  ASSERT_EQ(ds.inputs.size(), 256u);
  for (std::size_t s = 0; s < ds.inputs.size(); ++s) {
    for (int i = 0; i < t.seq_len; ++i) {
      const auto j = static_cast<std::size_t>(i);
      EXPECT_EQ(ds.targets[s][j], ds.inputs[s][0][j] ^ ds.inputs[s][1][j]);
    }
  }
}

TEST(GenerateDataset, SameSeedIsByteIdentical) {
  const auto& t = rs::find_task("Sum_All");
  const auto a = rs::generate_dataset(t, 64, 1234);
  const auto b = rs::generate_dataset(t, 64, 1234);
  EXPECT_EQ(a.inputs, b.inputs);
  EXPECT_EQ(a.targets, b.targets);
  const auto c = rs::generate_dataset(t, 64, 1235);
  EXPECT_NE(a.inputs, c.inputs);
}

// Independent prefix-sum oracle.
TEST(GenerateDataset, SumAllPrefixSums) {
  const auto& t = rs::find_task("Sum_All");
  const auto ds = rs::generate_dataset(t, 100, 7);
  for (std::size_t s = 0; s < ds.inputs.size(); ++s) {
    long long acc = 0;
    for (int i = 0; i < t.seq_len; ++i) {
      acc += ds.inputs[s][0][static_cast<std::size_t>(i)];
      EXPECT_EQ(ds.targets[s][static_cast<std::size_t>(i)], acc);
    }
  }
}

TEST(DatasetIo, RoundTrip) {
  const auto& t = rs::find_task("Binary_Addition");
  const auto ds = rs::generate_dataset(t, 16, 42);
  const auto path = std::filesystem::temp_directory_path() / "rnnsynth_ds.jsonl";
  rs::save_dataset(ds, path.string());
  const auto back = rs::load_dataset(path.string());
  EXPECT_EQ(back.task_id, ds.task_id);
  EXPECT_EQ(back.inputs, ds.inputs);
  EXPECT_EQ(back.targets, ds.targets);
  std::filesystem::remove(path);
}
