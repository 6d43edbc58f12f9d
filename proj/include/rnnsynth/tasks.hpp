#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rnnsynth/rng.hpp"

namespace rnnsynth {

enum class ElementKind { kBit, kInt };

struct ValueRange {
  long long lo = 0;
  long long hi = 1;
};

// One of the 62 benchmark tasks: a map from one or two integer lists to an
// integer list of the same length.
struct TaskSpec {
  int id = 0;
  std::string name;
  int num_inputs = 1;
  ElementKind element_kind = ElementKind::kBit;
  std::vector<ValueRange> element_range;  // one per input
  int seq_len = 20;
};

struct Dataset {
  int task_id = 0;
  std::uint64_t seed = 0;
  // inputs[s][k][t]: sequence s, input list k, step t
  std::vector<std::vector<std::vector<long long>>> inputs;
  std::vector<std::vector<long long>> targets;
};

class TaskError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

struct TaskRow {
  int id;
  const char* name;
  int num_inputs;
  ElementKind kind;
};

inline const std::vector<TaskRow>& task_rows() {
  static const std::vector<TaskRow> rows = {
      {1, "Binary_Addition", 2, ElementKind::kBit},
      {2, "Base_3_Addition", 2, ElementKind::kInt},
      {3, "Base_4_Addition", 2, ElementKind::kInt},
      {4, "Base_5_Addition", 2, ElementKind::kInt},
      {5, "Base_6_Addition", 2, ElementKind::kInt},
      {6, "Base_7_Addition", 2, ElementKind::kInt},
      {7, "Bitwise_Xor", 2, ElementKind::kBit},
      {8, "Bitwise_Or", 2, ElementKind::kBit},
      {9, "Bitwise_And", 2, ElementKind::kBit},
      {10, "Bitwise_Not", 1, ElementKind::kBit},
      {11, "Parity_Last2", 1, ElementKind::kBit},
      {12, "Parity_Last3", 1, ElementKind::kBit},
      {13, "Parity_Last4", 1, ElementKind::kBit},
      {14, "Parity_All", 1, ElementKind::kBit},
      {15, "Parity_Zeros", 1, ElementKind::kBit},
      {16, "Evens_Counter", 1, ElementKind::kInt},
      {17, "Sum_All", 1, ElementKind::kInt},
      {18, "Sum_Last2", 1, ElementKind::kInt},
      {19, "Sum_Last3", 1, ElementKind::kInt},
      {20, "Sum_Last4", 1, ElementKind::kInt},
      {21, "Sum_Last5", 1, ElementKind::kInt},
      {22, "Sum_Last6", 1, ElementKind::kInt},
      {23, "Sum_Last7", 1, ElementKind::kInt},
      {24, "Current_Number", 1, ElementKind::kInt},
      {25, "Prev1", 1, ElementKind::kInt},
      {26, "Prev2", 1, ElementKind::kInt},
      {27, "Prev3", 1, ElementKind::kInt},
      {28, "Prev4", 1, ElementKind::kInt},
      {29, "Prev5", 1, ElementKind::kInt},
      {30, "Previous_Equals_Current", 1, ElementKind::kInt},
      {31, "Diff_Last2", 1, ElementKind::kInt},
      {32, "Abs_Diff", 1, ElementKind::kInt},
      {33, "Abs_Current", 1, ElementKind::kInt},
      {34, "Diff_Abs_Values", 1, ElementKind::kInt},
      {35, "Min_Seen", 1, ElementKind::kInt},
      {36, "Max_Seen", 1, ElementKind::kInt},
      {37, "Majority_0_1", 1, ElementKind::kInt},
      {38, "Majority_0_2", 1, ElementKind::kInt},
      {39, "Majority_0_3", 1, ElementKind::kInt},
      {40, "Evens_Detector", 1, ElementKind::kInt},
      {41, "Perfect_Square_Detector", 1, ElementKind::kInt},
      {42, "Bit_Palindrome", 1, ElementKind::kBit},
      {43, "Balanced_Parenthesis", 1, ElementKind::kBit},
      {44, "Parity_Bits_Mod2", 1, ElementKind::kBit},
      {45, "Alternating_Last3", 1, ElementKind::kBit},
      {46, "Alternating_Last4", 1, ElementKind::kBit},
      {47, "Bit_Shift_Right", 1, ElementKind::kBit},
      {48, "Bit_Dot_Prod_Mod2", 2, ElementKind::kBit},
      {49, "Div_3", 1, ElementKind::kBit},
      {50, "Div_5", 1, ElementKind::kBit},
      {51, "Div_7", 1, ElementKind::kBit},
      {52, "Add_Mod_3", 1, ElementKind::kInt},
      {53, "Add_Mod_4", 1, ElementKind::kInt},
      {54, "Add_Mod_5", 1, ElementKind::kInt},
      {55, "Add_Mod_6", 1, ElementKind::kInt},
      {56, "Add_Mod_7", 1, ElementKind::kInt},
      {57, "Add_Mod_8", 1, ElementKind::kInt},
      {58, "Dithering", 1, ElementKind::kInt},
      {59, "Newton_Freebody", 1, ElementKind::kInt},
      {60, "Newton_Gravity", 1, ElementKind::kInt},
      {61, "Newton_Spring", 1, ElementKind::kInt},
      {62, "Newton_Magnetic", 2, ElementKind::kInt},
  };
  return rows;
}

inline ValueRange default_range(const TaskRow& row) {
  if (row.kind == ElementKind::kBit) return {0, 1};
  const std::string name = row.name;
  if (name.rfind("Base_", 0) == 0) {
    const long long base = name[5] - '0';
    return {0, base - 1};
  }
  if (name.rfind("Majority_0_", 0) == 0) {
    const long long x = name.back() - '0';
    return {0, x};
  }
  if (name == "Dithering") return {0, 15};
  if (name.rfind("Newton_", 0) == 0) return {-3, 3};
  return {-10, 10};
}

inline long long pos_mod(long long a, long long m) {
  const long long r = a % m;
  return r < 0 ? r + m : r;
}

}  // namespace detail

inline const std::vector<TaskSpec>& list_tasks() {
  static const std::vector<TaskSpec> specs = [] {
    std::vector<TaskSpec> out;
    for (const auto& row : detail::task_rows()) {
      TaskSpec s;
      s.id = row.id;
      s.name = row.name;
      s.num_inputs = row.num_inputs;
      s.element_kind = row.kind;
      s.element_range.assign(static_cast<std::size_t>(row.num_inputs),
                             detail::default_range(row));
      s.seq_len = row.num_inputs == 2 ? 10 : 20;
      out.push_back(std::move(s));
    }
    return out;
  }();
  return specs;
}

inline const TaskSpec& find_task(const std::string& name) {
  for (const auto& t : list_tasks())
    if (t.name == name) return t;
  throw TaskError("unknown task: " + name);
}

inline const TaskSpec& find_task(int id) {
  const auto& all = list_tasks();
  if (id < 1 || id > static_cast<int>(all.size()))
    throw TaskError("unknown task id: " + std::to_string(id));
  return all[static_cast<std::size_t>(id - 1)];
}

// Exact reference output for a task. Missing history is treated as zero
// (the hidden state starts at zero, so warm-up outputs compare against a
// zero-padded past).
inline std::vector<long long> oracle_eval(
    const TaskSpec& task, const std::vector<std::vector<long long>>& inputs) {
  if (static_cast<int>(inputs.size()) != task.num_inputs)
    throw TaskError("oracle_eval: invalid arity for task " + task.name);
  const int len = task.seq_len;
  for (int k = 0; k < task.num_inputs; ++k) {
    if (static_cast<int>(inputs[static_cast<std::size_t>(k)].size()) != len)
      throw TaskError("oracle_eval: wrong sequence length for " + task.name);
    const auto& r = task.element_range[static_cast<std::size_t>(k)];
    for (long long v : inputs[static_cast<std::size_t>(k)])
      if (v < r.lo || v > r.hi)
        throw TaskError("oracle_eval: element out of range for " + task.name);
  }

  const auto& a = inputs[0];
  const std::vector<long long>& b = task.num_inputs == 2 ? inputs[1] : inputs[0];
  std::vector<long long> y(static_cast<std::size_t>(len), 0);

  auto prev = [&](int t, int back) -> long long {
    return t - back >= 0 ? a[static_cast<std::size_t>(t - back)] : 0;
  };
  auto window_sum = [&](int t, int w) {
    long long s = 0;
    for (int j = t - w + 1; j <= t; ++j)
      if (j >= 0) s += a[static_cast<std::size_t>(j)];
    return s;
  };

  switch (task.id) {
    case 1:    // Binary_Addition (LSB first)
    case 2:
    case 3:
    case 4:
    case 5:
    case 6: {  // Base_k_Addition
      const long long base = task.id == 1 ? 2 : task.id + 1;
      long long carry = 0;
      for (int t = 0; t < len; ++t) {
        const long long s = a[static_cast<std::size_t>(t)] +
                            b[static_cast<std::size_t>(t)] + carry;
        y[static_cast<std::size_t>(t)] = s % base;
        carry = s / base;
      }
      break;
    }
    case 7:
      for (int t = 0; t < len; ++t)
        y[static_cast<std::size_t>(t)] =
            a[static_cast<std::size_t>(t)] ^ b[static_cast<std::size_t>(t)];
      break;
    case 8:
      for (int t = 0; t < len; ++t)
        y[static_cast<std::size_t>(t)] =
            a[static_cast<std::size_t>(t)] | b[static_cast<std::size_t>(t)];
      break;
    case 9:
      for (int t = 0; t < len; ++t)
        y[static_cast<std::size_t>(t)] =
            a[static_cast<std::size_t>(t)] & b[static_cast<std::size_t>(t)];
      break;
    case 10:
      for (int t = 0; t < len; ++t)
        y[static_cast<std::size_t>(t)] = 1 - a[static_cast<std::size_t>(t)];
      break;
    case 11:
    case 12:
    case 13: {  // Parity_Last{2,3,4}
      const int w = task.id - 9;
      for (int t = 0; t < len; ++t)
        y[static_cast<std::size_t>(t)] = window_sum(t, w) % 2;
      break;
    }
    case 14: {  // Parity_All
      long long s = 0;
      for (int t = 0; t < len; ++t) {
        s += a[static_cast<std::size_t>(t)];
        y[static_cast<std::size_t>(t)] = s % 2;
      }
      break;
    }
    case 15: {  // Parity_Zeros
      long long zeros = 0;
      for (int t = 0; t < len; ++t) {
        zeros += 1 - a[static_cast<std::size_t>(t)];
        y[static_cast<std::size_t>(t)] = zeros % 2;
      }
      break;
    }
    case 16: {  // Evens_Counter
      long long c = 0;
      for (int t = 0; t < len; ++t) {
        if (detail::pos_mod(a[static_cast<std::size_t>(t)], 2) == 0) ++c;
        y[static_cast<std::size_t>(t)] = c;
      }
      break;
    }
    case 17: {  // Sum_All
      long long s = 0;
      for (int t = 0; t < len; ++t) {
        s += a[static_cast<std::size_t>(t)];
        y[static_cast<std::size_t>(t)] = s;
      }
      break;
    }
    case 18:
    case 19:
    case 20:
    case 21:
    case 22:
    case 23: {  // Sum_Last{2..7}
      const int w = task.id - 16;
      for (int t = 0; t < len; ++t)
        y[static_cast<std::size_t>(t)] = window_sum(t, w);
      break;
    }
    case 24:
      y = a;
      break;
    case 25:
    case 26:
    case 27:
    case 28:
    case 29: {  // Prev{1..5}
      const int back = task.id - 24;
      for (int t = 0; t < len; ++t)
        y[static_cast<std::size_t>(t)] = prev(t, back);
      break;
    }
    case 30:
      for (int t = 0; t < len; ++t)
        y[static_cast<std::size_t>(t)] =
            a[static_cast<std::size_t>(t)] == prev(t, 1) ? 1 : 0;
      break;
    case 31:
      for (int t = 0; t < len; ++t)
        y[static_cast<std::size_t>(t)] =
            a[static_cast<std::size_t>(t)] - prev(t, 1);
      break;
    case 32:
      for (int t = 0; t < len; ++t)
        y[static_cast<std::size_t>(t)] =
            std::llabs(a[static_cast<std::size_t>(t)] - prev(t, 1));
      break;
    case 33:
      for (int t = 0; t < len; ++t)
        y[static_cast<std::size_t>(t)] =
            std::llabs(a[static_cast<std::size_t>(t)]);
      break;
    case 34:
      for (int t = 0; t < len; ++t)
        y[static_cast<std::size_t>(t)] =
            std::llabs(a[static_cast<std::size_t>(t)]) - std::llabs(prev(t, 1));
      break;
    case 35: {
      long long m = a[0];
      for (int t = 0; t < len; ++t) {
        m = std::min(m, a[static_cast<std::size_t>(t)]);
        y[static_cast<std::size_t>(t)] = m;
      }
      break;
    }
    case 36: {
      long long m = a[0];
      for (int t = 0; t < len; ++t) {
        m = std::max(m, a[static_cast<std::size_t>(t)]);
        y[static_cast<std::size_t>(t)] = m;
      }
      break;
    }
    case 37:
    case 38:
    case 39: {  // Majority_0_X, ties toward the smaller value
      const int hi = task.id - 36;
      std::vector<long long> counts(static_cast<std::size_t>(hi) + 1, 0);
      for (int t = 0; t < len; ++t) {
        ++counts[static_cast<std::size_t>(a[static_cast<std::size_t>(t)])];
        int best = 0;
        for (int v = 1; v <= hi; ++v)
          if (counts[static_cast<std::size_t>(v)] >
              counts[static_cast<std::size_t>(best)])
            best = v;
        y[static_cast<std::size_t>(t)] = best;
      }
      break;
    }
    case 40:
      for (int t = 0; t < len; ++t)
        y[static_cast<std::size_t>(t)] =
            detail::pos_mod(a[static_cast<std::size_t>(t)], 2) == 0 ? 1 : 0;
      break;
    case 41:
      for (int t = 0; t < len; ++t) {
        const long long v = a[static_cast<std::size_t>(t)];
        long long r = v >= 0 ? std::llround(std::sqrt(static_cast<double>(v))) : -1;
        y[static_cast<std::size_t>(t)] = (v >= 0 && r * r == v) ? 1 : 0;
      }
      break;
    case 42:
      for (int t = 0; t < len; ++t) {
        bool pal = true;
        for (int i = 0, j = t; i < j; ++i, --j)
          if (a[static_cast<std::size_t>(i)] != a[static_cast<std::size_t>(j)]) {
            pal = false;
            break;
          }
        y[static_cast<std::size_t>(t)] = pal ? 1 : 0;
      }
      break;
    case 43: {  // 1 = '(' and 0 = ')'
      long long depth = 0;
      bool valid = true;
      for (int t = 0; t < len; ++t) {
        depth += a[static_cast<std::size_t>(t)] == 1 ? 1 : -1;
        if (depth < 0) valid = false;
        y[static_cast<std::size_t>(t)] = (valid && depth == 0) ? 1 : 0;
      }
      break;
    }
    case 44:
      for (int t = 0; t < len; ++t)
        y[static_cast<std::size_t>(t)] = (t + 1) % 2;
      break;
    case 45:
      for (int t = 0; t < len; ++t)
        y[static_cast<std::size_t>(t)] =
            (prev(t, 2) != prev(t, 1) && prev(t, 1) != prev(t, 0)) ? 1 : 0;
      break;
    case 46:
      for (int t = 0; t < len; ++t)
        y[static_cast<std::size_t>(t)] =
            (prev(t, 3) != prev(t, 2) && prev(t, 2) != prev(t, 1) &&
             prev(t, 1) != prev(t, 0))
                ? 1
                : 0;
      break;
    case 47:
      for (int t = 0; t < len; ++t)
        y[static_cast<std::size_t>(t)] = prev(t, 1);
      break;
    case 48: {
      long long s = 0;
      for (int t = 0; t < len; ++t) {
        s += a[static_cast<std::size_t>(t)] * b[static_cast<std::size_t>(t)];
        y[static_cast<std::size_t>(t)] = s % 2;
      }
      break;
    }
    case 49:
    case 50:
    case 51: {  // Div_k: binary long division, MSB first
      const long long k = task.id == 49 ? 3 : task.id == 50 ? 5 : 7;
      long long rem = 0;
      for (int t = 0; t < len; ++t) {
        rem = rem * 2 + a[static_cast<std::size_t>(t)];
        y[static_cast<std::size_t>(t)] = rem / k;
        rem %= k;
      }
      break;
    }
    case 52:
    case 53:
    case 54:
    case 55:
    case 56:
    case 57: {  // Add_Mod_k
      const long long k = task.id - 49;
      long long s = 0;
      for (int t = 0; t < len; ++t) {
        s = detail::pos_mod(s + a[static_cast<std::size_t>(t)], k);
        y[static_cast<std::size_t>(t)] = s;
      }
      break;
    }
    case 58: {  // greedy 4-bit -> 1-bit dithering at level 15
      long long err = 0;
      for (int t = 0; t < len; ++t) {
        err += a[static_cast<std::size_t>(t)];
        if (err >= 8) {
          y[static_cast<std::size_t>(t)] = 1;
          err -= 15;
        } else {
          y[static_cast<std::size_t>(t)] = 0;
        }
      }
      break;
    }
    case 59:
    case 60:
    case 61: {  // forward-Euler: F, v += F, x += v
      long long v = 0, x = 0;
      for (int t = 0; t < len; ++t) {
        const long long in = a[static_cast<std::size_t>(t)];
        long long force = in;
        if (task.id == 60) force = in - 1;
        if (task.id == 61) force = in - x;
        v += force;
        x += v;
        y[static_cast<std::size_t>(t)] = x;
      }
      break;
    }
    case 62: {  // planar motion in a magnetic field; output is x position
      long long vx = 0, vy = 0, px = 0, py = 0;
      for (int t = 0; t < len; ++t) {
        const long long fx = a[static_cast<std::size_t>(t)] - vy;
        const long long fy = b[static_cast<std::size_t>(t)] + vx;
        vx += fx;
        vy += fy;
        px += vx;
        py += vy;
        y[static_cast<std::size_t>(t)] = px;
      }
      break;
    }
    default:
      throw TaskError("oracle_eval: no oracle for task id " +
                      std::to_string(task.id));
  }
  return y;
}

inline Dataset generate_dataset(const TaskSpec& task, int count,
                                std::uint64_t seed) {
  if (count < 1) throw TaskError("generate_dataset: count must be >= 1");
  Rng rng(derive_seed({0xda7a5e7ull, static_cast<std::uint64_t>(task.id), seed}));
  Dataset ds;
  ds.task_id = task.id;
  ds.seed = seed;
  ds.inputs.reserve(static_cast<std::size_t>(count));
  ds.targets.reserve(static_cast<std::size_t>(count));
  for (int s = 0; s < count; ++s) {
    std::vector<std::vector<long long>> seq(
        static_cast<std::size_t>(task.num_inputs));
    for (int k = 0; k < task.num_inputs; ++k) {
      const auto& r = task.element_range[static_cast<std::size_t>(k)];
      auto& list = seq[static_cast<std::size_t>(k)];
      list.resize(static_cast<std::size_t>(task.seq_len));
      for (auto& v : list) v = rng.uniform_int(r.lo, r.hi);
    }
    ds.targets.push_back(oracle_eval(task, seq));
    ds.inputs.push_back(std::move(seq));
  }
  return ds;
}

// ---- persistence: line-delimited records -----------------------------------

inline void save_dataset(const Dataset& ds, const std::string& path) {
  const TaskSpec& task = find_task(ds.task_id);
  std::ofstream out(path);
  if (!out) throw TaskError("save_dataset: cannot open " + path);
  nlohmann::json header = {{"kind", "dataset"},
                           {"task_id", ds.task_id},
                           {"task", task.name},
                           {"num_inputs", task.num_inputs},
                           {"seq_len", task.seq_len},
                           {"seed", ds.seed},
                           {"count", ds.inputs.size()}};
  out << header.dump() << "\n";
  for (std::size_t s = 0; s < ds.inputs.size(); ++s) {
    nlohmann::json rec;
    rec["x1"] = ds.inputs[s][0];
    if (task.num_inputs == 2) rec["x2"] = ds.inputs[s][1];
    rec["y"] = ds.targets[s];
    out << rec.dump() << "\n";
  }
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TaskError("load_dataset: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw TaskError("load_dataset: empty file");
  const auto header = nlohmann::json::parse(line);
  Dataset ds;
  ds.task_id = header.at("task_id").get<int>();
  ds.seed = header.at("seed").get<std::uint64_t>();
  const int num_inputs = header.at("num_inputs").get<int>();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto rec = nlohmann::json::parse(line);
    std::vector<std::vector<long long>> seq;
    seq.push_back(rec.at("x1").get<std::vector<long long>>());
    if (num_inputs == 2) seq.push_back(rec.at("x2").get<std::vector<long long>>());
    ds.targets.push_back(rec.at("y").get<std::vector<long long>>());
    ds.inputs.push_back(std::move(seq));
  }
  return ds;
}

}  // namespace rnnsynth
