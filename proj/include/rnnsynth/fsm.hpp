#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rnnsynth/codec.hpp"
#include "rnnsynth/rnn.hpp"

namespace rnnsynth {

class FsmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
// Same key mapped to different values: the codec does not induce a machine.
class FsmConflictError : public FsmError {
 public:
  using FsmError::FsmError;
};
class FsmMissingKeyError : public FsmError {
 public:
  using FsmError::FsmError;
};

using Code = std::vector<long long>;

// Lookup tables for the discretized update and readout functions.
struct FsmTables {
  std::map<std::pair<Code, Code>, Code> f_table;  // (state, inputs) -> state'
  std::map<Code, long long> g_table;              // state -> output
  Code initial;
  bool replay_matches_targets = false;
};

// Build the tables from every observed transition in the dataset; any key
// conflict rejects the codec.
inline FsmTables extract_tables(const RnnModel& model, const Dataset& data,
                                const Codec& codec) {
  FsmTables tables;
  const int n = model.arch.n;
  tables.initial = codec.encode(Eigen::VectorXd::Zero(n));
  tables.replay_matches_targets = true;

  const int total = static_cast<int>(data.inputs.size());
  const int chunk = 4096;
  for (int first = 0; first < total; first += chunk) {
    const int count = std::min(chunk, total - first);
    const SequenceBatch batch = make_batch(data, first, count);
    const auto fwd = rnn_forward(model, batch.x);
    const int len = batch.seq_len();
    for (int s = 0; s < count; ++s) {
      Code state = tables.initial;
      for (int t = 0; t < len; ++t) {
        Code input(static_cast<std::size_t>(model.num_inputs));
        for (int k = 0; k < model.num_inputs; ++k)
          input[static_cast<std::size_t>(k)] =
              std::llround(batch.x[static_cast<std::size_t>(t)](k, s));
        const Code next = codec.encode(
            fwd.trace.states.col(static_cast<Eigen::Index>(s) * len + t));
        const auto key = std::make_pair(state, input);
        const auto [it, inserted] = tables.f_table.emplace(key, next);
        if (!inserted && it->second != next)
          throw FsmConflictError("extract_tables: transition conflict");
        const long long out = std::llround(fwd.outputs(t, s));
        const auto [git, ginserted] = tables.g_table.emplace(next, out);
        if (!ginserted && git->second != out)
          throw FsmConflictError("extract_tables: readout conflict");
        if (out != static_cast<long long>(batch.y(t, s)))
          tables.replay_matches_targets = false;
        state = next;
      }
    }
  }
  return tables;
}

// Table-driven execution.
inline std::vector<long long> replay(const FsmTables& tables,
                                     const std::vector<std::vector<long long>>& inputs) {
  if (inputs.empty()) return {};
  const auto len = inputs[0].size();
  std::vector<long long> out;
  out.reserve(len);
  Code state = tables.initial;
  for (std::size_t t = 0; t < len; ++t) {
    Code input(inputs.size());
    for (std::size_t k = 0; k < inputs.size(); ++k) input[k] = inputs[k][t];
    const auto it = tables.f_table.find(std::make_pair(state, input));
    if (it == tables.f_table.end())
      throw FsmMissingKeyError("replay: unseen (state, input) key");
    state = it->second;
    const auto git = tables.g_table.find(state);
    if (git == tables.g_table.end())
      throw FsmMissingKeyError("replay: unseen state in readout");
    out.push_back(git->second);
  }
  return out;
}

inline int distinct_states(const FsmTables& tables) {
  std::map<Code, int> seen;
  seen.emplace(tables.initial, 0);
  for (const auto& [key, next] : tables.f_table) {
    seen.emplace(key.first, 0);
    seen.emplace(next, 0);
  }
  return static_cast<int>(seen.size());
}

// ---- text dump: `state , inputs -> state' ; output`, sorted keys ------------------

namespace fsm_detail {

inline std::string code_str(const Code& c) {
  std::string out;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i) out += " ";
    out += std::to_string(c[i]);
  }
  return out;
}

inline Code parse_code(const std::string& s) {
  Code out;
  std::istringstream in(s);
  long long v;
  while (in >> v) out.push_back(v);
  return out;
}

}  // namespace fsm_detail

inline void save_tables(const FsmTables& tables, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FsmError("save_tables: cannot open " + path);
  out << "initial: " << fsm_detail::code_str(tables.initial) << "\n";
  for (const auto& [key, next] : tables.f_table) {
    out << fsm_detail::code_str(key.first) << " , "
        << fsm_detail::code_str(key.second) << " -> "
        << fsm_detail::code_str(next) << " ; " << tables.g_table.at(next)
        << "\n";
  }
}

inline FsmTables load_tables(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FsmError("load_tables: cannot open " + path);
  FsmTables tables;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("initial:", 0) == 0) {
      tables.initial = fsm_detail::parse_code(line.substr(8));
      continue;
    }
    const auto comma = line.find(" , ");
    const auto arrow = line.find(" -> ");
    const auto semi = line.find(" ; ");
    if (comma == std::string::npos || arrow == std::string::npos ||
        semi == std::string::npos)
      throw FsmError("load_tables: malformed line: " + line);
    const Code state = fsm_detail::parse_code(line.substr(0, comma));
    const Code input =
        fsm_detail::parse_code(line.substr(comma + 3, arrow - comma - 3));
    const Code next =
        fsm_detail::parse_code(line.substr(arrow + 4, semi - arrow - 4));
    const long long out = std::stoll(line.substr(semi + 3));
    tables.f_table[{state, input}] = next;
    tables.g_table[next] = out;
  }
  return tables;
}

}  // namespace rnnsynth
