#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rnnsynth/automl.hpp"
#include "rnnsynth/cluster.hpp"
#include "rnnsynth/codec.hpp"
#include "rnnsynth/config.hpp"
#include "rnnsynth/fsm.hpp"
#include "rnnsynth/lattice.hpp"
#include "rnnsynth/normalize.hpp"
#include "rnnsynth/program.hpp"
#include "rnnsynth/symreg.hpp"
#include "rnnsynth/train.hpp"

namespace rnnsynth {

enum class FailureTag {
  kNone,
  kNoiseNonlinearity,
  kContinuous,
  kSearchExhausted,
  kRegressionBudget,
};

inline std::string to_string(FailureTag tag) {
  switch (tag) {
    case FailureTag::kNone: return "none";
    case FailureTag::kNoiseNonlinearity: return "noise-nonlinearity";
    case FailureTag::kContinuous: return "continuous";
    case FailureTag::kSearchExhausted: return "search-exhausted";
    case FailureTag::kRegressionBudget: return "regression-budget";
  }
  return "none";
}

struct PipelineResult {
  int task_id = 0;
  std::string task_name;
  Arch arch;
  bool trained = false;
  bool normalized = false;
  std::string codec_kind;  // bits | lattice | linear | ""
  bool tables_consistent = false;
  bool regressed = false;
  bool used_fallback = false;
  bool solved = false;
  double final_accuracy = 0.0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  FailureTag tag = FailureTag::kNone;
  std::string failure_detail;
  std::string program_path;
  std::vector<std::pair<std::string, double>> stage_seconds;
};

// Stable per-(task, stage, probe, index) seed schedule; reruns are exact.
inline std::uint64_t schedule_seed(std::uint64_t global, int task_id,
                                   std::uint64_t stage, std::uint64_t probe,
                                   std::uint64_t index) {
  return derive_seed({global, static_cast<std::uint64_t>(task_id), stage, probe, index});
}

namespace pipeline_detail {

constexpr std::uint64_t kStageData = 1;
constexpr std::uint64_t kStageTrain = 2;
constexpr std::uint64_t kStageVerify = 3;
constexpr std::uint64_t kStageSearch = 4;

inline TaskSpec task_with_overrides(const TaskSpec& base, const Config& cfg) {
  TaskSpec t = base;
  const std::string len_key =
      t.num_inputs == 2 ? "task.seq_len.pair" : "task.seq_len.single";
  t.seq_len = static_cast<int>(cfg.integer(len_key, t.seq_len));
  const std::string range_key = "task.range." + t.name;
  if (cfg.has(range_key)) {
    const std::string v = cfg.str(range_key, "");
    const auto comma = v.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error("config: bad range override " + v);
    ValueRange r{std::stoll(v.substr(0, comma)), std::stoll(v.substr(comma + 1))};
    for (auto& range : t.element_range) range = r;
  }
  return t;
}

inline TrainConfig train_config(const Config& cfg, std::uint64_t seed) {
  TrainConfig t;
  t.steps = static_cast<int>(cfg.integer("train.steps", 10000));
  t.batch = static_cast<int>(cfg.integer("train.batch", 4096));
  t.lr = cfg.real("train.lr", 1e-3);
  t.l1 = cfg.real("train.l1", 0.0);
  t.eval_every = static_cast<int>(cfg.integer("train.eval_every", 500));
  t.eval_count = static_cast<int>(cfg.integer("train.eval_count", 65536));
  t.eval_quick = static_cast<int>(cfg.integer("train.eval_quick", 8192));
  t.early_stop = cfg.boolean("train.early_stop", true);
  t.seed = seed;
  return t;
}

inline NormalizerConfig normalizer_config(const Config& cfg) {
  NormalizerConfig n;
  n.whiten_eps = cfg.real("normalize.whiten_eps", 0.1);
  n.jnf_eps = cfg.real("normalize.jnf_eps", 0.7);
  n.toeplitz_eps = cfg.real("normalize.toeplitz_eps", 0.0001);
  n.debias_eps = cfg.real("normalize.debias_eps", 0.1);
  n.quant_eps = cfg.real("normalize.quant_eps", 0.01);
  n.max_deviation = cfg.real("normalize.max_deviation", 1e-3);
  n.affine_detect_tol = cfg.real("normalize.affine_detect_tol", 1e-3);
  n.probe_sequences = static_cast<int>(cfg.integer("normalize.probe", 256));
  return n;
}

inline RegressConfig regress_config(const Config& cfg) {
  RegressConfig r;
  r.brute.max_len = static_cast<int>(cfg.integer("symreg.max_len", 6));
  r.brute.row_cap = static_cast<int>(cfg.integer("symreg.row_cap", 100));
  r.brute.fill_cap = cfg.integer("symreg.fill_cap", 10'000'000);
  return r;
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

}  // namespace pipeline_detail

// Regressed update/output expressions for a table-defined machine.
struct SynthesisPieces {
  std::vector<ExprPtr> updates;
  ExprPtr output;
  std::vector<bool> var_is_bit;
  Code initial;
  bool any_fallback = false;
};

inline SynthesisPieces regress_tables(const FsmTables& tables,
                                      const TaskSpec& task, bool bit_state,
                                      const RegressConfig& cfg) {
  SynthesisPieces out;
  out.initial = tables.initial;
  const int h = static_cast<int>(tables.initial.size());
  const int inputs = task.num_inputs;

  std::vector<std::string> names;
  for (int i = 0; i < h; ++i)
    names.push_back(std::string(1, static_cast<char>('a' + i)));
  if (inputs == 1) {
    names.push_back("x");
  } else {
    names.push_back(std::string(1, static_cast<char>('a' + h)));
    names.push_back(std::string(1, static_cast<char>('a' + h + 1)));
  }
  out.var_is_bit.assign(static_cast<std::size_t>(h), bit_state);
  for (int k = 0; k < inputs; ++k)
    out.var_is_bit.push_back(task.element_kind == ElementKind::kBit);

  for (int comp = 0; comp < h; ++comp) {
    RegressionProblem p;
    p.var_names = names;
    p.var_is_bit = out.var_is_bit;
    p.num_hidden = h;
    for (const auto& [key, next] : tables.f_table) {
      std::vector<long long> row = key.first;
      row.insert(row.end(), key.second.begin(), key.second.end());
      p.rows.push_back({row, next[static_cast<std::size_t>(comp)]});
    }
    auto res = regress(p, cfg);
    out.any_fallback |= !res.exact;
    out.updates.push_back(res.expr);
  }
  {
    RegressionProblem p;
    p.num_hidden = h;
    for (int i = 0; i < h; ++i) {
      p.var_names.push_back(names[static_cast<std::size_t>(i)]);
      p.var_is_bit.push_back(bit_state);
    }
    for (const auto& [state, y] : tables.g_table) p.rows.push_back({state, y});
    auto res = regress(p, cfg);
    out.any_fallback |= !res.exact;
    out.output = res.expr;
  }
  return out;
}

// Assemble the program for a machine; a zero-width code (single-state machine)
// is represented with one placeholder state variable.
inline ProgramAst program_from_pieces(const SynthesisPieces& pieces,
                                      const TaskSpec& task) {
  if (!pieces.initial.empty())
    return build_program(pieces.updates, pieces.output, pieces.initial,
                         task.num_inputs, task.seq_len, pieces.var_is_bit);
  std::vector<bool> kinds = {false};
  for (int k = 0; k < task.num_inputs; ++k)
    kinds.push_back(task.element_kind == ElementKind::kBit);
  // a single-state machine reads out a constant; give it a placeholder state
  const ExprPtr out = pieces.output ? pieces.output : make_const(0);
  return build_program({make_const(0)}, out, {0}, task.num_inputs, task.seq_len,
                       kinds);
}

struct CodecCandidate {
  Codec codec;
  std::string kind;
  FsmTables tables;
  SynthesisPieces pieces;
  ProgramAst ast;
  std::string text;
};

// End-to-end synthesis for one task.
inline PipelineResult run_pipeline(const TaskSpec& base_task, const Config& cfg,
                                   const std::string& out_dir) {
  namespace fs = std::filesystem;
  using pipeline_detail::Timer;
  PipelineResult result;
  const TaskSpec task = pipeline_detail::task_with_overrides(base_task, cfg);
  result.task_id = task.id;
  result.task_name = task.name;
  fs::create_directories(out_dir);
  const std::uint64_t global_seed =
      static_cast<std::uint64_t>(cfg.integer("global.seed", 0));

  auto stage = [&](const std::string& name, auto&& fn) {
    Timer timer;
    fn();
    result.stage_seconds.emplace_back(name, timer.seconds());
  };

  // ---- dataset ---------------------------------------------------------------
  Dataset data;
  stage("dataset", [&] {
    data = generate_dataset(
        task, static_cast<int>(cfg.integer("trace.count", 4096)),
        schedule_seed(global_seed, task.id, pipeline_detail::kStageData, 0, 0));
    save_dataset(data, out_dir + "/dataset.jsonl");
  });

  // ---- architecture + training -------------------------------------------------
  Arch arch = reference_arch(task.id);
  if (cfg.has("arch.fixed")) {
    const std::string v = cfg.str("arch.fixed", "");
    std::sscanf(v.c_str(), "%d,%d,%d,%d,%d", &arch.n, &arch.w_f, &arch.d_f,
                &arch.w_g, &arch.d_g);
  }
  result.arch = arch;

  RnnModel model;
  stage("train", [&] {
    const int seeds = static_cast<int>(cfg.integer("train.seeds", 5));
    double best_acc = -1.0;
    for (int attempt = 0; attempt < 2 && !result.trained; ++attempt) {
      for (int idx = 0; idx < seeds && !result.trained; ++idx) {
        TrainConfig tc = pipeline_detail::train_config(
            cfg, schedule_seed(global_seed, task.id, pipeline_detail::kStageTrain,
                               static_cast<std::uint64_t>(attempt),
                               static_cast<std::uint64_t>(idx)));
        if (attempt == 1)
          tc.steps = static_cast<int>(cfg.integer("train.retry_steps", 20000));
        const TrainResult tr = train(arch, task, tc);
        if (tr.test_accuracy > best_acc) {
          best_acc = tr.test_accuracy;
          model = tr.model;
          result.train_loss = tr.train_loss;
          result.test_loss = tr.test_loss;
        }
        if (tr.test_accuracy == 1.0) result.trained = true;
      }
      if (!cfg.boolean("train.retry", true)) break;
    }
    save_model(model, out_dir + "/model.json");
  });
  if (!result.trained) {
    result.tag = FailureTag::kSearchExhausted;
    result.failure_detail = "no seed reached perfect test accuracy";
  }

  // ---- normalization -------------------------------------------------------------
  NormalizeOutcome norm;
  stage("normalize", [&] {
    norm = normalize_all(model, data, pipeline_detail::normalizer_config(cfg));
    result.normalized = true;
    save_model(norm.model, out_dir + "/normalized_model.json");
    nlohmann::json rep = nlohmann::json::array();
    for (const auto& r : norm.reports)
      rep.push_back({{"hammer", r.name},
                     {"applied", r.applied},
                     {"reverted", r.reverted},
                     {"note", r.note},
                     {"max_deviation", r.max_deviation}});
    std::ofstream out(out_dir + "/normalize_report.json");
    out << rep.dump(2) << "\n";
  });
  const RnnModel& net = norm.model;

  // ---- codec candidates ------------------------------------------------------------
  HiddenTrace trace;
  stage("trace", [&] { trace = rnn_forward(net, make_batch(data).x).trace; });

  const RegressConfig rcfg = pipeline_detail::regress_config(cfg);
  std::vector<CodecCandidate> candidates;
  bool saw_structure_failure = false;  // conflicts / noisy structure
  bool saw_continuous = false;
  std::string codec_notes;

  auto try_downstream = [&](Codec codec, const std::string& kind) -> bool {
    try {
      CodecCandidate cand;
      cand.codec = std::move(codec);
      cand.kind = kind;
      cand.tables = extract_tables(net, data, cand.codec);
      cand.pieces = regress_tables(cand.tables, task, cand.codec.is_bit_code(), rcfg);
      cand.ast = program_from_pieces(cand.pieces, task);
      cand.text = emit_text(cand.ast);
      candidates.push_back(std::move(cand));
      return true;
    } catch (const FsmConflictError& e) {
      saw_structure_failure = true;
      codec_notes += kind + ": " + e.what() + "; ";
    } catch (const std::exception& e) {
      codec_notes += kind + ": " + e.what() + "; ";
    }
    return false;
  };

  stage("codec", [&] {
    const std::string mode = cfg.str("codec.mode", "auto");
    // Boolean codebook path
    if (mode == "auto" || mode == "bits") {
      try {
        ClusterConfig ccfg;
        ccfg.gap_ratio = cfg.real("cluster.gap_ratio", 5.0);
        ccfg.single_cluster_diameter = cfg.real("cluster.single_diameter", 0.1);
        const Clusters clusters = cluster_states(trace, ccfg);
        const auto k = static_cast<unsigned>(clusters.centers.cols());
        if ((k & (k - 1)) != 0) {
          codec_notes += "bits: cluster count not a power of two; ";
          saw_structure_failure = true;
        } else {
          BooleanAssignConfig bcfg;
          bcfg.exhaustive_bits =
              static_cast<int>(cfg.integer("bits.exhaustive", 3));
          bcfg.max_bits = static_cast<int>(cfg.integer("bits.max", 6));
          const auto scorer = [&](const BitCodebook& cb) -> std::size_t {
            try {
              Codec c;
              c.kind = Codec::Kind::kBits;
              c.bits = cb;
              const FsmTables t = extract_tables(net, data, c);
              const SynthesisPieces p = regress_tables(t, task, true, rcfg);
              return emit_text(program_from_pieces(p, task)).size();
            } catch (const std::exception&) {
              return std::numeric_limits<std::size_t>::max();
            }
          };
          Codec c;
          c.kind = Codec::Kind::kBits;
          c.bits = boolean_assign(clusters, scorer, bcfg);
          try_downstream(std::move(c), "bits");
        }
      } catch (const ContinuousError& e) {
        saw_continuous = true;
        codec_notes += std::string("bits: ") + e.what() + "; ";
      } catch (const std::exception& e) {
        saw_structure_failure = true;
        codec_notes += std::string("bits: ") + e.what() + "; ";
      }
    }
    // integer lattice path
    if (mode == "auto" || mode == "lattice" || mode == "linear") {
      bool affine = net.arch.d_f == 1;
      if (!affine) {
        const SequenceBatch probe = make_batch(data, 0, std::min<int>(64, static_cast<int>(data.inputs.size())));
        const HiddenTrace probe_trace = rnn_forward(net, probe.x).trace;
        affine = affine_residual(net, probe_trace, probe.x) <
                 cfg.real("normalize.affine_detect_tol", 1e-3);
      }
      if ((mode == "linear" || mode == "auto") && affine) {
        try {
          Codec c;
          c.kind = Codec::Kind::kLattice;
          c.lattice = linear_lattice_find(net, trace);
          try_downstream(std::move(c), "linear");
        } catch (const std::exception& e) {
          codec_notes += std::string("linear: ") + e.what() + "; ";
        }
      }
      const bool need_gcd =
          mode == "lattice" || (mode == "auto" && candidates.empty());
      if (need_gcd) {
        NoiseSweepConfig scfg;
        scfg.dl_reject = cfg.real("lattice.dl_reject", 12.0);
        const auto swept = noise_sweep(trace.states, scfg);
        if (swept.ok) {
          Codec c;
          c.kind = Codec::Kind::kLattice;
          c.lattice = swept.model;
          try_downstream(std::move(c), "lattice");
        } else {
          codec_notes += "lattice: " + swept.reject_reason + "; ";
          if (swept.reject_reason.find("description length") != std::string::npos)
            saw_continuous = true;
        }
      }
    }
  });

  if (candidates.empty()) {
    if (result.tag == FailureTag::kNone)
      result.tag = saw_structure_failure ? FailureTag::kNoiseNonlinearity
                                         : FailureTag::kContinuous;
    if (result.failure_detail.empty()) result.failure_detail = codec_notes;
    (void)saw_continuous;
    nlohmann::json rec = {{"task", task.name}, {"notes", codec_notes}};
    std::ofstream out(out_dir + "/codec_notes.json");
    out << rec.dump(2) << "\n";
  }

  // ---- pick the shorter program, persist artifacts ------------------------------
  const CodecCandidate* chosen = nullptr;
  for (const auto& cand : candidates)
    if (!chosen || cand.text.size() < chosen->text.size()) chosen = &cand;

  VerifyResult verdict;
  if (chosen) {
    result.codec_kind = chosen->kind;
    result.tables_consistent = true;
    result.regressed = true;
    result.used_fallback = chosen->pieces.any_fallback;
    stage("emit", [&] {
      save_codec(chosen->codec, out_dir + "/codec.json");
      save_tables(chosen->tables, out_dir + "/tables.txt");
      result.program_path = out_dir + "/prog.py.txt";
      save_program(chosen->text, result.program_path);
      std::ofstream exprs(out_dir + "/expressions.txt");
      const RenderContext ctx = chosen->ast.render_context();
      for (std::size_t i = 0; i < chosen->ast.updates.size(); ++i)
        exprs << "next_" << chosen->ast.hidden_names[i] << " = "
              << render_expr(*chosen->ast.updates[i], ctx) << "\n";
      exprs << "y = " << render_expr(*chosen->ast.output, ctx) << "\n";
    });
    stage("verify", [&] {
      verdict = verify(
          chosen->ast, task,
          static_cast<int>(cfg.integer("verify.count", 65536)),
          schedule_seed(global_seed, task.id, pipeline_detail::kStageVerify, 0, 0));
      result.final_accuracy = verdict.accuracy;
      result.solved = verdict.solved;
      nlohmann::json rec = {{"task", task.name},
                            {"accuracy", verdict.accuracy},
                            {"solved", verdict.solved},
                            {"codec", result.codec_kind}};
      std::ofstream out(out_dir + "/verification.json");
      out << rec.dump(2) << "\n";
    });
    if (!result.solved && result.tag == FailureTag::kNone)
      result.tag = result.used_fallback ? FailureTag::kRegressionBudget
                                        : FailureTag::kNoiseNonlinearity;
  }
  if (result.solved) result.tag = FailureTag::kNone;

  // ---- result records -----------------------------------------------------------
  {
    nlohmann::json rec = {{"task_id", result.task_id},
                          {"task", result.task_name},
                          {"arch",
                           {result.arch.n, result.arch.w_f, result.arch.d_f,
                            result.arch.w_g, result.arch.d_g}},
                          {"trained", result.trained},
                          {"normalized", result.normalized},
                          {"codec", result.codec_kind},
                          {"tables_consistent", result.tables_consistent},
                          {"regressed", result.regressed},
                          {"solved", result.solved},
                          {"accuracy", result.final_accuracy},
                          {"train_loss", result.train_loss},
                          {"test_loss", result.test_loss},
                          {"failure_tag", to_string(result.tag)},
                          {"failure_detail", result.failure_detail}};
    std::ofstream out(out_dir + "/result.json");
    out << rec.dump(2) << "\n";
  }
  {
    nlohmann::json timings = nlohmann::json::array();
    for (const auto& [name, secs] : result.stage_seconds)
      timings.push_back({{"stage", name}, {"seconds", secs}});
    std::ofstream out(out_dir + "/timings.json");
    out << timings.dump(2) << "\n";
  }
  return result;
}

// ---- benchmark over a task subset ---------------------------------------------------

inline const std::vector<std::string>& easy15_subset() {
  static const std::vector<std::string> names = {
      "Binary_Addition", "Bitwise_Xor",  "Bitwise_Or",   "Bitwise_And",
      "Bitwise_Not",     "Parity_All",   "Parity_Zeros", "Sum_All",
      "Sum_Last2",       "Sum_Last3",    "Current_Number", "Prev1",
      "Prev2",           "Diff_Last2",   "Bit_Dot_Prod_Mod2"};
  return names;
}

struct BenchReport {
  std::vector<PipelineResult> results;
  std::string report_text;
};

inline std::string format_bench_report(const std::vector<PipelineResult>& results) {
  std::string out;
  out += "Benchmark results\n";
  out += "Task # | Task Name                 | Codec   | Solved\n";
  out += "-------+---------------------------+---------+-------\n";
  int solved = 0;
  char line[160];
  for (const auto& r : results) {
    std::snprintf(line, sizeof(line), "%6d | %-25s | %-7s | %d\n", r.task_id,
                  r.task_name.c_str(),
                  r.codec_kind.empty() ? "-" : r.codec_kind.c_str(),
                  r.solved ? 1 : 0);
    out += line;
    solved += r.solved ? 1 : 0;
  }
  std::snprintf(line, sizeof(line), "Total solved: %d / %d\n\n", solved,
                static_cast<int>(results.size()));
  out += line;

  out += "Architecture results\n";
  out += "Task # | Task Name                 |   n | w_f | d_f | w_g | d_g | "
         "Train Loss  | Test Loss\n";
  out += "-------+---------------------------+-----+-----+-----+-----+-----+-"
         "------------+------------\n";
  for (const auto& r : results) {
    std::snprintf(line, sizeof(line),
                  "%6d | %-25s | %3d | %3d | %3d | %3d | %3d | %.5e | %.5e\n",
                  r.task_id, r.task_name.c_str(), r.arch.n, r.arch.w_f,
                  r.arch.d_f, r.arch.w_g, r.arch.d_g, r.train_loss, r.test_loss);
    out += line;
  }
  return out;
}

inline BenchReport bench(const std::vector<std::string>& task_names,
                         const Config& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  BenchReport report;
  for (const auto& name : task_names) {
    const TaskSpec& task = find_task(name);
    PipelineResult res;
    try {
      res = run_pipeline(task, cfg, out_dir + "/" + name);
    } catch (const std::exception& e) {
      res.task_id = task.id;
      res.task_name = task.name;
      res.failure_detail = std::string("pipeline exception: ") + e.what();
      res.tag = FailureTag::kNoiseNonlinearity;
    }
    report.results.push_back(std::move(res));
  }
  report.report_text = format_bench_report(report.results);
  {
    std::ofstream out(out_dir + "/report.txt");
    out << report.report_text;
  }
  {
    std::ofstream out(out_dir + "/results.jsonl");
    for (const auto& r : report.results) {
      nlohmann::json rec = {{"task_id", r.task_id},
                            {"task", r.task_name},
                            {"arch",
                             {r.arch.n, r.arch.w_f, r.arch.d_f, r.arch.w_g,
                              r.arch.d_g}},
                            {"codec", r.codec_kind},
                            {"solved", r.solved},
                            {"accuracy", r.final_accuracy},
                            {"train_loss", r.train_loss},
                            {"test_loss", r.test_loss},
                            {"failure_tag", to_string(r.tag)}};
      out << rec.dump() << "\n";
    }
  }
  return report;
}

}  // namespace rnnsynth
