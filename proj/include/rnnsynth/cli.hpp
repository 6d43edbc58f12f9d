#pragma once

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rnnsynth/pipeline.hpp"

namespace rnnsynth {

namespace cli_detail {

inline Config load_config(const std::string& path,
                          const std::vector<std::string>& overrides) {
  Config cfg = path.empty() ? Config{} : Config::from_file(path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("--set expects key=value, got " + kv);
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

inline Arch parse_arch(const std::string& s) {
  Arch a;
  if (std::sscanf(s.c_str(), "%d,%d,%d,%d,%d", &a.n, &a.w_f, &a.d_f, &a.w_g,
                  &a.d_g) != 5)
    throw std::runtime_error("--arch expects n,wf,df,wg,dg");
  return a;
}

}  // namespace cli_detail

inline int cli_main(int argc, char** argv) {
  CLI::App app{"train tiny recurrent networks on algorithmic tasks and distill "
               "them into verified integer programs"};
  app.require_subcommand(1);
  app.fallthrough(true);  // --config/--set may follow the subcommand

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--set", overrides, "override a config key (key=value)");

  // ---- gen ----
  auto* gen = app.add_subcommand("gen", "generate a dataset for a task");
  std::string gen_task, gen_out = "dataset.jsonl";
  int gen_count = 4096;
  std::uint64_t gen_seed = 0;
  gen->add_option("--task", gen_task)->required();
  gen->add_option("--count", gen_count);
  gen->add_option("--seed", gen_seed);
  gen->add_option("--out", gen_out);

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "train one architecture on a task");
  std::string train_task, train_arch, train_out = "model.json";
  int train_steps = 10000;
  std::uint64_t train_seed = 0;
  train_cmd->add_option("--task", train_task)->required();
  train_cmd->add_option("--arch", train_arch, "n,wf,df,wg,dg (default: reference)");
  train_cmd->add_option("--steps", train_steps);
  train_cmd->add_option("--seed", train_seed);
  train_cmd->add_option("--out", train_out);

  // ---- search ----
  auto* search_cmd =
      app.add_subcommand("search", "ordered architecture sweep with halving");
  std::string search_task, search_out = "search";
  int search_steps = 10000;
  search_cmd->add_option("--task", search_task)->required();
  search_cmd->add_option("--steps", search_steps);
  search_cmd->add_option("--out", search_out, "directory for the probe log");

  // ---- normalize ----
  auto* norm_cmd = app.add_subcommand("normalize", "apply the weight hammers");
  std::string norm_model, norm_data, norm_out = "normalized_model.json", norm_skip;
  norm_cmd->add_option("--model", norm_model)->required();
  norm_cmd->add_option("--data", norm_data)->required();
  norm_cmd->add_option("--out", norm_out);
  norm_cmd->add_option("--skip", norm_skip, "comma-separated hammer names");

  // ---- extract ----
  auto* extract_cmd =
      app.add_subcommand("extract", "fit a discrete codec and dump FSM tables");
  std::string ex_model, ex_data, ex_codec = "auto", ex_out = "codec.json",
              ex_tables = "tables.txt";
  extract_cmd->add_option("--model", ex_model)->required();
  extract_cmd->add_option("--data", ex_data)->required();
  extract_cmd->add_option("--codec", ex_codec)
      ->check(CLI::IsMember({"auto", "bits", "lattice", "linear"}));
  extract_cmd->add_option("--out", ex_out);
  extract_cmd->add_option("--tables", ex_tables);

  // ---- symreg ----
  auto* symreg_cmd =
      app.add_subcommand("symreg", "regress expressions from an FSM table dump");
  std::string sym_table;
  symreg_cmd->add_option("--table", sym_table)->required();

  // ---- synthesize ----
  auto* synth_cmd = app.add_subcommand(
      "synthesize", "codec + regression + emission for a normalized model");
  std::string syn_model, syn_data, syn_out = "prog.py.txt";
  synth_cmd->add_option("--model", syn_model)->required();
  synth_cmd->add_option("--data", syn_data)->required();
  synth_cmd->add_option("--out", syn_out);

  // ---- verify ----
  auto* verify_cmd =
      app.add_subcommand("verify", "check an emitted program against the oracle");
  std::string ver_prog, ver_task;
  int ver_count = 65536;
  std::uint64_t ver_seed = 1;
  verify_cmd->add_option("--prog", ver_prog)->required();
  verify_cmd->add_option("--task", ver_task)->required();
  verify_cmd->add_option("--count", ver_count);
  verify_cmd->add_option("--seed", ver_seed);

  // ---- bench ----
  auto* bench_cmd = app.add_subcommand("bench", "run the pipeline over a subset");
  std::string bench_tasks, bench_out = "bench";
  bool bench_easy15 = false, bench_all = false;
  bench_cmd->add_option("--tasks", bench_tasks, "comma-separated task names");
  bench_cmd->add_flag("--subset-easy15", bench_easy15, "the 15-task subset");
  bench_cmd->add_flag("--all", bench_all, "all 62 tasks");
  bench_cmd->add_option("--out", bench_out);

  // ---- report ----
  auto* report_cmd = app.add_subcommand("report", "re-print a bench report");
  std::string report_dir = "bench";
  report_cmd->add_option("--dir", report_dir);

  CLI11_PARSE(app, argc, argv);

  try {
    const Config cfg = cli_detail::load_config(config_path, overrides);

    if (*gen) {
      const auto& task = find_task(gen_task);
      const Dataset ds = generate_dataset(task, gen_count, gen_seed);
      save_dataset(ds, gen_out);
      std::printf("wrote %d sequences for %s to %s\n", gen_count,
                  task.name.c_str(), gen_out.c_str());
    } else if (*train_cmd) {
      const auto& task = find_task(train_task);
      const Arch arch = train_arch.empty() ? reference_arch(task.id)
                                           : cli_detail::parse_arch(train_arch);
      TrainConfig tc = pipeline_detail::train_config(cfg, train_seed);
      tc.steps = train_steps;
      const TrainResult res = train(arch, task, tc);
      save_model(res.model, train_out);
      std::printf("arch %s steps %d: train loss %.5e, test loss %.5e, "
                  "accuracy %.6f%s\n",
                  arch.str().c_str(), res.steps_run, res.train_loss,
                  res.test_loss, res.test_accuracy,
                  res.diverged ? " (diverged)" : "");
    } else if (*search_cmd) {
      const auto& task = find_task(search_task);
      std::filesystem::create_directories(search_out);
      const std::uint64_t global =
          static_cast<std::uint64_t>(cfg.integer("global.seed", 0));
      const int seeds = static_cast<int>(cfg.integer("train.seeds", 5));
      std::ofstream log(search_out + "/probe_log.jsonl");
      double best_train_loss = 0.0, best_test_loss = 0.0;
      const SearchResult res = search([&](const Arch& arch, std::uint64_t rank) {
        ProbeOutcome out;
        for (int idx = 0; idx < seeds; ++idx) {
          TrainConfig tc = pipeline_detail::train_config(
              cfg, schedule_seed(global, task.id, pipeline_detail::kStageSearch,
                                 rank, static_cast<std::uint64_t>(idx)));
          tc.steps = search_steps;
          const TrainResult tr = train(arch, task, tc);
          out.accuracies.push_back(tr.test_accuracy);
          if (tr.test_accuracy == 1.0) {
            out.success = true;
            out.model = tr.model;
            best_train_loss = tr.train_loss;
            best_test_loss = tr.test_loss;
            break;
          }
        }
        nlohmann::json rec = {{"rank", rank},
                              {"arch",
                               {arch.n, arch.w_f, arch.d_f, arch.w_g, arch.d_g}},
                              {"accuracies", out.accuracies},
                              {"success", out.success}};
        log << rec.dump() << "\n";
        log.flush();
        std::printf("probe rank %llu arch %s -> %s\n",
                    static_cast<unsigned long long>(rank), arch.str().c_str(),
                    out.success ? "success" : "fail");
        return out;
      });
      if (!res.found) {
        std::printf("search exhausted: task unsolvable at this budget\n");
        return 2;
      }
      save_model(res.best_model, search_out + "/model.json");
      std::printf("minimal arch %s at rank %llu (%zu probes)\n",
                  res.best_arch.str().c_str(),
                  static_cast<unsigned long long>(res.best_rank),
                  res.probes.size());
      // architecture-table result row
      std::printf("%-25s %3d %3d %3d %3d %3d  %.5e  %.5e\n", task.name.c_str(),
                  res.best_arch.n, res.best_arch.w_f, res.best_arch.d_f,
                  res.best_arch.w_g, res.best_arch.d_g, best_train_loss,
                  best_test_loss);
    } else if (*norm_cmd) {
      const RnnModel model = load_model(norm_model);
      const Dataset data = load_dataset(norm_data);
      NormalizerConfig ncfg = pipeline_detail::normalizer_config(cfg);
      std::size_t p = 0;
      while (p < norm_skip.size()) {
        auto comma = norm_skip.find(',', p);
        if (comma == std::string::npos) comma = norm_skip.size();
        ncfg.skip.insert(norm_skip.substr(p, comma - p));
        p = comma + 1;
      }
      const NormalizeOutcome res = normalize_all(model, data, ncfg);
      save_model(res.model, norm_out);
      for (const auto& rep : res.reports)
        std::printf("%-12s %s  max deviation %.3e%s\n", rep.name.c_str(),
                    rep.applied ? "applied " : rep.reverted ? "reverted" : "skipped ",
                    rep.max_deviation,
                    rep.note.empty() ? "" : ("  (" + rep.note + ")").c_str());
    } else if (*extract_cmd) {
      const RnnModel model = load_model(ex_model);
      const Dataset data = load_dataset(ex_data);
      const TaskSpec& task = find_task(data.task_id);
      Config c2 = cfg;
      c2.set("codec.mode", ex_codec);
      // reuse the pipeline's codec stage in place
      const auto dir = std::filesystem::temp_directory_path() / "rnnsynth_extract";
      std::filesystem::create_directories(dir);
      const HiddenTrace trace = rnn_forward(model, make_batch(data).x).trace;
      Codec codec;
      bool have = false;
      if (ex_codec == "bits" || ex_codec == "auto") {
        try {
          const Clusters clusters = cluster_states(trace);
          codec.kind = Codec::Kind::kBits;
          const auto scorer = [&](const BitCodebook& cb) -> std::size_t {
            try {
              Codec c;
              c.kind = Codec::Kind::kBits;
              c.bits = cb;
              const FsmTables t = extract_tables(model, data, c);
              const SynthesisPieces sp =
                  regress_tables(t, task, true, pipeline_detail::regress_config(cfg));
              return emit_text(program_from_pieces(sp, task)).size();
            } catch (const std::exception&) {
              return std::numeric_limits<std::size_t>::max();
            }
          };
          codec.bits = boolean_assign(clusters, scorer);
          have = true;
        } catch (const std::exception& e) {
          if (ex_codec == "bits") throw;
          std::printf("bit codec unavailable: %s\n", e.what());
        }
      }
      if (!have && ex_codec != "bits") {
        codec.kind = Codec::Kind::kLattice;
        if (ex_codec == "linear" ||
            (ex_codec == "auto" && model.arch.d_f == 1)) {
          codec.lattice = linear_lattice_find(model, trace);
        } else {
          const auto swept = noise_sweep(trace.states);
          if (!swept.ok)
            throw NonLatticeError("extract: " + swept.reject_reason);
          codec.lattice = swept.model;
        }
        have = true;
      }
      const FsmTables tables = extract_tables(model, data, codec);
      save_codec(codec, ex_out);
      save_tables(tables, ex_tables);
      std::printf("codec %s: %d states, %zu transitions, replay %s\n",
                  codec.is_bit_code() ? "bits" : "lattice",
                  distinct_states(tables), tables.f_table.size(),
                  tables.replay_matches_targets ? "matches targets" : "MISMATCH");
    } else if (*symreg_cmd) {
      const FsmTables tables = load_tables(sym_table);
      const int h = static_cast<int>(tables.initial.size());
      int num_inputs = 1;
      if (!tables.f_table.empty())
        num_inputs = static_cast<int>(tables.f_table.begin()->first.second.size());
      bool bit_state = true, bit_inputs = true;
      for (const auto& [key, next] : tables.f_table) {
        for (long long v : key.first) bit_state &= v == 0 || v == 1;
        for (long long v : key.second) bit_inputs &= v == 0 || v == 1;
      }
      TaskSpec pseudo;
      pseudo.num_inputs = num_inputs;
      pseudo.element_kind = bit_inputs ? ElementKind::kBit : ElementKind::kInt;
      pseudo.seq_len = 0;
      const SynthesisPieces pieces = regress_tables(
          tables, pseudo, bit_state, pipeline_detail::regress_config(cfg));
      std::vector<std::string> names;
      for (int i = 0; i < h; ++i)
        names.push_back(std::string(1, static_cast<char>('a' + i)));
      if (num_inputs == 1) names.push_back("x");
      else {
        names.push_back(std::string(1, static_cast<char>('a' + h)));
        names.push_back(std::string(1, static_cast<char>('a' + h + 1)));
      }
      RenderContext ctx{names, h};
      for (int i = 0; i < h; ++i)
        std::printf("next_%c = %s    [rpn %s]\n", static_cast<char>('a' + i),
                    render_expr(*pieces.updates[static_cast<std::size_t>(i)], ctx).c_str(),
                    to_rpn(*pieces.updates[static_cast<std::size_t>(i)], names).c_str());
      std::printf("y = %s    [rpn %s]\n",
                  render_expr(*pieces.output,
                              RenderContext{std::vector<std::string>(
                                                names.begin(), names.begin() + h),
                                            h})
                      .c_str(),
                  to_rpn(*pieces.output, names).c_str());
    } else if (*synth_cmd) {
      const RnnModel model = load_model(syn_model);
      const Dataset data = load_dataset(syn_data);
      const TaskSpec& task = find_task(data.task_id);
      // run the codec arbitration exactly as the pipeline does
      Config c2 = cfg;
      const auto tmp =
          std::filesystem::temp_directory_path() / "rnnsynth_synthesize";
      std::filesystem::remove_all(tmp);
      c2.set("codec.mode", cfg.str("codec.mode", "auto"));
      const HiddenTrace trace = rnn_forward(model, make_batch(data).x).trace;
      const RegressConfig rcfg = pipeline_detail::regress_config(cfg);
      std::string best_text;
      try {
        const Clusters clusters = cluster_states(trace);
        const auto k = static_cast<unsigned>(clusters.centers.cols());
        if ((k & (k - 1)) == 0) {
          const auto scorer = [&](const BitCodebook& cb) -> std::size_t {
            try {
              Codec c;
              c.kind = Codec::Kind::kBits;
              c.bits = cb;
              const FsmTables t = extract_tables(model, data, c);
              const SynthesisPieces sp = regress_tables(t, task, true, rcfg);
              return emit_text(program_from_pieces(sp, task)).size();
            } catch (const std::exception&) {
              return std::numeric_limits<std::size_t>::max();
            }
          };
          Codec c;
          c.kind = Codec::Kind::kBits;
          c.bits = boolean_assign(clusters, scorer);
          const FsmTables t = extract_tables(model, data, c);
          const SynthesisPieces sp = regress_tables(t, task, true, rcfg);
          best_text = emit_text(program_from_pieces(sp, task));
        }
      } catch (const std::exception&) {
      }
      try {
        Codec c;
        c.kind = Codec::Kind::kLattice;
        if (model.arch.d_f == 1) {
          c.lattice = linear_lattice_find(model, trace);
        } else {
          const auto swept = noise_sweep(trace.states);
          if (!swept.ok) throw NonLatticeError(swept.reject_reason);
          c.lattice = swept.model;
        }
        const FsmTables t = extract_tables(model, data, c);
        const SynthesisPieces sp = regress_tables(t, task, false, rcfg);
        const std::string text = emit_text(program_from_pieces(sp, task));
        if (best_text.empty() || text.size() < best_text.size()) best_text = text;
      } catch (const std::exception& e) {
        if (best_text.empty())
          throw std::runtime_error(std::string("synthesize failed: ") + e.what());
      }
      save_program(best_text, syn_out);
      std::printf("%s", best_text.c_str());
    } else if (*verify_cmd) {
      const std::string text = load_program_text(ver_prog);
      const ProgramAst ast = parse_program(text);
      const auto res = verify(ast, find_task(ver_task), ver_count, ver_seed);
      std::printf("accuracy %.6f -> %s\n", res.accuracy,
                  res.solved ? "solved" : "unsolved");
      return res.solved ? 0 : 1;
    } else if (*bench_cmd) {
      std::vector<std::string> names;
      if (bench_all)
        for (const auto& t : list_tasks()) names.push_back(t.name);
      else if (bench_easy15)
        names = easy15_subset();
      else {
        std::size_t p = 0;
        while (p < bench_tasks.size()) {
          auto comma = bench_tasks.find(',', p);
          if (comma == std::string::npos) comma = bench_tasks.size();
          names.push_back(bench_tasks.substr(p, comma - p));
          p = comma + 1;
        }
      }
      const BenchReport report = bench(names, cfg, bench_out);
      std::printf("%s", report.report_text.c_str());
    } else if (*report_cmd) {
      std::ifstream in(report_dir + "/report.txt");
      if (!in) throw std::runtime_error("report: no report.txt in " + report_dir);
      std::string text((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
      std::printf("%s", text.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

}  // namespace rnnsynth
