#pragma once

#include <cctype>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "rnnsynth/expr.hpp"
#include "rnnsynth/fsm.hpp"
#include "rnnsynth/tasks.hpp"

namespace rnnsynth {

class ProgramError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The synthesized program: a fixed loop over the input list(s), simultaneous
// state updates through next_* temporaries, one output per step.
struct ProgramAst {
  std::vector<std::string> hidden_names;
  std::vector<std::string> input_names;
  std::vector<long long> init;
  int seq_len = 0;
  std::vector<ExprPtr> updates;  // one per hidden variable
  ExprPtr output;

  int num_hidden() const { return static_cast<int>(hidden_names.size()); }
  int num_inputs() const { return static_cast<int>(input_names.size()); }

  RenderContext render_context() const {
    RenderContext ctx;
    ctx.names = hidden_names;
    ctx.names.insert(ctx.names.end(), input_names.begin(), input_names.end());
    ctx.num_hidden = num_hidden();
    return ctx;
  }
};

// Hidden variables are named a, b, ... in code-component order; a single input
// reads as x, two inputs continue the alphabet after the hidden variables.
inline ProgramAst build_program(const std::vector<ExprPtr>& updates,
                                const ExprPtr& output, const Code& initial,
                                int num_inputs, int seq_len,
                                const std::vector<bool>& var_is_bit) {
  const int h = static_cast<int>(initial.size());
  if (static_cast<int>(updates.size()) != h)
    throw ProgramError("build_program: one update per hidden variable required");
  for (const auto& u : updates)
    if (!u) throw ProgramError("build_program: missing update expression");
  if (!output) throw ProgramError("build_program: missing output expression");

  ProgramAst ast;
  ast.seq_len = seq_len;
  ast.init.assign(initial.begin(), initial.end());
  for (int i = 0; i < h; ++i)
    ast.hidden_names.push_back(std::string(1, static_cast<char>('a' + i)));
  if (num_inputs == 1) {
    if (h >= 23) throw ProgramError("build_program: too many state variables");
    ast.input_names = {"x"};
  } else if (num_inputs == 2) {
    if (h + 2 > 18)  // keep clear of s, t, x, y
      throw ProgramError("build_program: too many state variables");
    ast.input_names = {std::string(1, static_cast<char>('a' + h)),
                       std::string(1, static_cast<char>('a' + h + 1))};
  } else {
    throw ProgramError("build_program: unsupported input arity");
  }
  for (const auto& u : updates)
    ast.updates.push_back(rewrite_bitsum_mod2(u, var_is_bit));
  ast.output = rewrite_bitsum_mod2(output, var_is_bit);
  return ast;
}

// ---- emission ------------------------------------------------------------------

inline std::string emit_text(const ProgramAst& ast) {
  const RenderContext ctx = ast.render_context();
  std::string out = "def f(s";
  if (ast.num_inputs() == 2) out += ",t";
  out += "):\n    ";
  for (int i = 0; i < ast.num_hidden(); ++i)
    out += ast.hidden_names[static_cast<std::size_t>(i)] + " = " +
           std::to_string(ast.init[static_cast<std::size_t>(i)]) + ";";
  out += "\n    ys = []\n    for i in range(" + std::to_string(ast.seq_len) +
         "):\n";
  if (ast.num_inputs() == 1) {
    out += "        x = s[i]\n";
  } else {
    out += "        " + ast.input_names[0] + " = s[i]; " + ast.input_names[1] +
           " = t[i];\n";
  }
  for (int i = 0; i < ast.num_hidden(); ++i)
    out += "        next_" + ast.hidden_names[static_cast<std::size_t>(i)] +
           " = " + render_expr(*ast.updates[static_cast<std::size_t>(i)], ctx) +
           "\n";
  out += "        ";
  for (int i = 0; i < ast.num_hidden(); ++i)
    out += ast.hidden_names[static_cast<std::size_t>(i)] + " = next_" +
           ast.hidden_names[static_cast<std::size_t>(i)] + ";";
  out += "\n        y = " + render_expr(*ast.output, ctx) +
         "\n        ys.append(y)\n    return ys\n";
  return out;
}

// ---- expression parsing -----------------------------------------------------------

namespace program_detail {

struct ExprParser {
  const std::string& text;
  std::size_t pos = 0;
  const std::vector<std::string>& names;

  explicit ExprParser(const std::string& t, const std::vector<std::string>& n)
      : text(t), names(n) {}

  void skip_ws() {
    while (pos < text.size() && text[pos] == ' ') ++pos;
  }
  bool eat(const std::string& tok) {
    skip_ws();
    if (text.compare(pos, tok.size(), tok) == 0) {
      pos += tok.size();
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& why) const {
    throw ProgramError("parse error at '" + text.substr(pos) + "': " + why);
  }

  ExprPtr parse() {
    ExprPtr e = parse_cmp();
    skip_ws();
    if (pos != text.size()) fail("trailing tokens");
    return e;
  }

  ExprPtr parse_cmp() {
    ExprPtr lhs = parse_xor();
    skip_ws();
    if (eat("==")) {
      ExprPtr rhs = parse_xor();
      return make_unary(Op::kDirac, normalize_threshold(lhs, rhs));
    }
    if (pos < text.size() && text[pos] == '>') {
      ++pos;
      ExprPtr rhs = parse_xor();
      return make_unary(Op::kHeaviside, normalize_threshold(lhs, rhs));
    }
    return lhs;
  }

  static ExprPtr normalize_threshold(const ExprPtr& lhs, const ExprPtr& rhs) {
    if (rhs->op == Op::kConst && rhs->value == 0) return lhs;
    return make_binary(Op::kSub, lhs, rhs);
  }

  ExprPtr parse_xor() {
    ExprPtr e = parse_add();
    while (true) {
      skip_ws();
      if (pos < text.size() && text[pos] == '^') {
        ++pos;
        e = make_binary(Op::kXor, e, parse_add());
      } else {
        return e;
      }
    }
  }

  ExprPtr parse_add() {
    skip_ws();
    ExprPtr e;
    if (eat("-")) {
      e = make_unary(Op::kNeg, parse_mul());
    } else {
      eat("+");  // unary plus
      e = parse_mul();
    }
    while (true) {
      skip_ws();
      if (pos >= text.size()) return e;
      if (text[pos] == '+') {
        ++pos;
        e = make_binary(Op::kAdd, e, parse_mul());
      } else if (text[pos] == '-') {
        ++pos;
        e = make_binary(Op::kSub, e, parse_mul());
      } else {
        return e;
      }
    }
  }

  ExprPtr parse_mul() {
    ExprPtr e = parse_atom();
    while (true) {
      skip_ws();
      if (pos >= text.size()) return e;
      if (text[pos] == '*') {
        ++pos;
        e = make_binary(Op::kMul, e, parse_atom());
      } else if (text[pos] == '%') {
        ++pos;
        e = make_binary(Op::kMod, e, parse_atom());
      } else {
        return e;
      }
    }
  }

  ExprPtr parse_atom() {
    skip_ws();
    if (pos >= text.size()) fail("expected operand");
    if (text[pos] == '(') {
      ++pos;
      ExprPtr e = parse_cmp();
      if (!eat(")")) fail("expected )");
      return e;
    }
    if (text[pos] == '-') {  // negative literal or negated atom
      ++pos;
      return make_unary(Op::kNeg, parse_atom());
    }
    if (std::isdigit(static_cast<unsigned char>(text[pos]))) {
      long long v = 0;
      while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos])))
        v = v * 10 + (text[pos++] - '0');
      return make_const(v);
    }
    if (text.compare(pos, 4, "abs(") == 0) {
      pos += 4;
      ExprPtr e = parse_cmp();
      if (!eat(")")) fail("expected ) after abs");
      return make_unary(Op::kAbs, e);
    }
    // identifier
    std::size_t end = pos;
    while (end < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[end])) || text[end] == '_'))
      ++end;
    const std::string name = text.substr(pos, end - pos);
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) {
        pos = end;
        return make_var(static_cast<int>(i));
      }
    fail("unknown identifier " + name);
  }
};

inline std::string expect_prefix(const std::string& line, const std::string& prefix) {
  if (line.compare(0, prefix.size(), prefix) != 0)
    throw ProgramError("parse_program: expected '" + prefix + "', got '" + line + "'");
  return line.substr(prefix.size());
}

}  // namespace program_detail

inline ExprPtr parse_expression(const std::string& text,
                                const std::vector<std::string>& names) {
  program_detail::ExprParser parser(text, names);
  return parser.parse();
}

inline ProgramAst parse_program(const std::string& text) {
  std::vector<std::string> lines;
  {
    std::string cur;
    for (char c : text) {
      if (c == '\n') {
        lines.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) lines.push_back(cur);
  }
  if (lines.size() < 8) throw ProgramError("parse_program: too short");

  ProgramAst ast;
  std::size_t ln = 0;
  const std::string head = lines[ln++];
  int num_inputs = 0;
  if (head == "def f(s):")
    num_inputs = 1;
  else if (head == "def f(s,t):")
    num_inputs = 2;
  else
    throw ProgramError("parse_program: bad header: " + head);

  // init line: `a = 0;b = 1;`
  {
    std::string init = program_detail::expect_prefix(lines[ln++], "    ");
    std::size_t p = 0;
    while (p < init.size()) {
      const auto semi = init.find(';', p);
      if (semi == std::string::npos) break;
      const std::string item = init.substr(p, semi - p);
      const auto eq = item.find(" = ");
      if (eq == std::string::npos)
        throw ProgramError("parse_program: bad init item: " + item);
      ast.hidden_names.push_back(item.substr(0, eq));
      ast.init.push_back(std::stoll(item.substr(eq + 3)));
      p = semi + 1;
    }
  }
  program_detail::expect_prefix(lines[ln], "    ys = []");
  ++ln;
  {
    const std::string rest =
        program_detail::expect_prefix(lines[ln++], "    for i in range(");
    ast.seq_len = std::stoi(rest);
  }
  if (num_inputs == 1) {
    program_detail::expect_prefix(lines[ln++], "        x = s[i]");
    ast.input_names = {"x"};
  } else {
    const std::string reads = program_detail::expect_prefix(lines[ln++], "        ");
    // `c = s[i]; d = t[i];`
    const auto semi = reads.find(';');
    const auto eq1 = reads.find(" = ");
    ast.input_names.push_back(reads.substr(0, eq1));
    const std::string second = reads.substr(semi + 2);
    const auto eq2 = second.find(" = ");
    ast.input_names.push_back(second.substr(0, eq2));
  }

  std::vector<std::string> names = ast.hidden_names;
  names.insert(names.end(), ast.input_names.begin(), ast.input_names.end());

  // next_* lines may appear in any order (updates are simultaneous)
  ast.updates.assign(ast.hidden_names.size(), nullptr);
  for (std::size_t i = 0; i < ast.hidden_names.size(); ++i) {
    const std::string rest =
        program_detail::expect_prefix(lines[ln++], "        next_");
    const auto eq = rest.find(" = ");
    if (eq == std::string::npos)
      throw ProgramError("parse_program: bad update line");
    const std::string name = rest.substr(0, eq);
    std::size_t slot = ast.hidden_names.size();
    for (std::size_t v = 0; v < ast.hidden_names.size(); ++v)
      if (ast.hidden_names[v] == name) slot = v;
    if (slot == ast.hidden_names.size() || ast.updates[slot])
      throw ProgramError("parse_program: unexpected update for " + name);
    ast.updates[slot] = parse_expression(rest.substr(eq + 3), names);
  }
  ++ln;  // assignment block `a = next_a;...`
  {
    const std::string rest =
        program_detail::expect_prefix(lines[ln++], "        y = ");
    ast.output = parse_expression(rest, names);
  }
  program_detail::expect_prefix(lines[ln++], "        ys.append(y)");
  program_detail::expect_prefix(lines[ln++], "    return ys");
  return ast;
}

// ---- interpretation ---------------------------------------------------------------

inline std::vector<long long> interpret(const ProgramAst& ast,
                                        const std::vector<std::vector<long long>>& inputs) {
  if (static_cast<int>(inputs.size()) != ast.num_inputs())
    throw ProgramError("interpret: arity mismatch");
  for (const auto& list : inputs)
    if (static_cast<int>(list.size()) != ast.seq_len)
      throw ProgramError("interpret: sequence length mismatch");

  const int h = ast.num_hidden();
  std::vector<long long> env(static_cast<std::size_t>(h + ast.num_inputs()));
  for (int i = 0; i < h; ++i)
    env[static_cast<std::size_t>(i)] = ast.init[static_cast<std::size_t>(i)];
  std::vector<long long> next(static_cast<std::size_t>(h));
  std::vector<long long> out;
  out.reserve(static_cast<std::size_t>(ast.seq_len));
  for (int t = 0; t < ast.seq_len; ++t) {
    for (int k = 0; k < ast.num_inputs(); ++k)
      env[static_cast<std::size_t>(h + k)] =
          inputs[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)];
    for (int i = 0; i < h; ++i)
      if (!eval_expr(*ast.updates[static_cast<std::size_t>(i)], env,
                     next[static_cast<std::size_t>(i)]))
        throw ProgramError("interpret: undefined operation (modulo by zero)");
    for (int i = 0; i < h; ++i)
      env[static_cast<std::size_t>(i)] = next[static_cast<std::size_t>(i)];
    long long y = 0;
    if (!eval_expr(*ast.output, env, y))
      throw ProgramError("interpret: undefined operation (modulo by zero)");
    out.push_back(y);
  }
  return out;
}

struct VerifyResult {
  double accuracy = 0.0;
  bool solved = false;
};

// Fresh-oracle verification: solved iff every element matches.
inline VerifyResult verify(const ProgramAst& ast, const TaskSpec& task,
                           int test_count = 65536, std::uint64_t seed = 1) {
  const Dataset ds = generate_dataset(task, test_count, seed);
  long long correct = 0, total = 0;
  for (std::size_t s = 0; s < ds.inputs.size(); ++s) {
    std::vector<long long> got;
    try {
      got = interpret(ast, ds.inputs[s]);
    } catch (const ProgramError&) {
      got.assign(static_cast<std::size_t>(task.seq_len),
                 std::numeric_limits<long long>::min());
    }
    for (int t = 0; t < task.seq_len; ++t) {
      if (got[static_cast<std::size_t>(t)] ==
          ds.targets[s][static_cast<std::size_t>(t)])
        ++correct;
      ++total;
    }
  }
  VerifyResult res;
  res.accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  res.solved = res.accuracy == 1.0;
  return res;
}

inline void save_program(const std::string& text, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ProgramError("save_program: cannot open " + path);
  out << text;
}

inline std::string load_program_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ProgramError("load_program_text: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return text;
}

}  // namespace rnnsynth
