#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "rnnsynth/expr.hpp"

namespace rnnsynth {

class SymregError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RegressionProblem {
  std::vector<std::pair<std::vector<long long>, long long>> rows;
  std::vector<std::string> var_names;
  std::vector<bool> var_is_bit;
  int num_hidden = 0;  // leading vars are state components (for rendering)
};

struct BruteForceConfig {
  int max_len = 6;
  int row_cap = 100;
  long long fill_cap = 10'000'000;  // fillings per template
  std::vector<long long> constants = {0, 1, 2, 3};
};

struct RegressionOutcome {
  ExprPtr expr;
  std::string method;          // linear | dnf | bitsum | brute | fallback
  bool exact = false;          // reproduces every row
  bool incomplete_table = false;
};

inline RenderContext render_context(const RegressionProblem& p) {
  return RenderContext{p.var_names, p.num_hidden};
}

namespace symreg_detail {

inline bool matches_all(const Expr& e,
                        const std::vector<std::pair<std::vector<long long>, long long>>& rows) {
  long long out = 0;
  for (const auto& [in, y] : rows) {
    if (!eval_expr(e, in, out) || out != y) return false;
  }
  return true;
}

}  // namespace symreg_detail

// ---- linear regression with integer rounding -------------------------------------

// Least-squares affine fit, coefficients rounded to integers, accepted only if
// the rounded form reproduces every row; x*0 terms dropped, x*1 simplified.
inline std::optional<ExprPtr> fit_linear_integer(const RegressionProblem& p) {
  if (p.rows.empty()) throw SymregError("fit_linear_integer: no rows");
  const int nv = static_cast<int>(p.var_names.size());
  const auto rows = static_cast<int>(p.rows.size());
  Eigen::MatrixXd x(rows, nv + 1);
  Eigen::VectorXd y(rows);
  for (int r = 0; r < rows; ++r) {
    for (int v = 0; v < nv; ++v)
      x(r, v) = static_cast<double>(p.rows[static_cast<std::size_t>(r)].first[static_cast<std::size_t>(v)]);
    x(r, nv) = 1.0;
    y(r) = static_cast<double>(p.rows[static_cast<std::size_t>(r)].second);
  }
  const Eigen::VectorXd beta = x.colPivHouseholderQr().solve(y);
  std::vector<long long> coef(static_cast<std::size_t>(nv) + 1);
  for (int v = 0; v <= nv; ++v)
    coef[static_cast<std::size_t>(v)] = std::llround(beta(v));

  ExprPtr expr;
  for (int v = 0; v < nv; ++v) {
    const long long c = coef[static_cast<std::size_t>(v)];
    if (c == 0) continue;
    ExprPtr term = make_var(v);
    if (std::llabs(c) != 1)
      term = make_binary(Op::kMul, make_const(std::llabs(c)), term);
    if (!expr)
      expr = c > 0 ? term : make_unary(Op::kNeg, term);
    else
      expr = make_binary(c > 0 ? Op::kAdd : Op::kSub, expr, term);
  }
  const long long k = coef[static_cast<std::size_t>(nv)];
  if (!expr)
    expr = make_const(k);
  else if (k != 0)
    expr = make_binary(k > 0 ? Op::kAdd : Op::kSub, expr,
                       make_const(std::llabs(k)));
  if (!symreg_detail::matches_all(*expr, p.rows)) return std::nullopt;
  return expr;
}

// ---- brute-force RPN search --------------------------------------------------------

namespace symreg_detail {

// All syntactically valid type strings ('0' operand, '1' unary, '2' binary)
// up to max_len, in (length, lexicographic) order.
inline std::vector<std::string> valid_templates(int max_len) {
  std::vector<std::string> out;
  for (int len = 1; len <= max_len; ++len) {
    std::string cur(static_cast<std::size_t>(len), '0');
    std::vector<int> digits(static_cast<std::size_t>(len), 0);
    while (true) {
      int stack = 0;
      bool ok = true;
      for (int i = 0; i < len && ok; ++i) {
        switch (digits[static_cast<std::size_t>(i)]) {
          case 0: ++stack; break;
          case 1: ok = stack >= 1; break;
          default: ok = stack >= 2; --stack; break;
        }
      }
      if (ok && stack == 1) {
        for (int i = 0; i < len; ++i)
          cur[static_cast<std::size_t>(i)] = static_cast<char>('0' + digits[static_cast<std::size_t>(i)]);
        out.push_back(cur);
      }
      int i = len - 1;
      while (i >= 0 && digits[static_cast<std::size_t>(i)] == 2) digits[static_cast<std::size_t>(i--)] = 0;
      if (i < 0) break;
      ++digits[static_cast<std::size_t>(i)];
    }
  }
  return out;
}

constexpr Op kUnaryOps[] = {Op::kInc, Op::kDec,     Op::kNeg,
                            Op::kHeaviside, Op::kDirac, Op::kAbs};
constexpr Op kBinaryOps[] = {Op::kAdd, Op::kMul, Op::kSub, Op::kMod};

}  // namespace symreg_detail

// Enumerates templates by length then lexicographically, and all slot fillings
// in mixed-radix order (variables before constants, operators in the fixed
// alphabet order); the first expression exact on the capped row sample and
// re-verified on the full table wins. Exhausted budget falls back to the bare
// first variable, marked unverified.
inline RegressionOutcome brute_force_rpn(const RegressionProblem& p,
                                         const BruteForceConfig& cfg = {}) {
  using namespace symreg_detail;
  const int nv = static_cast<int>(p.var_names.size());
  const int n0 = nv + static_cast<int>(cfg.constants.size());

  std::vector<std::pair<std::vector<long long>, long long>> sample = p.rows;
  if (static_cast<int>(sample.size()) > cfg.row_cap)
    sample.resize(static_cast<std::size_t>(cfg.row_cap));

  static std::map<int, std::vector<std::string>> template_cache;
  auto it = template_cache.find(cfg.max_len);
  if (it == template_cache.end())
    it = template_cache.emplace(cfg.max_len, valid_templates(cfg.max_len)).first;
  const auto& templates = it->second;

  std::vector<long long> stack(static_cast<std::size_t>(cfg.max_len));
  for (const auto& tmpl : templates) {
    const int len = static_cast<int>(tmpl.size());
    std::vector<int> radix(static_cast<std::size_t>(len));
    for (int i = 0; i < len; ++i)
      radix[static_cast<std::size_t>(i)] =
          tmpl[static_cast<std::size_t>(i)] == '0' ? n0 : tmpl[static_cast<std::size_t>(i)] == '1' ? 6 : 4;
    std::vector<int> choice(static_cast<std::size_t>(len), 0);
    long long tried = 0;
    while (true) {
      if (++tried > cfg.fill_cap) break;
      // evaluate the candidate on the sample rows
      bool all_match = true;
      for (const auto& [in, target] : sample) {
        int sp = 0;
        bool defined = true;
        for (int i = 0; i < len && defined; ++i) {
          const int c = choice[static_cast<std::size_t>(i)];
          switch (tmpl[static_cast<std::size_t>(i)]) {
            case '0':
              stack[static_cast<std::size_t>(sp++)] =
                  c < nv ? in[static_cast<std::size_t>(c)]
                         : cfg.constants[static_cast<std::size_t>(c - nv)];
              break;
            case '1': {
              long long& x = stack[static_cast<std::size_t>(sp - 1)];
              switch (kUnaryOps[c]) {
                case Op::kInc: x = x + 1; break;
                case Op::kDec: x = x - 1; break;
                case Op::kNeg: x = -x; break;
                case Op::kHeaviside: x = x > 0 ? 1 : 0; break;
                case Op::kDirac: x = x == 0 ? 1 : 0; break;
                default: x = x < 0 ? -x : x; break;
              }
              break;
            }
            default: {
              const long long rhs = stack[static_cast<std::size_t>(--sp)];
              long long& lhs = stack[static_cast<std::size_t>(sp - 1)];
              switch (kBinaryOps[c]) {
                case Op::kAdd: lhs = lhs + rhs; break;
                case Op::kMul: lhs = lhs * rhs; break;
                case Op::kSub: lhs = lhs - rhs; break;
                default:
                  if (rhs == 0) defined = false;
                  else lhs = floor_mod(lhs, rhs);
                  break;
              }
              break;
            }
          }
        }
        if (!defined || stack[0] != target) {
          all_match = false;
          break;
        }
      }
      if (all_match) {
        // build the expression and re-verify on the full table
        std::vector<ExprPtr> build;
        for (int i = 0; i < len; ++i) {
          const int c = choice[static_cast<std::size_t>(i)];
          switch (tmpl[static_cast<std::size_t>(i)]) {
            case '0':
              build.push_back(c < nv ? make_var(c)
                                     : make_const(cfg.constants[static_cast<std::size_t>(c - nv)]));
              break;
            case '1': {
              auto a = build.back();
              build.pop_back();
              build.push_back(make_unary(kUnaryOps[c], std::move(a)));
              break;
            }
            default: {
              auto b = build.back();
              build.pop_back();
              auto a = build.back();
              build.pop_back();
              build.push_back(make_binary(kBinaryOps[c], std::move(a), std::move(b)));
              break;
            }
          }
        }
        if (matches_all(*build[0], p.rows))
          return {build[0], "brute", true, false};
      }
      // next filling
      int i = len - 1;
      while (i >= 0 && choice[static_cast<std::size_t>(i)] + 1 >= radix[static_cast<std::size_t>(i)])
        choice[static_cast<std::size_t>(i--)] = 0;
      if (i < 0) break;
      ++choice[static_cast<std::size_t>(i)];
    }
  }
  return {make_var(0), "fallback", false, false};
}

// ---- Boolean candidates --------------------------------------------------------------

// Disjunctive normal form over the observed rows; minterms are disjoint so the
// disjunction is a plain sum of products.
inline std::optional<RegressionOutcome> boolean_dnf(const RegressionProblem& p) {
  const int nv = static_cast<int>(p.var_names.size());
  for (bool b : p.var_is_bit)
    if (!b) return std::nullopt;
  for (const auto& [in, y] : p.rows)
    if (y != 0 && y != 1) return std::nullopt;

  std::set<std::vector<long long>> ones, seen;
  for (const auto& [in, y] : p.rows) {
    seen.insert(in);
    if (y == 1) ones.insert(in);
  }
  const bool complete =
      seen.size() == (static_cast<std::size_t>(1) << nv);

  ExprPtr expr;
  if (ones.empty()) {
    expr = make_const(0);
  } else if (ones.size() == seen.size() && complete) {
    expr = make_const(1);
  } else {
    for (const auto& row : ones) {
      ExprPtr term;
      for (int v = 0; v < nv; ++v) {
        ExprPtr lit = row[static_cast<std::size_t>(v)] == 1
                          ? make_var(v)
                          : make_binary(Op::kSub, make_const(1), make_var(v));
        term = term ? make_binary(Op::kMul, term, std::move(lit)) : std::move(lit);
      }
      expr = expr ? make_binary(Op::kAdd, expr, std::move(term)) : std::move(term);
    }
  }
  RegressionOutcome out{expr, "dnf", symreg_detail::matches_all(*expr, p.rows),
                        !complete};
  if (!out.exact) return std::nullopt;
  return out;
}

// If the output depends only on the bit sum, regress the integer sub-problem
// over the sum and substitute the sum back in.
inline std::optional<RegressionOutcome> symmetric_bitsum(
    const RegressionProblem& p, const BruteForceConfig& brute_cfg = {}) {
  const int nv = static_cast<int>(p.var_names.size());
  if (nv < 2) return std::nullopt;
  for (bool b : p.var_is_bit)
    if (!b) return std::nullopt;
  std::map<long long, long long> by_sum;
  for (const auto& [in, y] : p.rows) {
    long long s = 0;
    for (long long v : in) s += v;
    const auto it = by_sum.find(s);
    if (it == by_sum.end())
      by_sum.emplace(s, y);
    else if (it->second != y)
      return std::nullopt;  // not a function of the bit sum
  }
  RegressionProblem sub;
  sub.var_names = {"s"};
  sub.var_is_bit = {false};
  for (const auto& [s, y] : by_sum) sub.rows.push_back({{s}, y});

  ExprPtr found;
  if (auto lin = fit_linear_integer(sub)) {
    found = *lin;
  } else {
    auto brute = brute_force_rpn(sub, brute_cfg);
    if (!brute.exact) return std::nullopt;
    found = brute.expr;
  }
  ExprPtr sum = make_var(0);
  for (int v = 1; v < nv; ++v) sum = make_binary(Op::kAdd, sum, make_var(v));
  ExprPtr expr = substitute(found, 0, sum);
  if (!symreg_detail::matches_all(*expr, p.rows)) return std::nullopt;
  return RegressionOutcome{expr, "bitsum", true, false};
}

// ---- combined regression ---------------------------------------------------------------

namespace symreg_detail {

// Variables provably irrelevant on the table: for every observed row the
// value-flipped counterpart is also observed with an equal output. Only bit
// variables are dropped (counterparts are well-defined).
inline std::vector<int> provably_irrelevant(const RegressionProblem& p) {
  std::vector<int> out;
  const int nv = static_cast<int>(p.var_names.size());
  std::map<std::vector<long long>, long long> table(p.rows.begin(), p.rows.end());
  for (int v = 0; v < nv; ++v) {
    if (!p.var_is_bit[static_cast<std::size_t>(v)]) continue;
    bool droppable = true;
    for (const auto& [in, y] : table) {
      std::vector<long long> flipped = in;
      flipped[static_cast<std::size_t>(v)] ^= 1;
      const auto it = table.find(flipped);
      if (it == table.end() || it->second != y) {
        droppable = false;
        break;
      }
    }
    if (droppable) out.push_back(v);
  }
  return out;
}

}  // namespace symreg_detail

struct RegressConfig {
  BruteForceConfig brute;
};

// Runs the applicable candidates (linear, DNF, symmetric bit-sum, brute force
// as a last resort) and returns the shortest exact expression by rendered
// character count.
inline RegressionOutcome regress(const RegressionProblem& problem,
                                 const RegressConfig& cfg = {}) {
  // consistency check + dedupe
  RegressionProblem p = problem;
  {
    std::map<std::vector<long long>, long long> table;
    for (const auto& [in, y] : p.rows) {
      const auto it = table.find(in);
      if (it != table.end() && it->second != y)
        throw SymregError("regress: inconsistent rows");
      table.emplace(in, y);
    }
    p.rows.assign(table.begin(), table.end());
  }
  if (p.rows.empty()) throw SymregError("regress: empty problem");

  // work on the reduced problem when variables are provably irrelevant
  std::vector<int> keep;
  {
    const auto drop = symreg_detail::provably_irrelevant(p);
    std::set<int> dropset(drop.begin(), drop.end());
    // never drop everything
    if (dropset.size() == p.var_names.size()) dropset.clear();
    for (int v = 0; v < static_cast<int>(p.var_names.size()); ++v)
      if (!dropset.count(v)) keep.push_back(v);
  }
  RegressionProblem reduced;
  reduced.num_hidden = 0;
  for (int v : keep) {
    reduced.var_names.push_back(p.var_names[static_cast<std::size_t>(v)]);
    reduced.var_is_bit.push_back(p.var_is_bit[static_cast<std::size_t>(v)]);
    if (v < p.num_hidden) ++reduced.num_hidden;
  }
  {
    std::map<std::vector<long long>, long long> table;
    for (const auto& [in, y] : p.rows) {
      std::vector<long long> r;
      for (int v : keep) r.push_back(in[static_cast<std::size_t>(v)]);
      table[r] = y;  // duplicates agree by construction
    }
    reduced.rows.assign(table.begin(), table.end());
  }
  std::vector<int> back_map(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) back_map[i] = keep[static_cast<std::size_t>(i)];

  const RenderContext ctx = render_context(p);
  std::vector<RegressionOutcome> candidates;
  auto add = [&](std::optional<RegressionOutcome> o) {
    if (o && o->exact) {
      o->expr = remap_vars(o->expr, back_map);
      candidates.push_back(std::move(*o));
    }
  };

  if (auto lin = fit_linear_integer(reduced))
    add(RegressionOutcome{*lin, "linear", true, false});
  {
    // constant tables have a one-token answer
    const long long c0 = reduced.rows.front().second;
    bool constant = true;
    for (const auto& [in, y] : reduced.rows) constant = constant && y == c0;
    if (constant) add(RegressionOutcome{make_const(c0), "linear", true, false});
  }
  add(boolean_dnf(reduced));
  add(symmetric_bitsum(reduced, cfg.brute));
  if (candidates.empty()) {
    auto brute = brute_force_rpn(reduced, cfg.brute);
    brute.expr = remap_vars(brute.expr, back_map);
    if (brute.exact) candidates.push_back(std::move(brute));
    else return brute;  // flagged fallback
  }

  const auto method_rank = [](const std::string& m) {
    if (m == "linear") return 0;
    if (m == "bitsum") return 1;
    if (m == "dnf") return 2;
    return 3;
  };
  std::size_t best = 0;
  std::size_t best_len = render_expr(*candidates[0].expr, ctx).size();
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const std::size_t len = render_expr(*candidates[i].expr, ctx).size();
    if (len < best_len ||
        (len == best_len && method_rank(candidates[i].method) <
                                method_rank(candidates[best].method))) {
      best = i;
      best_len = len;
    }
  }
  return candidates[best];
}

}  // namespace rnnsynth
