#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rnnsynth {

// Expression nodes over integer arithmetic. The unary/binary sets are the
// regression alphabet; kXor is a surface operator introduced when bit sums
// mod 2 are rewritten for emission, it never appears in search.
enum class Op {
  kVar,
  kConst,
  kInc,        // x + 1
  kDec,        // x - 1
  kNeg,        // -x
  kHeaviside,  // 1 if x > 0 else 0
  kDirac,      // 1 if x == 0 else 0
  kAbs,
  kAdd,
  kSub,
  kMul,
  kMod,  // floor modulo, sign of the divisor
  kXor,
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  Op op = Op::kConst;
  int var = -1;
  long long value = 0;
  ExprPtr a, b;
};

inline ExprPtr make_var(int index) {
  auto e = std::make_shared<Expr>();
  e->op = Op::kVar;
  e->var = index;
  return e;
}
inline ExprPtr make_const(long long v) {
  auto e = std::make_shared<Expr>();
  e->op = Op::kConst;
  e->value = v;
  return e;
}
inline ExprPtr make_unary(Op op, ExprPtr a) {
  auto e = std::make_shared<Expr>();
  e->op = op;
  e->a = std::move(a);
  return e;
}
inline ExprPtr make_binary(Op op, ExprPtr a, ExprPtr b) {
  auto e = std::make_shared<Expr>();
  e->op = op;
  e->a = std::move(a);
  e->b = std::move(b);
  return e;
}

inline long long floor_mod(long long a, long long b) {
  const long long r = a % b;
  return (r != 0 && (r < 0) != (b < 0)) ? r + b : r;
}

// false on undefined results (modulo by zero)
inline bool eval_expr(const Expr& e, std::span<const long long> args,
                      long long& out) {
  long long x = 0, y = 0;
  switch (e.op) {
    case Op::kVar:
      out = args[static_cast<std::size_t>(e.var)];
      return true;
    case Op::kConst:
      out = e.value;
      return true;
    case Op::kInc:
    case Op::kDec:
    case Op::kNeg:
    case Op::kHeaviside:
    case Op::kDirac:
    case Op::kAbs:
      if (!eval_expr(*e.a, args, x)) return false;
      switch (e.op) {
        case Op::kInc: out = x + 1; break;
        case Op::kDec: out = x - 1; break;
        case Op::kNeg: out = -x; break;
        case Op::kHeaviside: out = x > 0 ? 1 : 0; break;
        case Op::kDirac: out = x == 0 ? 1 : 0; break;
        default: out = x < 0 ? -x : x; break;
      }
      return true;
    default:
      if (!eval_expr(*e.a, args, x) || !eval_expr(*e.b, args, y)) return false;
      switch (e.op) {
        case Op::kAdd: out = x + y; break;
        case Op::kSub: out = x - y; break;
        case Op::kMul: out = x * y; break;
        case Op::kXor: out = x ^ y; break;
        default:
          if (y == 0) return false;
          out = floor_mod(x, y);
          break;
      }
      return true;
  }
}

// ---- reverse polish notation ---------------------------------------------------

inline std::string to_rpn(const Expr& e, const std::vector<std::string>& names) {
  switch (e.op) {
    case Op::kVar: return names[static_cast<std::size_t>(e.var)];
    case Op::kConst: return std::to_string(e.value);
    case Op::kInc: return to_rpn(*e.a, names) + ">";
    case Op::kDec: return to_rpn(*e.a, names) + "<";
    case Op::kNeg: return to_rpn(*e.a, names) + "~";
    case Op::kHeaviside: return to_rpn(*e.a, names) + "H";
    case Op::kDirac: return to_rpn(*e.a, names) + "D";
    case Op::kAbs: return to_rpn(*e.a, names) + "A";
    case Op::kAdd: return to_rpn(*e.a, names) + to_rpn(*e.b, names) + "+";
    case Op::kSub: return to_rpn(*e.a, names) + to_rpn(*e.b, names) + "-";
    case Op::kMul: return to_rpn(*e.a, names) + to_rpn(*e.b, names) + "*";
    case Op::kMod: return to_rpn(*e.a, names) + to_rpn(*e.b, names) + "%";
    case Op::kXor: return to_rpn(*e.a, names) + to_rpn(*e.b, names) + "^";
  }
  return {};
}

// ---- infix rendering (the emitted-program surface syntax) -----------------------

// Precedence: comparisons < xor < additive < multiplicative < unary < atoms,
// matching the target language.
struct RenderContext {
  std::vector<std::string> names;
  int num_hidden = 0;  // names[0..num_hidden) are state variables
};

namespace expr_detail {

constexpr int kPrecCmp = 0;
constexpr int kPrecXor = 1;
constexpr int kPrecAdd = 2;
constexpr int kPrecMul = 3;
constexpr int kPrecUnary = 4;
constexpr int kPrecAtom = 5;

std::string render_prec(const Expr& e, const RenderContext& ctx, int min_prec);

struct Term {
  bool negative = false;
  const Expr* node = nullptr;
};

// flatten an Add/Sub spine into signed terms
inline void flatten_sum(const Expr& e, bool neg, std::vector<Term>& out) {
  if (e.op == Op::kAdd || e.op == Op::kSub) {
    flatten_sum(*e.a, neg, out);
    flatten_sum(*e.b, e.op == Op::kSub ? !neg : neg, out);
    return;
  }
  if (e.op == Op::kNeg) {
    flatten_sum(*e.a, !neg, out);
    return;
  }
  if (e.op == Op::kInc || e.op == Op::kDec) {
    flatten_sum(*e.a, neg, out);
    static const Expr one{Op::kConst, -1, 1, nullptr, nullptr};
    out.push_back({(e.op == Op::kDec) != neg, &one});
    return;
  }
  out.push_back({neg, &e});
}

inline bool references_input(const Expr& e, const RenderContext& ctx) {
  if (e.op == Op::kVar) return e.var >= ctx.num_hidden;
  if (e.a && references_input(*e.a, ctx)) return true;
  return e.b && references_input(*e.b, ctx);
}

inline std::string render_sum(const Expr& e, const RenderContext& ctx,
                              bool statement_level) {
  std::vector<Term> terms;
  flatten_sum(e, false, terms);
  std::string out;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto& t = terms[i];
    std::string sign;
    if (t.negative) {
      sign = "-";
    } else if (i == 0) {
      // at statement level a positive leading term carries an explicit plus
      // when it reads an input variable (surface convention of the programs)
      sign = statement_level && references_input(*t.node, ctx) ? "+" : "";
    } else {
      sign = "+";
    }
    out += sign + render_prec(*t.node, ctx, kPrecMul);
  }
  return out;
}

inline std::string render_xor(const Expr& e, const RenderContext& ctx) {
  if (e.op != Op::kXor) return render_prec(e, ctx, kPrecAdd);
  return render_xor(*e.a, ctx) + " ^ " + render_xor(*e.b, ctx);
}

// Heaviside/Dirac render as comparisons against a constant threshold.
inline void split_threshold(const Expr& arg, const Expr*& lhs, long long& k) {
  if (arg.op == Op::kSub && arg.b->op == Op::kConst) {
    lhs = arg.a.get();
    k = arg.b->value;
    return;
  }
  if (arg.op == Op::kAdd && arg.b->op == Op::kConst) {
    lhs = arg.a.get();
    k = -arg.b->value;
    return;
  }
  if (arg.op == Op::kDec) {
    lhs = arg.a.get();
    k = 1;
    return;
  }
  if (arg.op == Op::kInc) {
    lhs = arg.a.get();
    k = -1;
    return;
  }
  lhs = &arg;
  k = 0;
}

inline std::string render_prec(const Expr& e, const RenderContext& ctx,
                               int min_prec) {
  std::string body;
  int prec = kPrecAtom;
  switch (e.op) {
    case Op::kVar:
      body = ctx.names[static_cast<std::size_t>(e.var)];
      break;
    case Op::kConst:
      body = std::to_string(e.value);
      if (e.value < 0) prec = kPrecUnary;
      break;
    case Op::kAdd:
    case Op::kSub:
    case Op::kInc:
    case Op::kDec:
      body = render_sum(e, ctx, false);
      prec = kPrecAdd;
      break;
    case Op::kNeg:
      body = render_sum(e, ctx, false);  // "-x" via the sign logic
      prec = kPrecAdd;
      break;
    case Op::kMul:
      body = render_prec(*e.a, ctx, kPrecMul) + "*" +
             render_prec(*e.b, ctx, kPrecUnary);
      prec = kPrecMul;
      break;
    case Op::kMod:
      body = render_prec(*e.a, ctx, kPrecMul) + "%" +
             render_prec(*e.b, ctx, kPrecUnary);
      prec = kPrecMul;
      break;
    case Op::kXor:
      body = render_xor(e, ctx);
      prec = kPrecXor;
      break;
    case Op::kHeaviside: {
      const Expr* lhs = nullptr;
      long long k = 0;
      split_threshold(*e.a, lhs, k);
      body = render_prec(*lhs, ctx, kPrecXor) + ">" + std::to_string(k);
      prec = kPrecCmp;
      break;
    }
    case Op::kDirac: {
      const Expr* lhs = nullptr;
      long long k = 0;
      split_threshold(*e.a, lhs, k);
      body = render_prec(*lhs, ctx, kPrecXor) + "==" + std::to_string(k);
      prec = kPrecCmp;
      break;
    }
    case Op::kAbs:
      body = "abs(" + render_prec(*e.a, ctx, kPrecCmp) + ")";
      prec = kPrecAtom;
      break;
  }
  if (prec < min_prec) return "(" + body + ")";
  return body;
}

}  // namespace expr_detail

inline std::string render_expr(const Expr& e, const RenderContext& ctx) {
  using namespace expr_detail;
  switch (e.op) {
    case Op::kVar:
    case Op::kConst:
    case Op::kMul:
    case Op::kAdd:
    case Op::kSub:
    case Op::kInc:
    case Op::kDec:
    case Op::kNeg:
      return render_sum(e, ctx, true);
    default:
      return render_prec(e, ctx, kPrecCmp);
  }
}

// Substitute every occurrence of a variable with another expression.
inline ExprPtr substitute(const ExprPtr& e, int var, const ExprPtr& with) {
  if (!e) return e;
  if (e->op == Op::kVar) return e->var == var ? with : e;
  if (e->op == Op::kConst) return e;
  auto n = std::make_shared<Expr>(*e);
  n->a = substitute(e->a, var, with);
  n->b = substitute(e->b, var, with);
  return n;
}

// Remap variable indices (dropping eliminated inputs).
inline ExprPtr remap_vars(const ExprPtr& e, const std::vector<int>& map) {
  if (!e) return e;
  if (e->op == Op::kVar) return make_var(map[static_cast<std::size_t>(e->var)]);
  if (e->op == Op::kConst) return e;
  auto n = std::make_shared<Expr>(*e);
  n->a = remap_vars(e->a, map);
  n->b = remap_vars(e->b, map);
  return n;
}

// Rewrite (v1 + v2 + ... ) % 2 over bit variables as an xor chain; used at
// program-build time where variable kinds are known.
inline ExprPtr rewrite_bitsum_mod2(const ExprPtr& e,
                                   const std::vector<bool>& is_bit) {
  if (!e) return e;
  auto rewritten = std::make_shared<Expr>(*e);
  rewritten->a = rewrite_bitsum_mod2(e->a, is_bit);
  rewritten->b = rewrite_bitsum_mod2(e->b, is_bit);
  if (e->op != Op::kMod || !rewritten->b || rewritten->b->op != Op::kConst ||
      rewritten->b->value != 2)
    return rewritten;
  // collect pure-bit-variable sum
  std::vector<int> vars;
  const std::function<bool(const Expr&)> collect = [&](const Expr& s) {
    if (s.op == Op::kAdd) return collect(*s.a) && collect(*s.b);
    if (s.op == Op::kVar && is_bit[static_cast<std::size_t>(s.var)]) {
      vars.push_back(s.var);
      return true;
    }
    return false;
  };
  if (!collect(*rewritten->a) || vars.size() < 2) return rewritten;
  ExprPtr chain = make_var(vars[0]);
  for (std::size_t i = 1; i < vars.size(); ++i)
    chain = make_binary(Op::kXor, chain, make_var(vars[i]));
  return chain;
}

}  // namespace rnnsynth
