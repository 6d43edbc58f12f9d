// Shared random-instance generators for the property and acceptance suites.
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "rnnsynth/expr.hpp"
#include "rnnsynth/program.hpp"
#include "rnnsynth/rng.hpp"

namespace testgen {

// Random matrix with prescribed Jordan structure under an orthogonal
// similarity (the whitened regime the kernel thresholds assume); distinct
// eigenvalues are spaced beyond the grouping radius.
inline Eigen::MatrixXd jordan_structured(rnnsynth::Rng& rng, int n,
                                         double perturb) {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  int pos = 0;
  double next_lambda = rng.uniform_int(0, 1) == 0 ? -6.0 : -5.0;
  while (pos < n) {
    const int remaining = n - pos;
    const int kind = static_cast<int>(rng.uniform_int(0, 2));
    if (kind == 2 && remaining >= 2) {
      const double a = next_lambda;
      const double b = 2.0 + rng.uniform(0.0, 1.0);
      j(pos, pos) = a;
      j(pos, pos + 1) = -b;
      j(pos + 1, pos) = b;
      j(pos + 1, pos + 1) = a;
      pos += 2;
    } else {
      const int size =
          std::min<int>(remaining, 1 + static_cast<int>(rng.uniform_int(0, 2)));
      for (int k = 0; k < size; ++k) {
        j(pos + k, pos + k) = next_lambda;
        if (k + 1 < size) j(pos + k, pos + k + 1) = 1.0;
      }
      pos += size;
    }
    next_lambda += 4.0 + rng.uniform(0.0, 1.0);
  }
  Eigen::MatrixXd t(n, n);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < n; ++c) t(i, c) = rng.normal();
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(t);
  t = qr.householderQ();
  Eigen::MatrixXd w = t * j * t.transpose();
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < n; ++c) w(i, c) += rng.uniform(-perturb, perturb);
  return w;
}

// Random affine lattice sample with known geometry.
struct LatticeInstance {
  Eigen::MatrixXd points;        // noisy observations
  Eigen::MatrixXd clean_points;  // exact lattice positions
  Eigen::MatrixXd basis;
  double true_det = 0.0;
};

inline LatticeInstance lattice_instance(rnnsynth::Rng& rng, int n, int d,
                                        int code_lo, int code_hi,
                                        double keep_fraction, double noise,
                                        double max_condition) {
  std::vector<std::vector<long long>> codes;
  std::vector<long long> cur(static_cast<std::size_t>(d), code_lo);
  while (true) {
    if (rng.next_real() < keep_fraction) codes.push_back(cur);
    int i = 0;
    for (; i < d; ++i) {
      if (++cur[static_cast<std::size_t>(i)] <= code_hi) break;
      cur[static_cast<std::size_t>(i)] = code_lo;
    }
    if (i == d) break;
  }
  Eigen::MatrixXd a(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::VectorXd s(d);
  s(0) = 1.0;
  for (int i = 1; i < d; ++i)
    s(i) = 1.0 + (max_condition - 1.0) * rng.next_real() / 4.0;
  LatticeInstance inst;
  inst.basis = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  inst.true_det = std::sqrt((inst.basis.transpose() * inst.basis).determinant());
  Eigen::VectorXd offset(n);
  for (int i = 0; i < n; ++i) offset(i) = rng.uniform(-2.0, 2.0);
  inst.points.resize(n, static_cast<int>(codes.size()));
  inst.clean_points.resize(n, static_cast<int>(codes.size()));
  for (std::size_t j = 0; j < codes.size(); ++j) {
    Eigen::VectorXd k(d);
    for (int i = 0; i < d; ++i)
      k(i) = static_cast<double>(codes[j][static_cast<std::size_t>(i)]);
    const Eigen::VectorXd clean = inst.basis * k + offset;
    inst.clean_points.col(static_cast<int>(j)) = clean;
    Eigen::VectorXd p = clean;
    for (int i = 0; i < n; ++i) p(i) += rng.normal(0.0, noise);
    inst.points.col(static_cast<int>(j)) = p;
  }
  return inst;
}

// Random emitted-program AST for differential interpreter testing. Kept to
// bounded growth: multiplications only by small constants, modulo only by
// positive constants.
inline rnnsynth::ProgramAst random_program(rnnsynth::Rng& rng) {
  using namespace rnnsynth;
  const int h = 1 + static_cast<int>(rng.uniform_int(0, 2));
  const int inputs = 1 + static_cast<int>(rng.uniform_int(0, 1));
  const int nv = h + inputs;

  const std::function<ExprPtr(int)> gen = [&](int depth) -> ExprPtr {
    if (depth <= 0 || rng.next_real() < 0.3) {
      if (rng.next_real() < 0.7)
        return make_var(static_cast<int>(rng.uniform_int(0, nv - 1)));
      return make_const(rng.uniform_int(0, 3));
    }
    switch (rng.uniform_int(0, 9)) {
      case 0:
        return make_binary(Op::kAdd, gen(depth - 1), gen(depth - 1));
      case 1:
        return make_binary(Op::kSub, gen(depth - 1), gen(depth - 1));
      case 2:
        return make_binary(Op::kMul, make_const(rng.uniform_int(2, 3)),
                           gen(depth - 1));
      case 3:
        return make_binary(Op::kMod, gen(depth - 1),
                           make_const(rng.uniform_int(2, 5)));
      case 4:
        return make_binary(Op::kXor, gen(depth - 1), gen(depth - 1));
      case 5:
        return make_unary(Op::kHeaviside, gen(depth - 1));
      case 6:
        return make_unary(Op::kDirac, gen(depth - 1));
      case 7:
        return make_unary(Op::kAbs, gen(depth - 1));
      case 8:
        return make_unary(Op::kNeg, gen(depth - 1));
      default:
        return make_unary(rng.uniform_int(0, 1) == 0 ? Op::kInc : Op::kDec,
                          gen(depth - 1));
    }
  };

  std::vector<ExprPtr> updates;
  for (int i = 0; i < h; ++i) updates.push_back(gen(3));
  Code init(static_cast<std::size_t>(h));
  for (auto& v : init) v = rng.uniform_int(-3, 3);
  std::vector<bool> kinds(static_cast<std::size_t>(nv), false);
  return build_program(updates, gen(3), init, inputs, 10, kinds);
}

}  // namespace testgen
