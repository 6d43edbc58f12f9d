#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rnnsynth/jordan.hpp"
#include "rnnsynth/rnn.hpp"

namespace rnnsynth {

struct NormalizerConfig {
  double whiten_eps = 0.1;
  double jnf_eps = 0.7;
  double toeplitz_eps = 0.0001;
  double debias_eps = 0.1;
  double quant_eps = 0.01;
  // behavioral guard shared by all pre-quantization hammers: a hammer whose
  // max output deviation exceeds this is reverted with a notice
  double max_deviation = 1e-3;
  // residual allowed when treating a deep f as affine-in-effect
  double affine_detect_tol = 1e-3;
  int probe_sequences = 256;
  std::set<std::string> skip;  // hammer names to leave out
};

struct HiddenTransform {
  Eigen::MatrixXd a;
  Eigen::MatrixXd a_inv;
};

inline HiddenTransform make_transform(const Eigen::MatrixXd& a) {
  HiddenTransform t{a, a.inverse()};
  const double resid =
      (t.a * t.a_inv - Eigen::MatrixXd::Identity(a.rows(), a.cols()))
          .cwiseAbs()
          .maxCoeff();
  if (!std::isfinite(resid) || resid > 1e-6)
    throw RnnError("hidden transform is numerically singular");
  return t;
}

// h -> A h leaves the network's input-output map unchanged: post-apply A to
// f's final layer (weights and bias), pre-apply A^{-1} to the h-columns of
// f's first layer and to g's first layer.
inline RnnModel apply_hidden_transform(const RnnModel& model,
                                       const HiddenTransform& t) {
  const int n = model.arch.n;
  if (t.a.rows() != n) throw RnnError("apply_hidden_transform: bad shape");
  RnnModel out = model;
  auto& f_last = out.f.layers.back();
  f_last.w = t.a * f_last.w;
  f_last.b = t.a * f_last.b;
  auto& f_first = out.f.layers.front();
  f_first.w.leftCols(n) = f_first.w.leftCols(n) * t.a_inv;
  auto& g_first = out.g.layers.front();
  g_first.w = g_first.w * t.a_inv;
  return out;
}

// ---- Whitening ---------------------------------------------------------------

// Closest-to-identity map taking the uncentered hidden covariance to the
// identity; directions with covariance below eps are left unscaled.
inline HiddenTransform whitening_transform(const HiddenTrace& trace,
                                           double eps = 0.1) {
  const auto cols = static_cast<double>(trace.states.cols());
  if (cols == 0) throw RnnError("whiten: empty trace");
  const Eigen::MatrixXd cov =
      trace.states * trace.states.transpose() / cols;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  Eigen::VectorXd scale = es.eigenvalues();
  for (int i = 0; i < scale.size(); ++i)
    scale(i) = scale(i) < eps ? 1.0 : 1.0 / std::sqrt(scale(i));
  const Eigen::MatrixXd a =
      es.eigenvectors() * scale.asDiagonal() * es.eigenvectors().transpose();
  return make_transform(a);
}

inline RnnModel whiten(const RnnModel& model, const HiddenTrace& trace,
                       double eps = 0.1) {
  return apply_hidden_transform(model, whitening_transform(trace, eps));
}

// ---- linearization helpers ---------------------------------------------------

// f's layer matrices multiplied with the rectifiers removed; columns split as
// [W | V] over (h, x).
inline Eigen::MatrixXd linearized_f(const RnnModel& model) {
  Eigen::MatrixXd p = model.f.layers.front().w;
  for (std::size_t l = 1; l < model.f.layers.size(); ++l)
    p = model.f.layers[l].w * p;
  return p;
}

inline Eigen::VectorXd linearized_f_bias(const RnnModel& model) {
  Eigen::VectorXd b = model.f.layers.front().b;
  for (std::size_t l = 1; l < model.f.layers.size(); ++l)
    b = model.f.layers[l].w * b + model.f.layers[l].b;
  return b;
}

// Max deviation between f and its rectifier-free linearization over the trace
// states paired with a probe of inputs.
inline double affine_residual(const RnnModel& model, const HiddenTrace& trace,
                              const std::vector<Eigen::MatrixXd>& inputs) {
  if (model.arch.d_f == 1) return 0.0;
  const int n = model.arch.n;
  const Eigen::MatrixXd p = linearized_f(model);
  const Eigen::VectorXd pb = linearized_f_bias(model);
  double worst = 0.0;
  const int count = trace.count;
  const int len = trace.seq_len;
  for (int s = 0; s < count; ++s) {
    Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
    for (int t = 0; t < len; ++t) {
      Eigen::VectorXd u(n + model.num_inputs);
      u.head(n) = h;
      u.tail(model.num_inputs) = inputs[static_cast<std::size_t>(t)].col(s);
      const Eigen::VectorXd exact = model.f.forward(u);
      const Eigen::VectorXd lin = p * u + pb;
      worst = std::max(worst, (exact - lin).cwiseAbs().maxCoeff());
      h = exact;
    }
  }
  return worst;
}

// ---- Jordan normal form hammer ------------------------------------------------

// A = T^{-1} so that W' = T^{-1} W T ~ J; exact integer structure is left to
// the quantization hammer.
inline RnnModel jordan_hammer(const RnnModel& model, double eps,
                              JordanDecomposition* decomp_out = nullptr) {
  const Eigen::MatrixXd w = linearized_f(model).leftCols(model.arch.n);
  JordanDecomposition d = jordan_normal_form(w, eps);
  const RnnModel out = apply_hidden_transform(
      model, HiddenTransform{d.transform.inverse(), d.transform});
  if (decomp_out) *decomp_out = std::move(d);
  return out;
}

// ---- Toeplitz hammer -----------------------------------------------------------

namespace detail {

struct DetectedBlock {
  int start;
  int size;
  bool rotation;
};

// Recover the Jordan block layout from an (approximately) Jordan-form W.
inline std::vector<DetectedBlock> detect_blocks(const Eigen::MatrixXd& w,
                                                double tol = 1e-3) {
  const int n = static_cast<int>(w.rows());
  std::vector<DetectedBlock> blocks;
  int i = 0;
  auto coupled_chain = [&](int a) {  // superdiagonal one between a and a+1
    return a + 1 < n && std::abs(w(a, a + 1) - 1.0) <= tol &&
           std::abs(w(a + 1, a)) <= tol;
  };
  auto rotation_pair = [&](int a) {
    return a + 1 < n && std::abs(w(a, a) - w(a + 1, a + 1)) <= tol &&
           std::abs(w(a, a + 1) + w(a + 1, a)) <= tol &&
           std::abs(w(a + 1, a)) > tol;
  };
  while (i < n) {
    if (rotation_pair(i)) {
      blocks.push_back({i, 2, true});
      i += 2;
      continue;
    }
    int size = 1;
    while (coupled_chain(i + size - 1) && !rotation_pair(i + size - 1)) ++size;
    blocks.push_back({i, size, false});
    i += size;
  }
  return blocks;
}

// Upper-triangular Toeplitz matrix with first row coefficients a0..a_{L-1}.
inline Eigen::MatrixXd toeplitz_from(const Eigen::VectorXd& coef) {
  const auto len = static_cast<int>(coef.size());
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(len, len);
  for (int i = 0; i < len; ++i)
    for (int k = 0; i + k < len; ++k) t(i, i + k) = coef(k);
  return t;
}

}  // namespace detail

// Per Jordan block, the Toeplitz transform commuting with the block that turns
// the most numerically stable column of that block of V into a one-hot vector
// (stability = |bottom element|); identity if nothing exceeds eps.
inline RnnModel toeplitz_simplify(const RnnModel& model, double eps = 0.0001) {
  const int n = model.arch.n;
  const Eigen::MatrixXd lin = linearized_f(model);
  const Eigen::MatrixXd w = lin.leftCols(n);
  const Eigen::MatrixXd v = lin.rightCols(model.num_inputs);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  for (const auto& blk : detail::detect_blocks(w)) {
    if (blk.rotation) continue;
    const Eigen::MatrixXd vb = v.middleRows(blk.start, blk.size);
    int best_col = -1;
    double best = eps;
    for (int c = 0; c < vb.cols(); ++c)
      if (std::abs(vb(blk.size - 1, c)) > best) {
        best = std::abs(vb(blk.size - 1, c));
        best_col = c;
      }
    if (best_col < 0) continue;
    // solve for coefficients with A_block * v = e_last
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(blk.size);
    const Eigen::VectorXd col = vb.col(best_col);
    coef(0) = 1.0 / col(blk.size - 1);
    for (int i = blk.size - 2; i >= 0; --i) {
      double s = 0.0;
      for (int k = 0; k < blk.size - 1 - i; ++k) s += coef(k) * col(i + k);
      coef(blk.size - 1 - i) = -s / col(blk.size - 1);
    }
    a.block(blk.start, blk.start, blk.size, blk.size) =
        detail::toeplitz_from(coef);
  }
  return apply_hidden_transform(model, make_transform(a));
}

// ---- De-bias hammer ------------------------------------------------------------

// Remove b's component in W's eps-nullspace and absorb the one-step effect
// into g's first-layer bias. Requires affine f.
inline RnnModel debias(const RnnModel& model, double eps = 0.1) {
  if (model.arch.d_f != 1) throw RnnError("debias: requires d_f == 1");
  const int n = model.arch.n;
  RnnModel out = model;
  const Eigen::MatrixXd w = model.w_hh();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(w, Eigen::ComputeFullV);
  Eigen::VectorXd b_null = Eigen::VectorXd::Zero(n);
  const auto& s = svd.singularValues();
  for (int i = 0; i < n; ++i)
    if (i >= s.size() || s(i) < eps) {
      const Eigen::VectorXd dir = svd.matrixV().col(i);
      b_null += dir * dir.dot(model.f.layers.front().b);
    }
  out.f.layers.front().b -= b_null;
  out.g.layers.front().b += out.g.layers.front().w * b_null;
  return out;
}

// ---- Quantization ---------------------------------------------------------------

inline RnnModel quantize(const RnnModel& model, double eps = 0.01) {
  RnnModel out = model;
  auto snap = [eps](double x) {
    const double r = std::round(x);
    return std::abs(x - r) <= eps ? r : x;
  };
  for (auto mlp : {&out.f, &out.g})
    for (auto& l : mlp->layers) {
      l.w = l.w.unaryExpr(snap);
      l.b = l.b.unaryExpr(snap);
    }
  return out;
}

// ---- full sequence ---------------------------------------------------------------

struct HammerReport {
  std::string name;
  bool applied = false;
  bool reverted = false;
  std::string note;
  double max_deviation = 0.0;
};

struct NormalizeOutcome {
  RnnModel model;
  std::vector<HammerReport> reports;
  std::optional<JordanDecomposition> jordan;
};

// Whitening -> Jordan normal form -> Toeplitz -> De-bias -> Quantization, in
// that order. JNF/Toeplitz/De-bias only run when f is affine (or detected
// affine-in-effect); each pre-quantization hammer is reverted if it moves the
// probe outputs by more than cfg.max_deviation.
inline NormalizeOutcome normalize_all(const RnnModel& model, const Dataset& data,
                                      const NormalizerConfig& cfg = {}) {
  NormalizeOutcome res;
  res.model = model;

  const int probe_count =
      std::min<int>(cfg.probe_sequences, static_cast<int>(data.inputs.size()));
  const SequenceBatch probe = make_batch(data, 0, probe_count);
  const SequenceBatch full = make_batch(data);

  auto outputs = [&](const RnnModel& m) {
    return rnn_forward(m, probe.x, false).outputs;
  };
  Eigen::MatrixXd y_ref = outputs(res.model);

  auto guard = [&](const char* name, auto&& apply) {
    HammerReport rep;
    rep.name = name;
    if (cfg.skip.count(name)) {
      rep.note = "skipped: requested";
      res.reports.push_back(rep);
      return;
    }
    try {
      RnnModel next = apply(res.model);
      const Eigen::MatrixXd y_next = outputs(next);
      rep.max_deviation = (y_next - y_ref).cwiseAbs().maxCoeff();
      if (rep.max_deviation > cfg.max_deviation) {
        rep.reverted = true;
        rep.note = "deviation above guard, reverted";
      } else {
        rep.applied = true;
        res.model = std::move(next);
        y_ref = y_next;
      }
    } catch (const std::exception& e) {
      rep.note = e.what();
    }
    res.reports.push_back(rep);
  };

  bool affine = model.arch.d_f == 1;
  if (!affine) {
    const HiddenTrace probe_trace = rnn_forward(res.model, probe.x).trace;
    affine = affine_residual(res.model, probe_trace, probe.x) <
             cfg.affine_detect_tol;
  }

  guard("whitening", [&](const RnnModel& m) {
    const HiddenTrace trace = rnn_forward(m, full.x).trace;
    return whiten(m, trace, cfg.whiten_eps);
  });

  if (affine) {
    guard("jordan", [&](const RnnModel& m) {
      JordanDecomposition d;
      RnnModel next = jordan_hammer(m, cfg.jnf_eps, &d);
      res.jordan = std::move(d);
      return next;
    });
    guard("toeplitz",
          [&](const RnnModel& m) { return toeplitz_simplify(m, cfg.toeplitz_eps); });
    if (model.arch.d_f == 1)
      guard("debias", [&](const RnnModel& m) { return debias(m, cfg.debias_eps); });
    else
      res.reports.push_back({"debias", false, false, "skipped: d_f > 1", 0.0});
  } else {
    for (const char* name : {"jordan", "toeplitz", "debias"})
      res.reports.push_back(
          {name, false, false, "skipped: f is not affine-in-effect", 0.0});
  }

  {
    HammerReport rep;
    rep.name = "quantization";
    if (cfg.skip.count(rep.name)) {
      rep.note = "skipped: requested";
    } else {
      RnnModel next = quantize(res.model, cfg.quant_eps);
      rep.max_deviation = (outputs(next) - y_ref).cwiseAbs().maxCoeff();
      rep.applied = true;
      res.model = std::move(next);
    }
    res.reports.push_back(rep);
  }
  return res;
}

}  // namespace rnnsynth
