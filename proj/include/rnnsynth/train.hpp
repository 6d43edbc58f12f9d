#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "rnnsynth/rnn.hpp"
#include "rnnsynth/tasks.hpp"

namespace rnnsynth {

struct TrainConfig {
  int steps = 10000;
  int batch = 4096;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double l1 = 0.0;  // optional L1 weight penalty
  std::uint64_t seed = 0;
  int eval_every = 500;   // periodic test-accuracy checks
  int eval_count = 65536; // the official test batch
  // cheap pre-check gating the full-batch evaluation; a perfect full batch
  // implies a perfect subset, so gating never misses a success
  int eval_quick = 8192;
  bool early_stop = true;  // stop once the full test batch scores 1.0
};

struct TrainResult {
  RnnModel model;
  double train_loss = 0.0;  // mean loss over the final 50 training batches
  double test_loss = 0.0;
  double test_accuracy = 0.0;
  int steps_run = 0;
  bool diverged = false;
  std::vector<double> loss_history;  // one entry per step
};

namespace detail {

struct MlpCache {
  // act[0] = input, act[l+1] = output of layer l (post-ReLU except last)
  std::vector<Eigen::MatrixXd> act;
};

inline Eigen::MatrixXd mlp_forward_cached(const Mlp& m, const Eigen::MatrixXd& in,
                                          MlpCache& cache) {
  cache.act.assign(1, in);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    Eigen::MatrixXd a = (m.layers[l].w * cache.act.back()).colwise() + m.layers[l].b;
    if (l + 1 < m.layers.size()) a = a.cwiseMax(0.0);
    cache.act.push_back(std::move(a));
  }
  return cache.act.back();
}

// Accumulates parameter gradients into grads and returns dLoss/dInput.
inline Eigen::MatrixXd mlp_backward(const Mlp& m, const MlpCache& cache,
                                    Eigen::MatrixXd d_out,
                                    std::vector<DenseLayer>& grads) {
  for (auto l = static_cast<int>(m.layers.size()) - 1; l >= 0; --l) {
    const std::size_t li = static_cast<std::size_t>(l);
    if (li + 1 < m.layers.size()) {
      // ReLU mask: active where the cached post-activation is positive
      d_out = d_out.cwiseProduct(
          (cache.act[li + 1].array() > 0.0).cast<double>().matrix());
    }
    grads[li].w.noalias() += d_out * cache.act[li].transpose();
    grads[li].b.noalias() += d_out.rowwise().sum();
    if (l > 0)
      d_out = m.layers[li].w.transpose() * d_out;
    else
      return m.layers[0].w.transpose() * d_out;
  }
  return {};
}

struct AdamState {
  std::vector<DenseLayer> m, v;
  long long t = 0;

  static std::vector<DenseLayer> zeros_like(const Mlp& mlp) {
    std::vector<DenseLayer> out;
    for (const auto& l : mlp.layers)
      out.push_back({Eigen::MatrixXd::Zero(l.w.rows(), l.w.cols()),
                     Eigen::VectorXd::Zero(l.b.size())});
    return out;
  }
};

inline void adam_update(Mlp& mlp, const std::vector<DenseLayer>& grads,
                        AdamState& st, const TrainConfig& cfg) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    auto step = [&](Eigen::MatrixXd& p, Eigen::MatrixXd& m, Eigen::MatrixXd& v,
                    const Eigen::MatrixXd& g) {
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
      v = cfg.beta2 * v.array().matrix() +
          (1.0 - cfg.beta2) * g.array().square().matrix();
      const Eigen::ArrayXXd mhat = m.array() / bc1;
      const Eigen::ArrayXXd vhat = v.array() / bc2;
      p.array() -= cfg.lr * mhat / (vhat.sqrt() + cfg.adam_eps);
    };
    step(mlp.layers[l].w, st.m[l].w, st.v[l].w, grads[l].w);
    Eigen::MatrixXd bm = st.m[l].b, bv = st.v[l].b, bg = grads[l].b,
                    bp = mlp.layers[l].b;
    step(bp, bm, bv, bg);
    mlp.layers[l].b = bp;
    st.m[l].b = bm;
    st.v[l].b = bv;
  }
}

}  // namespace detail

// Full-model gradients for one batch (exposed for finite-difference checks).
// Returns the batch loss; grads_f/grads_g receive dLoss/dParam.
inline double rnn_loss_and_grads(const RnnModel& model, const SequenceBatch& batch,
                                 std::vector<DenseLayer>& grads_f,
                                 std::vector<DenseLayer>& grads_g,
                                 double l1 = 0.0) {
  const int n = model.arch.n;
  const int len = batch.seq_len();
  const int bs = batch.batch();
  grads_f = detail::AdamState::zeros_like(model.f);
  grads_g = detail::AdamState::zeros_like(model.g);

  std::vector<detail::MlpCache> fc(static_cast<std::size_t>(len)),
      gc(static_cast<std::size_t>(len));
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, bs);
  Eigen::MatrixXd pred(len, bs);
  Eigen::MatrixXd u(n + model.num_inputs, bs);
  for (int t = 0; t < len; ++t) {
    u.topRows(n) = h;
    u.bottomRows(model.num_inputs) = batch.x[static_cast<std::size_t>(t)];
    h = detail::mlp_forward_cached(model.f, u, fc[static_cast<std::size_t>(t)]);
    pred.row(t) =
        detail::mlp_forward_cached(model.g, h, gc[static_cast<std::size_t>(t)]);
  }
  const double L = batch_loss(pred, batch.y);

  const double scale = 1.0 / (static_cast<double>(len) * static_cast<double>(bs));
  Eigen::MatrixXd dh_next = Eigen::MatrixXd::Zero(n, bs);
  for (int t = len - 1; t >= 0; --t) {
    Eigen::MatrixXd dy(1, bs);
    for (int s = 0; s < bs; ++s)
      dy(0, s) = loss_grad(pred(t, s), batch.y(t, s)) * scale;
    Eigen::MatrixXd dh =
        detail::mlp_backward(model.g, gc[static_cast<std::size_t>(t)], dy, grads_g) +
        dh_next;
    const Eigen::MatrixXd du =
        detail::mlp_backward(model.f, fc[static_cast<std::size_t>(t)], dh, grads_f);
    dh_next = du.topRows(n);
  }
  if (l1 > 0.0) {
    for (std::size_t l = 0; l < model.f.layers.size(); ++l)
      grads_f[l].w.array() += l1 * model.f.layers[l].w.array().sign();
    for (std::size_t l = 0; l < model.g.layers.size(); ++l)
      grads_g[l].w.array() += l1 * model.g.layers[l].w.array().sign();
  }
  return L;
}

inline SequenceBatch sample_batch(const TaskSpec& task, int batch, Rng& rng) {
  SequenceBatch b;
  b.x.assign(static_cast<std::size_t>(task.seq_len),
             Eigen::MatrixXd(task.num_inputs, batch));
  b.y.resize(task.seq_len, batch);
  std::vector<std::vector<long long>> seq(static_cast<std::size_t>(task.num_inputs));
  for (auto& s : seq) s.resize(static_cast<std::size_t>(task.seq_len));
  for (int s = 0; s < batch; ++s) {
    for (int k = 0; k < task.num_inputs; ++k) {
      const auto& r = task.element_range[static_cast<std::size_t>(k)];
      for (int t = 0; t < task.seq_len; ++t) {
        const long long v = rng.uniform_int(r.lo, r.hi);
        seq[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)] = v;
        b.x[static_cast<std::size_t>(t)](k, s) = static_cast<double>(v);
      }
    }
    const auto y = oracle_eval(task, seq);
    for (int t = 0; t < task.seq_len; ++t)
      b.y(t, s) = static_cast<double>(y[static_cast<std::size_t>(t)]);
  }
  return b;
}

namespace detail {

struct EvalChunks {
  std::vector<SequenceBatch> chunks;

  static EvalChunks build(const Dataset& ds, int chunk = 8192) {
    EvalChunks out;
    const auto total = static_cast<int>(ds.inputs.size());
    for (int first = 0; first < total; first += chunk)
      out.chunks.push_back(make_batch(ds, first, std::min(chunk, total - first)));
    return out;
  }

  // accuracy over the first `limit` sequences (limit < 0: all), with early
  // exit once a mismatch is found and perfection is impossible
  double accuracy(const RnnModel& model, int limit = -1) const {
    long long correct = 0, elements = 0;
    int remaining = limit;
    for (const auto& b : chunks) {
      if (remaining == 0) break;
      const int take =
          remaining < 0 ? b.batch() : std::min(remaining, b.batch());
      const auto fwd = rnn_forward(model, b.x, false);
      for (int s = 0; s < take; ++s)
        for (int t = 0; t < b.seq_len(); ++t) {
          if (std::llround(fwd.outputs(t, s)) ==
              static_cast<long long>(b.y(t, s)))
            ++correct;
          ++elements;
        }
      if (remaining > 0) remaining -= take;
    }
    return elements == 0
               ? 0.0
               : static_cast<double>(correct) / static_cast<double>(elements);
  }

  double loss(const RnnModel& model) const {
    double sum = 0.0;
    long long elements = 0;
    for (const auto& b : chunks) {
      const auto fwd = rnn_forward(model, b.x, false);
      sum += batch_loss(fwd.outputs, b.y) * static_cast<double>(b.seq_len()) *
             static_cast<double>(b.batch());
      elements += static_cast<long long>(b.seq_len()) * b.batch();
    }
    return elements == 0 ? 0.0 : sum / static_cast<double>(elements);
  }
};

}  // namespace detail

inline TrainResult train(const Arch& arch, const TaskSpec& task,
                         const TrainConfig& cfg) {
  Rng init_rng(derive_seed({0x1417ull, cfg.seed, 1}));
  Rng batch_rng(derive_seed({0xba7c4ull, cfg.seed, 2}));

  TrainResult res;
  res.model = make_model(arch, task.num_inputs, init_rng);
  const Dataset eval_set = generate_dataset(
      task, cfg.eval_count, derive_seed({0xe5a1ull, cfg.seed}));
  const detail::EvalChunks eval = detail::EvalChunks::build(eval_set);
  const int quick = std::min(cfg.eval_quick, cfg.eval_count);

  detail::AdamState st_f, st_g;
  st_f.m = detail::AdamState::zeros_like(res.model.f);
  st_f.v = detail::AdamState::zeros_like(res.model.f);
  st_g.m = detail::AdamState::zeros_like(res.model.g);
  st_g.v = detail::AdamState::zeros_like(res.model.g);

  std::vector<DenseLayer> gf, gg;
  res.loss_history.reserve(static_cast<std::size_t>(cfg.steps));
  for (int step = 1; step <= cfg.steps; ++step) {
    const SequenceBatch batch = sample_batch(task, cfg.batch, batch_rng);
    const double L = rnn_loss_and_grads(res.model, batch, gf, gg, cfg.l1);
    res.loss_history.push_back(L);
    if (!std::isfinite(L)) {
      res.diverged = true;
      res.steps_run = step;
      res.train_loss = L;
      return res;
    }
    ++st_f.t;
    ++st_g.t;
    detail::adam_update(res.model.f, gf, st_f, cfg);
    detail::adam_update(res.model.g, gg, st_g, cfg);
    res.steps_run = step;
    if (cfg.eval_every > 0 && step % cfg.eval_every == 0 && cfg.early_stop) {
      if (eval.accuracy(res.model, quick) == 1.0) {
        res.test_accuracy = eval.accuracy(res.model);
        if (res.test_accuracy == 1.0) break;
      }
    }
  }

  const auto hist = static_cast<int>(res.loss_history.size());
  const int tail = std::min(50, hist);
  double s = 0.0;
  for (int i = hist - tail; i < hist; ++i)
    s += res.loss_history[static_cast<std::size_t>(i)];
  res.train_loss = tail > 0 ? s / tail : 0.0;
  if (res.test_accuracy != 1.0) res.test_accuracy = eval.accuracy(res.model);
  res.test_loss = eval.loss(res.model);
  return res;
}

}  // namespace rnnsynth
