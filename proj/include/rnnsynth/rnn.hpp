#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rnnsynth/rng.hpp"
#include "rnnsynth/tasks.hpp"

namespace rnnsynth {

// Architecture tuple (n, w_f, d_f, w_g, d_g): hidden dimension, width/depth of
// the update MLP f, width/depth of the readout MLP g.
struct Arch {
  int n = 1;
  int w_f = 1;
  int d_f = 1;
  int w_g = 1;
  int d_g = 1;

  bool operator==(const Arch&) const = default;
  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(w_f) + "," +
           std::to_string(d_f) + "," + std::to_string(w_g) + "," +
           std::to_string(d_g) + ")";
  }
};

struct DenseLayer {
  Eigen::MatrixXd w;
  Eigen::VectorXd b;
};

// MLP with ReLU on every layer except the last.
struct Mlp {
  std::vector<DenseLayer> layers;

  Eigen::MatrixXd forward(const Eigen::MatrixXd& in) const {
    Eigen::MatrixXd a = in;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      a = (layers[l].w * a).colwise() + layers[l].b;
      if (l + 1 < layers.size()) a = a.cwiseMax(0.0);
    }
    return a;
  }
};

struct RnnModel {
  Arch arch;
  int num_inputs = 1;
  Mlp f;  // (n + num_inputs) -> n
  Mlp g;  // n -> 1

  int hidden_dim() const { return arch.n; }

  // Affine-f accessors (valid when d_f == 1).
  Eigen::MatrixXd w_hh() const {
    return f.layers.front().w.leftCols(arch.n);
  }
  Eigen::MatrixXd w_in() const {
    return f.layers.front().w.rightCols(num_inputs);
  }
};

class RnnError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// hidden vectors for every step of every sequence; column s*seq_len + t holds
// h_{t+1} of sequence s
struct HiddenTrace {
  Eigen::MatrixXd states;
  int count = 0;
  int seq_len = 0;
};

struct ForwardResult {
  Eigen::MatrixXd outputs;  // seq_len x batch
  HiddenTrace trace;
};

// Inputs packed step-major for batched evaluation: x[t] is num_inputs x batch.
struct SequenceBatch {
  std::vector<Eigen::MatrixXd> x;
  Eigen::MatrixXd y;  // seq_len x batch, targets as reals
  int batch() const { return x.empty() ? 0 : static_cast<int>(x[0].cols()); }
  int seq_len() const { return static_cast<int>(x.size()); }
};

inline SequenceBatch make_batch(const Dataset& ds, int first = 0, int count = -1) {
  SequenceBatch b;
  if (ds.inputs.empty()) return b;
  const int total = static_cast<int>(ds.inputs.size());
  if (count < 0) count = total - first;
  const int num_inputs = static_cast<int>(ds.inputs[0].size());
  const int len = static_cast<int>(ds.inputs[0][0].size());
  b.x.assign(static_cast<std::size_t>(len),
             Eigen::MatrixXd(num_inputs, count));
  b.y.resize(len, count);
  for (int s = 0; s < count; ++s) {
    const auto& seq = ds.inputs[static_cast<std::size_t>(first + s)];
    for (int t = 0; t < len; ++t) {
      for (int k = 0; k < num_inputs; ++k)
        b.x[static_cast<std::size_t>(t)](k, s) =
            static_cast<double>(seq[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)]);
      b.y(t, s) = static_cast<double>(
          ds.targets[static_cast<std::size_t>(first + s)][static_cast<std::size_t>(t)]);
    }
  }
  return b;
}

inline ForwardResult rnn_forward(const RnnModel& model,
                                 const std::vector<Eigen::MatrixXd>& x,
                                 bool want_trace = true) {
  const int n = model.arch.n;
  if (x.empty()) return {};
  const auto batch = static_cast<int>(x[0].cols());
  const auto len = static_cast<int>(x.size());
  if (static_cast<int>(x[0].rows()) != model.num_inputs)
    throw RnnError("rnn_forward: input arity mismatch");

  ForwardResult res;
  res.outputs.resize(len, batch);
  if (want_trace) {
    res.trace.states.resize(n, static_cast<Eigen::Index>(len) * batch);
    res.trace.count = batch;
    res.trace.seq_len = len;
  }

  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, batch);
  Eigen::MatrixXd u(n + model.num_inputs, batch);
  for (int t = 0; t < len; ++t) {
    u.topRows(n) = h;
    u.bottomRows(model.num_inputs) = x[static_cast<std::size_t>(t)];
    h = model.f.forward(u);
    res.outputs.row(t) = model.g.forward(h);
    if (want_trace)
      for (int s = 0; s < batch; ++s)
        res.trace.states.col(static_cast<Eigen::Index>(s) * len + t) = h.col(s);
  }
  return res;
}

// l(x, y) = 1/2 log(1 + (x - y)^2); batch losses are element means.
inline double loss(double pred, double target) {
  const double d = pred - target;
  return 0.5 * std::log1p(d * d);
}

inline double loss_grad(double pred, double target) {
  const double d = pred - target;
  return d / (1.0 + d * d);
}

inline double batch_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  const Eigen::ArrayXXd d = (pred - target).array();
  return 0.5 * (1.0 + d * d).log().mean();
}

// Fraction of elements whose nearest-integer rounding matches the target.
inline double accuracy(const RnnModel& model, const Dataset& ds,
                       int chunk = 8192) {
  const auto total = static_cast<int>(ds.inputs.size());
  long long correct = 0, elements = 0;
  for (int first = 0; first < total; first += chunk) {
    const int count = std::min(chunk, total - first);
    SequenceBatch b = make_batch(ds, first, count);
    const auto fwd = rnn_forward(model, b.x, /*want_trace=*/false);
    for (int t = 0; t < b.seq_len(); ++t)
      for (int s = 0; s < count; ++s) {
        if (std::llround(fwd.outputs(t, s)) ==
            static_cast<long long>(b.y(t, s)))
          ++correct;
        ++elements;
      }
  }
  return elements == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(elements);
}

inline double dataset_loss(const RnnModel& model, const Dataset& ds,
                           int chunk = 8192) {
  const auto total = static_cast<int>(ds.inputs.size());
  double sum = 0.0;
  long long elements = 0;
  for (int first = 0; first < total; first += chunk) {
    const int count = std::min(chunk, total - first);
    SequenceBatch b = make_batch(ds, first, count);
    const auto fwd = rnn_forward(model, b.x, false);
    sum += batch_loss(fwd.outputs, b.y) * static_cast<double>(b.seq_len()) *
           static_cast<double>(count);
    elements += static_cast<long long>(b.seq_len()) * count;
  }
  return elements == 0 ? 0.0 : sum / static_cast<double>(elements);
}

inline RnnModel make_model(const Arch& arch, int num_inputs, Rng& rng) {
  auto init_layer = [&](int rows, int cols) {
    DenseLayer layer;
    layer.w.resize(rows, cols);
    layer.b.resize(rows);
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) layer.w(i, j) = rng.uniform(-bound, bound);
    for (int i = 0; i < rows; ++i) layer.b(i) = rng.uniform(-bound, bound);
    return layer;
  };
  RnnModel m;
  m.arch = arch;
  m.num_inputs = num_inputs;
  int in = arch.n + num_inputs;
  for (int l = 0; l < arch.d_f; ++l) {
    const int out = l + 1 == arch.d_f ? arch.n : arch.w_f;
    m.f.layers.push_back(init_layer(out, in));
    in = out;
  }
  in = arch.n;
  for (int l = 0; l < arch.d_g; ++l) {
    const int out = l + 1 == arch.d_g ? 1 : arch.w_g;
    m.g.layers.push_back(init_layer(out, in));
    in = out;
  }
  return m;
}

// ---- persistence ------------------------------------------------------------

namespace detail {

inline nlohmann::json mlp_to_json(const Mlp& m) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : m.layers) {
    std::vector<double> w(static_cast<std::size_t>(l.w.size()));
    for (int i = 0; i < l.w.rows(); ++i)
      for (int j = 0; j < l.w.cols(); ++j)
        w[static_cast<std::size_t>(i) * static_cast<std::size_t>(l.w.cols()) +
          static_cast<std::size_t>(j)] = l.w(i, j);  // row-major
    std::vector<double> b(l.b.data(), l.b.data() + l.b.size());
    layers.push_back({{"rows", l.w.rows()}, {"cols", l.w.cols()}, {"w", w}, {"b", b}});
  }
  return layers;
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
  Mlp m;
  for (const auto& lj : j) {
    DenseLayer l;
    const auto rows = lj.at("rows").get<Eigen::Index>();
    const auto cols = lj.at("cols").get<Eigen::Index>();
    const auto w = lj.at("w").get<std::vector<double>>();
    const auto b = lj.at("b").get<std::vector<double>>();
    l.w.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j2 = 0; j2 < cols; ++j2)
        l.w(i, j2) = w[static_cast<std::size_t>(i * cols + j2)];
    l.b = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    m.layers.push_back(std::move(l));
  }
  return m;
}

}  // namespace detail

inline void save_model(const RnnModel& m, const std::string& path) {
  nlohmann::json j = {
      {"kind", "rnn-model"},
      {"arch", {m.arch.n, m.arch.w_f, m.arch.d_f, m.arch.w_g, m.arch.d_g}},
      {"num_inputs", m.num_inputs},
      {"f", detail::mlp_to_json(m.f)},
      {"g", detail::mlp_to_json(m.g)}};
  std::ofstream out(path);
  if (!out) throw RnnError("save_model: cannot open " + path);
  out << j.dump(2) << "\n";
}

inline RnnModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RnnError("load_model: cannot open " + path);
  nlohmann::json j;
  in >> j;
  RnnModel m;
  const auto a = j.at("arch").get<std::vector<int>>();
  m.arch = {a[0], a[1], a[2], a[3], a[4]};
  m.num_inputs = j.at("num_inputs").get<int>();
  m.f = detail::mlp_from_json(j.at("f"));
  m.g = detail::mlp_from_json(j.at("g"));
  return m;
}

}  // namespace rnnsynth
