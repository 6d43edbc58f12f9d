#include <gtest/gtest.h>

#include <cmath>

#include "rnnsynth/rnn.hpp"
#include "rnnsynth/train.hpp"

namespace rs = rnnsynth;

namespace {

// f(h,x) = x, g(h) = h: reproduces Current_Number exactly.
rs::RnnModel identity_model() {
  rs::RnnModel m;
  m.arch = {1, 1, 1, 1, 1};
  m.num_inputs = 1;
  rs::DenseLayer f;
  f.w.resize(1, 2);
  f.w << 0.0, 1.0;
  f.b = Eigen::VectorXd::Zero(1);
  m.f.layers.push_back(f);
  rs::DenseLayer g;
  g.w = Eigen::MatrixXd::Identity(1, 1);
  g.b = Eigen::VectorXd::Zero(1);
  m.g.layers.push_back(g);
  return m;
}

}  // namespace

TEST(Forward, IdentityModelIsCurrentNumber) {
  const auto& task = rs::find_task("Current_Number");
  const auto ds = rs::generate_dataset(task, 32, 3);
  const auto m = identity_model();
  EXPECT_EQ(rs::accuracy(m, ds), 1.0);
}

TEST(Forward, ZeroModelOutputsBiasComposition) {
  rs::Rng rng(0);
  auto m = rs::make_model({3, 4, 2, 4, 2}, 1, rng);
  for (auto& l : m.f.layers) {
    l.w.setZero();
    l.b.setZero();
  }
  for (auto& l : m.g.layers) l.w.setZero();
  // with zero weights the output is g's bias chain applied to zeros
  const double expect =
      (m.g.layers[1].w * m.g.layers[0].b.cwiseMax(0.0) + m.g.layers[1].b)(0);
  const auto& task = rs::find_task("Sum_All");
  const auto ds = rs::generate_dataset(task, 4, 1);
  const auto batch = rs::make_batch(ds);
  const auto fwd = rs::rnn_forward(m, batch.x);
  for (int t = 0; t < batch.seq_len(); ++t)
    for (int s = 0; s < batch.batch(); ++s)
      EXPECT_NEAR(fwd.outputs(t, s), expect, 1e-12);
}

// Recomputing step i from the stored h_{i-1} must match the trace.
TEST(Forward, TraceStepRecomputation) {
  rs::Rng rng(11);
  const auto m = rs::make_model({3, 5, 2, 4, 2}, 2, rng);
  const auto& task = rs::find_task("Bitwise_Xor");
  const auto ds = rs::generate_dataset(task, 8, 5);
  const auto batch = rs::make_batch(ds);
  const auto fwd = rs::rnn_forward(m, batch.x);
  const int L = batch.seq_len();
  for (int s = 0; s < batch.batch(); ++s) {
    Eigen::VectorXd h = Eigen::VectorXd::Zero(3);
    for (int t = 0; t < L; ++t) {
      Eigen::VectorXd u(3 + 2);
      u.head(3) = h;
      u.tail(2) = batch.x[static_cast<std::size_t>(t)].col(s);
      h = m.f.forward(u);
      const Eigen::VectorXd traced =
          fwd.trace.states.col(static_cast<Eigen::Index>(s) * L + t);
      EXPECT_LT((h - traced).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Forward, TimeCausality) {
  rs::Rng rng(13);
  const auto m = rs::make_model({2, 3, 2, 3, 2}, 1, rng);
  const auto& task = rs::find_task("Sum_All");
  const auto ds = rs::generate_dataset(task, 4, 9);
  auto batch = rs::make_batch(ds);
  const auto base = rs::rnn_forward(m, batch.x, false);
  // editing inputs at steps > i must not change outputs at steps <= i
  const int edit_at = 12;
  for (int t = edit_at; t < batch.seq_len(); ++t)
    batch.x[static_cast<std::size_t>(t)].setConstant(7.0);
  const auto edited = rs::rnn_forward(m, batch.x, false);
  for (int t = 0; t < edit_at; ++t)
    for (int s = 0; s < batch.batch(); ++s)
      EXPECT_EQ(base.outputs(t, s), edited.outputs(t, s));
}

TEST(Loss, Values) {
  EXPECT_DOUBLE_EQ(rs::loss(3.0, 3.0), 0.0);
  EXPECT_NEAR(rs::loss(1.0, 0.0), 0.5 * std::log(2.0), 1e-12);
  rs::Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const double a = rng.uniform(-5, 5), b = rng.uniform(-5, 5);
    EXPECT_DOUBLE_EQ(rs::loss(a, b), rs::loss(b, a));
    EXPECT_GE(rs::loss(a, b), 0.0);
  }
}

TEST(Loss, GradientMatchesCentralDifferences) {
  rs::Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform(-4, 4), y = rng.uniform(-4, 4);
    const double eps = 1e-6;
    const double fd = (rs::loss(x + eps, y) - rs::loss(x - eps, y)) / (2 * eps);
    const double an = rs::loss_grad(x, y);
    EXPECT_NEAR(an, fd, 1e-5 * (1.0 + std::abs(fd)));
  }
}

// Parameter gradients of the full RNN against finite differences on a 3-step
// toy sequence.
TEST(Gradients, FullModelFiniteDifferences) {
  rs::Rng rng(17);
  rs::RnnModel m = rs::make_model({2, 3, 2, 3, 2}, 1, rng);
  rs::SequenceBatch batch;
  batch.x.assign(3, Eigen::MatrixXd(1, 2));
  batch.x[0] << 1.0, -2.0;
  batch.x[1] << 0.5, 3.0;
  batch.x[2] << -1.0, 0.0;
  batch.y.resize(3, 2);
  batch.y << 1, 0, 2, -1, 0, 3;

  std::vector<rs::DenseLayer> gf, gg;
  rs::rnn_loss_and_grads(m, batch, gf, gg);

  const double eps = 1e-6;
  auto check = [&](rs::Mlp& mlp, const std::vector<rs::DenseLayer>& grads) {
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
      for (int i = 0; i < mlp.layers[l].w.rows(); ++i)
        for (int j = 0; j < mlp.layers[l].w.cols(); ++j) {
          const double save = mlp.layers[l].w(i, j);
          mlp.layers[l].w(i, j) = save + eps;
          const double lp = rs::batch_loss(
              rs::rnn_forward(m, batch.x, false).outputs, batch.y);
          mlp.layers[l].w(i, j) = save - eps;
          const double lm = rs::batch_loss(
              rs::rnn_forward(m, batch.x, false).outputs, batch.y);
          mlp.layers[l].w(i, j) = save;
          const double fd = (lp - lm) / (2 * eps);
          EXPECT_NEAR(grads[l].w(i, j), fd, 1e-4 * (1.0 + std::abs(fd)));
        }
      for (int i = 0; i < mlp.layers[l].b.size(); ++i) {
        const double save = mlp.layers[l].b(i);
        mlp.layers[l].b(i) = save + eps;
        const double lp =
            rs::batch_loss(rs::rnn_forward(m, batch.x, false).outputs, batch.y);
        mlp.layers[l].b(i) = save - eps;
        const double lm =
            rs::batch_loss(rs::rnn_forward(m, batch.x, false).outputs, batch.y);
        mlp.layers[l].b(i) = save;
        const double fd = (lp - lm) / (2 * eps);
        EXPECT_NEAR(grads[l].b(i), fd, 1e-4 * (1.0 + std::abs(fd)));
      }
    }
  };
  check(m.f, gf);
  check(m.g, gg);
}

TEST(Accuracy, ZeroModelOnXorIsNearHalf) {
  rs::RnnModel m;
  m.arch = {1, 1, 1, 1, 1};
  m.num_inputs = 2;
  rs::DenseLayer f;
  f.w = Eigen::MatrixXd::Zero(1, 3);
  f.b = Eigen::VectorXd::Zero(1);
  m.f.layers.push_back(f);
  rs::DenseLayer g;
  g.w = Eigen::MatrixXd::Zero(1, 1);
  g.b = Eigen::VectorXd::Zero(1);
  m.g.layers.push_back(g);
  const auto& task = rs::find_task("Bitwise_Xor");
  const auto ds = rs::generate_dataset(task, 65536 / 10, 77);
  EXPECT_NEAR(rs::accuracy(m, ds), 0.5, 0.02);
}

TEST(Accuracy, SelfConsistency) {
  rs::Rng rng(23);
  const auto m = rs::make_model({2, 3, 2, 3, 2}, 1, rng);
  const auto& task = rs::find_task("Sum_All");
  auto ds = rs::generate_dataset(task, 64, 4);
  const auto batch = rs::make_batch(ds);
  const auto fwd = rs::rnn_forward(m, batch.x, false);
  for (std::size_t s = 0; s < ds.inputs.size(); ++s)
    for (int t = 0; t < task.seq_len; ++t)
      ds.targets[s][static_cast<std::size_t>(t)] =
          std::llround(fwd.outputs(t, static_cast<int>(s)));
  EXPECT_EQ(rs::accuracy(m, ds), 1.0);
}

TEST(ModelIo, RoundTrip) {
  rs::Rng rng(31);
  const auto m = rs::make_model({3, 4, 2, 5, 2}, 2, rng);
  const auto path = std::filesystem::temp_directory_path() / "rnnsynth_model.json";
  rs::save_model(m, path.string());
  const auto back = rs::load_model(path.string());
  EXPECT_EQ(back.arch, m.arch);
  EXPECT_EQ(back.num_inputs, m.num_inputs);
  for (std::size_t l = 0; l < m.f.layers.size(); ++l)
    EXPECT_EQ(back.f.layers[l].w, m.f.layers[l].w);
  std::filesystem::remove(path);
}
